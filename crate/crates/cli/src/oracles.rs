//! Seeded closed-form oracle suites for the `oracles` subcommand.

use affinv::poly::{graph_embedding, MultiIndex};
use affinv::sl::tensor_density;
use affinv::{affine_density, bilinear_density_exact, detnorm_check, OptimizerConfig, Polynomial, PolynomialMap, Result, Tensor};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct SuiteOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub worst_gap: f64,
    pub tolerance: f64,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.worst_gap <= self.tolerance
    }
}

const CASES: usize = 20;

fn stream(seed: u64, suite: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(suite);
    r
}

fn rotation(d: usize, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |_, _| r.random_range(-1.0..1.0)).qr().q()
}

fn bilinear(seed: u64, cfg: &OptimizerConfig) -> Result<SuiteOutcome> {
    let mut r = stream(seed, 1);
    let mut worst = 0.0f64;
    for i in 0..CASES {
        let d = 2 + i % 2;
        let q = rotation(d, &mut r);
        let diag: Vec<f64> = (0..d).map(|_| r.random_range(0.3..2.0) * if r.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let a = &q * DMatrix::from_diagonal(&DVector::from_vec(diag)) * q.transpose();
        let a = (&a + a.transpose()) * 0.5;
        let exact = bilinear_density_exact(&a)?;
        let got = tensor_density(&Tensor::bilinear(&a)?, cfg)?.density;
        worst = worst.max((got - exact).abs() / exact);
    }
    Ok(SuiteOutcome { name: "bilinear", cases: CASES, worst_gap: worst, tolerance: 1e-6 })
}

fn detnorm(seed: u64, cfg: &OptimizerConfig) -> Result<SuiteOutcome> {
    let mut r = stream(seed, 2);
    let mut worst = 0.0f64;
    for i in 0..CASES {
        let n = 2 + i % 2;
        let m = r.random_range(n..=6);
        let a = DMatrix::from_fn(n, m, |_, _| r.random_range(-1.0..1.0));
        let rep = detnorm_check(&a, cfg)?;
        worst = worst.max(rep.relative_gap).max(rep.infimum_gap);
    }
    Ok(SuiteOutcome { name: "detnorm", cases: CASES, worst_gap: worst, tolerance: 1e-6 })
}

fn curve(seed: u64, cfg: &OptimizerConfig) -> Result<SuiteOutcome> {
    let mut r = stream(seed, 3);
    let mut worst = 0.0f64;
    for i in 0..CASES {
        let n = 2 + i % 2;
        let comps: Vec<Polynomial> = (0..n)
            .map(|_| Polynomial::from_terms(1, (0..=n + 2).map(|e| (MultiIndex::new(vec![e as u32]), r.random_range(-1.0..1.0)))))
            .collect();
        let f = PolynomialMap::new(1, comps)?;
        let t: f64 = r.random_range(-1.0..1.0);
        let m = DMatrix::from_fn(n, n, |row, col| {
            f.components()[row].derivative(&MultiIndex::new(vec![col as u32 + 1])).evaluate(&[t])
        });
        let exact = m.determinant().abs().powf(2.0 / (n * (n + 1)) as f64);
        let got = affine_density(&f, &[t], cfg)?.density;
        worst = worst.max((got - exact).abs() / exact);
    }
    Ok(SuiteOutcome { name: "curve", cases: CASES, worst_gap: worst, tolerance: 1e-12 })
}

fn hypersurface(seed: u64, cfg: &OptimizerConfig) -> Result<SuiteOutcome> {
    let mut r = stream(seed, 4);
    let mut hessians: Vec<[f64; 3]> = vec![[1.0, 0.0, 1.0], [1.0, 0.0, -1.0], [0.0, 1.0, 0.0]];
    while hessians.len() < 8 {
        hessians.push([r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)]);
    }
    let mut worst = 0.0f64;
    let mut cases = 0;
    for [a, b, c] in &hessians {
        let det = a * c - b * b;
        if det.abs() < 0.05 {
            continue;
        }
        cases += 1;
        let phi = Polynomial::from_terms(
            2,
            [
                (MultiIndex::new(vec![2, 0]), 0.5 * a),
                (MultiIndex::new(vec![1, 1]), *b),
                (MultiIndex::new(vec![0, 2]), 0.5 * c),
            ],
        );
        let f = graph_embedding(&phi);
        let exact = 2f64.sqrt() * det.abs().powf(0.25);
        let got = affine_density(&f, &[0.0, 0.0], cfg)?.density;
        worst = worst.max((got - exact).abs());
    }
    Ok(SuiteOutcome { name: "hypersurface", cases, worst_gap: worst, tolerance: 1e-4 })
}

pub fn run_all(seed: u64, cfg: &OptimizerConfig) -> Result<Vec<SuiteOutcome>> {
    Ok(vec![bilinear(seed, cfg)?, detnorm(seed, cfg)?, curve(seed, cfg)?, hypersurface(seed, cfg)?])
}
