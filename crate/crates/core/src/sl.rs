//! Minimization of orbit norms over `SL(d, ℝ)` and the affine density.
//!
//! Descent runs on `log F` in the traceless Lie algebra: at `M` the step is
//! `M ← exp(−η D) M` with `D` the trace-free part of the gradient divided by
//! `F(M)`. Working on the logarithm makes the iteration scale-free, which
//! also lets it follow orbits that decay to zero.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::index::index_set;
use crate::linalg::{complete_basis, expm, is_symmetric, rank, traceless};
use crate::poly::{MultiIndex, PolynomialMap};
use crate::tensor::{assemble_tensor, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iterations: usize,
    pub step_shrink: f64,
    pub gradient_tolerance: f64,
    pub stall_window: usize,
    pub nullcone_threshold: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 16,
            max_iterations: 2000,
            step_shrink: 0.5,
            gradient_tolerance: 1e-12,
            stall_window: 50,
            nullcone_threshold: 1e-12,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidDimension(format!("optimizer config: {what}")));
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0) {
            return bad("step-shrink must lie in (0, 1)");
        }
        if !(self.gradient_tolerance > 0.0) || !(self.nullcone_threshold > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.stall_window == 0 {
            return bad("stall-window must be at least 1");
        }
        Ok(())
    }
}

/// A smooth nonnegative function on `d × d` matrices, restricted to the
/// unimodular ones by the optimizer.
pub trait SlObjective: Sync {
    fn dim(&self) -> usize;

    fn value(&self, m: &DMatrix<f64>) -> f64;

    /// Value and the gradient `G` with `d/dε F(exp(εX) M)|₀ = ⟨G, X⟩`.
    fn value_and_gradient(&self, m: &DMatrix<f64>) -> (f64, DMatrix<f64>);
}

/// `‖T·M‖²` for a `k`-linear form `T`.
impl SlObjective for Tensor {
    fn dim(&self) -> usize {
        Tensor::dim(self)
    }

    fn value(&self, m: &DMatrix<f64>) -> f64 {
        self.transform(m).frobenius_sq()
    }

    fn value_and_gradient(&self, m: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        let s = self.transform(m);
        let mut g = DMatrix::zeros(self.dim(), self.dim());
        for q in 0..self.order() {
            g += s.mode_gram(q);
        }
        (s.frobenius_sq(), g * 2.0)
    }
}

/// `‖M A‖²_F` for a `d × m` matrix `A`.
#[derive(Debug, Clone)]
pub struct FrobeniusObjective {
    pub a: DMatrix<f64>,
}

impl SlObjective for FrobeniusObjective {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn value(&self, m: &DMatrix<f64>) -> f64 {
        (m * &self.a).norm_squared()
    }

    fn value_and_gradient(&self, m: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        let b = m * &self.a;
        let g = &b * b.transpose() * 2.0;
        (b.norm_squared(), g)
    }
}

/// Arbitrary closure objective; the gradient is taken by central
/// differences along `exp(±h E_ij)`.
pub struct FnObjective<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&DMatrix<f64>) -> f64 + Sync> SlObjective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, m: &DMatrix<f64>) -> f64 {
        (self.f)(m)
    }

    fn value_and_gradient(&self, m: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        let d = self.dim;
        let h = 1e-5;
        let mut g = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let mut e = DMatrix::zeros(d, d);
                e[(i, j)] = h;
                let plus = (self.f)(&(expm(&e) * m));
                let minus = (self.f)(&(expm(&-e) * m));
                g[(i, j)] = (plus - minus) / (2.0 * h);
            }
        }
        ((self.f)(m), g)
    }
}

/// Outcome of one restart.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartOutcome {
    pub start_value: f64,
    pub value: f64,
    pub minimizer: DMatrix<f64>,
    pub iterations: usize,
}

/// Result of [`minimize_over_sl`].
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub value: f64,
    pub minimizer: DMatrix<f64>,
    pub value_at_identity: f64,
    pub nullcone_suspected: bool,
    /// Iterations of the restart that produced the minimum.
    pub iterations: usize,
    pub restarts: Vec<RestartOutcome>,
}

/// Estimate `inf_{M ∈ SL(d)} F(M)` by multi-start Lie-algebra descent.
pub fn minimize_over_sl<O: SlObjective + ?Sized>(objective: &O, cfg: &OptimizerConfig) -> Result<Minimum> {
    cfg.validate()?;
    let d = objective.dim();
    let id = DMatrix::identity(d, d);
    let f_id = objective.value(&id);
    if !f_id.is_finite() || f_id < 0.0 {
        return Err(Error::NonFiniteObjective(f_id));
    }
    let threshold = cfg.nullcone_threshold * f_id;
    if d == 1 || f_id == 0.0 {
        let outcome = RestartOutcome { start_value: f_id, value: f_id, minimizer: id.clone(), iterations: 0 };
        return Ok(Minimum {
            value: f_id,
            minimizer: id,
            value_at_identity: f_id,
            nullcone_suspected: f_id <= threshold,
            iterations: 0,
            restarts: vec![outcome],
        });
    }

    let outcomes: Vec<Result<RestartOutcome>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let start = if r == 0 { id.clone() } else { random_start(d, cfg.seed, r as u64) };
            descend(objective, start, cfg, threshold)
        })
        .collect();
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let best = outcomes
        .iter()
        .enumerate()
        .fold(0, |b, (i, o)| if o.value < outcomes[b].value { i } else { b });
    Ok(Minimum {
        value: outcomes[best].value,
        minimizer: outcomes[best].minimizer.clone(),
        value_at_identity: f_id,
        nullcone_suspected: outcomes[best].value <= threshold,
        iterations: outcomes[best].iterations,
        restarts: outcomes,
    })
}

/// `exp(S)` with `S` traceless and entries uniform in `[−1, 1]`, from the
/// restart's own substream of the seeded generator.
pub fn random_start(d: usize, seed: u64, restart: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart);
    let s = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..=1.0));
    expm(&traceless(&s))
}

fn renormalize(m: &mut DMatrix<f64>) {
    let d = m.nrows() as f64;
    let det = m.determinant();
    if det > 0.0 && det.is_finite() {
        *m /= det.powf(1.0 / d);
    }
}

fn descend<O: SlObjective + ?Sized>(
    objective: &O,
    start: DMatrix<f64>,
    cfg: &OptimizerConfig,
    threshold: f64,
) -> Result<RestartOutcome> {
    const ARMIJO: f64 = 1e-4;
    let mut m = start;
    let (mut f, mut g) = objective.value_and_gradient(&m);
    if !f.is_finite() {
        return Err(Error::NonFiniteObjective(f));
    }
    let start_value = f;
    let mut history = vec![f];
    let mut eta = 0.1;
    let mut iterations = 0;
    while iterations < cfg.max_iterations && f > threshold {
        let dir = traceless(&g) / f;
        let grad_sq = dir.norm_squared();
        if grad_sq < cfg.gradient_tolerance {
            break;
        }
        let dir = if is_symmetric(&dir, 1e-14) { (&dir + dir.transpose()) * 0.5 } else { dir };
        let mut accepted = false;
        while eta > 1e-18 {
            let mut trial = expm(&(&dir * -eta)) * &m;
            if (iterations + 1) % 50 == 0 {
                renormalize(&mut trial);
            }
            let (ft, gt) = objective.value_and_gradient(&trial);
            if ft.is_finite() && (ft <= threshold || ft.ln() <= f.ln() - ARMIJO * eta * grad_sq) {
                m = trial;
                f = ft;
                g = gt;
                accepted = true;
                break;
            }
            eta *= cfg.step_shrink;
        }
        if !accepted {
            break;
        }
        iterations += 1;
        eta *= 2.0;
        history.push(f);
        if history.len() > cfg.stall_window {
            let old = history[history.len() - 1 - cfg.stall_window];
            if (old - f) / old < cfg.gradient_tolerance {
                break;
            }
        }
    }
    Ok(RestartOutcome { start_value, value: f, minimizer: m, iterations })
}

/// Infimum, minimizer and density of a tensor objective.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityResult {
    pub infimum: f64,
    pub minimizer: DMatrix<f64>,
    /// `infimum^{exponent}` with exponent `d / (2k)`.
    pub density: f64,
    pub exponent: f64,
    pub nullcone_suspected: bool,
    pub iterations: usize,
    /// Objective along the one-parameter diagonal subgroup, when probed.
    pub probe: Option<Vec<f64>>,
}

/// Density `inf_{SL} ‖T·M‖²^{d/(2k)}` of a `k`-linear form.
pub fn tensor_density(t: &Tensor, cfg: &OptimizerConfig) -> Result<DensityResult> {
    let min = minimize_over_sl(t, cfg)?;
    let exponent = t.dim() as f64 / (2.0 * t.order() as f64);
    Ok(DensityResult {
        infimum: min.value,
        density: min.value.powf(exponent),
        exponent,
        minimizer: min.minimizer,
        nullcone_suspected: min.nullcone_suspected,
        iterations: min.iterations,
        probe: None,
    })
}

/// Values of `F(U diag(t^{d−1}, t^{−1}, …, t^{−1}) Uᵀ)` for `t = 2^{−1}, …, 2^{−steps}`,
/// where `U` is an orthonormal basis whose first vector is `u`.
pub fn diagonal_probe<O: SlObjective + ?Sized>(objective: &O, u: &[f64], steps: usize) -> Vec<f64> {
    let d = objective.dim();
    let basis = complete_basis(u);
    (1..=steps)
        .map(|s| {
            let t = 0.5f64.powi(s as i32);
            let mut diag = vec![1.0 / t; d];
            diag[0] = t.powi(d as i32 - 1);
            let dm = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag));
            objective.value(&(&basis * dm * basis.transpose()))
        })
        .collect()
}

/// Affine density of `f` at `p`.
pub fn affine_density(f: &PolynomialMap, p: &[f64], cfg: &OptimizerConfig) -> Result<DensityResult> {
    let set = index_set(f.d(), f.n())?;
    let t = assemble_tensor(f, p, &set)?;
    let mut result = tensor_density(t.tensor(), cfg)?;
    // Dependent first derivatives force every entry to vanish; confirm decay
    // along a diagonal subgroup shrinking a kernel direction.
    let d = f.d();
    let jac = DMatrix::from_fn(f.n(), d, |i, j| f.components()[i].derivative(&MultiIndex::unit(d, j)).evaluate(p));
    if rank(&jac, 1e-12) < d {
        let svd = jac.svd(false, true);
        let vt = svd.v_t.expect("requested right singular vectors");
        let (k, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |b, (i, &s)| if s < b.1 { (i, s) } else { b });
        let kernel: Vec<f64> = vt.row(k).iter().copied().collect();
        result.probe = Some(diagonal_probe(t.tensor(), &kernel, 10));
        result.nullcone_suspected = true;
    }
    Ok(result)
}

/// Closed form `d^{d/4} |det A|^{1/2}` for a symmetric bilinear form.
pub fn bilinear_density_exact(a: &DMatrix<f64>) -> Result<f64> {
    if !is_symmetric(a, 1e-12) {
        return Err(Error::NotSymmetric);
    }
    let d = a.nrows() as f64;
    Ok(d.powf(d / 4.0) * a.determinant().abs().sqrt())
}

/// `Σ det([A]_{i₁⋯i_n})²` over all ordered column tuples of an `n × m` matrix.
pub fn minor_sum(a: &DMatrix<f64>) -> Result<f64> {
    let (n, m) = a.shape();
    if n == 0 || m < n {
        return Err(Error::ShapeInvalid(format!("need m ≥ n ≥ 1, got {n}x{m}")));
    }
    let total = m.pow(n as u32);
    let mut buf = vec![0.0; n * n];
    let mut sum = 0.0;
    for mut t in 0..total {
        for j in (0..n).rev() {
            let col = t % m;
            t /= m;
            for i in 0..n {
                buf[i * n + j] = a[(i, col)];
            }
        }
        let det = crate::linalg::det_in_place(&mut buf, n);
        sum += det * det;
    }
    Ok(sum)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetnormReport {
    pub lhs: f64,
    pub rhs: f64,
    pub relative_gap: f64,
    /// `n (Π σ_j²)^{1/n}`.
    pub infimum_analytic: f64,
    /// `inf ‖MA‖²` found by [`minimize_over_sl`].
    pub infimum_numeric: f64,
    /// `|numeric − analytic| / max(analytic, 1)`.
    pub infimum_gap: f64,
}

/// Compare the minor sum with `(n!/nⁿ) (inf_{SL(n)} ‖MA‖²)ⁿ`.
pub fn detnorm_check(a: &DMatrix<f64>, cfg: &OptimizerConfig) -> Result<DetnormReport> {
    let lhs = minor_sum(a)?;
    let n = a.nrows();
    let nf = n as f64;
    let sv = a.clone().svd(false, false).singular_values;
    let prod_sq: f64 = sv.iter().map(|s| s * s).product();
    let infimum_analytic = nf * prod_sq.powf(1.0 / nf);
    let fact = crate::poly::factorial(n);
    let rhs = fact / nf.powi(n as i32) * infimum_analytic.powi(n as i32);
    let numeric = minimize_over_sl(&FrobeniusObjective { a: a.clone() }, cfg)?;
    let infimum_numeric = if numeric.nullcone_suspected { 0.0 } else { numeric.value };
    Ok(DetnormReport {
        lhs,
        rhs,
        relative_gap: (lhs - rhs).abs() / lhs.max(1.0),
        infimum_analytic,
        infimum_numeric,
        infimum_gap: (infimum_numeric - infimum_analytic).abs() / infimum_analytic.max(1.0),
    })
}
