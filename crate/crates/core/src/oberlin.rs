//! Empirical Oberlin ratios `μ(K)/|K|^α` for the pullback of the affine
//! measure under a polynomial map.
//!
//! The parameter box is discretized into cells; each cell carries the affine
//! density at its center and the image of that center. A body `K` collects
//! the mass of every cell whose image lies in `K`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::convex::{body_volume, ConvexBody};
use crate::coreset::WeightedSampleSet;
use crate::error::{Error, Result};
use crate::index::index_set;
use crate::linalg::det_in_place;
use crate::poly::PolynomialMap;
use crate::sl::{affine_density, OptimizerConfig};

/// Monte Carlo samples used for hull volumes.
const HULL_VOLUME_SAMPLES: usize = 1 << 14;

/// Smallest relative scale of random boxes, simplices and hulls, in cells.
const MIN_BODY_CELLS: f64 = 16.0;

/// Discretized pullback of the affine measure.
#[derive(Debug, Clone)]
pub struct PullbackMeasure {
    map: PolynomialMap,
    lo: Vec<f64>,
    hi: Vec<f64>,
    resolution: usize,
    cell_volume: f64,
    params: Vec<Vec<f64>>,
    densities: Vec<f64>,
    images: Vec<Vec<f64>>,
}

impl PullbackMeasure {
    pub fn map(&self) -> &PolynomialMap {
        &self.map
    }

    pub fn domain(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Cell centers in parameter space.
    pub fn params(&self) -> &[Vec<f64>] {
        &self.params
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn images(&self) -> &[Vec<f64>] {
        &self.images
    }

    /// Cell weight `cell volume × density`.
    pub fn weight(&self, i: usize) -> f64 {
        self.cell_volume * self.densities[i]
    }

    pub fn total_mass(&self) -> f64 {
        (0..self.len()).map(|i| self.weight(i)).sum()
    }

    /// Cells of positive density as a weighted sample set.
    pub fn sample_set(&self) -> Result<WeightedSampleSet> {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.densities[i] > 0.0).collect();
        if keep.is_empty() {
            return Err(Error::EmptyPullback);
        }
        WeightedSampleSet::new(
            keep.iter().map(|&i| self.params[i].clone()).collect(),
            keep.iter().map(|&i| self.weight(i)).collect(),
            vec![true; keep.len()],
            self.cell_volume,
        )
    }

    /// Indices of cells whose image lies in `k`.
    pub fn cells_in(&self, k: &ConvexBody) -> Vec<usize> {
        let oracle = k.oracle();
        (0..self.len()).into_par_iter().filter(|&i| oracle.contains(&self.images[i])).collect()
    }
}

/// Affine density at every cell center of a `resolution^d` grid on `[lo, hi]`.
pub fn pullback_measure(
    f: &PolynomialMap,
    lo: &[f64],
    hi: &[f64],
    resolution: usize,
    cfg: &OptimizerConfig,
) -> Result<PullbackMeasure> {
    if lo.len() != f.d() {
        return Err(Error::DimensionMismatch { expected: f.d(), got: lo.len() });
    }
    cfg.validate()?;
    index_set(f.d(), f.n())?;
    let grid = WeightedSampleSet::uniform_grid(lo, hi, resolution)?;
    let params = grid.points().to_vec();
    let densities = params
        .par_iter()
        .map(|p| affine_density(f, p, cfg).map(|r| r.density))
        .collect::<Result<Vec<f64>>>()?;
    let images = params.iter().map(|p| f.evaluate(p)).collect();
    Ok(PullbackMeasure {
        map: f.clone(),
        lo: lo.to_vec(),
        hi: hi.to_vec(),
        resolution,
        cell_volume: grid.cell_volume(),
        params,
        densities,
        images,
    })
}

/// `μ(K)`: total weight of cells whose image lies in `K`.
pub fn mu_of_body(mu: &PullbackMeasure, k: &ConvexBody) -> f64 {
    mu.cells_in(k).into_iter().fold(0.0, |m, i| m + mu.weight(i))
}

/// `μ(K)/|K|^α`; infinite when `|K| = 0` carries mass, zero without mass.
pub fn oberlin_ratio(mass: f64, volume: f64, alpha: f64) -> f64 {
    if mass == 0.0 {
        0.0
    } else if volume <= 0.0 {
        f64::INFINITY
    } else {
        mass / volume.powf(alpha)
    }
}

/// Which random body families an experiment draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BodyFamilies {
    pub boxes: bool,
    pub simplices: bool,
    pub hulls: bool,
    pub slabs: bool,
}

impl BodyFamilies {
    pub fn all() -> Self {
        BodyFamilies { boxes: true, simplices: true, hulls: true, slabs: true }
    }

    fn enabled(&self) -> Vec<BodyKind> {
        let mut v = Vec::new();
        if self.boxes {
            v.push(BodyKind::Box);
        }
        if self.simplices {
            v.push(BodyKind::Simplex);
        }
        if self.hulls {
            v.push(BodyKind::Hull);
        }
        if self.slabs {
            v.push(BodyKind::Slab);
        }
        v
    }
}

impl Default for BodyFamilies {
    fn default() -> Self {
        Self::all()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BodyKind {
    Box,
    Simplex,
    Hull,
    Slab,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub body_id: usize,
    pub kind: &'static str,
    pub volume: f64,
    pub mass: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub alpha: f64,
    pub seed: u64,
    pub resolution: usize,
    pub rows: Vec<RatioRow>,
    pub max_ratio: f64,
}

pub const CSV_HEADER: &str = "body-id,kind,|K|,μ(K),ratio,seed,resolution";

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{:e},{:e},{:e},{},{}",
                r.body_id, r.kind, r.volume, r.mass, r.ratio, self.seed, self.resolution
            );
        }
        s
    }

    /// Log-log scatter of `μ(K)` against `|K|` as a standalone SVG document.
    pub fn to_svg(&self) -> String {
        let pts: Vec<(f64, f64, &str)> = self
            .rows
            .iter()
            .filter(|r| r.volume > 0.0 && r.mass > 0.0)
            .map(|r| (r.volume.log10(), r.mass.log10(), r.kind))
            .collect();
        let (w, h, pad) = (640.0, 480.0, 50.0);
        let range = |sel: fn(&(f64, f64, &str)) -> f64| {
            let lo = pts.iter().map(sel).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(sel).fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, lo + 0.5)
            }
        };
        let (x0, x1) = range(|p| p.0);
        let (y0, y1) = range(|p| p.1);
        let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
        let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
        let color = |k: &str| match k {
            "box" => "#1f77b4",
            "simplex" => "#2ca02c",
            "vertex-hull" => "#9467bd",
            _ => "#d62728",
        };
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<line x1="{pad}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{pad}" y1="{pad}" x2="{pad}" y2="{b}" stroke="black"/>"#,
            b = h - pad,
            r = w - pad
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">log10 |K|  [{x0:.2}, {x1:.2}]</text>"#,
            w / 2.0,
            h - 15.0
        );
        let _ = writeln!(
            s,
            r#"<text x="15" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 15 {})">log10 μ(K)  [{y0:.2}, {y1:.2}]</text>"#,
            h / 2.0,
            h / 2.0
        );
        for (x, y, k) in &pts {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}"/>"#, sx(*x), sy(*y), color(k));
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="20" font-size="12" text-anchor="end">α = {}, max ratio = {:e}</text>"#,
            w - pad,
            self.alpha,
            self.max_ratio
        );
        s.push_str("</svg>\n");
        s
    }
}

/// Affine frame of `ℝⁿ` at `f(t)`: the first derivatives of `f` followed by
/// higher derivatives in graded order, each kept when it is independent of
/// those before it. Missing directions are filled from the standard basis.
fn osculating_frame(f: &PolynomialMap, t: &[f64]) -> DMatrix<f64> {
    let n = f.n();
    let max_order = index_set(f.d(), f.n()).map(|s| s.max_order()).unwrap_or(1);
    let jet = f.jet(t, max_order).expect("order within range");
    let mut entries: Vec<_> = jet.entries().filter(|(a, _)| a.degree() > 0).map(|(a, c)| (a.clone(), c.to_vec())).collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    let candidates = entries
        .into_iter()
        .map(|(_, c)| DVector::from_vec(c))
        .chain((0..n).map(|e| DVector::from_fn(n, |i, _| if i == e { 1.0 } else { 0.0 })));
    let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut raw: Vec<DVector<f64>> = Vec::with_capacity(n);
    for v in candidates {
        if raw.len() == n {
            break;
        }
        let norm0 = v.norm();
        let mut w = v.clone();
        for b in &ortho {
            let c = b.dot(&w);
            w -= b * c;
        }
        if norm0 > 0.0 && w.norm() > 1e-8 * norm0.max(1.0) {
            ortho.push(w.normalize());
            raw.push(v);
        }
    }
    DMatrix::from_columns(&raw)
}

fn random_body(mu: &PullbackMeasure, kind: BodyKind, rng: &mut ChaCha8Rng) -> ConvexBody {
    let n = mu.map.n();
    let d = mu.map.d();
    let (lo, hi) = mu
        .images
        .iter()
        .fold((vec![f64::INFINITY; n], vec![f64::NEG_INFINITY; n]), |(mut lo, mut hi), y| {
            for i in 0..n {
                lo[i] = lo[i].min(y[i]);
                hi[i] = hi[i].max(y[i]);
            }
            (lo, hi)
        });
    let span: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| (h - l).max(1e-3)).collect();
    let mean_span = span.iter().sum::<f64>() / n as f64;
    // bodies narrower than a few cells only measure the discretization
    let floor = (MIN_BODY_CELLS / mu.resolution as f64).log10().clamp(-2.0, -0.1);
    let anchor = rng.random_range(0..mu.len());
    let center = mu.images[anchor].clone();
    match kind {
        BodyKind::Box => {
            let half: Vec<f64> = span.iter().map(|s| 0.5 * s * 10f64.powf(rng.random_range(floor..0.0))).collect();
            ConvexBody::Box {
                lo: center.iter().zip(&half).map(|(c, h)| c - h).collect(),
                hi: center.iter().zip(&half).map(|(c, h)| c + h).collect(),
            }
        }
        BodyKind::Simplex => {
            let s = mean_span * 10f64.powf(rng.random_range(floor..0.0));
            let mut vertices: Vec<Vec<f64>> = (0..=n)
                .map(|_| (0..n).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect())
                .collect();
            let centroid: Vec<f64> = (0..n).map(|i| vertices.iter().map(|v| v[i]).sum::<f64>() / (n + 1) as f64).collect();
            for v in &mut vertices {
                for i in 0..n {
                    v[i] += center[i] - centroid[i];
                }
            }
            ConvexBody::Simplex { vertices }
        }
        BodyKind::Hull => {
            let count = rng.random_range(n + 1..=2 * n);
            let radius = 10f64.powf(rng.random_range(floor.max(-1.5)..0.0));
            let t0 = &mu.params[anchor];
            let points = (0..count)
                .map(|_| {
                    let t: Vec<f64> = (0..d)
                        .map(|i| {
                            let w = mu.hi[i] - mu.lo[i];
                            (t0[i] + radius * w * rng.random_range(-0.5..0.5)).clamp(mu.lo[i], mu.hi[i])
                        })
                        .collect();
                    mu.map.evaluate(&t)
                })
                .collect();
            ConvexBody::VertexHull { points }
        }
        BodyKind::Slab => {
            let max_cells = (mu.resolution / 4).max(1);
            let cells = (2f64.powf(rng.random_range(0.0..=(max_cells as f64).log2())).round() as usize).clamp(1, max_cells);
            let corner: Vec<usize> = (0..d).map(|_| rng.random_range(cells..=mu.resolution - cells)).collect();
            slab_around(mu, &corner, cells)
        }
    }
}

/// Parallelepiped in the osculating frame at `f(t0)` hugging the image of
/// the parameter cube `t0 + [−δ, δ]^d`, with `t0` a grid corner and `δ` a
/// multiple of the cell width so that the cube is a union of cells.
fn slab_around(mu: &PullbackMeasure, corner: &[usize], cells: usize) -> ConvexBody {
    let d = mu.map.d();
    let h: Vec<f64> = (0..d).map(|i| (mu.hi[i] - mu.lo[i]) / mu.resolution as f64).collect();
    let t0: Vec<f64> = (0..d).map(|i| mu.lo[i] + corner[i] as f64 * h[i]).collect();
    let frame = osculating_frame(&mu.map, &t0);
    let n = frame.nrows();
    let lu = frame.clone().lu();
    let base = DVector::from_vec(mu.map.evaluate(&t0));
    // sample the closed cube at half-cell spacing
    let steps = 4 * cells + 1;
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    let mut t = vec![0.0; d];
    for flat in 0..steps.pow(d as u32) {
        let mut r = flat;
        for i in 0..d {
            let k = (r % steps) as f64;
            r /= steps;
            t[i] = t0[i] + (k / 2.0 - cells as f64) * h[i];
        }
        let y = DVector::from_vec(mu.map.evaluate(&t)) - &base;
        let c = lu.solve(&y).unwrap_or_else(|| DVector::zeros(n));
        for j in 0..n {
            lo[j] = lo[j].min(c[j]);
            hi[j] = hi[j].max(c[j]);
        }
    }
    let mid = DVector::from_fn(n, |j, _| 0.5 * (lo[j] + hi[j]));
    let half = DMatrix::from_diagonal(&DVector::from_fn(n, |j, _| 0.5 * (hi[j] - lo[j])));
    let center = base + &frame * mid;
    ConvexBody::SlabBox { center: center.iter().copied().collect(), axes: frame * half }
}

/// Random body number `trial` of a seeded experiment. Trials cycle through
/// the enabled families, and trial `i` draws from ChaCha stream `i`, so
/// bodies do not depend on scheduling.
pub fn sample_body(mu: &PullbackMeasure, families: BodyFamilies, trial: usize, seed: u64) -> Result<ConvexBody> {
    let kinds = families.enabled();
    if kinds.is_empty() || mu.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    Ok(random_body(mu, kinds[trial % kinds.len()], &mut rng))
}

/// Ratio statistics over `trials` bodies drawn by [`sample_body`].
pub fn oberlin_experiment(
    mu: &PullbackMeasure,
    alpha: f64,
    families: BodyFamilies,
    trials: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidDimension(format!("alpha must be positive, got {alpha}")));
    }
    let rows = (0..trials)
        .into_par_iter()
        .map(|i| {
            let body = sample_body(mu, families, i, seed)?;
            let vol = body_volume(&body, HULL_VOLUME_SAMPLES, seed ^ (i as u64).wrapping_mul(0x9e37_79b9))?;
            let mass = mu_of_body(mu, &body);
            Ok(RatioRow { body_id: i, kind: body.kind(), volume: vol.volume, mass, ratio: oberlin_ratio(mass, vol.volume, alpha) })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(ExperimentReport { alpha, seed, resolution: mu.resolution, rows, max_ratio })
}

/// Anisotropic box `[−δ, δ]^d × [−δ², δ²]^{n−d}` around the origin of `ℝⁿ`.
pub fn parabolic_box(d: usize, n: usize, delta: f64) -> ConvexBody {
    let half: Vec<f64> = (0..n).map(|i| if i < d { delta } else { delta * delta }).collect();
    ConvexBody::Box { lo: half.iter().map(|h| -h).collect(), hi: half }
}

/// Ratios `μ(K_δ)/|K_δ|^α` over parabolic boxes `K_δ`, one per scale.
pub fn supercritical_blowup(mu: &PullbackMeasure, alpha: f64, scales: &[f64]) -> Vec<f64> {
    let (d, n) = (mu.map.d(), mu.map.n());
    scales
        .iter()
        .map(|&delta| {
            let k = parabolic_box(d, n, delta);
            let vol = body_volume(&k, 0, 0).map(|v| v.volume).unwrap_or(0.0);
            oberlin_ratio(mu_of_body(mu, &k), vol, alpha)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexFunctional {
    /// Average of `|det(f(p_1) − f(p_0), …, f(p_n) − f(p_0))|`.
    pub estimate: f64,
    pub std_error: f64,
    /// `n!·|K|`.
    pub bound: f64,
    pub volume: f64,
}

/// Monte Carlo estimate of the simplex functional on `E = f⁻¹(K)` with all
/// `n + 1` points drawn from `μ` restricted to `E`.
pub fn simplex_functional(mu: &PullbackMeasure, k: &ConvexBody, samples: usize, seed: u64) -> Result<SimplexFunctional> {
    let n = mu.map.n();
    let cells: Vec<usize> = mu.cells_in(k).into_iter().filter(|&i| mu.densities[i] > 0.0).collect();
    if cells.is_empty() {
        return Err(Error::EmptyPullback);
    }
    let dist = WeightedIndex::new(cells.iter().map(|&i| mu.weight(i))).map_err(|_| Error::EmptyPullback)?;
    let volume = body_volume(k, HULL_VOLUME_SAMPLES, seed)?.volume;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = vec![0.0; n * n];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let p0 = &mu.images[cells[dist.sample(&mut rng)]];
        for j in 0..n {
            let pj = &mu.images[cells[dist.sample(&mut rng)]];
            for i in 0..n {
                buf[i * n + j] = pj[i] - p0[i];
            }
        }
        let v = det_in_place(&mut buf, n).abs();
        sum += v;
        sum_sq += v * v;
    }
    let s = samples.max(1) as f64;
    let mean = sum / s;
    let var = (sum_sq / s - mean * mean).max(0.0);
    Ok(SimplexFunctional {
        estimate: mean,
        std_error: (var / s).sqrt(),
        bound: crate::poly::factorial(n) * volume,
        volume,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{graph_embedding, Polynomial};

    fn fast() -> OptimizerConfig {
        OptimizerConfig { restarts: 2, ..OptimizerConfig::default() }
    }

    fn paraboloid() -> PolynomialMap {
        PolynomialMap::parse("d = 2\nx1\nx2\n0.5 * x1^2 + 0.5 * x2^2").unwrap()
    }

    fn parabola() -> PolynomialMap {
        PolynomialMap::parse("d = 1\nx1\nx1^2").unwrap()
    }

    #[test]
    fn constant_densities() {
        let mu = pullback_measure(&paraboloid(), &[-1.0, -1.0], &[1.0, 1.0], 8, &fast()).unwrap();
        assert!(mu.densities().iter().all(|r| (r - 2f64.sqrt()).abs() < 1e-9));
        let mu = pullback_measure(&parabola(), &[0.0], &[1.0], 64, &fast()).unwrap();
        assert!(mu.densities().iter().all(|r| (r - 2f64.powf(1.0 / 3.0)).abs() < 1e-9));
        let flat = graph_embedding(&Polynomial::zero(2));
        let mu = pullback_measure(&flat, &[-1.0, -1.0], &[1.0, 1.0], 4, &fast()).unwrap();
        assert!(mu.densities().iter().all(|&r| r == 0.0));
        assert!(matches!(mu.sample_set(), Err(Error::EmptyPullback)));
    }

    #[test]
    fn mass_of_simple_bodies() {
        let mu = pullback_measure(&paraboloid(), &[-1.0, -1.0], &[1.0, 1.0], 32, &fast()).unwrap();
        let all = ConvexBody::Box { lo: vec![-2.0; 3], hi: vec![2.0; 3] };
        assert!((mu_of_body(&mu, &all) - 4.0 * 2f64.sqrt()).abs() < 1e-9);
        let far = ConvexBody::Box { lo: vec![5.0; 3], hi: vec![6.0; 3] };
        assert_eq!(mu_of_body(&mu, &far), 0.0);
        // slab |φ| ≤ ε over [−1,1]²: the disc |t|² ≤ 2ε, counted cell by cell
        let eps = 0.1;
        let slab = ConvexBody::SlabBox {
            center: vec![0.0; 3],
            axes: DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, eps])),
        };
        let cells = mu.params().iter().filter(|t| 0.5 * (t[0] * t[0] + t[1] * t[1]) <= eps).count();
        let expected = 2f64.sqrt() * cells as f64 * mu.cell_volume();
        assert!((mu_of_body(&mu, &slab) - expected).abs() < 1e-12);
        let disc = 2f64.sqrt() * std::f64::consts::PI * 2.0 * eps;
        assert!((mu_of_body(&mu, &slab) - disc).abs() / disc < 0.05);
    }

    #[test]
    fn monotone_in_body() {
        let mu = pullback_measure(&paraboloid(), &[-1.0, -1.0], &[1.0, 1.0], 16, &fast()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let k = random_body(&mu, BodyKind::Box, &mut rng);
            let ConvexBody::Box { lo, hi } = &k else { unreachable!() };
            let grow: f64 = rng.random_range(0.0..0.3);
            let big = ConvexBody::Box {
                lo: lo.iter().map(|x| x - grow).collect(),
                hi: hi.iter().map(|x| x + grow).collect(),
            };
            assert!(mu_of_body(&mu, &k) <= mu_of_body(&mu, &big));
        }
    }

    #[test]
    fn degenerate_bodies_flag_infinite_ratio() {
        let mu = pullback_measure(&paraboloid(), &[-1.0, -1.0], &[1.0, 1.0], 8, &fast()).unwrap();
        // horizontal square through the images of the four central cells
        let flat = ConvexBody::SlabBox {
            center: vec![0.0, 0.0, 0.015625],
            axes: DMatrix::from_diagonal(&DVector::from_vec(vec![0.2, 0.2, 0.0])),
        };
        let vol = body_volume(&flat, 1000, 0).unwrap();
        assert_eq!(vol.volume, 0.0);
        let mass = mu_of_body(&mu, &flat);
        assert!((mass - 4.0 * 2f64.sqrt() * mu.cell_volume()).abs() < 1e-12);
        assert_eq!(oberlin_ratio(mass, vol.volume, 0.5), f64::INFINITY);
        assert_eq!(oberlin_ratio(0.0, 0.0, 0.5), 0.0);
    }

    #[test]
    fn parabolic_boxes_scale_exactly() {
        let mu = pullback_measure(&paraboloid(), &[-0.5, -0.5], &[0.5, 0.5], 64, &fast()).unwrap();
        let scales: Vec<f64> = (1..=5).map(|k| 0.5f64.powi(k)).collect();
        let r = supercritical_blowup(&mu, 0.5, &scales);
        for (x, delta) in r.iter().zip(&scales) {
            let oracle = 2f64.sqrt() * 4.0 * delta * delta / (8.0 * delta.powi(4)).sqrt();
            assert!((x - oracle).abs() / oracle < 1e-9, "{x} {oracle}");
        }
        let up = supercritical_blowup(&mu, 0.6, &scales);
        assert!(up.windows(2).all(|w| w[1] > w[0]));
        let down = supercritical_blowup(&mu, 0.4, &scales);
        assert!(down.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn adapted_slabs_are_affinely_extremal() {
        // image of t0 + [−δ, δ] in the frame (f', f'') is [−δ, δ] × [0, δ²/2],
        // so μ = 2^{1/3}·2δ and |K| = 2δ³·det(f', f'') = 2δ³
        let mu = pullback_measure(&parabola(), &[-1.0], &[1.0], 512, &fast()).unwrap();
        for (corner, cells) in [(256, 1), (300, 17), (100, 64), (450, 40)] {
            let k = slab_around(&mu, &[corner], cells);
            let r = oberlin_ratio(mu_of_body(&mu, &k), body_volume(&k, 0, 0).unwrap().volume, 1.0 / 3.0);
            assert!((r - 2.0).abs() < 1e-9, "{corner} {cells} {r}");
        }
    }

    #[test]
    fn experiment_report_is_reproducible() {
        let mu = pullback_measure(&parabola(), &[-1.0], &[1.0], 256, &fast()).unwrap();
        let a = oberlin_experiment(&mu, 1.0 / 3.0, BodyFamilies::all(), 200, 3).unwrap();
        let b = oberlin_experiment(&mu, 1.0 / 3.0, BodyFamilies::all(), 200, 3).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert!(a.max_ratio.is_finite() && a.max_ratio > 0.0);
        assert_eq!(a.to_csv().lines().count(), 201);
        assert!(a.to_csv().starts_with(CSV_HEADER));
        for kind in ["box", "simplex", "vertex-hull", "slab-box"] {
            assert!(a.rows.iter().any(|r| r.kind == kind));
        }
        let svg = a.to_svg();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn ratios_survive_unimodular_maps() {
        let f = parabola();
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]);
        let b = [0.3, -0.7];
        let g = f.affine_image(&a, &b).unwrap();
        let mu_f = pullback_measure(&f, &[-1.0], &[1.0], 256, &fast()).unwrap();
        let mu_g = pullback_measure(&g, &[-1.0], &[1.0], 256, &fast()).unwrap();
        let rep = oberlin_experiment(&mu_f, 1.0 / 3.0, BodyFamilies { hulls: false, ..BodyFamilies::all() }, 60, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for i in 0..30 {
            rng.set_stream(i);
            let kind = [BodyKind::Box, BodyKind::Simplex, BodyKind::Slab][i as usize % 3];
            let k = random_body(&mu_f, kind, &mut rng);
            let k2 = k.affine_image(&a, &b);
            let (m1, m2) = (mu_of_body(&mu_f, &k), mu_of_body(&mu_g, &k2));
            let (v1, v2) = (body_volume(&k, 0, 0).unwrap().volume, body_volume(&k2, 0, 0).unwrap().volume);
            let (r1, r2) = (oberlin_ratio(m1, v1, 1.0 / 3.0), oberlin_ratio(m2, v2, 1.0 / 3.0));
            assert!((r1 - r2).abs() <= 0.01 * r1.max(1e-300), "{r1} {r2}");
        }
        assert!(rep.max_ratio.is_finite());
    }

    #[test]
    fn simplex_functional_bounded() {
        let mu = pullback_measure(&paraboloid(), &[-1.0, -1.0], &[1.0, 1.0], 32, &fast()).unwrap();
        let k = ConvexBody::Box { lo: vec![-1.0, -1.0, 0.0], hi: vec![1.0, 1.0, 1.0] };
        let r = simplex_functional(&mu, &k, 20_000, 1).unwrap();
        assert_eq!(r.bound, 24.0);
        assert!(r.estimate > 0.0 && r.estimate <= r.bound);
        let tiny = ConvexBody::Box { lo: vec![-0.04, -0.04, 0.0], hi: vec![0.04, 0.04, 0.002] };
        let r = simplex_functional(&mu, &tiny, 2000, 1).unwrap();
        assert!(r.estimate < 1e-6);
        let mu = pullback_measure(&parabola(), &[0.0], &[1.0], 256, &fast()).unwrap();
        let sq = ConvexBody::Box { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] };
        let r = simplex_functional(&mu, &sq, 20_000, 2).unwrap();
        assert!(r.estimate <= 2.0 && r.bound == 2.0);
        assert!(matches!(
            simplex_functional(&mu, &ConvexBody::Box { lo: vec![5.0; 2], hi: vec![6.0; 2] }, 10, 0),
            Err(Error::EmptyPullback)
        ));
    }
}
