//! Core subsets for finite-dimensional function systems on discretized
//! measures.
//!
//! Measures are weighted cell-center grids; every integral and supremum is
//! taken over the samples.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::convex::{max_det_tuple, PointSet};
use crate::error::{Error, Result};
use crate::linalg::complete_basis;
use crate::poly::Polynomial;

/// Discrete measure on a parameter domain together with a selected subset `E`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSampleSet {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    mask: Vec<bool>,
    cell_volume: f64,
}

impl WeightedSampleSet {
    /// `weights` are cell measures; the density at a sample is its weight
    /// divided by `cell_volume`.
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>, mask: Vec<bool>, cell_volume: f64) -> Result<Self> {
        if weights.len() != points.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), got: weights.len() });
        }
        if mask.len() != points.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), got: mask.len() });
        }
        if weights.iter().any(|&w| !(w > 0.0)) || !(cell_volume > 0.0) {
            return Err(Error::InvalidDimension("weights and cell volume must be positive".into()));
        }
        Ok(Self { points, weights, mask, cell_volume })
    }

    /// Cell centers of a `resolution^d` grid on the box, unit density, `E`
    /// the whole box.
    pub fn uniform_grid(lo: &[f64], hi: &[f64], resolution: usize) -> Result<Self> {
        let d = lo.len();
        if d == 0 || hi.len() != d || resolution == 0 || lo.iter().zip(hi).any(|(l, h)| !(h > l)) {
            return Err(Error::InvalidDimension("grid needs a nonempty box and resolution ≥ 1".into()));
        }
        let widths: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| (h - l) / resolution as f64).collect();
        let cell_volume: f64 = widths.iter().product();
        let total = resolution.pow(d as u32);
        let points = (0..total)
            .map(|mut flat| {
                let mut p = vec![0.0; d];
                for i in (0..d).rev() {
                    p[i] = lo[i] + (flat % resolution) as f64 * widths[i] + 0.5 * widths[i];
                    flat /= resolution;
                }
                p
            })
            .collect();
        Self::new(points, vec![cell_volume; total], vec![true; total], cell_volume)
    }

    /// Multiply weights by a positive density.
    pub fn with_density(mut self, density: impl Fn(&[f64]) -> f64) -> Result<Self> {
        for (w, p) in self.weights.iter_mut().zip(&self.points) {
            let rho = density(p);
            if !(rho > 0.0) {
                return Err(Error::InvalidDimension("density must be positive".into()));
            }
            *w *= rho;
        }
        Ok(self)
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.points.len() {
            return Err(Error::DimensionMismatch { expected: self.points.len(), got: mask.len() });
        }
        self.mask = mask;
        Ok(self)
    }

    /// Restrict `E` to the samples satisfying `keep`.
    pub fn select(self, keep: impl Fn(&[f64]) -> bool) -> Self {
        let mask = self.points.iter().map(|p| keep(p)).collect();
        Self { mask, ..self }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    /// Radon–Nikodym density at sample `i`.
    pub fn density(&self, i: usize) -> f64 {
        self.weights[i] / self.cell_volume
    }

    pub fn mass_of(&self, mask: &[bool]) -> f64 {
        self.weights.iter().zip(mask).filter(|(_, &m)| m).map(|(w, _)| w).sum()
    }

    /// `μ(E)`.
    pub fn e_mass(&self) -> f64 {
        self.mass_of(&self.mask)
    }
}

/// Mask of a seeded union of one to three axis boxes inside `[lo, hi]`, each
/// side between `min_frac` and `max_frac` of the domain width. Retries until
/// the union contains at least `min_points` samples.
pub fn random_box_union(
    mu: &WeightedSampleSet,
    lo: &[f64],
    hi: &[f64],
    min_frac: f64,
    max_frac: f64,
    min_points: usize,
    seed: u64,
) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let count = rng.random_range(1..=3);
        let boxes: Vec<(Vec<f64>, Vec<f64>)> = (0..count)
            .map(|_| {
                let mut a = Vec::new();
                let mut b = Vec::new();
                for (l, h) in lo.iter().zip(hi) {
                    let w = (h - l) * rng.random_range(min_frac..=max_frac);
                    let s = rng.random_range(*l..=(h - w));
                    a.push(s);
                    b.push(s + w);
                }
                (a, b)
            })
            .collect();
        let mask: Vec<bool> = mu
            .points()
            .iter()
            .map(|p| boxes.iter().any(|(a, b)| p.iter().zip(a.iter().zip(b)).all(|(x, (l, h))| l <= x && x <= h)))
            .collect();
        if mask.iter().filter(|&&m| m).count() >= min_points {
            return mask;
        }
    }
}

/// Finite-dimensional space of polynomials on a box.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSystem {
    d: usize,
    basis: Vec<Polynomial>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl FunctionSystem {
    pub fn new(basis: Vec<Polynomial>, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let d = lo.len();
        if basis.is_empty() || hi.len() != d {
            return Err(Error::InvalidDimension("need a nonempty basis and a box".into()));
        }
        if let Some(p) = basis.iter().find(|p| p.nvars() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: p.nvars() });
        }
        Ok(Self { d, basis, lo, hi })
    }

    /// All monomials of degree at most `degree` on the box.
    pub fn polynomials(degree: usize, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let d = lo.len();
        let mut basis = vec![Polynomial::constant(d, 1.0)];
        for k in 1..=degree {
            basis.extend(crate::index::monomials_of_degree(d, k).into_iter().map(|a| Polynomial::monomial(a, 1.0)));
        }
        Self::new(basis, lo, hi)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Polynomial] {
        &self.basis
    }

    pub fn domain(&self) -> (&[f64], &[f64]) {
        (&self.lo, &self.hi)
    }

    /// True when the differentials span at every sample.
    pub fn spans_at(&self, mu: &WeightedSampleSet) -> bool {
        let s = Samples::of(self, mu, false);
        (0..mu.len()).all(|p| {
            let g = DMatrix::from_fn(self.d, self.k(), |i, m| s.grads[i][(p, m)]);
            crate::linalg::rank(&g, 1e-10) == self.d
        })
    }

    /// Linear combination `Σ c_m φ_m`.
    pub fn combination(&self, c: &[f64]) -> Polynomial {
        self.basis
            .iter()
            .zip(c)
            .fold(Polynomial::zero(self.d), |acc, (p, &w)| &acc + &p.scale(w))
    }
}

/// Functions sampled at every point: values, gradients, optionally Hessians.
/// Column `m` of each matrix belongs to function `m`.
#[derive(Debug, Clone)]
struct Samples {
    values: DMatrix<f64>,
    grads: Vec<DMatrix<f64>>,
    hess: Option<Vec<Vec<DMatrix<f64>>>>,
}

impl Samples {
    fn of(f: &FunctionSystem, mu: &WeightedSampleSet, with_hessians: bool) -> Samples {
        let d = f.d;
        let pts = mu.points();
        let sample = |poly: &[Polynomial]| DMatrix::from_fn(pts.len(), poly.len(), |p, m| poly[m].evaluate(&pts[p]));
        let values = sample(&f.basis);
        let firsts: Vec<Vec<Polynomial>> = (0..d).map(|i| f.basis.iter().map(|b| b.partial(i)).collect()).collect();
        let grads = firsts.iter().map(|g| sample(g)).collect();
        let hess = with_hessians.then(|| {
            (0..d)
                .map(|s| {
                    (0..d)
                        .map(|c| sample(&firsts[s].iter().map(|g| g.partial(c)).collect::<Vec<_>>()))
                        .collect()
                })
                .collect()
        });
        Samples { values, grads, hess }
    }

    fn combine(&self, c: &DMatrix<f64>) -> Samples {
        Samples {
            values: &self.values * c,
            grads: self.grads.iter().map(|g| g * c).collect(),
            hess: self.hess.as_ref().map(|h| h.iter().map(|row| row.iter().map(|m| m * c).collect()).collect()),
        }
    }

    fn grad(&self, p: usize, m: usize) -> Vec<f64> {
        self.grads.iter().map(|g| g[(p, m)]).collect()
    }
}

/// Normalized basis of a function space with respect to the `E`-average norm.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereBasis {
    /// Column `i` holds the coefficients of `f_i` over the input functions.
    pub coefficients: DMatrix<f64>,
    /// Every `f` in the span expands as `Σ c_i f_i` with `|c_i| ≤ (1 + ε_b)‖f‖`.
    pub eps_b: f64,
    /// Size of the final sphere net.
    pub net_size: usize,
}

fn weighted_l1(v: &DMatrix<f64>, w: &[f64], total: f64, a: &DVector<f64>) -> f64 {
    let r = v * a;
    r.iter().zip(w).map(|(x, wi)| wi * x.abs()).sum::<f64>() / total
}

/// `min ‖V a‖` subject to `ℓ · a = 1` by iteratively reweighted least squares.
fn min_norm_on_hyperplane(v: &DMatrix<f64>, w: &[f64], total: f64, ell: &DVector<f64>) -> (DVector<f64>, f64) {
    let k = ell.len();
    let a0 = ell / ell.norm_squared();
    if k == 1 {
        let n = weighted_l1(v, w, total, &a0);
        return (a0, n);
    }
    let basis = complete_basis(ell.as_slice());
    let z = basis.columns(1, k - 1).into_owned();
    let r0 = v * &a0;
    let vz = v * &z;
    let mut y = DVector::zeros(k - 1);
    let mut best = (a0.clone(), weighted_l1(v, w, total, &a0));
    let mut delta = r0.iter().map(|x| x.abs()).sum::<f64>() / r0.len() as f64 * 1e-2;
    for _ in 0..120 {
        let r = &r0 + &vz * &y;
        let u: Vec<f64> = r.iter().zip(w).map(|(x, wi)| wi / x.abs().max(delta)).collect();
        let mut lhs = DMatrix::zeros(k - 1, k - 1);
        let mut rhs = DVector::zeros(k - 1);
        for p in 0..vz.nrows() {
            let row = vz.row(p);
            for i in 0..k - 1 {
                let ri = u[p] * row[i];
                rhs[i] -= ri * r0[p];
                for j in 0..k - 1 {
                    lhs[(i, j)] += ri * row[j];
                }
            }
        }
        let Some(next) = lhs.lu().solve(&rhs) else { break };
        y = next;
        let a = &a0 + &z * &y;
        let n = weighted_l1(v, w, total, &a);
        if n < best.1 {
            best = (a, n);
        }
        delta = (delta * 0.7).max(1e-15);
    }
    best
}

/// Single-swap-maximal determinant basis on the unit sphere of
/// `‖g‖ = (1/μ(E)) Σ_E w |g|`, for the functions whose samples on `E` are the
/// columns of `v`.
fn sphere_basis_sampled(v: &DMatrix<f64>, w: &[f64], seed: u64) -> Result<SphereBasis> {
    let k = v.ncols();
    let rank = crate::linalg::rank(v, 1e-10);
    if rank < k {
        return Err(Error::DegenerateNorm { rank, dim: k });
    }
    let total: f64 = w.iter().sum();
    let normalize = |a: DVector<f64>| -> Vec<f64> {
        let n = weighted_l1(v, w, total, &a);
        (a / n).iter().copied().collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut e = DVector::zeros(k);
            e[i] = 1.0;
            normalize(e)
        })
        .collect();
    for _ in 0..200 * k {
        let a = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        net.push(normalize(a));
    }
    let mut eps_b;
    let mut tuple;
    let mut rounds = 0;
    loop {
        let set = PointSet::new(k, net.clone()).expect("net points share the dimension");
        tuple = max_det_tuple(&set, k)?;
        let c = DMatrix::from_fn(k, k, |i, j| tuple.vectors[j][i]);
        let cinv = c.clone().try_inverse().ok_or(Error::DegenerateNorm { rank: tuple.rank, dim: k })?;
        let mut worst: f64 = 1.0;
        let mut added = false;
        for i in 0..k {
            let ell = cinv.row(i).transpose();
            let (a, n) = min_norm_on_hyperplane(v, w, total, &ell);
            let sup = 1.0 / n;
            worst = worst.max(sup);
            if sup > 1.0 + 1e-9 {
                net.push((a / n).iter().copied().collect());
                added = true;
            }
        }
        eps_b = (worst - 1.0).max(0.0);
        rounds += 1;
        if !added || rounds >= 30 {
            break;
        }
    }
    let coefficients = DMatrix::from_fn(k, k, |i, j| tuple.vectors[j][i]);
    Ok(SphereBasis { coefficients, eps_b, net_size: net.len() })
}

fn rows_of(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect()
}

fn restrict(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |r, c| m[(rows[r], c)])
}

/// Normalized functions `f_1, …, f_k` spanning `F` with the expansion bound of
/// [`SphereBasis`].
pub fn unit_sphere_basis(f: &FunctionSystem, mu: &WeightedSampleSet, seed: u64) -> Result<(Vec<Polynomial>, SphereBasis)> {
    let rows = rows_of(mu.mask());
    if rows.is_empty() {
        return Err(Error::DegenerateNorm { rank: 0, dim: f.k() });
    }
    let s = Samples::of(f, mu, false);
    let v = restrict(&s.values, &rows);
    let w: Vec<f64> = rows.iter().map(|&r| mu.weights()[r]).collect();
    let basis = sphere_basis_sampled(&v, &w, seed)?;
    let funcs = (0..f.k())
        .map(|i| f.combination(basis.coefficients.column(i).as_slice()))
        .collect();
    Ok((funcs, basis))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoreSetResult {
    pub e_prime_mask: Vec<bool>,
    pub basis_functions: Vec<Polynomial>,
    pub eps_b: f64,
    /// Largest `sup_{E′}|f| / (‖f‖ on E)` over the seeded test family.
    pub sup_bound_constant: f64,
    /// `2k(1 + ε_b)`.
    pub sup_bound: f64,
    /// `μ(E′) / μ(E)`.
    pub mass_ratio: f64,
}

/// Seeded test family: the system's own basis plus Gaussian combinations.
fn test_family(k: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_fa11);
    let mut fam: Vec<DVector<f64>> = (0..k)
        .map(|i| {
            let mut e = DVector::zeros(k);
            e[i] = 1.0;
            e
        })
        .collect();
    fam.extend((0..count).map(|_| DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal))));
    fam
}

/// Zeroth-order core subset `E′ ⊆ E` on which `Σ|f_i| ≤ 2k`.
pub fn core_subset(f: &FunctionSystem, mu: &WeightedSampleSet, seed: u64) -> Result<CoreSetResult> {
    let e_mass = mu.e_mass();
    if !(e_mass > 0.0) {
        return Err(Error::DegenerateNorm { rank: 0, dim: f.k() });
    }
    let k = f.k();
    let (funcs, basis) = unit_sphere_basis(f, mu, seed)?;
    let s = Samples::of(f, mu, false);
    let fi = &s.values * &basis.coefficients;
    let threshold = 2.0 * k as f64;
    let e_prime_mask: Vec<bool> = (0..mu.len())
        .map(|p| mu.mask()[p] && fi.row(p).iter().map(|x| x.abs()).sum::<f64>() <= threshold)
        .collect();
    let mass_ratio = mu.mass_of(&e_prime_mask) / e_mass;
    let mut sup_bound_constant: f64 = 0.0;
    for a in test_family(k, 64, seed) {
        let g = &s.values * &a;
        let avg: f64 = (0..mu.len()).filter(|&p| mu.mask()[p]).map(|p| mu.weights()[p] * g[p].abs()).sum::<f64>() / e_mass;
        let sup = (0..mu.len()).filter(|&p| e_prime_mask[p]).map(|p| g[p].abs()).fold(0.0, f64::max);
        if avg > 0.0 {
            sup_bound_constant = sup_bound_constant.max(sup / avg);
        }
    }
    Ok(CoreSetResult {
        e_prime_mask,
        basis_functions: funcs,
        eps_b: basis.eps_b,
        sup_bound_constant,
        sup_bound: threshold * (1.0 + basis.eps_b),
        mass_ratio,
    })
}

/// A frame `(X_1, …, X_d)` at every sample where it is defined; column `i`
/// of each matrix is `dt(X_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldSamples {
    pub frames: Vec<Option<DMatrix<f64>>>,
}

impl VectorFieldSamples {
    pub fn constant(len: usize, frame: DMatrix<f64>) -> Self {
        Self { frames: vec![Some(frame); len] }
    }
}

/// `μ(X_1 ∧ ⋯ ∧ X_d)` at sample `p`: density times `|det dt_i(X_j)|`.
pub fn wedge_density(mu: &WeightedSampleSet, fields: &VectorFieldSamples, p: usize) -> Result<f64> {
    match fields.frames.get(p) {
        Some(Some(x)) => Ok(mu.density(p) * x.determinant().abs()),
        _ => Err(Error::UndefinedAtPoint(p)),
    }
}

/// One step of the iterated construction.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Dimension of the function space normalized at this step.
    pub k: usize,
    pub eps_b: f64,
    /// Selected `d`-subset of the normalized basis (0-based, increasing).
    pub beta: Vec<usize>,
    /// `μ(E ∩ U_{j−1})`.
    pub domain_mass: f64,
    /// `μ(E ∩ V_β)`.
    pub v_beta_mass: f64,
    /// `μ(E ∩ V_β) ≥ μ(E ∩ U_{j−1}) / C(k, d)`.
    pub pigeonhole_ok: bool,
    /// `2k(1 + ε_b)`: bound on `sup_{U_j} |X_{j,i} g|` per unit norm of `g`.
    pub derivative_bound: f64,
    /// Largest `|X_{j,i} g| / ‖g‖` observed on `U_j` for the test family.
    pub observed_derivative_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeCoreResult {
    pub steps: Vec<StepReport>,
    /// `X_{j,i}` for `j = 1..N`.
    pub fields: Vec<VectorFieldSamples>,
    /// `U_1 ⊇ ⋯ ⊇ U_N` as sample masks.
    pub u_masks: Vec<Vec<bool>>,
    pub e_prime_mask: Vec<bool>,
    /// `μ(E′) / μ(E)`.
    pub mass_ratio: f64,
    /// `min_j inf_{E′} μ(X_{j,1} ∧ ⋯ ∧ X_{j,d}) / μ(E)`.
    pub wedge_constant: f64,
    /// `max |c_{j,i,i′}|` over `E′` for `j ≥ 2`; `None` when `N = 1`.
    pub change_of_basis_max: Option<f64>,
    /// For order `j`, `sup_{E′} |X_{j,i_j} ⋯ X_{1,i_1} f| / ‖f‖_E` over the test family.
    pub derivative_constants: Vec<f64>,
}

impl DerivativeCoreResult {
    /// Product of the per-step derivative bounds up to order `j`.
    pub fn chained_bound(&self, j: usize) -> f64 {
        self.steps[..j].iter().map(|s| s.derivative_bound).product()
    }
}

fn combinations(k: usize, d: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, k: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for i in start..=k - left {
            cur.push(i);
            rec(i + 1, k, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if d <= k {
        rec(0, k, d, &mut Vec::new(), &mut out);
    }
    out
}

fn small_det(m: &[Vec<f64>]) -> f64 {
    match m.len() {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => DMatrix::from_fn(m.len(), m.len(), |i, j| m[i][j]).determinant(),
    }
}

/// `(∂_s D)[r][c]` at sample `p`, where row `r` of `D` is the gradient of the
/// polynomial with coefficients `coeffs[r]` over the system basis.
fn frame_derivative(hess: &[Vec<DMatrix<f64>>], coeffs: &[DVector<f64>], p: usize, s: usize) -> DMatrix<f64> {
    let d = coeffs.len();
    DMatrix::from_fn(d, d, |r, c| (0..hess[s][c].ncols()).map(|m| coeffs[r][m] * hess[s][c][(p, m)]).sum())
}

/// Samples of `φ_m` and `X_i φ_m` for the system basis `φ`, where `X = D⁻¹`
/// and row `r` of `D` is the gradient of the polynomial `coeffs[r]`.
///
/// Gradients use `∂_s(∇φ·X_i) = Hφ[s]·X_i − Σ_r (X_r φ) (∂_s D)[r]·X_i`.
fn extend_by_fields(base: &Samples, coeffs: &[DVector<f64>], frames: &[Option<DMatrix<f64>>]) -> Samples {
    let hess = base.hess.as_ref().expect("system samples carry Hessians");
    let d = base.grads.len();
    let npts = base.values.nrows();
    let m0 = base.values.ncols();
    let cols = m0 * (1 + d);
    let mut values = DMatrix::zeros(npts, cols);
    let mut grads = vec![DMatrix::zeros(npts, cols); d];
    for p in 0..npts {
        for m in 0..m0 {
            values[(p, m)] = base.values[(p, m)];
            for (s, g) in grads.iter_mut().enumerate() {
                g[(p, m)] = base.grads[s][(p, m)];
            }
        }
        let Some(x) = &frames[p] else { continue };
        let dd: Vec<DMatrix<f64>> = (0..d).map(|s| frame_derivative(hess, coeffs, p, s)).collect();
        for m in 0..m0 {
            let gphi = base.grad(p, m);
            let xphi: Vec<f64> = (0..d).map(|r| (0..d).map(|c| gphi[c] * x[(c, r)]).sum()).collect();
            for i in 0..d {
                let col = m0 * (1 + i) + m;
                values[(p, col)] = xphi[i];
                for s in 0..d {
                    let h: f64 = (0..d).map(|c| hess[s][c][(p, m)] * x[(c, i)]).sum();
                    let corr: f64 =
                        (0..d).map(|r| xphi[r] * (0..d).map(|c| dd[s][(r, c)] * x[(c, i)]).sum::<f64>()).sum();
                    grads[s][(p, col)] = h - corr;
                }
            }
        }
    }
    Samples { values, grads, hess: None }
}

/// Iterated dual-frame construction for `N ≤ 2` steps in `d ≤ 2` variables.
pub fn derivative_core(f: &FunctionSystem, mu: &WeightedSampleSet, n_steps: usize, seed: u64) -> Result<DerivativeCoreResult> {
    let d = f.d();
    if n_steps == 0 || n_steps > 2 || d > 2 {
        return Err(Error::InvalidDimension(format!("supported for 1 ≤ N ≤ 2 and d ≤ 2, got N = {n_steps}, d = {d}")));
    }
    let e_mass = mu.e_mass();
    if !(e_mass > 0.0) {
        return Err(Error::DegenerateNorm { rank: 0, dim: f.k() });
    }
    let npts = mu.len();
    let w = mu.weights();
    let e = mu.mask();
    let base = Samples::of(f, mu, true);
    let base_hess = base.hess.as_ref().expect("Hessians requested");

    let mut gens = base.clone();
    let mut u_mask = vec![true; npts];
    let mut steps = Vec::new();
    let mut fields: Vec<VectorFieldSamples> = Vec::new();
    let mut u_masks = Vec::new();
    // Gradients of the selected β functions per step, for change of basis.
    let mut frame_rows: Vec<Vec<Option<DMatrix<f64>>>> = Vec::new();
    let mut step_one_coeffs: Vec<DVector<f64>> = Vec::new();
    let family = test_family(f.k(), 32, seed);

    for step in 1..=n_steps {
        let rows_u = rows_of(&u_mask);
        let eu: Vec<bool> = (0..npts).map(|p| u_mask[p] && e[p]).collect();
        let rows_eu = rows_of(&eu);
        let domain_mass = mu.mass_of(&eu);
        if rows_eu.is_empty() {
            return Err(Error::EmptyVBeta);
        }
        // Independent generators on U.
        let vu = restrict(&gens.values, &rows_u);
        let svd = vu.clone().svd(false, true);
        let vt = svd.v_t.expect("requested right singular vectors");
        let top = svd.singular_values.max();
        let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > 1e-9 * top).collect();
        let reduce = DMatrix::from_fn(gens.values.ncols(), keep.len(), |m, c| vt[(keep[c], m)]);
        let reduced = gens.combine(&reduce);

        let v_eu = restrict(&reduced.values, &rows_eu);
        let w_eu: Vec<f64> = rows_eu.iter().map(|&p| w[p]).collect();
        let sphere = sphere_basis_sampled(&v_eu, &w_eu, seed.wrapping_add(step as u64))?;
        let k = sphere.coefficients.ncols();
        let fb = reduced.combine(&sphere.coefficients);

        let subsets = combinations(k, d);
        if subsets.is_empty() {
            return Err(Error::EmptyVBeta);
        }
        let mut masses = vec![0.0; subsets.len()];
        let mut in_v: Vec<Vec<bool>> = vec![vec![false; npts]; subsets.len()];
        for &p in &rows_u {
            let wedges: Vec<f64> = subsets
                .iter()
                .map(|b| small_det(&b.iter().map(|&m| fb.grad(p, m)).collect::<Vec<_>>()).abs())
                .collect();
            let (mut m1, mut i1, mut m2) = (f64::NEG_INFINITY, 0, f64::NEG_INFINITY);
            for (i, &x) in wedges.iter().enumerate() {
                if x > m1 {
                    m2 = m1;
                    m1 = x;
                    i1 = i;
                } else if x > m2 {
                    m2 = x;
                }
            }
            for (i, &x) in wedges.iter().enumerate() {
                let others = if i == i1 { m2.max(0.0) } else { m1 };
                if x > 0.5 * others + 1e-12 {
                    in_v[i][p] = true;
                    if e[p] {
                        masses[i] += w[p];
                    }
                }
            }
        }
        let chosen = (0..subsets.len()).fold(0, |b, i| if masses[i] > masses[b] { i } else { b });
        if !(masses[chosen] > 0.0) {
            return Err(Error::EmptyVBeta);
        }
        let beta = subsets[chosen].clone();
        let pigeonhole_ok = masses[chosen] >= domain_mass / subsets.len() as f64 * (1.0 - 1e-12);
        for p in 0..npts {
            u_mask[p] = u_mask[p] && in_v[chosen][p];
        }

        // Dual frame X = D⁻¹, rows of D the gradients of the β functions.
        let mut frames = vec![None; npts];
        let mut drows = vec![None; npts];
        for p in rows_of(&u_mask) {
            let dm = DMatrix::from_fn(d, d, |r, c| fb.grads[c][(p, beta[r])]);
            if let Some(x) = dm.clone().try_inverse() {
                frames[p] = Some(x);
                drows[p] = Some(dm);
            }
        }

        // Observed |X_{j,i} g| / ‖g‖_{E∩U_{j−1}} on U_j for the test family
        // pushed through the previous steps.
        let bound = 2.0 * k as f64 * (1.0 + sphere.eps_b);
        let mut observed: f64 = 0.0;
        for g in 0..reduced.values.ncols().min(32) {
            let col = reduced.values.column(g);
            let norm = rows_eu.iter().map(|&p| w[p] * col[p].abs()).sum::<f64>() / domain_mass;
            if norm <= 1e-14 {
                continue;
            }
            for p in rows_of(&u_mask) {
                if let Some(x) = &frames[p] {
                    let grad = reduced.grad(p, g);
                    for i in 0..d {
                        let xi: f64 = (0..d).map(|c| grad[c] * x[(c, i)]).sum();
                        observed = observed.max(xi.abs() / norm);
                    }
                }
            }
        }

        steps.push(StepReport {
            k,
            eps_b: sphere.eps_b,
            beta: beta.clone(),
            domain_mass,
            v_beta_mass: masses[chosen],
            pigeonhole_ok,
            derivative_bound: bound,
            observed_derivative_ratio: observed,
        });

        if step < n_steps {
            // F_j = span(F ∪ X_{j,i} F).
            let coeff_beta: Vec<DVector<f64>> =
                beta.iter().map(|&b| (&reduce * &sphere.coefficients).column(b).into_owned()).collect();
            step_one_coeffs = coeff_beta.clone();
            gens = extend_by_fields(&base, &coeff_beta, &frames);
        }
        frame_rows.push(drows);
        fields.push(VectorFieldSamples { frames });
        u_masks.push(u_mask.clone());
    }

    // Chebyshev restriction on the reciprocal wedge densities.
    let core: Vec<bool> = (0..npts).map(|p| e[p] && u_mask[p] && fields.iter().all(|fl| fl.frames[p].is_some())).collect();
    let core_mass = mu.mass_of(&core);
    let recips: Vec<Vec<f64>> = fields
        .iter()
        .map(|fl| {
            (0..npts)
                .map(|p| match (&fl.frames[p], core[p]) {
                    (Some(_), true) => 1.0 / wedge_density(mu, fl, p).expect("frame present"),
                    _ => 0.0,
                })
                .collect()
        })
        .collect();
    let limit = 2.0 * n_steps as f64;
    let avgs: Vec<f64> = recips.iter().map(|h| (0..npts).map(|p| w[p] * h[p]).sum::<f64>() / core_mass).collect();
    let e_prime_mask: Vec<bool> =
        (0..npts).map(|p| core[p] && recips.iter().zip(&avgs).all(|(h, a)| h[p] <= limit * a)).collect();
    let rows_ep = rows_of(&e_prime_mask);
    let mass_ratio = mu.mass_of(&e_prime_mask) / e_mass;
    let wedge_constant = fields
        .iter()
        .map(|fl| rows_ep.iter().map(|&p| wedge_density(mu, fl, p).expect("frame present")).fold(f64::INFINITY, f64::min))
        .fold(f64::INFINITY, f64::min)
        / e_mass;

    let change_of_basis_max = (n_steps >= 2).then(|| {
        rows_ep
            .iter()
            .map(|&p| {
                let d1 = frame_rows[0][p].as_ref().expect("frame present");
                let x2 = fields[1].frames[p].as_ref().expect("frame present");
                (d1 * x2).amax()
            })
            .fold(0.0, f64::max)
    });

    // Derivative estimates for the seeded family of f ∈ F.
    let mut derivative_constants = vec![0.0f64; n_steps];
    for a in &family {
        let vals = &base.values * a;
        let avg = (0..npts).filter(|&p| e[p]).map(|p| w[p] * vals[p].abs()).sum::<f64>() / e_mass;
        if avg <= 0.0 {
            continue;
        }
        let fgrad: Vec<DVector<f64>> = base.grads.iter().map(|g| g * a).collect();
        let fhess: Vec<Vec<DVector<f64>>> = base_hess.iter().map(|row| row.iter().map(|h| h * a).collect()).collect();
        for &p in &rows_ep {
            let x1 = fields[0].frames[p].as_ref().expect("frame present");
            let g: Vec<f64> = (0..d).map(|s| fgrad[s][p]).collect();
            let x1f: Vec<f64> = (0..d).map(|i| (0..d).map(|c| g[c] * x1[(c, i)]).sum()).collect();
            let m1 = x1f.iter().map(|x| x.abs()).fold(0.0, f64::max);
            derivative_constants[0] = derivative_constants[0].max(m1 / avg);
            if n_steps >= 2 {
                let x2 = fields[1].frames[p].as_ref().expect("frame present");
                let dd1: Vec<DMatrix<f64>> =
                    (0..d).map(|s| frame_derivative(base_hess, &step_one_coeffs, p, s)).collect();
                for i1 in 0..d {
                    let grad_x1f: Vec<f64> = (0..d)
                        .map(|s| {
                            let h: f64 = (0..d).map(|c| fhess[s][c][p] * x1[(c, i1)]).sum();
                            let corr: f64 = (0..d)
                                .map(|r| x1f[r] * (0..d).map(|c| dd1[s][(r, c)] * x1[(c, i1)]).sum::<f64>())
                                .sum();
                            h - corr
                        })
                        .collect();
                    for i2 in 0..d {
                        let v: f64 = (0..d).map(|c| grad_x1f[c] * x2[(c, i2)]).sum();
                        derivative_constants[1] = derivative_constants[1].max(v.abs() / avg);
                    }
                }
            }
        }
    }

    Ok(DerivativeCoreResult {
        steps,
        fields,
        u_masks,
        e_prime_mask,
        mass_ratio,
        wedge_constant,
        change_of_basis_max,
        derivative_constants,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_grid(n: usize) -> WeightedSampleSet {
        WeightedSampleSet::uniform_grid(&[0.0], &[1.0], n).unwrap()
    }

    #[test]
    fn grid_cells_and_density() {
        let g = WeightedSampleSet::uniform_grid(&[0.0, 0.0], &[1.0, 2.0], 4).unwrap();
        assert_eq!(g.len(), 16);
        assert_eq!(g.points()[0], vec![0.125, 0.25]);
        assert!((g.e_mass() - 2.0).abs() < 1e-15);
        assert_eq!(g.density(3), 1.0);
        let g = g.with_density(|p| 1.0 + p[0]).unwrap();
        assert!((g.density(0) - 1.125).abs() < 1e-15);
    }

    #[test]
    fn affine_system_on_interval_has_small_expansion_constant() {
        let f = FunctionSystem::polynomials(1, vec![0.0], vec![1.0]).unwrap();
        let mu = line_grid(100);
        let (funcs, basis) = unit_sphere_basis(&f, &mu, 1).unwrap();
        assert_eq!(funcs.len(), 2);
        assert!(basis.eps_b <= 0.05);
        // Oracle: scan the unit sphere of the norm by angle and expand each
        // point over the returned basis.
        let s = Samples::of(&f, &mu, false);
        let norm = |a: &DVector<f64>| weighted_l1(&s.values, mu.weights(), mu.e_mass(), a);
        for f_i in basis.coefficients.column_iter() {
            assert!((norm(&f_i.into_owned()) - 1.0).abs() < 1e-12);
        }
        let cinv = basis.coefficients.clone().try_inverse().unwrap();
        let mut worst: f64 = 0.0;
        for t in 0..20_000 {
            let th = std::f64::consts::PI * t as f64 / 20_000.0;
            let a = DVector::from_vec(vec![th.cos(), th.sin()]);
            let c = &cinv * &a / norm(&a);
            worst = worst.max(c.amax());
        }
        assert!(worst <= 1.05);
        assert!(worst <= 1.0 + basis.eps_b + 1e-6, "{worst} vs {}", basis.eps_b);
    }

    #[test]
    fn single_function_is_rescaled() {
        let f = FunctionSystem::new(vec![Polynomial::monomial(crate::poly::MultiIndex::new(vec![1]), 3.0)], vec![0.0], vec![1.0]).unwrap();
        let (funcs, _) = unit_sphere_basis(&f, &line_grid(50), 0).unwrap();
        // average of 3t on [0,1] is 3/2, so the normalized function is 2t
        assert!((funcs[0].evaluate(&[0.5]).abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn point_mass_gives_degenerate_norm() {
        let f = FunctionSystem::polynomials(1, vec![0.0], vec![1.0]).unwrap();
        let mut mask = vec![false; 20];
        mask[7] = true;
        let mu = line_grid(20).with_mask(mask).unwrap();
        assert_eq!(unit_sphere_basis(&f, &mu, 0).unwrap_err(), Error::DegenerateNorm { rank: 1, dim: 2 });
    }

    #[test]
    fn quadratic_core_subset_constants() {
        let f = FunctionSystem::polynomials(2, vec![0.0], vec![1.0]).unwrap();
        let r = core_subset(&f, &line_grid(200), 3).unwrap();
        assert!(r.mass_ratio >= 0.5);
        assert!(r.sup_bound_constant <= 6.3);
        assert!(r.sup_bound_constant <= r.sup_bound);
    }

    #[test]
    fn constants_have_trivial_core() {
        let f = FunctionSystem::polynomials(0, vec![0.0], vec![1.0]).unwrap();
        let r = core_subset(&f, &line_grid(30), 0).unwrap();
        assert_eq!(r.mass_ratio, 1.0);
        assert!((r.sup_bound_constant - 1.0).abs() < 1e-12);
    }

    #[test]
    fn core_subset_on_two_small_intervals() {
        let f = FunctionSystem::polynomials(2, vec![0.0], vec![1.0]).unwrap();
        let mu = line_grid(400).select(|p| (0.1..0.13).contains(&p[0]) || (0.8..0.82).contains(&p[0]));
        let r = core_subset(&f, &mu, 5).unwrap();
        assert!(r.mass_ratio >= 0.5);
        assert!(r.sup_bound_constant <= r.sup_bound);
    }

    #[test]
    fn seeded_box_unions_satisfy_zeroth_order_bounds() {
        let f = FunctionSystem::polynomials(2, vec![0.0], vec![1.0]).unwrap();
        let grid = line_grid(200);
        for seed in 0..10 {
            let mask = random_box_union(&grid, &[0.0], &[1.0], 0.05, 0.4, 6, seed);
            let mu = grid.clone().with_mask(mask).unwrap();
            let r = core_subset(&f, &mu, seed).unwrap();
            assert!(r.mass_ratio >= 0.5, "seed {seed}");
            assert!(r.sup_bound_constant <= r.sup_bound, "seed {seed}");
        }
    }

    #[test]
    fn wedge_density_examples() {
        let mu = WeightedSampleSet::uniform_grid(&[0.0, 0.0], &[1.0, 1.0], 3).unwrap();
        let id = VectorFieldSamples::constant(mu.len(), DMatrix::identity(2, 2));
        assert_eq!(wedge_density(&mu, &id, 4).unwrap(), 1.0);
        let twice = VectorFieldSamples::constant(mu.len(), DMatrix::identity(2, 2) * 2.0);
        assert_eq!(wedge_density(&mu, &twice, 4).unwrap(), 4.0);
        let none = VectorFieldSamples { frames: vec![None; mu.len()] };
        assert_eq!(wedge_density(&mu, &none, 2).unwrap_err(), Error::UndefinedAtPoint(2));
    }

    #[test]
    fn affine_system_has_constant_fields() {
        let f = FunctionSystem::polynomials(1, vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let mu = WeightedSampleSet::uniform_grid(&[0.0, 0.0], &[1.0, 1.0], 12).unwrap();
        let r = derivative_core(&f, &mu, 1, 0).unwrap();
        let frames: Vec<&DMatrix<f64>> = r.fields[0].frames.iter().flatten().collect();
        assert!(frames.windows(2).all(|w| (w[0] - w[1]).amax() < 1e-12));
        assert!(r.mass_ratio > 0.0);
        // X f is exactly ∇f · D⁻¹ for affine f, so the estimate matches the bound chain.
        assert!(r.derivative_constants[0] <= r.chained_bound(1));
    }

    #[test]
    fn cubic_system_on_square_first_step() {
        let f = FunctionSystem::polynomials(3, vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(f.k(), 10);
        let mu = WeightedSampleSet::uniform_grid(&[0.0, 0.0], &[1.0, 1.0], 24).unwrap();
        assert!(f.spans_at(&mu));
        let r = derivative_core(&f, &mu, 1, 1).unwrap();
        assert!(r.steps[0].pigeonhole_ok);
        assert!(r.mass_ratio > 0.0 && r.wedge_constant > 0.0 && r.wedge_constant.is_finite());
        assert!(r.derivative_constants[0] <= r.chained_bound(1));
        assert!(r.steps[0].observed_derivative_ratio <= r.steps[0].derivative_bound);
    }

    #[test]
    fn two_steps_on_half_domain() {
        let f = FunctionSystem::polynomials(2, vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let mu = WeightedSampleSet::uniform_grid(&[0.0, 0.0], &[1.0, 1.0], 20).unwrap().select(|p| p[0] < 0.5);
        let r = derivative_core(&f, &mu, 2, 4).unwrap();
        assert_eq!(r.steps.len(), 2);
        assert!(r.mass_ratio > 0.0);
        assert!(r.wedge_constant > 0.0 && r.wedge_constant.is_finite());
        let c = r.change_of_basis_max.unwrap();
        assert!(c.is_finite());
        assert!(r.derivative_constants.iter().all(|x| x.is_finite()));
        assert!(r.derivative_constants[1] <= r.chained_bound(2));
        for s in &r.steps {
            assert!(s.pigeonhole_ok);
            assert!(s.observed_derivative_ratio <= s.derivative_bound * (1.0 + 1e-9));
        }
    }

    #[test]
    fn extended_gradients_match_quotient_rule() {
        // d = 1, β function b = t + t², φ = t³: X φ = 3t² / (1 + 2t).
        let f = FunctionSystem::polynomials(3, vec![0.0], vec![1.0]).unwrap();
        let mu = line_grid(50);
        let base = Samples::of(&f, &mu, true);
        let coeffs = vec![DVector::from_vec(vec![0.0, 1.0, 1.0, 0.0])];
        let frames: Vec<Option<DMatrix<f64>>> =
            mu.points().iter().map(|p| Some(DMatrix::from_element(1, 1, 1.0 / (1.0 + 2.0 * p[0])))).collect();
        let ext = extend_by_fields(&base, &coeffs, &frames);
        for (i, p) in mu.points().iter().enumerate() {
            let t = p[0];
            let value = 3.0 * t * t / (1.0 + 2.0 * t);
            let deriv = (6.0 * t * (1.0 + 2.0 * t) - 6.0 * t * t) / (1.0 + 2.0 * t).powi(2);
            assert!((ext.values[(i, 7)] - value).abs() < 1e-12);
            assert!((ext.grads[0][(i, 7)] - deriv).abs() < 1e-12);
        }
    }

    #[test]
    fn two_steps_on_an_interval() {
        let f = FunctionSystem::polynomials(2, vec![0.0], vec![1.0]).unwrap();
        let r = derivative_core(&f, &line_grid(400), 2, 0).unwrap();
        assert!(r.derivative_constants[1] <= r.chained_bound(2));
        assert!(r.derivative_constants[1] > 0.0);
    }
}
