//! Determinant-maximal tuples, sandwich containments and convex bodies.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

const AFFINE_TOL: f64 = 1e-12;
const LP_TOL: f64 = 1e-9;

/// Finite point set in `ℝⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    points: Vec<Vec<f64>>,
}

impl PointSet {
    pub fn new(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
        }
        Ok(Self { dim, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn contains_origin(&self) -> bool {
        self.points.iter().any(|p| p.iter().all(|&x| x == 0.0))
    }

    /// `S ∪ (−S)`.
    pub fn symmetrized(&self) -> PointSet {
        let mut pts = self.points.clone();
        pts.extend(self.points.iter().map(|p| p.iter().map(|x| -x).collect::<Vec<_>>()));
        PointSet { dim: self.dim, points: pts }
    }
}

/// Tuple returned by [`max_det_tuple`].
#[derive(Debug, Clone, PartialEq)]
pub struct DetTuple {
    /// `n` vectors; the last `n − rank` are zero when `S` is degenerate.
    pub vectors: Vec<Vec<f64>>,
    /// Index into `S` of each nonzero vector.
    pub indices: Vec<Option<usize>>,
    pub rank: usize,
    /// `|det|` when `rank = n`, otherwise the `rank`-dimensional volume
    /// `√det(Gram)` of the spanning vectors.
    pub volume: f64,
}

impl DetTuple {
    fn basis(&self) -> DMatrix<f64> {
        let n = self.vectors.first().map_or(0, Vec::len);
        DMatrix::from_fn(n, self.rank, |i, j| self.vectors[j][i])
    }

    /// Coefficients of `s` over the spanning vectors (least squares when the
    /// tuple is degenerate).
    pub fn coefficients(&self, s: &[f64]) -> Vec<f64> {
        coefficients_in(&self.basis(), s)
    }
}

/// `(BᵀB)⁻¹Bᵀ` for a basis with independent columns.
fn left_inverse(basis: &DMatrix<f64>) -> DMatrix<f64> {
    if basis.is_square() {
        if let Some(inv) = basis.clone().try_inverse() {
            return inv;
        }
    }
    let gram = basis.transpose() * basis;
    gram.lu().solve(&basis.transpose()).expect("spanning vectors are independent")
}

fn coefficients_in(basis: &DMatrix<f64>, s: &[f64]) -> Vec<f64> {
    if basis.ncols() == 0 {
        return Vec::new();
    }
    let c = left_inverse(basis) * DVector::from_column_slice(s);
    c.iter().copied().collect()
}

fn gram_volume(basis: &DMatrix<f64>) -> f64 {
    if basis.ncols() == 0 {
        return 0.0;
    }
    if basis.is_square() {
        return basis.determinant().abs();
    }
    (basis.transpose() * basis).determinant().max(0.0).sqrt()
}

/// Tuple of `n` points of `S` maximizing `|det|` under single swaps.
///
/// Starts from the first independent points in index order, then repeatedly
/// performs the swap with the largest determinant ratio `|(C⁻¹ s)_i| > 1`,
/// ties going to the lowest position and point index.
pub fn max_det_tuple(s: &PointSet, n: usize) -> Result<DetTuple> {
    if s.points.is_empty() {
        return Err(Error::EmptySet);
    }
    if n != s.dim {
        return Err(Error::DimensionMismatch { expected: s.dim, got: n });
    }
    let mut chosen: Vec<usize> = Vec::new();
    for (k, p) in s.points.iter().enumerate() {
        if chosen.len() == n {
            break;
        }
        let mut cols: Vec<&Vec<f64>> = chosen.iter().map(|&c| &s.points[c]).collect();
        cols.push(p);
        let m = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
        if crate::linalg::rank(&m, 1e-10) == cols.len() {
            chosen.push(k);
        }
    }
    let rank = chosen.len();
    if rank > 0 {
        loop {
            let basis = DMatrix::from_fn(n, rank, |i, j| s.points[chosen[j]][i]);
            let pinv = left_inverse(&basis);
            let mut best: Option<(f64, usize, usize)> = None;
            for (k, p) in s.points.iter().enumerate() {
                let c = &pinv * DVector::from_column_slice(p);
                for (i, ci) in c.iter().enumerate() {
                    let r = ci.abs();
                    if r > 1.0 + AFFINE_TOL && best.is_none_or(|(b, _, _)| r > b) {
                        best = Some((r, i, k));
                    }
                }
            }
            let Some((_, i, k)) = best else { break };
            let before = gram_volume(&basis);
            let prev = chosen[i];
            chosen[i] = k;
            let after = gram_volume(&DMatrix::from_fn(n, rank, |r, j| s.points[chosen[j]][r]));
            if !(after > before) {
                chosen[i] = prev;
                break;
            }
        }
    }
    let mut vectors: Vec<Vec<f64>> = chosen.iter().map(|&c| s.points[c].clone()).collect();
    let mut indices: Vec<Option<usize>> = chosen.iter().map(|&c| Some(c)).collect();
    vectors.resize(n, vec![0.0; n]);
    indices.resize(n, None);
    let basis = DMatrix::from_fn(n, rank, |i, j| vectors[j][i]);
    let volume = gram_volume(&basis);
    Ok(DetTuple { vectors, indices, rank, volume })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichReport {
    pub k1_in_k: bool,
    pub k_in_kinf: bool,
    pub max_violation: f64,
}

/// Monte Carlo check of `K₁ ⊆ conv(S ∪ −S) ⊆ K_∞`, where `K₁` is the hull of
/// `±v_i` and `K_∞ = {Σ c_i v_i : |c_i| ≤ 1}`.
pub fn sandwich_certify(s: &PointSet, tuple: &DetTuple, samples: usize, seed: u64) -> SandwichReport {
    let basis = tuple.basis();
    let m = tuple.rank;
    let mut violation: f64 = 0.0;
    for p in &s.points {
        let c = coefficients_in(&basis, p);
        let excess = c.iter().map(|x| x.abs() - 1.0).fold(0.0, f64::max);
        let off_span: f64 = {
            let back = &basis * DVector::from_vec(c.clone());
            p.iter().zip(back.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        violation = violation.max(excess).max(off_span);
    }
    let k_in_kinf = violation <= AFFINE_TOL.max(1e-10);

    let hull = HullOracle::new(s.symmetrized().points);
    let worst = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let x = cross_polytope_sample(&basis, m, &mut rng);
            hull.infeasibility(&x)
        })
        .reduce(|| 0.0, f64::max);
    let k1_in_k = worst <= LP_TOL;
    SandwichReport { k1_in_k, k_in_kinf, max_violation: violation.max(worst) }
}

/// Uniform point in the cross-polytope spanned by the basis columns.
fn cross_polytope_sample(basis: &DMatrix<f64>, m: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = basis.nrows();
    if m == 0 {
        return vec![0.0; n];
    }
    let e: Vec<f64> = (0..=m).map(|_| -rng.random::<f64>().max(f64::MIN_POSITIVE).ln()).collect();
    let total: f64 = e.iter().sum();
    let mut x = vec![0.0; n];
    for j in 0..m {
        let c = if rng.random::<bool>() { e[j] / total } else { -e[j] / total };
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += c * basis[(i, j)];
        }
    }
    x
}

/// Membership in the convex hull of a finite set by a phase-I linear program.
#[derive(Debug, Clone)]
pub struct HullOracle {
    points: Vec<Vec<f64>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl HullOracle {
    pub fn new(points: Vec<Vec<f64>>) -> Self {
        let n = points.first().map_or(0, Vec::len);
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for p in &points {
            for i in 0..n {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        Self { points, lo, hi }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.infeasibility(x) <= LP_TOL
    }

    /// Minimal `‖Σλ_k p_k − x‖₁ + |Σλ_k − 1|` over `λ ≥ 0`; zero iff `x` is
    /// in the hull.
    pub fn infeasibility(&self, x: &[f64]) -> f64 {
        if self.points.is_empty() {
            return f64::INFINITY;
        }
        let outside: f64 = x
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&l, &h))| (l - v).max(v - h).max(0.0))
            .fold(0.0, f64::max);
        if outside > LP_TOL {
            return outside;
        }
        let n = x.len();
        let rows = n + 1;
        let k = self.points.len();
        let a = DMatrix::from_fn(rows, k, |i, j| if i < n { self.points[j][i] } else { 1.0 });
        let mut b: Vec<f64> = x.to_vec();
        b.push(1.0);
        phase_one(&a, &b)
    }
}

/// Phase-I simplex for `A λ = b, λ ≥ 0`; returns the optimal sum of
/// artificial variables. Bland's rule prevents cycling.
pub fn phase_one(a: &DMatrix<f64>, b: &[f64]) -> f64 {
    let (rows, k) = a.shape();
    let cols = k + rows;
    // Tableau rows: constraints, then the reduced-cost row.
    let mut t = vec![0.0; (rows + 1) * (cols + 1)];
    let w = cols + 1;
    for i in 0..rows {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..k {
            t[i * w + j] = sign * a[(i, j)];
        }
        t[i * w + k + i] = 1.0;
        t[i * w + cols] = sign * b[i];
    }
    for j in 0..=cols {
        if j >= k && j < cols {
            continue;
        }
        let s: f64 = (0..rows).map(|i| t[i * w + j]).sum();
        t[rows * w + j] = -s;
    }
    let mut basis: Vec<usize> = (k..cols).collect();
    for _ in 0..(50 * cols) {
        let Some(enter) = (0..cols).find(|&j| t[rows * w + j] < -1e-12) else {
            break;
        };
        let mut leave: Option<(f64, usize)> = None;
        for i in 0..rows {
            let v = t[i * w + enter];
            if v > 1e-12 {
                let ratio = t[i * w + cols] / v;
                let better = match leave {
                    None => true,
                    Some((r, li)) => ratio < r - 1e-15 || (ratio <= r + 1e-15 && basis[i] < basis[li]),
                };
                if better {
                    leave = Some((ratio, i));
                }
            }
        }
        let Some((_, r)) = leave else {
            break;
        };
        let piv = t[r * w + enter];
        for j in 0..=cols {
            t[r * w + j] /= piv;
        }
        for i in 0..=rows {
            if i != r {
                let f = t[i * w + enter];
                if f != 0.0 {
                    for j in 0..=cols {
                        t[i * w + j] -= f * t[r * w + j];
                    }
                }
            }
        }
        basis[r] = enter;
    }
    (-t[rows * w + cols]).max(0.0)
}

/// Compact convex body in `ℝⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexBody {
    /// Axis box `Π [lo_i, hi_i]`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Simplex with `n + 1` vertices.
    Simplex { vertices: Vec<Vec<f64>> },
    /// Convex hull of finitely many points.
    VertexHull { points: Vec<Vec<f64>> },
    /// Parallelepiped `center + L [−1, 1]ⁿ`; `axes` holds the columns of `L`.
    SlabBox { center: Vec<f64>, axes: DMatrix<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeEstimate {
    pub volume: f64,
    /// Monte Carlo standard error, zero for exact kinds.
    pub std_error: f64,
    pub degenerate: bool,
}

impl ConvexBody {
    pub fn dim(&self) -> usize {
        match self {
            ConvexBody::Box { lo, .. } => lo.len(),
            ConvexBody::Simplex { vertices } => vertices.first().map_or(0, Vec::len),
            ConvexBody::VertexHull { points } => points.first().map_or(0, Vec::len),
            ConvexBody::SlabBox { center, .. } => center.len(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ConvexBody::Box { .. } => "box",
            ConvexBody::Simplex { .. } => "simplex",
            ConvexBody::VertexHull { .. } => "vertex-hull",
            ConvexBody::SlabBox { .. } => "slab-box",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        let shape = |m: String| Err(Error::ShapeInvalid(m));
        match self {
            ConvexBody::Box { lo, hi } => {
                if hi.len() != n || lo.iter().zip(hi).any(|(l, h)| l > h) {
                    return shape("box bounds must satisfy lo ≤ hi".into());
                }
            }
            ConvexBody::Simplex { vertices } => {
                if vertices.len() != n + 1 || vertices.iter().any(|v| v.len() != n) {
                    return shape(format!("a simplex in ℝ^{n} needs {} vertices", n + 1));
                }
            }
            ConvexBody::VertexHull { points } => {
                if points.is_empty() || points.iter().any(|v| v.len() != n) {
                    return shape("hull points must share one dimension".into());
                }
            }
            ConvexBody::SlabBox { axes, .. } => {
                if axes.shape() != (n, n) {
                    return shape("slab axes must be n × n".into());
                }
            }
        }
        Ok(())
    }

    /// Axis-aligned bounding box.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            ConvexBody::Box { lo, hi } => (lo.clone(), hi.clone()),
            ConvexBody::Simplex { vertices: pts } | ConvexBody::VertexHull { points: pts } => {
                let o = HullOracle::new(pts.clone());
                (o.lo, o.hi)
            }
            ConvexBody::SlabBox { center, axes } => {
                let half: Vec<f64> = (0..center.len()).map(|i| axes.row(i).iter().map(|x| x.abs()).sum()).collect();
                (
                    center.iter().zip(&half).map(|(c, h)| c - h).collect(),
                    center.iter().zip(&half).map(|(c, h)| c + h).collect(),
                )
            }
        }
    }

    /// Image under `x ↦ A x + b`.
    pub fn affine_image(&self, a: &DMatrix<f64>, b: &[f64]) -> ConvexBody {
        let map = |p: &[f64]| -> Vec<f64> {
            let y = a * DVector::from_column_slice(p);
            y.iter().zip(b).map(|(u, v)| u + v).collect()
        };
        match self {
            ConvexBody::Box { lo, hi } => {
                let center: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect();
                let half = DMatrix::from_diagonal(&DVector::from_iterator(
                    lo.len(),
                    lo.iter().zip(hi).map(|(l, h)| 0.5 * (h - l)),
                ));
                ConvexBody::SlabBox { center: map(&center), axes: a * half }
            }
            ConvexBody::Simplex { vertices } => ConvexBody::Simplex { vertices: vertices.iter().map(|v| map(v)).collect() },
            ConvexBody::VertexHull { points } => ConvexBody::VertexHull { points: points.iter().map(|v| map(v)).collect() },
            ConvexBody::SlabBox { center, axes } => ConvexBody::SlabBox { center: map(center), axes: a * axes },
        }
    }

    /// Precomputed membership test.
    pub fn oracle(&self) -> BodyOracle {
        match self {
            ConvexBody::Box { lo, hi } => BodyOracle::Box { lo: lo.clone(), hi: hi.clone() },
            ConvexBody::Simplex { vertices } => {
                let n = self.dim();
                let e = DMatrix::from_fn(n, n, |i, j| vertices[j + 1][i] - vertices[0][i]);
                match e.try_inverse() {
                    Some(inv) => BodyOracle::Simplex { origin: vertices[0].clone(), inv },
                    None => BodyOracle::Hull(HullOracle::new(vertices.clone())),
                }
            }
            ConvexBody::VertexHull { points } => BodyOracle::Hull(HullOracle::new(points.clone())),
            ConvexBody::SlabBox { center, axes } => match axes.clone().try_inverse() {
                Some(inv) => BodyOracle::Slab { center: center.clone(), inv },
                None => BodyOracle::Hull(HullOracle::new(slab_vertices(center, axes))),
            },
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.oracle().contains(x)
    }
}

fn slab_vertices(center: &[f64], axes: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let n = center.len();
    (0..1usize << n)
        .map(|mask| {
            (0..n)
                .map(|i| {
                    center[i] + (0..n).map(|j| if mask >> j & 1 == 1 { axes[(i, j)] } else { -axes[(i, j)] }).sum::<f64>()
                })
                .collect()
        })
        .collect()
}

/// Membership oracle prepared from a [`ConvexBody`].
#[derive(Debug, Clone)]
pub enum BodyOracle {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Simplex { origin: Vec<f64>, inv: DMatrix<f64> },
    Slab { center: Vec<f64>, inv: DMatrix<f64> },
    Hull(HullOracle),
}

impl BodyOracle {
    pub fn contains(&self, x: &[f64]) -> bool {
        let local = |origin: &[f64], inv: &DMatrix<f64>| -> Vec<f64> {
            let n = origin.len();
            (0..n).map(|i| (0..n).map(|j| inv[(i, j)] * (x[j] - origin[j])).sum()).collect()
        };
        match self {
            BodyOracle::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(&v, (&l, &h))| l <= v && v <= h),
            BodyOracle::Simplex { origin, inv } => {
                let y = local(origin, inv);
                y.iter().all(|&c| c >= -AFFINE_TOL) && y.iter().sum::<f64>() <= 1.0 + AFFINE_TOL
            }
            BodyOracle::Slab { center, inv } => local(center, inv).iter().all(|c| c.abs() <= 1.0 + AFFINE_TOL),
            BodyOracle::Hull(h) => h.contains(x),
        }
    }
}

/// Volume of a body: exact except for vertex hulls, which use rejection
/// sampling in the bounding box.
pub fn body_volume(k: &ConvexBody, samples: usize, seed: u64) -> Result<VolumeEstimate> {
    k.validate()?;
    let n = k.dim();
    let exact = |v: f64| VolumeEstimate { volume: v, std_error: 0.0, degenerate: v == 0.0 };
    Ok(match k {
        ConvexBody::Box { lo, hi } => exact(lo.iter().zip(hi).map(|(l, h)| h - l).product()),
        ConvexBody::Simplex { vertices } => {
            let e = DMatrix::from_fn(n, n, |i, j| vertices[j + 1][i] - vertices[0][i]);
            exact(e.determinant().abs() / crate::poly::factorial(n))
        }
        ConvexBody::SlabBox { axes, .. } => exact(2f64.powi(n as i32) * axes.determinant().abs()),
        ConvexBody::VertexHull { points } => {
            let m = DMatrix::from_fn(n, points.len().saturating_sub(1), |i, j| points[j + 1][i] - points[0][i]);
            if crate::linalg::rank(&m, 1e-12) < n {
                return Ok(exact(0.0));
            }
            let oracle = HullOracle::new(points.clone());
            let (lo, hi) = (oracle.lo.clone(), oracle.hi.clone());
            let box_vol: f64 = lo.iter().zip(&hi).map(|(l, h)| h - l).product();
            let samples = samples.max(1);
            const CHUNK: usize = 1024;
            let hits: usize = (0..samples.div_ceil(CHUNK))
                .into_par_iter()
                .map(|c| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(c as u64);
                    let count = CHUNK.min(samples - c * CHUNK);
                    let mut x = vec![0.0; n];
                    (0..count)
                        .filter(|_| {
                            for i in 0..n {
                                x[i] = rng.random_range(lo[i]..=hi[i]);
                            }
                            oracle.contains(&x)
                        })
                        .count()
                })
                .sum();
            let p = hits as f64 / samples as f64;
            VolumeEstimate {
                volume: p * box_vol,
                std_error: box_vol * (p * (1.0 - p) / samples as f64).sqrt(),
                degenerate: false,
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn cube_vertices(n: usize) -> Vec<Vec<f64>> {
        (0..1usize << n)
            .map(|m| (0..n).map(|i| if m >> i & 1 == 1 { 1.0 } else { -1.0 }).collect())
            .collect()
    }

    fn random_set(n: usize, count: usize, seed: u64) -> PointSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = vec![vec![0.0; n]];
        pts.extend((0..count).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>()));
        PointSet::new(n, pts).unwrap()
    }

    fn abs_det(vs: &[Vec<f64>]) -> f64 {
        let n = vs.len();
        DMatrix::from_fn(n, n, |i, j| vs[j][i]).determinant().abs()
    }

    #[test]
    fn unit_square_corners() {
        let s = PointSet::new(2, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(s.contains_origin());
        let t = max_det_tuple(&s, 2).unwrap();
        assert_eq!(t.vectors, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(t.volume, 1.0);
    }

    #[test]
    fn collinear_set_is_padded() {
        let s = PointSet::new(2, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let t = max_det_tuple(&s, 2).unwrap();
        assert_eq!(t.rank, 1);
        assert_eq!(t.vectors, vec![vec![2.0, 0.0], vec![0.0, 0.0]]);
        let r = sandwich_certify(&s, &t, 200, 1);
        assert!(r.k1_in_k && r.k_in_kinf);
    }

    #[test]
    fn cube_vertices_reach_the_hadamard_bound() {
        let pts = cube_vertices(3);
        let mut best: f64 = 0.0;
        for a in &pts {
            for b in &pts {
                for c in &pts {
                    best = best.max(abs_det(&[a.clone(), b.clone(), c.clone()]));
                }
            }
        }
        assert_eq!(best, 8.0 / 2.0);
        let s = PointSet::new(3, pts).unwrap();
        let t = max_det_tuple(&s, 3).unwrap();
        assert!((t.volume - 4.0).abs() < 1e-12);
        let r = sandwich_certify(&s, &t, 500, 2);
        assert!(r.k1_in_k && r.k_in_kinf);
        assert!(r.max_violation < 1e-9);
    }

    #[test]
    fn empty_set_errors() {
        assert_eq!(max_det_tuple(&PointSet::new(2, vec![]).unwrap(), 2).unwrap_err(), Error::EmptySet);
    }

    #[test]
    fn exact_volumes() {
        let b = ConvexBody::Box { lo: vec![-1.0; 3], hi: vec![1.0; 3] };
        assert_eq!(body_volume(&b, 0, 0).unwrap().volume, 8.0);
        let s = ConvexBody::Simplex { vertices: vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]] };
        assert_eq!(body_volume(&s, 0, 0).unwrap().volume, 0.5);
        let slab = ConvexBody::SlabBox { center: vec![1.0, 2.0], axes: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 2.0]) };
        assert_eq!(body_volume(&slab, 0, 0).unwrap().volume, 8.0);
        let flat = ConvexBody::VertexHull { points: vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]] };
        assert!(body_volume(&flat, 100, 0).unwrap().degenerate);
    }

    #[test]
    fn cross_polytope_volume_by_sampling() {
        let mut pts = Vec::new();
        for i in 0..3 {
            let mut e = vec![0.0; 3];
            e[i] = 1.0;
            pts.push(e.clone());
            e[i] = -1.0;
            pts.push(e);
        }
        let v = body_volume(&ConvexBody::VertexHull { points: pts }, 40_000, 9).unwrap();
        assert!((v.volume - 4.0 / 3.0).abs() < 4.0 * v.std_error, "{v:?}");
    }

    #[test]
    fn membership_by_kind() {
        let s = ConvexBody::Simplex { vertices: vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]] };
        assert!(s.contains(&[0.2, 0.2]));
        assert!(!s.contains(&[0.6, 0.6]));
        let h = ConvexBody::VertexHull { points: vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]] };
        assert!(h.contains(&[0.9, 0.9]));
        assert!(!h.contains(&[1.1, 0.5]));
        assert!(h.contains(&[1.0, 0.5]));
        let slab = ConvexBody::SlabBox { center: vec![0.0, 0.0], axes: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, -1.0, 1.0]) };
        assert!(slab.contains(&[0.0, 1.9]));
        assert!(!slab.contains(&[1.5, 1.5]));
    }

    #[test]
    fn affine_images_preserve_membership() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.5, 1.0]);
        let b = [0.3, -0.2];
        let bodies = vec![
            ConvexBody::Box { lo: vec![0.0, -1.0], hi: vec![1.0, 0.5] },
            ConvexBody::Simplex { vertices: vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]] },
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for k in &bodies {
            let img = k.affine_image(&a, &b);
            let ratio = body_volume(&img, 0, 0).unwrap().volume / body_volume(k, 0, 0).unwrap().volume;
            assert!((ratio - a.determinant().abs()).abs() < 1e-12);
            for _ in 0..200 {
                let x: Vec<f64> = (0..2).map(|_| rng.random_range(-1.5..1.5)).collect();
                let y = &a * DVector::from_column_slice(&x);
                let y: Vec<f64> = y.iter().zip(&b).map(|(u, v)| u + v).collect();
                assert_eq!(k.contains(&x), img.contains(&y));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn swap_stable_and_cramer_bounded(seed in 0u64..1000, n in 2usize..4, count in 3usize..15) {
            let s = random_set(n, count, seed);
            let t = max_det_tuple(&s, n).unwrap();
            prop_assert_eq!(t.rank, n);
            for p in s.points() {
                for c in t.coefficients(p) {
                    prop_assert!(c.abs() <= 1.0 + 1e-12);
                }
            }
            for i in 0..n {
                for p in s.points() {
                    let mut v = t.vectors.clone();
                    v[i] = p.clone();
                    prop_assert!(abs_det(&v) <= t.volume * (1.0 + 1e-12));
                }
            }
        }

        #[test]
        fn sandwich_holds_on_random_sets(seed in 0u64..1000) {
            let s = random_set(3, 20, seed);
            let t = max_det_tuple(&s, 3).unwrap();
            let r = sandwich_certify(&s, &t, 500, seed);
            prop_assert!(r.k1_in_k && r.k_in_kinf, "{:?}", r);
        }

        #[test]
        fn hull_membership_agrees_with_vertex_combinations(seed in 0u64..1000) {
            let s = random_set(2, 6, seed);
            let h = HullOracle::new(s.points().to_vec());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w: Vec<f64> = (0..s.points().len()).map(|_| rng.random::<f64>()).collect();
            let tot: f64 = w.iter().sum();
            let x: Vec<f64> = (0..2).map(|i| s.points().iter().zip(&w).map(|(p, wi)| p[i] * wi / tot).sum()).collect();
            prop_assert!(h.contains(&x));
            let far: Vec<f64> = x.iter().map(|v| v + 10.0).collect();
            prop_assert!(!h.contains(&far));
        }
    }
}
