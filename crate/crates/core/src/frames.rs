//! Tight frames and explicit nondegenerate embeddings.
//!
//! Highest-order components are built from two kinds of homogeneous
//! polynomials of degree `κ`: normalized monomials `t^α/√α!` whose exponents
//! are closed under cyclic shifts, and combinations of pure powers
//! `Σ_j φ_{j,k} t_j^κ/√κ!` driven by a uniform normalized tight frame. Both
//! kinds balance the two Gram systems that characterize critical points of
//! the orbit norm.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::index::{binomial, kappa_sequence, monomials_of_degree};
use crate::poly::{factorial, MultiIndex, Polynomial, PolynomialMap};

const FRAME_TOL: f64 = 1e-12;

/// A finite frame of `d` vectors in `ℝ^{d0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    d0: usize,
    vectors: Vec<Vec<f64>>,
}

impl Frame {
    pub fn new(d0: usize, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if d0 == 0 || vectors.is_empty() {
            return Err(Error::InvalidDimension("frame needs d0 >= 1 and at least one vector".into()));
        }
        for v in &vectors {
            if v.len() != d0 {
                return Err(Error::DimensionMismatch { expected: d0, got: v.len() });
            }
        }
        Ok(Frame { d0, vectors })
    }

    pub fn d0(&self) -> usize {
        self.d0
    }

    /// Number of vectors.
    pub fn d(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// `φ_{j,k}`: coordinate `k` of vector `j` (both 0-based).
    pub fn coordinate(&self, j: usize, k: usize) -> f64 {
        self.vectors[j][k]
    }

    /// Frame operator `Σ_j φ_j φ_jᵀ`.
    pub fn frame_operator(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.d0, self.d0);
        for v in &self.vectors {
            for a in 0..self.d0 {
                for b in 0..self.d0 {
                    s[(a, b)] += v[a] * v[b];
                }
            }
        }
        s
    }

    /// Largest entry of `|Σ_j φ_j φ_jᵀ − I|`.
    pub fn tightness_residual(&self) -> f64 {
        let s = self.frame_operator();
        let mut worst = 0.0f64;
        for a in 0..self.d0 {
            for b in 0..self.d0 {
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((s[(a, b)] - target).abs());
            }
        }
        worst
    }

    /// Largest deviation of `‖φ_j‖²` from `d0/d`.
    pub fn uniformity_residual(&self) -> f64 {
        let target = self.d0 as f64 / self.d() as f64;
        self.vectors
            .iter()
            .map(|v| (v.iter().map(|x| x * x).sum::<f64>() - target).abs())
            .fold(0.0, f64::max)
    }
}

/// Harmonic uniform normalized tight frame of `d` vectors in `ℝ^{d0}`.
///
/// The coordinates are `d0` rows of the orthogonal real Fourier matrix of
/// size `d`: cosine/sine pairs at frequencies `1, 2, …`, plus the
/// alternating row (even `d`) or the constant row when `d0` is odd.
pub fn harmonic_untf(d0: usize, d: usize) -> Result<Frame> {
    if d0 == 0 || d0 > d {
        return Err(Error::InvalidDimension(format!("harmonic frame needs 1 <= d0 <= d, got d0 = {d0}, d = {d}")));
    }
    let n = d as f64;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(d0);
    let pairs_available = (d - 1) / 2;
    let mut pairs = d0 / 2;
    let mut singles = d0 % 2;
    if pairs > pairs_available {
        // only possible for d0 = d with d even: both real rows are needed
        pairs = pairs_available;
        singles = d0 - 2 * pairs;
    }
    if singles >= 1 {
        if d % 2 == 0 {
            rows.push((0..d).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 } / n.sqrt()).collect());
        } else {
            rows.push(vec![1.0 / n.sqrt(); d]);
        }
    }
    if singles == 2 {
        rows.push(vec![1.0 / n.sqrt(); d]);
    }
    let s = (2.0 / n).sqrt();
    for m in 1..=pairs {
        let w = 2.0 * PI * m as f64 / n;
        rows.push((0..d).map(|j| s * (w * j as f64).cos()).collect());
        rows.push((0..d).map(|j| s * (w * j as f64).sin()).collect());
    }
    let vectors = (0..d).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let frame = Frame::new(d0, vectors)?;
    let (t, u) = (frame.tightness_residual(), frame.uniformity_residual());
    if t > FRAME_TOL || u > FRAME_TOL {
        return Err(Error::InvalidDimension(format!(
            "harmonic frame ({d0}, {d}) failed verification: tightness {t:e}, uniformity {u:e}"
        )));
    }
    Ok(frame)
}

/// Inner product `Σ_α k!·α!·c_α·d_α` on homogeneous polynomials of degree `k`.
pub fn bombieri_inner(p: &Polynomial, q: &Polynomial, k: usize) -> Result<f64> {
    if !p.is_homogeneous(k) || !q.is_homogeneous(k) {
        return Err(Error::NotHomogeneous(k));
    }
    let kf = factorial(k);
    Ok(p.terms().map(|(a, c)| kf * a.factorial() * c * q.coefficient(a)).sum())
}

/// How a member of a [`PolynomialCollection`] was produced.
#[derive(Debug, Clone, PartialEq)]
pub enum MemberTag {
    Monomial(MultiIndex),
    /// Uses column `k` (0-based) of the collection's frame.
    Untf(usize),
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialCollection {
    d: usize,
    kappa: usize,
    members: Vec<Polynomial>,
    tags: Vec<MemberTag>,
    frame: Option<Frame>,
}

impl PolynomialCollection {
    /// Arbitrary homogeneous members, tagged [`MemberTag::Custom`].
    pub fn custom(d: usize, kappa: usize, members: Vec<Polynomial>) -> Result<Self> {
        if d == 0 || kappa == 0 {
            return Err(Error::InvalidDimension("collection needs d >= 1 and degree >= 1".into()));
        }
        for p in &members {
            if p.nvars() != d {
                return Err(Error::DimensionMismatch { expected: d, got: p.nvars() });
            }
            if !p.is_homogeneous(kappa) {
                return Err(Error::NotHomogeneous(kappa));
            }
        }
        let tags = vec![MemberTag::Custom; members.len()];
        Ok(PolynomialCollection { d, kappa, members, tags, frame: None })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn m(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> &[Polynomial] {
        &self.members
    }

    pub fn tags(&self) -> &[MemberTag] {
        &self.tags
    }

    pub fn frame(&self) -> Option<&Frame> {
        self.frame.as_ref()
    }

    /// Number of frame-driven members.
    pub fn d0(&self) -> usize {
        self.tags.iter().filter(|t| matches!(t, MemberTag::Untf(_))).count()
    }
}

/// Cyclic classes of non-pure monomials of degree `kappa`, ordered by their
/// first member in graded-lex order.
fn cyclic_classes(d: usize, kappa: usize) -> Vec<Vec<MultiIndex>> {
    let mut seen = std::collections::BTreeSet::new();
    let mut classes = Vec::new();
    for alpha in monomials_of_degree(d, kappa) {
        if alpha.is_pure_power() || seen.contains(&alpha) {
            continue;
        }
        let mut class = vec![alpha.clone()];
        seen.insert(alpha.clone());
        let mut next = alpha.rotate();
        while next != alpha {
            if seen.insert(next.clone()) {
                class.push(next.clone());
            }
            next = next.rotate();
        }
        classes.push(class);
    }
    classes
}

/// Admissible collection of `m` homogeneous polynomials of degree `kappa` in
/// `d` variables.
///
/// Cyclic classes are taken greedily whenever they fit in the remaining
/// count; whatever is left (at most `d`) is filled with frame-driven
/// members. The construction is deterministic, so `seed` does not affect it.
pub fn admissible_collection(d: usize, kappa: usize, m: usize, _seed: u64) -> Result<PolynomialCollection> {
    if d == 0 || kappa == 0 {
        return Err(Error::InvalidDimension("collection needs d >= 1 and degree >= 1".into()));
    }
    let total = binomial((d + kappa - 1) as u64, (d - 1) as u64) as usize;
    if m == 0 || m > total {
        return Err(Error::InfeasibleM { m, reason: format!("must lie in 1..={total}") });
    }
    let mut members = Vec::with_capacity(m);
    let mut tags = Vec::with_capacity(m);
    let mut remaining = m;
    for class in cyclic_classes(d, kappa) {
        if class.len() > remaining {
            continue;
        }
        remaining -= class.len();
        for alpha in class {
            members.push(Polynomial::monomial(alpha.clone(), 1.0 / alpha.factorial().sqrt()));
            tags.push(MemberTag::Monomial(alpha));
        }
    }
    if remaining > d {
        return Err(Error::InfeasibleM { m, reason: format!("remainder {remaining} exceeds d = {d}") });
    }
    let mut frame = None;
    if remaining > 0 {
        let fr = harmonic_untf(remaining, d)?;
        let s = 1.0 / factorial(kappa).sqrt();
        for k in 0..remaining {
            let terms = (0..d).map(|j| {
                let mut e = vec![0u32; d];
                e[j] = kappa as u32;
                (MultiIndex::new(e), s * fr.coordinate(j, k))
            });
            members.push(Polynomial::from_terms(d, terms));
            tags.push(MemberTag::Untf(k));
        }
        frame = Some(fr);
    }
    Ok(PolynomialCollection { d, kappa, members, tags, frame })
}

/// Measured Gram systems of a collection.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalReport {
    pub lambda1: f64,
    pub lambda2: f64,
    pub residual_first: f64,
    pub residual_second: f64,
}

fn diagonal_report(g: &DMatrix<f64>) -> (f64, f64) {
    let n = g.nrows();
    if n == 0 {
        return (0.0, 0.0);
    }
    let lambda = (0..n).map(|i| g[(i, i)]).sum::<f64>() / n as f64;
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            let target = if a == b { lambda } else { 0.0 };
            worst = worst.max((g[(a, b)] - target).abs());
        }
    }
    (lambda, worst)
}

/// Evaluates `G1[ℓ,ℓ'] = Σ_i ⟨∂_i p_ℓ, ∂_i p_ℓ'⟩` and
/// `G2[i,i'] = Σ_ℓ ⟨∂_i p_ℓ, ∂_i' p_ℓ⟩` in degree `κ − 1`.
pub fn critical_check(coll: &PolynomialCollection) -> CriticalReport {
    let (d, m, k) = (coll.d, coll.m(), coll.kappa - 1);
    let partials: Vec<Vec<Polynomial>> =
        coll.members.iter().map(|p| (0..d).map(|i| p.partial(i)).collect()).collect();
    let inner = |p: &Polynomial, q: &Polynomial| bombieri_inner(p, q, k).expect("partials of homogeneous members");
    let mut g1 = DMatrix::zeros(m, m);
    for l in 0..m {
        for l2 in l..m {
            let v: f64 = (0..d).map(|i| inner(&partials[l][i], &partials[l2][i])).sum();
            g1[(l, l2)] = v;
            g1[(l2, l)] = v;
        }
    }
    let mut g2 = DMatrix::zeros(d, d);
    for i in 0..d {
        for i2 in i..d {
            let v: f64 = (0..m).map(|l| inner(&partials[l][i], &partials[l][i2])).sum();
            g2[(i, i2)] = v;
            g2[(i2, i)] = v;
        }
    }
    let (lambda1, residual_first) = diagonal_report(&g1);
    let (lambda2, residual_second) = diagonal_report(&g2);
    CriticalReport { lambda1, lambda2, residual_first, residual_second }
}

/// Embedding of `ℝ^d` into `ℝ^n`: every nonconstant monomial of degree below
/// `κ_n`, followed by an admissible collection of degree `κ_n`.
pub fn build_embedding(d: usize, n: usize, seed: u64) -> Result<PolynomialMap> {
    if d == 0 || n <= d {
        return Err(Error::InvalidDimension(format!("embedding needs 1 <= d < n, got d = {d}, n = {n}")));
    }
    let kappa = *kappa_sequence(d, n)?.last().expect("n >= 1");
    let mut components: Vec<Polynomial> = Vec::with_capacity(n);
    for degree in 1..kappa {
        components.extend(monomials_of_degree(d, degree).into_iter().map(|a| Polynomial::monomial(a, 1.0)));
    }
    let m = n - components.len();
    components.extend(admissible_collection(d, kappa, m, seed)?.members);
    PolynomialMap::new(d, components)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mono(e: &[u32], c: f64) -> Polynomial {
        Polynomial::monomial(MultiIndex::new(e.to_vec()), c)
    }

    #[test]
    fn mercedes_frame() {
        let f = harmonic_untf(2, 3).unwrap();
        for (j, v) in f.vectors().iter().enumerate() {
            let angle = v[1].atan2(v[0]).to_degrees().rem_euclid(360.0);
            assert!((angle - 120.0 * j as f64).abs() < 1e-9, "{angle}");
            assert!((v[0] * v[0] + v[1] * v[1] - 2.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn small_frames() {
        let f = harmonic_untf(1, 2).unwrap();
        let v: Vec<f64> = f.vectors().iter().map(|v| v[0]).collect();
        let h = 1.0 / 2f64.sqrt();
        assert!((v[0].abs() - h).abs() < 1e-15 && (v[0] + v[1]).abs() < 1e-15);
        for d in 1..=8 {
            let f = harmonic_untf(d, d).unwrap();
            let g = DMatrix::from_fn(d, d, |a, b| f.vectors()[a].iter().zip(&f.vectors()[b]).map(|(x, y)| x * y).sum::<f64>());
            assert!((g - DMatrix::identity(d, d)).abs().max() < 1e-12);
        }
        assert!(harmonic_untf(0, 3).is_err());
        assert!(harmonic_untf(4, 3).is_err());
    }

    #[test]
    fn all_frames_verified() {
        for d in 1..=8 {
            for d0 in 1..=d {
                let f = harmonic_untf(d0, d).unwrap();
                assert!(f.tightness_residual() <= 1e-12);
                assert!(f.uniformity_residual() <= 1e-12);
                // tightness checked independently on basis vectors
                for a in 0..d0 {
                    let s: f64 = f.vectors().iter().map(|v| v[a] * v[a]).sum();
                    assert!((s - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn inner_products() {
        let xy = mono(&[1, 1], 1.0);
        assert_eq!(bombieri_inner(&xy, &xy, 2).unwrap(), 2.0);
        assert_eq!(bombieri_inner(&mono(&[2, 0], 1.0), &mono(&[0, 2], 1.0), 2).unwrap(), 0.0);
        let a = mono(&[2, 1], 1.0).partial(0);
        let b = mono(&[3, 0], 1.0).partial(1);
        assert_eq!(bombieri_inner(&a, &b, 2).unwrap(), 0.0);
        let mixed = &xy + &mono(&[1, 0], 1.0);
        assert!(matches!(bombieri_inner(&mixed, &xy, 2), Err(Error::NotHomogeneous(2))));
    }

    #[test]
    fn inner_product_matches_monomial_formula() {
        // ⟨∂_i t^α, ∂_i' t^β⟩ = α_i β_i' (κ−1)! (α−e_i)! δ_{α−e_i, β−e_i'}
        let kappa = 3;
        let mons = monomials_of_degree(3, kappa);
        for a in &mons {
            for b in &mons {
                for i in 0..3 {
                    for i2 in 0..3 {
                        let lhs = bombieri_inner(
                            &Polynomial::monomial(a.clone(), 1.0).partial(i),
                            &Polynomial::monomial(b.clone(), 1.0).partial(i2),
                            kappa - 1,
                        )
                        .unwrap();
                        let (ai, bi) = (a.exponents()[i], b.exponents()[i2]);
                        let rhs = match (a.checked_sub(&MultiIndex::unit(3, i)), b.checked_sub(&MultiIndex::unit(3, i2))) {
                            (Some(x), Some(y)) if x == y => (ai * bi) as f64 * factorial(kappa - 1) * x.factorial(),
                            _ => 0.0,
                        };
                        assert_eq!(lhs, rhs);
                    }
                }
            }
        }
    }

    #[test]
    fn collection_examples() {
        let c = admissible_collection(2, 2, 3, 0).unwrap();
        assert_eq!(c.tags()[0], MemberTag::Monomial(MultiIndex::new(vec![1, 1])));
        assert_eq!(c.d0(), 2);
        let c = admissible_collection(2, 2, 1, 0).unwrap();
        assert_eq!(c.members(), &[mono(&[1, 1], 1.0)]);
        let c = admissible_collection(3, 2, 4, 0).unwrap();
        assert_eq!(c.d0(), 1);
        let mons: Vec<_> = c.tags()[..3].iter().map(|t| match t {
            MemberTag::Monomial(a) => a.exponents().to_vec(),
            _ => panic!(),
        }).collect();
        assert_eq!(mons, vec![vec![1, 1, 0], vec![1, 0, 1], vec![0, 1, 1]]);
        assert!(matches!(admissible_collection(2, 2, 4, 0), Err(Error::InfeasibleM { .. })));
        assert!(matches!(admissible_collection(2, 2, 0, 0), Err(Error::InfeasibleM { .. })));
    }

    #[test]
    fn critical_examples() {
        let r = critical_check(&admissible_collection(2, 2, 1, 0).unwrap());
        assert_eq!(r.lambda1, 2.0);
        assert_eq!(r.residual_first, 0.0);
        assert_eq!(r.residual_second, 0.0);
        let r = critical_check(&admissible_collection(2, 2, 3, 0).unwrap());
        assert!((r.lambda1 - 2.0).abs() < 1e-12);
        assert!(r.residual_first <= 1e-12 && r.residual_second <= 1e-12);
    }

    #[test]
    fn broken_cyclic_closure_is_detected() {
        // x^2 y without its rotation x y^2
        let c = PolynomialCollection::custom(2, 3, vec![mono(&[2, 1], 1.0 / 2f64.sqrt())]).unwrap();
        let r = critical_check(&c);
        assert!(r.residual_second > 0.1);
    }

    #[test]
    fn every_count_is_feasible_and_critical() {
        for d in 1..=3 {
            for kappa in 2..=3 {
                let total = binomial((d + kappa - 1) as u64, (d - 1) as u64) as usize;
                for m in 1..=total {
                    let c = admissible_collection(d, kappa, m, 0).unwrap();
                    assert_eq!(c.m(), m);
                    assert!(c.d0() <= d);
                    let r = critical_check(&c);
                    assert!((r.lambda1 - factorial(kappa)).abs() <= 1e-10, "{d} {kappa} {m}");
                    assert!(r.residual_first <= 1e-10 && r.residual_second <= 1e-10, "{d} {kappa} {m} {r:?}");
                }
            }
        }
    }

    #[test]
    fn linear_frames_break_the_second_system() {
        // degree one with fewer members than variables: G2 is a rank-d0 projection
        let r = critical_check(&admissible_collection(2, 1, 1, 0).unwrap());
        assert!((r.lambda1 - 1.0).abs() < 1e-12);
        assert!((r.residual_second - 0.5).abs() < 1e-12);
        let r = critical_check(&admissible_collection(3, 1, 3, 0).unwrap());
        assert!(r.residual_second < 1e-12);
    }

    #[test]
    fn embedding_examples() {
        let f = build_embedding(2, 3, 0).unwrap();
        assert_eq!(f.components(), &[mono(&[1, 0], 1.0), mono(&[0, 1], 1.0), mono(&[1, 1], 1.0)]);
        let f = build_embedding(1, 3, 0).unwrap();
        assert_eq!(f.components()[2].coefficient(&MultiIndex::new(vec![3])), 1.0 / 6f64.sqrt());
        let f = build_embedding(2, 5, 0).unwrap();
        assert_eq!(f.n(), 5);
        assert!(f.components()[2..].iter().all(|p| p.is_homogeneous(2)));
        assert!(build_embedding(2, 2, 0).is_err());
    }
}
