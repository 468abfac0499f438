//! Index combinatorics: the column heights `κ_j`, the box diagram `Λ_{d,n}`,
//! the homogeneous dimension `Q`, and graded monomial enumeration.
//!
//! Everything here is exact integer arithmetic.

use crate::error::{Error, Result};
use crate::poly::MultiIndex;

/// Binomial coefficient `C(n, k)`, saturating at `u64::MAX`.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Number of polynomials of total degree at most `k` in `d` variables.
pub fn poly_space_dim(d: usize, k: usize) -> u64 {
    binomial((d + k) as u64, d as u64)
}

fn check_dims(d: usize, n: usize) -> Result<()> {
    if d < 1 {
        return Err(Error::InvalidDimension(format!("d = {d} must be at least 1")));
    }
    if n < d {
        return Err(Error::InvalidDimension(format!("n = {n} must be at least d = {d}")));
    }
    Ok(())
}

/// Smallest `k` with `C(d + k, d) >= j + 1`.
fn kappa(d: usize, j: usize) -> usize {
    let mut k = 1;
    while poly_space_dim(d, k) < (j + 1) as u64 {
        k += 1;
    }
    k
}

/// `(κ_1, …, κ_n)`.
pub fn kappa_sequence(d: usize, n: usize) -> Result<Vec<usize>> {
    check_dims(d, n)?;
    Ok((1..=n).map(|j| kappa(d, j)).collect())
}

/// Homogeneous dimension `Q = Σ κ_j`.
pub fn homogeneous_dimension(d: usize, n: usize) -> Result<usize> {
    Ok(kappa_sequence(d, n)?.iter().sum())
}

/// The index set `Λ_{d,n}` together with its column heights.
///
/// `lambda` holds 1-based pairs `(j, k)` in lexicographic order: column by
/// column, bottom to top within a column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    d: usize,
    n: usize,
    kappa: Vec<usize>,
    lambda: Vec<(usize, usize)>,
}

impl IndexSet {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        let kappa = kappa_sequence(d, n)?;
        let lambda = kappa
            .iter()
            .enumerate()
            .flat_map(|(j, &kj)| (1..=kj).map(move |k| (j + 1, k)))
            .collect();
        Ok(Self { d, n, kappa, lambda })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kappa(&self) -> &[usize] {
        &self.kappa
    }

    pub fn lambda(&self) -> &[(usize, usize)] {
        &self.lambda
    }

    /// `Q = |Λ|`.
    pub fn q(&self) -> usize {
        self.lambda.len()
    }

    /// Highest derivative order appearing in any column (`κ_n`).
    pub fn max_order(&self) -> usize {
        *self.kappa.last().expect("n >= 1")
    }

    /// Offsets of each column's slots inside a flat `Q`-tuple.
    pub fn column_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.n + 1);
        let mut acc = 0;
        offsets.push(0);
        for &k in &self.kappa {
            acc += k;
            offsets.push(acc);
        }
        offsets
    }
}

/// Alias of [`IndexSet::new`].
pub fn index_set(d: usize, n: usize) -> Result<IndexSet> {
    IndexSet::new(d, n)
}

/// All exponent vectors of total degree exactly `degree` in `d` variables,
/// in lexicographically descending order (`x^2, xy, y^2` for `d = 2`).
pub fn monomials_of_degree(d: usize, degree: usize) -> Vec<MultiIndex> {
    fn rec(d: usize, remaining: usize, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if prefix.len() + 1 == d {
            prefix.push(remaining as u32);
            out.push(MultiIndex::new(prefix.clone()));
            prefix.pop();
            return;
        }
        for e in (0..=remaining).rev() {
            prefix.push(e as u32);
            rec(d, remaining - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if d == 0 {
        return out;
    }
    rec(d, degree, &mut Vec::with_capacity(d), &mut out);
    out
}

/// First `count` nonconstant monomials in graded lexicographic order.
pub fn graded_monomials(d: usize, count: usize) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(count);
    let mut degree = 1;
    while out.len() < count && d > 0 {
        for m in monomials_of_degree(d, degree) {
            if out.len() == count {
                break;
            }
            out.push(m);
        }
        degree += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(e: &[u32]) -> MultiIndex {
        MultiIndex::new(e.to_vec())
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa_sequence(2, 5).unwrap(), vec![1, 1, 2, 2, 2]);
        assert_eq!(kappa_sequence(1, 3).unwrap(), vec![1, 2, 3]);
        assert_eq!(kappa_sequence(2, 2).unwrap(), vec![1, 1]);
    }

    #[test]
    fn kappa_rejects_bad_dimensions() {
        assert_eq!(kappa_sequence(0, 3).unwrap_err().name(), "invalid-dimension");
        assert_eq!(kappa_sequence(3, 2).unwrap_err().name(), "invalid-dimension");
        assert!(homogeneous_dimension(4, 1).is_err());
        assert!(IndexSet::new(0, 0).is_err());
    }

    #[test]
    fn homogeneous_dimension_examples() {
        assert_eq!(homogeneous_dimension(1, 2).unwrap(), 3);
        assert_eq!(homogeneous_dimension(2, 3).unwrap(), 4);
        assert_eq!(homogeneous_dimension(2, 5).unwrap(), 8);
    }

    #[test]
    fn index_set_examples() {
        let s = IndexSet::new(2, 3).unwrap();
        assert_eq!(s.lambda(), &[(1, 1), (2, 1), (3, 1), (3, 2)]);
        assert_eq!(s.q(), 4);
        let s = IndexSet::new(1, 2).unwrap();
        assert_eq!(s.lambda(), &[(1, 1), (2, 1), (2, 2)]);
        assert_eq!(s.q(), 3);
        let s = IndexSet::new(3, 3).unwrap();
        assert_eq!(s.lambda(), &[(1, 1), (2, 1), (3, 1)]);
        assert_eq!(s.column_offsets(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn graded_monomial_examples() {
        assert_eq!(graded_monomials(2, 3), vec![mi(&[1, 0]), mi(&[0, 1]), mi(&[2, 0])]);
        assert_eq!(graded_monomials(1, 3), vec![mi(&[1]), mi(&[2]), mi(&[3])]);
        assert_eq!(
            graded_monomials(2, 5),
            vec![mi(&[1, 0]), mi(&[0, 1]), mi(&[2, 0]), mi(&[1, 1]), mi(&[0, 2])]
        );
    }

    #[test]
    fn monomial_counts_match_binomials() {
        for d in 1..5 {
            for k in 0..5 {
                assert_eq!(
                    monomials_of_degree(d, k).len() as u64,
                    binomial((d + k - 1) as u64, (d - 1) as u64)
                );
            }
        }
    }

    /// Exhaustive oracle: minimum total degree over all n-subsets of the
    /// nonconstant monomials of degree ≤ κ_n.
    fn brute_force_q(d: usize, n: usize) -> usize {
        let top = *kappa_sequence(d, n).unwrap().last().unwrap();
        let degrees: Vec<usize> = (1..=top)
            .flat_map(|k| std::iter::repeat_n(k, monomials_of_degree(d, k).len()))
            .collect();
        fn best(degrees: &[usize], start: usize, left: usize, acc: usize, cur: &mut usize) {
            if left == 0 {
                *cur = (*cur).min(acc);
                return;
            }
            if degrees.len() - start < left {
                return;
            }
            // Any completion costs at least the next `left` degrees (ascending order).
            let floor: usize = degrees[start..start + left].iter().sum();
            if acc + floor >= *cur {
                return;
            }
            for i in start..=degrees.len() - left {
                best(degrees, i + 1, left - 1, acc + degrees[i], cur);
            }
        }
        let mut cur = usize::MAX;
        best(&degrees, 0, n, 0, &mut cur);
        cur
    }

    #[test]
    fn q_matches_exhaustive_minimum() {
        for n in 1..=12 {
            for d in 1..=n {
                assert_eq!(
                    homogeneous_dimension(d, n).unwrap(),
                    brute_force_q(d, n),
                    "d={d} n={n}"
                );
            }
        }
    }

    #[test]
    fn knot_and_slope_identities() {
        for d in 1..=3usize {
            for k in 1..=3usize {
                let c = poly_space_dim(d, k) as usize;
                // Q = k d C / (d + 1), exact since (d+1) | k d C at the knots.
                assert_eq!(k * d * c % (d + 1), 0);
                assert_eq!(homogeneous_dimension(d, c - 1).unwrap(), k * d * c / (d + 1));
            }
            for n in d..20 {
                let kap = kappa_sequence(d, n + 1).unwrap();
                assert_eq!(
                    homogeneous_dimension(d, n + 1).unwrap() - homogeneous_dimension(d, n).unwrap(),
                    kap[n]
                );
            }
        }
    }
}
