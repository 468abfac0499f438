//! Small dense linear-algebra helpers shared by the numerical modules.

use nalgebra::DMatrix;

/// Determinant of a row-major `n × n` buffer by Gaussian elimination with
/// partial pivoting. The buffer is overwritten.
pub fn det_in_place(a: &mut [f64], n: usize) -> f64 {
    debug_assert_eq!(a.len(), n * n);
    let mut det = 1.0;
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].abs();
        for r in col + 1..n {
            let v = a[r * n + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            det = -det;
        }
        let p = a[col * n + col];
        det *= p;
        for r in col + 1..n {
            let factor = a[r * n + col] / p;
            if factor != 0.0 {
                for c in col + 1..n {
                    a[r * n + c] -= factor * a[col * n + c];
                }
            }
        }
    }
    det
}

/// Determinant of the matrix whose columns are `cols`.
pub fn det_of_columns(cols: &[&[f64]]) -> f64 {
    let n = cols.len();
    let mut buf = vec![0.0; n * n];
    for (j, c) in cols.iter().enumerate() {
        debug_assert_eq!(c.len(), n);
        for (i, &v) in c.iter().enumerate() {
            buf[i * n + j] = v;
        }
    }
    det_in_place(&mut buf, n)
}

pub fn is_symmetric(a: &DMatrix<f64>, tol: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let scale = a.amax().max(1.0);
    (0..a.nrows()).all(|i| (0..i).all(|j| (a[(i, j)] - a[(j, i)]).abs() <= tol * scale))
}

/// Matrix exponential; symmetric inputs go through the eigendecomposition.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    if is_symmetric(a, 0.0) {
        let eig = a.clone().symmetric_eigen();
        let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::exp));
        &eig.eigenvectors * d * eig.eigenvectors.transpose()
    } else {
        a.clone().exp()
    }
}

/// Remove the trace: `A − (tr A / d) I`.
pub fn traceless(a: &DMatrix<f64>) -> DMatrix<f64> {
    let d = a.nrows();
    let mut out = a.clone();
    let shift = a.trace() / d as f64;
    for i in 0..d {
        out[(i, i)] -= shift;
    }
    out
}

/// Numerical rank from singular values relative to the largest one.
pub fn rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let top = sv.max();
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

/// Orthonormal basis starting at the unit vector `u`, completed by
/// Gram–Schmidt over the coordinate vectors; returned as columns.
pub fn complete_basis(u: &[f64]) -> DMatrix<f64> {
    let d = u.len();
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut basis: Vec<Vec<f64>> = vec![u.iter().map(|x| x / norm).collect()];
    for e in 0..d {
        if basis.len() == d {
            break;
        }
        let mut v = vec![0.0; d];
        v[e] = 1.0;
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= dot * y;
            }
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    DMatrix::from_fn(d, d, |i, j| basis[j][i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_matches_nalgebra() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.5, 1.0, 3.0, -2.0, 0.0, 4.0, 1.0]);
        let mut buf: Vec<f64> = m.transpose().iter().copied().collect();
        assert!((det_in_place(&mut buf, 3) - m.determinant()).abs() < 1e-12);
        let c0 = [1.0, 0.0];
        let c1 = [0.0, 1.0];
        assert_eq!(det_of_columns(&[&c1, &c0]), -1.0);
        assert_eq!(det_of_columns(&[&c0, &c0]), 0.0);
    }

    #[test]
    fn exp_of_traceless_has_unit_det() {
        let s = DMatrix::from_row_slice(2, 2, &[0.3, 0.9, -0.4, -0.3]);
        assert!((expm(&s).determinant() - 1.0).abs() < 1e-12);
        let sym = DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.2, -0.5]);
        assert!((expm(&sym) - sym.clone().exp()).amax() < 1e-12);
    }

    #[test]
    fn basis_completion_is_orthonormal() {
        let b = complete_basis(&[1.0, 2.0, -2.0]);
        assert!((b.transpose() * &b - DMatrix::identity(3, 3)).amax() < 1e-12);
        assert!((b[(1, 0)] - 2.0 / 3.0).abs() < 1e-15);
    }
}
