//! Dense multilinear forms on `ℝ^d` and the affine curvature tensor of a
//! polynomial immersion.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::index::IndexSet;
use crate::linalg::det_in_place;
use crate::poly::{Jet, MultiIndex, PolynomialMap};

/// Default limit on the number of dense entries `d^Q`.
pub const DEFAULT_ENTRY_CAP: usize = 1 << 20;

/// Dense `order`-linear form on `ℝ^dim`, row-major with the first slot most
/// significant.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dim: usize,
    order: usize,
    entries: Vec<f64>,
}

impl Tensor {
    pub fn new(dim: usize, order: usize, entries: Vec<f64>) -> Result<Self> {
        let expected = checked_size(dim, order, usize::MAX)?;
        if entries.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: entries.len() });
        }
        Ok(Self { dim, order, entries })
    }

    /// The bilinear form with matrix `a`.
    pub fn bilinear(a: &DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::ShapeInvalid(format!("{}x{} is not square", a.nrows(), a.ncols())));
        }
        let d = a.nrows();
        Tensor::new(d, 2, (0..d * d).map(|k| a[(k / d, k % d)]).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.entries[self.flat(idx)]
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.order);
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum()
    }

    /// Mode product in slot `q`: `out[…, j, …] = Σ_i m[j, i] · in[…, i, …]`.
    pub fn mode_product(&self, q: usize, m: &DMatrix<f64>) -> Tensor {
        let d = self.dim;
        let stride = d.pow((self.order - 1 - q) as u32);
        let outer = self.entries.len() / (stride * d);
        let mut out = vec![0.0; self.entries.len()];
        for o in 0..outer {
            let base = o * stride * d;
            for inner in 0..stride {
                for j in 0..d {
                    let mut acc = 0.0;
                    for i in 0..d {
                        acc += m[(j, i)] * self.entries[base + i * stride + inner];
                    }
                    out[base + j * stride + inner] = acc;
                }
            }
        }
        Tensor { dim: d, order: self.order, entries: out }
    }

    /// Apply `m` in every slot.
    pub fn transform(&self, m: &DMatrix<f64>) -> Tensor {
        (0..self.order).fold(self.clone(), |t, q| t.mode_product(q, m))
    }

    /// Gram matrix of the slot-`q` unfolding: `C[i, i'] = Σ T[…i…] T[…i'…]`.
    pub fn mode_gram(&self, q: usize) -> DMatrix<f64> {
        let d = self.dim;
        let stride = d.pow((self.order - 1 - q) as u32);
        let outer = self.entries.len() / (stride * d);
        let mut c = DMatrix::zeros(d, d);
        for o in 0..outer {
            let base = o * stride * d;
            for inner in 0..stride {
                for i in 0..d {
                    let a = self.entries[base + i * stride + inner];
                    if a == 0.0 {
                        continue;
                    }
                    for k in 0..d {
                        c[(i, k)] += a * self.entries[base + k * stride + inner];
                    }
                }
            }
        }
        c
    }
}

fn checked_size(d: usize, q: usize, cap: usize) -> Result<usize> {
    let entries = (d as u128).checked_pow(q as u32).unwrap_or(u128::MAX);
    if entries > cap as u128 {
        return Err(Error::SizeCapExceeded { entries, cap });
    }
    Ok(entries as usize)
}

/// The curvature tensor `A_p` of an immersion at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureTensor {
    index_set: IndexSet,
    tensor: Tensor,
}

impl CurvatureTensor {
    pub fn d(&self) -> usize {
        self.tensor.dim
    }

    pub fn q(&self) -> usize {
        self.tensor.order
    }

    pub fn index_set(&self) -> &IndexSet {
        &self.index_set
    }

    pub fn tensor(&self) -> &Tensor {
        &self.tensor
    }

    pub fn entries(&self) -> &[f64] {
        &self.tensor.entries
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.tensor.get(idx)
    }
}

fn check_shapes(f: &PolynomialMap, p: &[f64], set: &IndexSet) -> Result<()> {
    if set.d() != f.d() {
        return Err(Error::DimensionMismatch { expected: f.d(), got: set.d() });
    }
    if set.n() != f.n() {
        return Err(Error::DimensionMismatch { expected: f.n(), got: set.n() });
    }
    if p.len() != f.d() {
        return Err(Error::DimensionMismatch { expected: f.d(), got: p.len() });
    }
    Ok(())
}

/// Assemble `A_p` with the default entry cap.
pub fn assemble_tensor(f: &PolynomialMap, p: &[f64], set: &IndexSet) -> Result<CurvatureTensor> {
    assemble_tensor_with_cap(f, p, set, DEFAULT_ENTRY_CAP)
}

/// Assemble `A_p`; refuses when `d^Q` exceeds `cap`.
pub fn assemble_tensor_with_cap(
    f: &PolynomialMap,
    p: &[f64],
    set: &IndexSet,
    cap: usize,
) -> Result<CurvatureTensor> {
    check_shapes(f, p, set)?;
    let d = set.d();
    let n = set.n();
    let q = set.q();
    let size = checked_size(d, q, cap)?;
    let jet = f.jet(p, set.max_order())?;

    // Per column block, the n-vector for each assignment of its κ_j directions.
    let kappa = set.kappa();
    let tables: Vec<Vec<Vec<f64>>> = kappa.iter().map(|&k| block_table(&jet, d, k)).collect();
    let block_sizes: Vec<usize> = kappa.iter().map(|&k| d.pow(k as u32)).collect();

    let entries: Vec<f64> = (0..size)
        .into_par_iter()
        .map_init(
            || vec![0.0; n * n],
            |buf, flat| {
                let mut rest = flat;
                for j in (0..n).rev() {
                    let sub = rest % block_sizes[j];
                    rest /= block_sizes[j];
                    let col = &tables[j][sub];
                    for (i, &v) in col.iter().enumerate() {
                        buf[i * n + j] = v;
                    }
                }
                det_in_place(buf, n)
            },
        )
        .collect();
    Ok(CurvatureTensor { index_set: set.clone(), tensor: Tensor { dim: d, order: q, entries } })
}

/// Columns `∂^{α(i_1…i_k)} f(p)` for all `d^k` direction assignments.
fn block_table(jet: &Jet, d: usize, k: usize) -> Vec<Vec<f64>> {
    (0..d.pow(k as u32))
        .map(|mut sub| {
            let mut dirs = vec![0usize; k];
            for slot in (0..k).rev() {
                dirs[slot] = sub % d;
                sub /= d;
            }
            jet.entry(&MultiIndex::from_directions(d, &dirs))
                .expect("jet covers the block order")
                .to_vec()
        })
        .collect()
}

/// A single entry of `A_p` for a length-`Q` assignment of coordinate
/// directions (0-based), without assembling the tensor.
pub fn tensor_entry(f: &PolynomialMap, p: &[f64], set: &IndexSet, assignment: &[usize]) -> Result<f64> {
    check_shapes(f, p, set)?;
    if assignment.len() != set.q() {
        return Err(Error::DimensionMismatch { expected: set.q(), got: assignment.len() });
    }
    if let Some(&bad) = assignment.iter().find(|&&i| i >= f.d()) {
        return Err(Error::DimensionMismatch { expected: f.d(), got: bad + 1 });
    }
    let jet = f.jet(p, set.max_order())?;
    let n = set.n();
    let offsets = set.column_offsets();
    let mut buf = vec![0.0; n * n];
    for j in 0..n {
        let dirs = &assignment[offsets[j]..offsets[j + 1]];
        let col = jet.entry(&MultiIndex::from_directions(f.d(), dirs)).expect("jet covers the block order");
        for (i, &v) in col.iter().enumerate() {
            buf[i * n + j] = v;
        }
    }
    Ok(det_in_place(&mut buf, n))
}

/// `Σ |(T·M)[j]|²`, the squared norm of the transformed tensor.
pub fn sl_objective(t: &CurvatureTensor, m: &DMatrix<f64>) -> Result<f64> {
    check_unimodular(m, t.d())?;
    Ok(t.tensor.transform(m).frobenius_sq())
}

pub(crate) fn check_unimodular(m: &DMatrix<f64>, d: usize) -> Result<()> {
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: m.nrows() });
    }
    let det = m.determinant();
    if (det - 1.0).abs() > 1e-9 {
        return Err(Error::NotUnimodular(det));
    }
    Ok(())
}
