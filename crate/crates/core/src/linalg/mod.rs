//! Dense and compressed-row kernels plus the symmetric GCN normalization
//! `D̃^{-1/2} Ã D̃^{-1/2}`.

mod dense;
mod sparse;

pub use dense::{dot, frobenius_sq, row_l2, DenseMatrix};
pub use sparse::SparseMatrix;

use crate::error::{Error, Result};

/// Symmetrically normalized adjacency with self loops.
///
/// Entry `(i, j)` is `1/√(d̃ᵢ d̃ⱼ)` wherever `Ã = A ∨ I` has a one, where
/// `d̃` are the row sums of `Ã`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedAdjacency(SparseMatrix);

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &SparseMatrix {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn spmm(&self, h: &DenseMatrix) -> Result<DenseMatrix> {
        self.0.spmm(h)
    }
}

/// Builds the normalized adjacency from a square binary adjacency.
///
/// The input must be symmetric so that the result is too; callers holding a
/// directed matrix should take `a ∨ aᵀ` first.
pub fn normalize_adjacency(a: &SparseMatrix) -> Result<NormalizedAdjacency> {
    if a.rows() != a.cols() {
        return Err(Error::shape(
            "normalize_adjacency",
            format!("{:?} is not square", a.shape()),
        ));
    }
    if a.iter().any(|(_, _, v)| v != 0.0 && v != 1.0) {
        return Err(Error::Domain("normalize_adjacency expects a binary matrix".into()));
    }
    if !a.is_symmetric() {
        return Err(Error::Domain("normalize_adjacency expects a symmetric matrix".into()));
    }
    let tilde = a.with_unit_diagonal()?;
    let degree: Vec<f64> = (0..tilde.rows()).map(|r| tilde.row(r).0.len() as f64).collect();
    Ok(NormalizedAdjacency(
        tilde.map_values(|r, c, _| 1.0 / (degree[r] * degree[c]).sqrt()),
    ))
}
