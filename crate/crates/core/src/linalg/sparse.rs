use rayon::prelude::*;

use super::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Compressed-row sparse matrix. Column indices within a row are strictly
/// increasing, so every `(row, col)` appears at most once.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets in any order.
    /// Duplicate coordinates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted = triplets.to_vec();
        for &(r, c, _) in &sorted {
            if r >= rows || c >= cols {
                return Err(Error::Index {
                    what: format!("sparse {rows}x{cols} coordinate ({r},{c})"),
                    index: if r >= rows { r } else { c },
                    len: if r >= rows { rows } else { cols },
                });
            }
        }
        sorted.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
                continue;
            }
            indptr[r + 1] += 1;
            indices.push(c);
            values.push(v);
            last = Some((r, c));
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        Ok(Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut indptr = Vec::with_capacity(m.rows() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for i in 0..m.rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            rows: m.rows(),
            cols: m.cols(),
            indptr,
            indices,
            values,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Column indices and values of one row.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.iter() {
            out.set(r, c, v);
        }
        out
    }

    pub fn transpose(&self) -> SparseMatrix {
        let triplets: Vec<_> = self.iter().map(|(r, c, v)| (c, r, v)).collect();
        SparseMatrix::from_triplets(self.cols, self.rows, &triplets).expect("transposed coordinates stay in bounds")
    }

    /// Every stored value replaced by 1; explicit zeros are dropped.
    pub fn binarize(&self) -> SparseMatrix {
        let triplets: Vec<_> = self
            .iter()
            .filter(|&(_, _, v)| v > 0.0)
            .map(|(r, c, _)| (r, c, 1.0))
            .collect();
        SparseMatrix::from_triplets(self.rows, self.cols, &triplets).expect("in bounds")
    }

    /// Binary union with the identity (square matrices only).
    pub fn with_unit_diagonal(&self) -> Result<SparseMatrix> {
        if self.rows != self.cols {
            return Err(Error::shape(
                "with_unit_diagonal",
                format!("{:?} is not square", self.shape()),
            ));
        }
        let mut triplets: Vec<_> = self
            .iter()
            .filter(|&(r, c, v)| r != c && v > 0.0)
            .map(|(r, c, _)| (r, c, 1.0))
            .collect();
        triplets.extend((0..self.rows).map(|i| (i, i, 1.0)));
        SparseMatrix::from_triplets(self.rows, self.cols, &triplets)
    }

    /// Binary union `self ∨ otherᵀ`-style merge: entry is 1 where either is positive.
    pub fn union_binary(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                "union_binary",
                format!("{:?} vs {:?}", self.shape(), other.shape()),
            ));
        }
        let triplets: Vec<_> = self
            .iter()
            .chain(other.iter())
            .filter(|&(_, _, v)| v > 0.0)
            .map(|(r, c, _)| (r, c, 1.0))
            .collect();
        Ok(SparseMatrix::from_triplets(self.rows, self.cols, &triplets)?.binarize())
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && self.iter().all(|(r, c, v)| self.get(c, r) == v)
    }

    /// Sparse-sparse product.
    pub fn spgemm(&self, rhs: &SparseMatrix) -> Result<SparseMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::shape(
                "spgemm",
                format!("{:?} x {:?}", self.shape(), rhs.shape()),
            ));
        }
        let mut indptr = Vec::with_capacity(self.rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        let mut acc = vec![0.0f64; rhs.cols];
        let mut touched = vec![false; rhs.cols];
        let mut cols_seen = Vec::new();
        for r in 0..self.rows {
            let (acols, avals) = self.row(r);
            for (&k, &a) in acols.iter().zip(avals) {
                let (bcols, bvals) = rhs.row(k);
                for (&c, &b) in bcols.iter().zip(bvals) {
                    if !touched[c] {
                        touched[c] = true;
                        cols_seen.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            cols_seen.sort_unstable();
            for &c in &cols_seen {
                if acc[c] != 0.0 {
                    indices.push(c);
                    values.push(acc[c]);
                }
                acc[c] = 0.0;
                touched[c] = false;
            }
            cols_seen.clear();
            indptr.push(indices.len());
        }
        Ok(SparseMatrix {
            rows: self.rows,
            cols: rhs.cols,
            indptr,
            indices,
            values,
        })
    }

    /// Sparse-dense product `self · h`.
    pub fn spmm(&self, h: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != h.rows() {
            return Err(Error::shape("spmm", format!("{:?} x {:?}", self.shape(), h.shape())));
        }
        let m = h.cols();
        let mut out = DenseMatrix::zeros(self.rows, m);
        if m == 0 {
            return Ok(out);
        }
        let kernel = |(r, orow): (usize, &mut [f64])| {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                for (o, &x) in orow.iter_mut().zip(h.row(c)) {
                    *o += v * x;
                }
            }
        };
        if self.nnz() >= 4096 {
            out.as_mut_slice().par_chunks_mut(m).enumerate().for_each(kernel);
        } else {
            out.as_mut_slice().chunks_mut(m).enumerate().for_each(kernel);
        }
        Ok(out)
    }

    pub(crate) fn map_values(&self, f: impl Fn(usize, usize, f64) -> f64) -> SparseMatrix {
        let mut out = self.clone();
        for r in 0..self.rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                out.values[k] = f(r, self.indices[k], self.values[k]);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn triplets_canonicalize_duplicates() {
        let m = SparseMatrix::from_triplets(2, 2, &[(1, 0, 1.0), (0, 1, 2.0), (1, 0, 3.0)]).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(1, 0), 4.0);
        assert_eq!(m.get(0, 1), 2.0);
        assert_eq!(m.get(0, 0), 0.0);
        assert!(SparseMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn identity_spmm_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = DenseMatrix::from_fn(9, 4, |_, _| rng.random_range(-3.0..3.0));
        let out = SparseMatrix::identity(9).spmm(&h).unwrap();
        assert_eq!(out, h);
    }

    #[test]
    fn all_ones_times_ones_column() {
        let ones = SparseMatrix::from_dense(&DenseMatrix::filled(3, 3, 1.0));
        let out = ones.spmm(&DenseMatrix::filled(3, 1, 1.0)).unwrap();
        assert_eq!(out.as_slice(), &[3.0, 3.0, 3.0]);
    }

    #[test]
    fn spmm_matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = DenseMatrix::from_fn(30, 30, |_, _| {
            if rng.random_bool(0.2) {
                rng.random_range(-1.0..1.0)
            } else {
                0.0
            }
        });
        let h = DenseMatrix::from_fn(30, 6, |_, _| rng.random_range(-1.0..1.0));
        let want = a.matmul(&h).unwrap();
        let got = SparseMatrix::from_dense(&a).spmm(&h).unwrap();
        for (w, g) in want.as_slice().iter().zip(got.as_slice()) {
            assert!((w - g).abs() < 1e-12);
        }
        assert!(SparseMatrix::from_dense(&a).spmm(&DenseMatrix::zeros(29, 2)).is_err());
    }

    #[test]
    fn spgemm_matches_dense_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut rand_sparse = |r, c| DenseMatrix::from_fn(r, c, |_, _| if rng.random_bool(0.3) { 1.0 } else { 0.0 });
        let a = rand_sparse(12, 7);
        let b = rand_sparse(7, 12);
        let want = a.matmul(&b).unwrap();
        let got = SparseMatrix::from_dense(&a)
            .spgemm(&SparseMatrix::from_dense(&b))
            .unwrap()
            .to_dense();
        assert_eq!(want, got);
    }

    #[test]
    fn transpose_and_symmetry() {
        let m = SparseMatrix::from_triplets(3, 2, &[(0, 1, 1.0), (2, 0, 5.0)]).unwrap();
        let t = m.transpose();
        assert_eq!(t.shape(), (2, 3));
        assert_eq!(t.get(1, 0), 1.0);
        assert_eq!(t.get(0, 2), 5.0);
        let sq = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0)]).unwrap();
        assert!(!sq.is_symmetric());
        assert!(sq.union_binary(&sq.transpose()).unwrap().is_symmetric());
    }
}
