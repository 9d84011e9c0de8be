//! Compressed-row sparse matrices and element-wise assembly.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Compressed-row sparse matrix with sorted column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix { nrows, ncols, row_ptr: vec![0; nrows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Duplicates are summed in input order, so the result does not depend on sort stability.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&i| (triplets[i].0, triplets[i].1, i));
        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for &i in &order {
            let (r, c, v) = triplets[i];
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseMatrix { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut t = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    t.push((i, j, m[(i, j)]));
                }
            }
        }
        SparseMatrix::from_triplets(m.nrows(), m.ncols(), &t)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let mut s = 0.0;
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[p] * x[self.col_idx[p]];
            }
            y[r] = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec(x, &mut y);
        y
    }

    /// y = A^T x
    pub fn matvec_transpose(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        y.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..self.nrows {
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[p]] += self.values[p] * xr;
            }
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut count = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            count[c + 1] += 1;
        }
        for c in 0..self.ncols {
            count[c + 1] += count[c];
        }
        let row_ptr = count.clone();
        let mut next = count;
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[p];
                let q = next[c];
                col_idx[q] = r;
                values[q] = self.values[p];
                next[c] += 1;
            }
        }
        SparseMatrix { nrows: self.ncols, ncols: self.nrows, row_ptr, col_idx, values }
    }

    pub fn scale(&self, c: f64) -> SparseMatrix {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= c);
        m
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                d[(r, self.col_idx[p])] += self.values[p];
            }
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// max |A - A^T| / max |A|
    pub fn symmetry_error(&self) -> f64 {
        let t = self.transpose();
        let mut err: f64 = 0.0;
        for r in 0..self.nrows {
            let (c1, v1) = self.row(r);
            for (c, v) in c1.iter().zip(v1) {
                err = err.max((v - t.get(r, *c)).abs());
            }
            let (c2, v2) = t.row(r);
            for (c, v) in c2.iter().zip(v2) {
                err = err.max((v - self.get(r, *c)).abs());
            }
        }
        let m = self.max_abs();
        if m == 0.0 {
            0.0
        } else {
            err / m
        }
    }

    /// Principal submatrix on sorted index set `idx`, using `pos` (all usize::MAX) as scratch.
    pub fn principal_submatrix(&self, idx: &[usize], pos: &mut [usize]) -> DMatrix<f64> {
        for (i, &g) in idx.iter().enumerate() {
            pos[g] = i;
        }
        let n = idx.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &g) in idx.iter().enumerate() {
            for p in self.row_ptr[g]..self.row_ptr[g + 1] {
                let j = pos[self.col_idx[p]];
                if j != usize::MAX {
                    m[(i, j)] = self.values[p];
                }
            }
        }
        for &g in idx {
            pos[g] = usize::MAX;
        }
        m
    }

    /// Factorize as symmetric positive definite with a sparse Cholesky.
    pub fn cholesky(&self) -> Result<SparseCholesky> {
        SparseCholesky::new(self)
    }
}

/// Sparse Cholesky factorization backed by faer.
pub struct SparseCholesky {
    n: usize,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl std::fmt::Debug for SparseCholesky {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SparseCholesky(n = {})", self.n)
    }
}

impl SparseCholesky {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        use faer::sparse::{SparseColMat, SymbolicSparseColMat};
        if a.nrows != a.ncols {
            return Err(Error::DimensionMismatch("Cholesky of a non-square matrix".into()));
        }
        let n = a.nrows;
        // symmetric input: the CSR arrays are the CSC arrays of the same matrix
        let sym = SymbolicSparseColMat::new_checked(n, n, a.row_ptr.clone(), None, a.col_idx.clone());
        let m = SparseColMat::new(sym, a.values.clone());
        let llt = m
            .sp_cholesky(faer::Side::Lower)
            .map_err(|e| Error::NotSpd(format!("sparse Cholesky failed: {e:?}")))?;
        Ok(SparseCholesky { n, llt })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        use faer::linalg::solvers::Solve;
        let mut b = faer::MatMut::from_column_major_slice_mut(x, self.n, 1);
        self.llt.solve_in_place(b.as_mut());
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Element-by-element CSR assembly on a precomputed sparsity pattern.
pub struct CsrAssembler {
    pub matrix: SparseMatrix,
}

impl CsrAssembler {
    /// Pattern from the dense couplings of each element's DOF list.
    pub fn new<'a>(n: usize, element_dofs: impl Iterator<Item = &'a [usize]> + Clone) -> Self {
        let mut counts = vec![0usize; n];
        for dofs in element_dofs.clone() {
            for &r in dofs {
                counts[r] += dofs.len();
            }
        }
        let mut start = vec![0usize; n + 1];
        for r in 0..n {
            start[r + 1] = start[r] + counts[r];
        }
        let mut cols = vec![0u32; start[n]];
        let mut fill = start.clone();
        for dofs in element_dofs {
            for &r in dofs {
                for &c in dofs {
                    cols[fill[r]] = c as u32;
                    fill[r] += 1;
                }
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        for r in 0..n {
            let seg = &mut cols[start[r]..start[r + 1]];
            seg.sort_unstable();
            let mut prev = u32::MAX;
            for &c in seg.iter() {
                if c != prev {
                    col_idx.push(c as usize);
                    prev = c;
                }
            }
            row_ptr[r + 1] = col_idx.len();
        }
        drop(cols);
        let nnz = col_idx.len();
        CsrAssembler {
            matrix: SparseMatrix { nrows: n, ncols: n, row_ptr, col_idx, values: vec![0.0; nnz] },
        }
    }

    /// Add a dense row-major block with rows/cols `dofs`.
    pub fn add_block(&mut self, dofs: &[usize], block: &[f64]) {
        let n = dofs.len();
        let m = &mut self.matrix;
        for (i, &r) in dofs.iter().enumerate() {
            let (a, b) = (m.row_ptr[r], m.row_ptr[r + 1]);
            let cols = &m.col_idx[a..b];
            for (j, &c) in dofs.iter().enumerate() {
                let p = cols.binary_search(&c).expect("entry outside pattern");
                m.values[a + p] += block[i * n + j];
            }
        }
    }

    pub fn finish(self) -> SparseMatrix {
        self.matrix
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_and_transpose() {
        let a = SparseMatrix::from_triplets(3, 2, &[(0, 1, 1.0), (2, 0, 2.0), (0, 1, 3.0), (1, 1, -1.0)]);
        assert_eq!(a.get(0, 1), 4.0);
        assert_eq!(a.nnz(), 3);
        let t = a.transpose();
        assert_eq!(t.get(1, 0), 4.0);
        assert_eq!(t.get(0, 2), 2.0);
        let x = [1.0, 2.0, 3.0];
        let mut y1 = vec![0.0; 2];
        a.matvec_transpose(&x, &mut y1);
        assert_eq!(y1, t.mul_vec(&x));
    }

    #[test]
    fn assembler_matches_triplets() {
        let elems: Vec<Vec<usize>> = vec![vec![0, 1, 2], vec![2, 3], vec![1, 3]];
        let mut asm = CsrAssembler::new(4, elems.iter().map(|v| v.as_slice()));
        let mut trip = Vec::new();
        for (e, d) in elems.iter().enumerate() {
            let n = d.len();
            let blk: Vec<f64> = (0..n * n).map(|i| (i + e) as f64).collect();
            asm.add_block(d, &blk);
            for i in 0..n {
                for j in 0..n {
                    trip.push((d[i], d[j], blk[i * n + j]));
                }
            }
        }
        let a = asm.finish();
        let b = SparseMatrix::from_triplets(4, 4, &trip);
        assert_eq!(a.to_dense(), b.to_dense());
    }

    #[test]
    fn cholesky_solves() {
        let a = SparseMatrix::from_triplets(
            3,
            3,
            &[(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0), (2, 2, 2.0), (1, 2, 0.5), (2, 1, 0.5)],
        );
        let c = a.cholesky().unwrap();
        let b = [1.0, 2.0, 3.0];
        let x = c.solve(&b);
        let r = a.mul_vec(&x);
        for i in 0..3 {
            assert!((r[i] - b[i]).abs() < 1e-14);
        }
        let neg = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, -1.0)]);
        assert!(neg.cholesky().is_err());
    }
}
