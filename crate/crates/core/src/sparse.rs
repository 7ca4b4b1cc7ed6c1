//! Compressed sparse row storage for the assembled operators.
//!
//! Every matrix in the kit (global, local, coarse, restriction) is stored
//! row-compressed with sorted column indices. Complex matrices use
//! [`Complex64`] entries; the coarse restriction is real.

use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Scalar types that can be stored in a [`CsrMatrix`].
pub trait Entry: Copy + Default + PartialEq + std::ops::AddAssign + Send + Sync + 'static {
    fn to_complex(self) -> Complex64;
    fn abs(self) -> f64;
}

impl Entry for f64 {
    #[inline]
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    #[inline]
    fn abs(self) -> f64 {
        f64::abs(self)
    }
}

impl Entry for Complex64 {
    #[inline]
    fn to_complex(self) -> Complex64 {
        self
    }
    #[inline]
    fn abs(self) -> f64 {
        self.norm()
    }
}

/// Row-compressed sparse matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<T>,
}

pub type SparseComplexMatrix = CsrMatrix<Complex64>;
pub type SparseRealMatrix = CsrMatrix<f64>;

impl<T: Entry> CsrMatrix<T> {
    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, T)>) -> Result<Self> {
        for &(i, j, _) in &triplets {
            if i >= nrows {
                return Err(Error::IndexOutOfRange { index: i, dim: nrows });
            }
            if j >= ncols {
                return Err(Error::IndexOutOfRange { index: j, dim: ncols });
            }
        }
        triplets.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j as u32);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self { nrows, ncols, row_ptr, col_idx, values })
    }

    /// Builds a zero-valued matrix with the given per-row column pattern.
    /// Each row list must be sorted and free of duplicates.
    pub fn from_pattern(nrows: usize, ncols: usize, rows: &[Vec<u32>]) -> Self {
        assert_eq!(rows.len(), nrows);
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut col_idx = Vec::with_capacity(nnz);
        for r in rows {
            debug_assert!(r.windows(2).all(|w| w[0] < w[1]));
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        Self { nrows, ncols, row_ptr, col_idx, values: vec![T::default(); nnz] }
    }

    /// Builds an `n x n` identity matrix.
    pub fn identity(n: usize, one: T) -> Self {
        Self { nrows: n, ncols: n, row_ptr: (0..=n).collect(), col_idx: (0..n as u32).collect(), values: vec![one; n] }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[u32] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[u32], &[T]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[s..e], &self.values[s..e])
    }

    #[inline]
    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[s..e].binary_search(&(j as u32)).ok().map(|p| s + p)
    }

    /// Stored value at `(i, j)`, zero when outside the pattern.
    pub fn get(&self, i: usize, j: usize) -> T {
        self.position(i, j).map(|p| self.values[p]).unwrap_or_default()
    }

    /// Adds `v` to the stored entry `(i, j)`.
    ///
    /// Panics if `(i, j)` is not part of the sparsity pattern; assembly
    /// routines build the pattern before scattering values into it.
    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: T) {
        let p = self.position(i, j).unwrap_or_else(|| panic!("entry ({i}, {j}) outside sparsity pattern"));
        self.values[p] += v;
    }

    /// `y = A x` for complex vectors.
    pub fn mul_vec(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            let mut acc = Complex64::new(0.0, 0.0);
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v.to_complex() * x[j as usize];
            }
            *yi = acc;
        }
    }

    /// Allocating version of [`CsrMatrix::mul_vec`].
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.nrows];
        self.mul_vec(x, &mut y);
        y
    }

    /// `y = Aᵀ x` for complex vectors (no conjugation).
    pub fn mul_transpose_vec(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        y.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for (i, &xi) in x.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j as usize] += v.to_complex() * xi;
            }
        }
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.col_idx {
            counts[j as usize + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0u32; self.nnz()];
        let mut values = vec![T::default(); self.nnz()];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let p = next[j as usize];
                col_idx[p] = i as u32;
                values[p] = v;
                next[j as usize] += 1;
            }
        }
        Self { nrows: self.ncols, ncols: self.nrows, row_ptr, col_idx, values }
    }

    /// Principal submatrix on a sorted index subset (rows and columns).
    pub fn principal_submatrix(&self, subset: &[usize]) -> Result<Self> {
        if self.nrows != self.ncols {
            return Err(Error::NotSquare { rows: self.nrows, cols: self.ncols });
        }
        if let Some(&bad) = subset.iter().find(|&&i| i >= self.nrows) {
            return Err(Error::IndexOutOfRange { index: bad, dim: self.nrows });
        }
        if !subset.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument("subset must be sorted and unique".into()));
        }
        let mut row_ptr = Vec::with_capacity(subset.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for &gi in subset {
            let (cols, vals) = self.row(gi);
            for (&gj, &v) in cols.iter().zip(vals) {
                if let Ok(lj) = subset.binary_search(&(gj as usize)) {
                    col_idx.push(lj as u32);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self { nrows: subset.len(), ncols: subset.len(), row_ptr, col_idx, values })
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// `max |A_ij - A_ji|` over the union of both patterns.
    pub fn symmetry_defect(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let t = self.get(j as usize, i);
                worst = worst.max((v.to_complex() - t.to_complex()).norm());
            }
        }
        worst
    }

    /// Diagonal entries (zero where unstored).
    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn to_complex(&self) -> SparseComplexMatrix {
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.iter().map(|v| v.to_complex()).collect(),
        }
    }

    /// Dense row-major copy. Intended for small matrices in diagnostics and tests.
    pub fn to_dense(&self) -> Vec<Complex64> {
        let mut d = vec![Complex64::new(0.0, 0.0); self.nrows * self.ncols];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[i * self.ncols + j as usize] = v.to_complex();
            }
        }
        d
    }

    /// Writes the matrix in MatrixMarket coordinate format (complex general).
    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate complex general")?;
        writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let z = v.to_complex();
                writeln!(out, "{} {} {:.17e} {:.17e}", i + 1, j + 1, z.re, z.im)?;
            }
        }
        Ok(())
    }
}

impl SparseComplexMatrix {
    /// Sparse product `self * other` (Gustavson row-by-row accumulation).
    pub fn matmul(&self, other: &SparseComplexMatrix) -> Result<SparseComplexMatrix> {
        if self.ncols != other.nrows {
            return Err(Error::DimensionMismatch { expected: self.ncols, found: other.nrows });
        }
        let n = other.ncols;
        let mut marker = vec![usize::MAX; n];
        let mut acc = vec![Complex64::new(0.0, 0.0); n];
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        row_ptr.push(0);
        let mut col_idx: Vec<u32> = Vec::new();
        let mut values = Vec::new();
        let mut touched: Vec<u32> = Vec::new();
        for i in 0..self.nrows {
            touched.clear();
            let (ac, av) = self.row(i);
            for (&k, &a) in ac.iter().zip(av) {
                let (bc, bv) = other.row(k as usize);
                for (&j, &b) in bc.iter().zip(bv) {
                    let j = j as usize;
                    if marker[j] != i {
                        marker[j] = i;
                        acc[j] = Complex64::new(0.0, 0.0);
                        touched.push(j as u32);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                col_idx.push(j);
                values.push(acc[j as usize]);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(CsrMatrix { nrows: self.nrows, ncols: n, row_ptr, col_idx, values })
    }

    /// `alpha * self + beta * other` on matrices sharing the same shape.
    pub fn linear_combination(
        &self,
        alpha: Complex64,
        other: &SparseComplexMatrix,
        beta: Complex64,
    ) -> Result<SparseComplexMatrix> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch { expected: self.nrows, found: other.nrows });
        }
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            triplets.extend(c.iter().zip(v).map(|(&j, &x)| (i, j as usize, alpha * x)));
            let (c, v) = other.row(i);
            triplets.extend(c.iter().zip(v).map(|(&j, &x)| (i, j as usize, beta * x)));
        }
        CsrMatrix::from_triplets(self.nrows, self.ncols, triplets)
    }
}
