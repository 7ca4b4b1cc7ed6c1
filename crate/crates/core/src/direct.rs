//! Sparse direct solver for complex symmetric matrices.
//!
//! Up-looking `LDLᵀ` (plain transpose, no conjugation) without pivoting,
//! after a nested-dissection symmetric permutation. Pivoting is not needed
//! for the matrices factorized here: with nonzero absorption their imaginary
//! part is definite on the relevant subspace, so no pivot can vanish.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ordering::{coordinate_dissection, nested_dissection, Graph};
use crate::sparse::SparseComplexMatrix;

const NONE: usize = usize::MAX;

/// `P A Pᵀ = L D Lᵀ` with unit lower-triangular `L` stored by columns.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<u32>,
    lx: Vec<Complex64>,
    d: Vec<Complex64>,
}

/// Factorizes a square complex symmetric matrix. Only one triangle of the
/// permuted matrix is read, so the input must be symmetric.
pub fn factorize(a: &SparseComplexMatrix) -> Result<LdlFactor> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::NotSquare { rows: n, cols: a.ncols() });
    }
    let graph = Graph::from_pattern(n, a.row_ptr(), a.col_idx());
    let perm = nested_dissection(&graph);
    factorize_with_order(a, perm)
}

/// Factorizes using planar-cut dissection on the given unknown locations.
pub fn factorize_with_coordinates(a: &SparseComplexMatrix, coords: &[[f64; 3]]) -> Result<LdlFactor> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::NotSquare { rows: n, cols: a.ncols() });
    }
    if coords.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: coords.len() });
    }
    let graph = Graph::from_pattern(n, a.row_ptr(), a.col_idx());
    factorize_with_order(a, coordinate_dissection(&graph, coords))
}

/// Factorizes with a caller-supplied elimination order `perm[new] = old`.
pub fn factorize_with_order(a: &SparseComplexMatrix, perm: Vec<usize>) -> Result<LdlFactor> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::NotSquare { rows: n, cols: a.ncols() });
    }
    if perm.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: perm.len() });
    }
    let mut pinv = vec![NONE; n];
    for (new, &old) in perm.iter().enumerate() {
        if old >= n || pinv[old] != NONE {
            return Err(Error::InvalidArgument("elimination order is not a permutation".into()));
        }
        pinv[old] = new;
    }

    // Row k of the permuted matrix restricted to columns <= k.
    let mut cp = vec![0usize; n + 1];
    let mut ci: Vec<u32> = Vec::with_capacity(a.nnz() / 2 + n);
    let mut cx: Vec<Complex64> = Vec::with_capacity(a.nnz() / 2 + n);
    for k in 0..n {
        let (cols, vals) = a.row(perm[k]);
        for (&j, &v) in cols.iter().zip(vals) {
            let jn = pinv[j as usize];
            if jn <= k {
                ci.push(jn as u32);
                cx.push(v);
            }
        }
        cp[k + 1] = ci.len();
    }

    // Symbolic: elimination tree and column counts.
    let mut parent = vec![NONE; n];
    let mut flag = vec![NONE; n];
    let mut lnz = vec![0usize; n];
    for k in 0..n {
        flag[k] = k;
        for &i in &ci[cp[k]..cp[k + 1]] {
            let mut i = i as usize;
            while flag[i] != k {
                if parent[i] == NONE {
                    parent[i] = k;
                }
                lnz[i] += 1;
                flag[i] = k;
                i = parent[i];
            }
        }
    }
    let mut lp = vec![0usize; n + 1];
    for k in 0..n {
        lp[k + 1] = lp[k] + lnz[k];
    }
    let total = lp[n];

    // Numeric.
    let scale = a.max_abs();
    let tiny = f64::EPSILON * scale.max(f64::MIN_POSITIVE);
    let mut li = vec![0u32; total];
    let mut lx = vec![Complex64::new(0.0, 0.0); total];
    let mut d = vec![Complex64::new(0.0, 0.0); n];
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    let mut pattern = vec![0usize; n];
    lnz.iter_mut().for_each(|c| *c = 0);
    flag.iter_mut().for_each(|f| *f = NONE);
    for k in 0..n {
        let mut top = n;
        flag[k] = k;
        for p in cp[k]..cp[k + 1] {
            let mut i = ci[p] as usize;
            y[i] += cx[p];
            let mut len = 0;
            while flag[i] != k {
                pattern[len] = i;
                len += 1;
                flag[i] = k;
                i = parent[i];
            }
            while len > 0 {
                top -= 1;
                len -= 1;
                pattern[top] = pattern[len];
            }
        }
        d[k] = y[k];
        y[k] = Complex64::new(0.0, 0.0);
        while top < n {
            let i = pattern[top];
            top += 1;
            let yi = y[i];
            y[i] = Complex64::new(0.0, 0.0);
            let p2 = lp[i] + lnz[i];
            for p in lp[i]..p2 {
                y[li[p] as usize] -= lx[p] * yi;
            }
            let lki = yi / d[i];
            d[k] -= lki * yi;
            li[p2] = k as u32;
            lx[p2] = lki;
            lnz[i] += 1;
        }
        if d[k].norm() <= tiny {
            return Err(Error::SingularPivot { pivot: perm[k] });
        }
    }
    Ok(LdlFactor { n, perm, lp, li, lx, d })
}

impl LdlFactor {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored off-diagonal entries of `L`.
    pub fn nnz_l(&self) -> usize {
        self.lp[self.n]
    }

    /// Approximate heap footprint in bytes.
    pub fn memory_bytes(&self) -> usize {
        self.lx.len() * 16 + self.li.len() * 4 + (self.lp.len() + self.perm.len()) * 8 + self.d.len() * 16
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: b.len() });
        }
        let mut x = vec![Complex64::new(0.0, 0.0); self.n];
        self.solve_into(b, &mut x);
        Ok(x)
    }

    /// Solves `A x = b` into `x`; both must have length [`dim`](Self::dim).
    pub fn solve_into(&self, b: &[Complex64], x: &mut [Complex64]) {
        assert_eq!(b.len(), self.n);
        assert_eq!(x.len(), self.n);
        let mut w: Vec<Complex64> = self.perm.iter().map(|&o| b[o]).collect();
        for j in 0..self.n {
            let wj = w[j];
            if wj != Complex64::new(0.0, 0.0) {
                for p in self.lp[j]..self.lp[j + 1] {
                    w[self.li[p] as usize] -= self.lx[p] * wj;
                }
            }
        }
        for (wj, dj) in w.iter_mut().zip(&self.d) {
            *wj /= dj;
        }
        for j in (0..self.n).rev() {
            let mut s = w[j];
            for p in self.lp[j]..self.lp[j + 1] {
                s -= self.lx[p] * w[self.li[p] as usize];
            }
            w[j] = s;
        }
        for (k, &o) in self.perm.iter().enumerate() {
            x[o] = w[k];
        }
    }
}
