//! Full GMRES, right-preconditioned in the Euclidean inner product or
//! left-preconditioned in a weighted inner product `⟨u, v⟩_C = vᴴ C u`.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::precond::Preconditioner;
use crate::sparse::SparseComplexMatrix;

/// A square linear map on complex vectors.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    /// `y = Op x`.
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]);
}

impl LinearOperator for SparseComplexMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.mul_vec(x, y);
    }
}

impl LinearOperator for Preconditioner {
    fn dim(&self) -> usize {
        Preconditioner::dim(self)
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let z = Preconditioner::apply(self, x).expect("preconditioner dimension checked by the caller");
        y.copy_from_slice(&z);
    }
}

/// The identity map.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        y.copy_from_slice(x);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GmresSide {
    /// Solve `A M⁻¹ y = b`, `x = M⁻¹ y`, minimizing `‖b - A x‖₂`.
    RightStandard,
    /// Solve `M⁻¹ A x = M⁻¹ b`, minimizing `‖M⁻¹(b - A x)‖_C`.
    LeftWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialGuess {
    Zero,
    /// Independent uniform real and imaginary parts in `[-1, 1]`.
    Random {
        seed: u64,
    },
}

impl InitialGuess {
    pub fn vector(self, n: usize) -> Vec<Complex64> {
        match self {
            InitialGuess::Zero => vec![Complex64::new(0.0, 0.0); n],
            InitialGuess::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..n).map(|_| Complex64::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0))).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresConfig {
    /// Threshold on the residual norm relative to the initial residual.
    pub tol: f64,
    pub max_iter: usize,
    pub initial_guess: InitialGuess,
    pub side: GmresSide,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 200,
            initial_guess: InitialGuess::Random { seed: 0 },
            side: GmresSide::RightStandard,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmresResult {
    pub solution: Vec<Complex64>,
    pub iterations: usize,
    /// Relative residual after each iteration, starting with `1` for the
    /// initial guess.
    pub residual_history: Vec<f64>,
    pub converged: bool,
}

impl GmresResult {
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().unwrap_or(&0.0)
    }

    /// Writes `iteration,relative_residual` rows.
    pub fn write_history_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["iteration", "relative_residual"]).map_err(io)?;
        for (i, r) in self.residual_history.iter().enumerate() {
            w.write_record([i.to_string(), format!("{r:e}")]).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Inner product `⟨u, v⟩ = vᴴ W u` given `W v` (Euclidean when `W = I`).
#[inline]
fn inner(u: &[Complex64], wv: &[Complex64]) -> Complex64 {
    u.iter().zip(wv).map(|(a, b)| b.conj() * a).sum()
}

fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn check_weight(c: &SparseComplexMatrix, n: usize) -> Result<()> {
    if c.nrows() != n || c.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: c.nrows() });
    }
    let scale = c.max_abs();
    if c.values().iter().any(|v| v.im.abs() > 1e-14 * scale) {
        return Err(Error::NotPositiveDefinite("weight matrix has complex entries".into()));
    }
    if c.symmetry_defect() > 1e-12 * scale {
        return Err(Error::NotPositiveDefinite("weight matrix is not symmetric".into()));
    }
    if let Some(i) = c.diagonal().iter().position(|d| !(d.re > 0.0)) {
        return Err(Error::NotPositiveDefinite(format!("nonpositive diagonal entry at {i}")));
    }
    Ok(())
}

/// Reorthogonalize when a Gram–Schmidt pass shrinks the vector below this
/// fraction of its length.
const REORTH: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Full (non-restarted) GMRES.
///
/// `m_inv` defaults to the identity. `weight` is the matrix `C` of the
/// weighted inner product for [`GmresSide::LeftWeighted`]; without it the
/// Euclidean product is used. It is ignored for right preconditioning.
pub fn gmres(
    a: &dyn LinearOperator,
    m_inv: Option<&dyn LinearOperator>,
    b: &[Complex64],
    weight: Option<&SparseComplexMatrix>,
    cfg: &GmresConfig,
) -> Result<GmresResult> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.len() });
    }
    if let Some(m) = m_inv {
        if m.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: m.dim() });
        }
    }
    if !(cfg.tol > 0.0) || cfg.max_iter == 0 {
        return Err(Error::InvalidArgument("need tol > 0 and max_iter >= 1".into()));
    }
    let weight = match cfg.side {
        GmresSide::LeftWeighted => weight,
        GmresSide::RightStandard => None,
    };
    if let Some(c) = weight {
        check_weight(c, n)?;
    }
    let zero = Complex64::new(0.0, 0.0);
    let precondition = |x: &[Complex64]| -> Vec<Complex64> {
        match m_inv {
            Some(m) => {
                let mut y = vec![zero; n];
                m.apply(x, &mut y);
                y
            }
            None => x.to_vec(),
        }
    };
    let weigh = |x: &[Complex64]| -> Vec<Complex64> {
        match weight {
            Some(c) => c.apply(x),
            None => x.to_vec(),
        }
    };
    let norm = |x: &[Complex64], wx: &[Complex64]| -> Result<f64> {
        let s = inner(x, wx).re;
        if s < 0.0 {
            return Err(Error::NotPositiveDefinite(format!("negative squared norm {s:e}")));
        }
        Ok(s.sqrt())
    };

    let mut x = cfg.initial_guess.vector(n);
    let mut r = vec![zero; n];
    a.apply(&x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    if cfg.side == GmresSide::LeftWeighted {
        r = precondition(&r);
    }
    let mut wr = weigh(&r);
    let beta = norm(&r, &wr)?;
    let mut history = vec![1.0];
    if beta == 0.0 {
        return Ok(GmresResult { solution: x, iterations: 0, residual_history: history, converged: true });
    }
    let inv = 1.0 / beta;
    r.iter_mut().for_each(|v| *v *= inv);
    wr.iter_mut().for_each(|v| *v *= inv);
    let mut basis = vec![r];
    let mut wbasis = if weight.is_some() { vec![wr] } else { Vec::new() };

    // Hessenberg columns after rotation, rotations and the rotated rhs
    let mut hcols: Vec<Vec<Complex64>> = Vec::new();
    let mut cs: Vec<f64> = Vec::new();
    let mut sn: Vec<Complex64> = Vec::new();
    let mut g = vec![Complex64::new(beta, 0.0)];
    let mut converged = false;
    let mut tmp = vec![zero; n];

    for j in 0..cfg.max_iter {
        let mut w = match cfg.side {
            GmresSide::RightStandard => {
                let z = precondition(&basis[j]);
                a.apply(&z, &mut tmp);
                tmp.clone()
            }
            GmresSide::LeftWeighted => {
                a.apply(&basis[j], &mut tmp);
                precondition(&tmp)
            }
        };
        let mut ww = if weight.is_some() { weigh(&w) } else { Vec::new() };
        let mut h = vec![zero; j + 2];
        let mut before = norm(&w, if weight.is_some() { &ww } else { &w })?;
        let initial = before;
        for pass in 0..2 {
            for i in 0..=j {
                let wvi = if weight.is_some() { &wbasis[i] } else { &basis[i] };
                let hij = inner(&w, wvi);
                axpy(-hij, &basis[i], &mut w);
                if weight.is_some() {
                    axpy(-hij, &wbasis[i], &mut ww);
                }
                h[i] += hij;
            }
            let after = norm(&w, if weight.is_some() { &ww } else { &w })?;
            h[j + 1] = Complex64::new(after, 0.0);
            if pass == 1 || after > REORTH * before {
                break;
            }
            before = after;
        }
        let hnext = h[j + 1].re;

        // apply previous rotations, then a new one zeroing h[j+1]
        for i in 0..j {
            let t = cs[i] * h[i] + sn[i] * h[i + 1];
            h[i + 1] = -sn[i].conj() * h[i] + cs[i] * h[i + 1];
            h[i] = t;
        }
        let (c, s) = givens(h[j], h[j + 1]);
        h[j] = c * h[j] + s * h[j + 1];
        h[j + 1] = zero;
        cs.push(c);
        sn.push(s);
        g.push(-s.conj() * g[j]);
        g[j] *= c;
        h.truncate(j + 1);
        hcols.push(h);

        let rel = g[j + 1].norm() / beta;
        history.push(rel);
        // an invariant Krylov subspace ends the iteration
        let breakdown = hnext <= 1e-14 * initial;
        if rel <= cfg.tol || breakdown {
            converged = rel <= cfg.tol;
            break;
        }
        let inv = 1.0 / hnext;
        w.iter_mut().for_each(|v| *v *= inv);
        basis.push(w);
        if weight.is_some() {
            ww.iter_mut().for_each(|v| *v *= inv);
            wbasis.push(ww);
        }
    }

    // back substitution on the triangular system
    let m = hcols.len();
    let mut y = vec![zero; m];
    for i in (0..m).rev() {
        let mut s = g[i];
        for (k, yk) in y.iter().enumerate().skip(i + 1) {
            s -= hcols[k][i] * yk;
        }
        y[i] = s / hcols[i][i];
    }
    let mut update = vec![zero; n];
    for (vi, yi) in basis.iter().zip(&y) {
        axpy(*yi, vi, &mut update);
    }
    if cfg.side == GmresSide::RightStandard {
        update = precondition(&update);
    }
    axpy(Complex64::new(1.0, 0.0), &update, &mut x);
    Ok(GmresResult { solution: x, iterations: m, residual_history: history, converged })
}

/// Complex Givens rotation `(c, s)` with real `c` such that
/// `[c s; -s̄ c] [a; b] = [r; 0]`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let (na, nb) = (a.norm(), b.norm());
    if nb == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if na == 0.0 {
        return (0.0, (b / nb).conj());
    }
    let r = na.hypot(nb);
    let c = na / r;
    let s = (a / na) * b.conj() / r;
    (c, s)
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// Convergence-factor bound `(1 - (1 + (H/δ)²)^-2)^(m/2)` on the weighted
/// residual after `m` iterations.
pub fn theorem_bound(h: f64, delta: f64, m: u32) -> Result<f64> {
    check_positive("H", h)?;
    check_positive("delta", delta)?;
    let q = 1.0 + (h / delta).powi(2);
    Ok((1.0 - q.powi(-2)).powf(m as f64 / 2.0))
}

/// Whether `max(k H_sub, k H) <= C1 / (1 + (H/δ)²)`.
pub fn theorem_condition(k: f64, h: f64, h_sub: f64, delta: f64, c1: f64) -> Result<bool> {
    for (name, v) in [("k", k), ("H", h), ("H_sub", h_sub), ("delta", delta)] {
        check_positive(name, v)?;
    }
    if !(c1 >= 0.0) {
        return Err(Error::InvalidArgument(format!("C1 must be nonnegative, got {c1}")));
    }
    Ok((k * h_sub).max(k * h) <= c1 / (1.0 + (h / delta).powi(2)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn diag(d: &[Complex64]) -> SparseComplexMatrix {
        SparseComplexMatrix::from_triplets(d.len(), d.len(), d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect())
            .unwrap()
    }

    #[test]
    fn identity_converges_in_one_step() {
        let b = vec![c(1.0, 2.0), c(-3.0, 0.5)];
        let cfg = GmresConfig { initial_guess: InitialGuess::Zero, ..Default::default() };
        let res = gmres(&Identity(2), None, &b, None, &cfg).unwrap();
        assert_eq!(res.iterations, 1);
        assert!(res.converged);
        assert!(res.solution.iter().zip(&b).all(|(x, y)| (x - y).norm() < 1e-14));
    }

    #[test]
    fn three_eigenvalues_three_steps() {
        let vals = [c(1.0, 0.0), c(2.0, 1.0), c(-3.0, 0.5)];
        let d: Vec<_> = (0..12).map(|i| vals[i % 3]).collect();
        let a = diag(&d);
        let b: Vec<_> = (0..12).map(|i| c(1.0 + i as f64, -(i as f64))).collect();
        let cfg = GmresConfig { tol: 1e-12, ..Default::default() };
        let res = gmres(&a, None, &b, None, &cfg).unwrap();
        assert!(res.converged);
        assert!(res.iterations <= 3, "{}", res.iterations);
    }

    #[test]
    fn history_is_monotone_and_seeded() {
        let n = 40;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, c(2.0 + (i as f64).sin(), 0.3)));
            if i + 1 < n {
                trip.push((i, i + 1, c(-0.7, 0.1)));
                trip.push((i + 1, i, c(-0.4, 0.0)));
            }
        }
        let a = SparseComplexMatrix::from_triplets(n, n, trip).unwrap();
        let b = vec![c(1.0, 0.0); n];
        let cfg = GmresConfig { initial_guess: InitialGuess::Random { seed: 9 }, tol: 1e-10, ..Default::default() };
        let r1 = gmres(&a, None, &b, None, &cfg).unwrap();
        let r2 = gmres(&a, None, &b, None, &cfg).unwrap();
        assert_eq!(r1, r2);
        assert!(r1.residual_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        let ax = a.apply(&r1.solution);
        let x0 = InitialGuess::Random { seed: 9 }.vector(n);
        let ax0 = a.apply(&x0);
        let r0: f64 = b.iter().zip(&ax0).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>().sqrt();
        let res: f64 = b.iter().zip(&ax).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>().sqrt();
        assert!((res / r0 - r1.final_residual()).abs() < 1e-8);
    }

    #[test]
    fn weighted_rejects_bad_weight() {
        let a = Identity(2);
        let b = vec![c(1.0, 0.0); 2];
        let cfg = GmresConfig { side: GmresSide::LeftWeighted, ..Default::default() };
        let w = diag(&[c(1.0, 0.0), c(-1.0, 0.0)]);
        assert!(matches!(gmres(&a, None, &b, Some(&w), &cfg), Err(Error::NotPositiveDefinite(_))));
        let w = diag(&[c(1.0, 0.0), c(1.0, 1.0)]);
        assert!(matches!(gmres(&a, None, &b, Some(&w), &cfg), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn bound_values() {
        assert_eq!(theorem_bound(1.0, 1.0, 2).unwrap(), 0.75);
        assert_eq!(theorem_bound(1.0, 1.0, 0).unwrap(), 1.0);
        assert!((theorem_bound(1.0, 1.0, 1).unwrap() - 0.75f64.sqrt()).abs() < 1e-15);
        assert!(theorem_bound(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn condition_values() {
        assert!(theorem_condition(10.0, 0.1, 0.1, 0.1, 4.0).unwrap());
        assert!(!theorem_condition(10.0, 0.1, 0.1, 0.01, 4.0).unwrap());
        assert!(!theorem_condition(10.0, 0.1, 0.1, 0.1, 0.0).unwrap());
        assert!(theorem_condition(-1.0, 0.1, 0.1, 0.1, 4.0).is_err());
    }

    #[test]
    fn history_csv() {
        let res = GmresResult { solution: vec![], iterations: 1, residual_history: vec![1.0, 0.5], converged: false };
        let mut buf = Vec::new();
        res.write_history_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().collect::<Vec<_>>(), ["iteration,relative_residual", "0,1e0", "1,5e-1"]);
    }
}
