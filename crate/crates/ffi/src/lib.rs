//! C ABI for the maxwell-dd solver kit.
//!
//! Objects are opaque handles created by `*_new` functions and released by
//! the matching `*_free`. Every fallible call returns an [`MddStatus`]; on
//! failure a message is available from [`mdd_last_error_message`] on the same
//! thread. Complex vectors are passed as interleaved `(re, im)` doubles, so a
//! vector of dimension `n` occupies `2n` doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use maxwell_dd::assembly::{
    assemble_ck, assemble_global, assemble_rhs, assemble_with_dofs, BoundaryCondition, DofMap, ProblemConfig,
};
use maxwell_dd::decomposition::{build_coarse_restriction, build_cover, CoarseSpace};
use maxwell_dd::experiments::fit_growth_exponent;
use maxwell_dd::krylov::{gmres, theorem_bound, GmresConfig, GmresSide, InitialGuess, LinearOperator};
use maxwell_dd::mesh::{build_cube_mesh, nest_into, TetMesh};
use maxwell_dd::precond::{Levels, Preconditioner, PreconditionerKind};
use maxwell_dd::sparse::SparseComplexMatrix;
use maxwell_dd::{Complex64, Error};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MddStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    /// A factorization met a zero pivot.
    Singular = 4,
    /// Mesh, cover or coarse sizes are incompatible.
    IncompatibleSizes = 5,
    /// Absorption was zero where a factorized block needs it nonzero.
    ZeroAbsorption = 6,
    /// A Rust panic was caught at the boundary.
    Internal = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MddBoundary {
    Pec = 0,
    Impedance = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MddKind {
    As = 0,
    Ras = 1,
    Hras = 2,
    Has = 3,
    ImpRas = 4,
    ImpHras = 5,
}

/// GMRES settings.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MddGmresOptions {
    /// Stop when the residual falls below `tol` times the initial one.
    pub tol: f64,
    pub max_iter: usize,
    /// Seed of the random initial guess; ignored when `zero_initial_guess`.
    pub seed: u64,
    pub zero_initial_guess: bool,
    /// Left preconditioning with the energy-weighted inner product instead
    /// of right preconditioning with the Euclidean one.
    pub weighted: bool,
}

/// Outcome of a GMRES solve.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MddGmresReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
}

/// Structured mesh of the unit cube.
pub struct MddMesh {
    mesh: TetMesh,
}

/// Assembled system and preconditioner matrices for one wavenumber.
pub struct MddProblem {
    mesh: TetMesh,
    k: f64,
    dofs: DofMap,
    a: Arc<SparseComplexMatrix>,
    a_prec: Arc<SparseComplexMatrix>,
    config_prec: ProblemConfig,
    rhs: Vec<Complex64>,
    coarse: Option<CoarseSpace>,
}

pub struct MddPreconditioner {
    inner: Preconditioner,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MddStatus {
    match e {
        Error::DimensionMismatch { .. } | Error::IndexOutOfRange { .. } | Error::NotSquare { .. } => {
            MddStatus::DimensionMismatch
        }
        Error::SingularPivot { .. } => MddStatus::Singular,
        Error::NotNested { .. } | Error::NonDivisibleCover { .. } | Error::UncoveredDof { .. } => {
            MddStatus::IncompatibleSizes
        }
        Error::ZeroAbsorption => MddStatus::ZeroAbsorption,
        _ => MddStatus::InvalidArgument,
    }
}

/// Runs `f`, recording any error or panic.
fn guard(f: impl FnOnce() -> Result<(), (MddStatus, String)>) -> MddStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MddStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            MddStatus::Internal
        }
    }
}

fn lib(e: Error) -> (MddStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (MddStatus, String) {
    (MddStatus::NullPointer, format!("{name} is null"))
}

fn bad(msg: impl Into<String>) -> (MddStatus, String) {
    (MddStatus::InvalidArgument, msg.into())
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, (MddStatus, String)> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn read_complex(p: *const f64, n: usize, name: &str) -> Result<Vec<Complex64>, (MddStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    let s = std::slice::from_raw_parts(p, 2 * n);
    Ok(s.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect())
}

unsafe fn write_complex(p: *mut f64, v: &[Complex64], name: &str) -> Result<(), (MddStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    let s = std::slice::from_raw_parts_mut(p, 2 * v.len());
    for (c, x) in s.chunks_exact_mut(2).zip(v) {
        c[0] = x.re;
        c[1] = x.im;
    }
    Ok(())
}

unsafe fn store<T>(out: *mut *mut T, v: T) -> Result<(), (MddStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mdd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mdd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds an `n x n x n` cube mesh.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mdd_mesh_new(n: usize, out: *mut *mut MddMesh) -> MddStatus {
    guard(|| {
        let mesh = build_cube_mesh(n).map_err(lib)?;
        store(out, MddMesh { mesh })
    })
}

/// # Safety
/// `mesh` must come from [`mdd_mesh_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mdd_mesh_free(mesh: *mut MddMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Vertex, tetrahedron and edge counts. Any output pointer may be null.
///
/// # Safety
/// `mesh` must be a live handle; non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn mdd_mesh_counts(
    mesh: *const MddMesh,
    n_vertices: *mut usize,
    n_tets: *mut usize,
    n_edges: *mut usize,
) -> MddStatus {
    guard(|| {
        let m = &deref(mesh, "mesh")?.mesh;
        for (p, v) in [(n_vertices, m.n_vertices()), (n_tets, m.n_tets()), (n_edges, m.n_edges())] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Assembles the system with absorption `kappa_prob`, the preconditioner
/// matrix with `kappa_prec`, and the Gaussian source. `n_coarse > 0` also
/// builds a coarse space on an `n_coarse^3` mesh, which must nest in `mesh`.
///
/// # Safety
/// `mesh` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mdd_problem_new(
    mesh: *const MddMesh,
    k: f64,
    kappa_prob: f64,
    kappa_prec: f64,
    bc: MddBoundary,
    n_coarse: usize,
    out: *mut *mut MddProblem,
) -> MddStatus {
    guard(|| {
        let mesh = deref(mesh, "mesh")?.mesh.clone();
        let bc = match bc {
            MddBoundary::Pec => BoundaryCondition::Pec,
            MddBoundary::Impedance => BoundaryCondition::Impedance,
        };
        let config = ProblemConfig::new(k, kappa_prob, bc);
        let config_prec = ProblemConfig::new(k, kappa_prec, bc);
        let (a, dofs) = assemble_global(&mesh, &config).map_err(lib)?;
        let a_prec = if kappa_prec == kappa_prob {
            Arc::new(a.clone())
        } else {
            Arc::new(assemble_with_dofs(&mesh, &config_prec, &dofs).map_err(lib)?)
        };
        let rhs = assemble_rhs(&mesh, &config, &dofs);
        let (mesh, coarse) = if n_coarse > 0 {
            let pair = nest_into(mesh, n_coarse).map_err(lib)?;
            let cs = build_coarse_restriction(&pair, bc).map_err(lib)?;
            (pair.fine, Some(cs))
        } else {
            (mesh, None)
        };
        store(out, MddProblem { mesh, k, dofs, a: Arc::new(a), a_prec, config_prec, rhs, coarse })
    })
}

/// # Safety
/// `problem` must come from [`mdd_problem_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mdd_problem_free(problem: *mut MddProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Number of unknowns, or 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mdd_problem_dim(problem: *const MddProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.dofs.len())
}

/// Copies the assembled right-hand side into `out` (`2 * dim` doubles).
///
/// # Safety
/// `problem` must be a live handle and `out` must hold `2 * dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn mdd_problem_rhs(problem: *const MddProblem, out: *mut f64) -> MddStatus {
    guard(|| {
        let p = deref(problem, "problem")?;
        write_complex(out, &p.rhs, "out")
    })
}

/// `y = A x` with the system matrix.
///
/// # Safety
/// `problem` must be a live handle; `x` and `y` must hold `2 * dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn mdd_problem_apply(problem: *const MddProblem, x: *const f64, y: *mut f64) -> MddStatus {
    guard(|| {
        let p = deref(problem, "problem")?;
        let x = read_complex(x, p.dofs.len(), "x")?;
        write_complex(y, &p.a.apply(&x), "y")
    })
}

/// Builds a Schwarz preconditioner on an `n_sub^3` box cover with `layers`
/// rings of overlap. `levels` is 1 or 2; two levels need a problem built
/// with a coarse space.
///
/// # Safety
/// `problem` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mdd_preconditioner_new(
    problem: *const MddProblem,
    kind: MddKind,
    levels: u32,
    n_sub: usize,
    layers: usize,
    out: *mut *mut MddPreconditioner,
) -> MddStatus {
    guard(|| {
        let p = deref(problem, "problem")?;
        let levels = match levels {
            1 => Levels::OneLevel,
            2 => Levels::TwoLevel,
            l => return Err(bad(format!("levels must be 1 or 2, got {l}"))),
        };
        let kind = match kind {
            MddKind::As => PreconditionerKind::As,
            MddKind::Ras => PreconditionerKind::Ras,
            MddKind::Hras => PreconditionerKind::Hras,
            MddKind::Has => PreconditionerKind::Has,
            MddKind::ImpRas => PreconditionerKind::ImpRas,
            MddKind::ImpHras => PreconditionerKind::ImpHras,
        };
        let cover = build_cover(&p.mesh, &p.dofs, n_sub, layers).map_err(lib)?;
        let inner = Preconditioner::build(
            kind,
            levels,
            &p.mesh,
            &p.dofs,
            &cover,
            p.coarse.as_ref(),
            &p.config_prec,
            p.a_prec.clone(),
        )
        .map_err(lib)?;
        store(out, MddPreconditioner { inner })
    })
}

/// # Safety
/// `precond` must come from [`mdd_preconditioner_new`] and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn mdd_preconditioner_free(precond: *mut MddPreconditioner) {
    if !precond.is_null() {
        drop(Box::from_raw(precond));
    }
}

/// `z = M⁻¹ r`.
///
/// # Safety
/// `precond` must be a live handle; `r` and `z` must hold `2 * dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn mdd_preconditioner_apply(
    precond: *const MddPreconditioner,
    r: *const f64,
    z: *mut f64,
) -> MddStatus {
    guard(|| {
        let m = &deref(precond, "precond")?.inner;
        let r = read_complex(r, m.dim(), "r")?;
        let out = m.apply(&r).map_err(lib)?;
        write_complex(z, &out, "z")
    })
}

/// Default options: tolerance `1e-6`, 200 iterations, random initial guess
/// with seed 0, right preconditioning.
#[no_mangle]
pub extern "C" fn mdd_gmres_default_options() -> MddGmresOptions {
    let d = GmresConfig::default();
    MddGmresOptions { tol: d.tol, max_iter: d.max_iter, seed: 0, zero_initial_guess: false, weighted: false }
}

/// Solves `A x = b` with GMRES. `precond` may be null for no preconditioner;
/// `b` may be null to use the assembled right-hand side. `report` may be
/// null. Non-convergence is reported in `report`, not as an error.
///
/// # Safety
/// `problem` must be a live handle, `precond` null or live, `b` null or
/// `2 * dim` doubles, `x` `2 * dim` doubles, `report` null or valid.
#[no_mangle]
pub unsafe extern "C" fn mdd_gmres_solve(
    problem: *const MddProblem,
    precond: *const MddPreconditioner,
    b: *const f64,
    options: MddGmresOptions,
    x: *mut f64,
    report: *mut MddGmresReport,
) -> MddStatus {
    guard(|| {
        let p = deref(problem, "problem")?;
        let n = p.dofs.len();
        let b = if b.is_null() { p.rhs.clone() } else { read_complex(b, n, "b")? };
        let m = precond.as_ref().map(|m| &m.inner);
        if let Some(m) = m {
            if m.dim() != n {
                return Err(lib(Error::DimensionMismatch { expected: n, found: m.dim() }));
            }
        }
        let cfg = GmresConfig {
            tol: options.tol,
            max_iter: options.max_iter,
            initial_guess: if options.zero_initial_guess {
                InitialGuess::Zero
            } else {
                InitialGuess::Random { seed: options.seed }
            },
            side: if options.weighted { GmresSide::LeftWeighted } else { GmresSide::RightStandard },
        };
        let weight = if options.weighted { Some(assemble_ck(&p.mesh, p.k, &p.dofs).map_err(lib)?) } else { None };
        let m_op = m.map(|m| m as &dyn LinearOperator);
        let res = gmres(p.a.as_ref(), m_op, &b, weight.as_ref(), &cfg).map_err(lib)?;
        write_complex(x, &res.solution, "x")?;
        if let Some(r) = report.as_mut() {
            *r = MddGmresReport {
                iterations: res.iterations,
                final_residual: res.final_residual(),
                converged: res.converged,
            };
        }
        Ok(())
    })
}

/// Convergence-factor bound after `m` iterations for overlap ratio `H/δ`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mdd_theorem_bound(h: f64, delta: f64, m: u32, out: *mut f64) -> MddStatus {
    guard(|| {
        let v = theorem_bound(h, delta, m).map_err(lib)?;
        *out.as_mut().ok_or_else(|| null("out"))? = v;
        Ok(())
    })
}

/// Least-squares exponent `γ` with `ys ~ ks^γ`.
///
/// # Safety
/// `ks` and `ys` must hold `len` doubles; `gamma` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mdd_fit_growth_exponent(
    ks: *const f64,
    ys: *const f64,
    len: usize,
    gamma: *mut f64,
) -> MddStatus {
    guard(|| {
        if ks.is_null() || ys.is_null() {
            return Err(null("ks or ys"));
        }
        let (ks, ys) = (std::slice::from_raw_parts(ks, len), std::slice::from_raw_parts(ys, len));
        let g = fit_growth_exponent(ks, ys).map_err(lib)?;
        *gamma.as_mut().ok_or_else(|| null("gamma"))? = g;
        Ok(())
    })
}
