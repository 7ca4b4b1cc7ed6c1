//! One- and two-level overlapping Schwarz preconditioners.
//!
//! With `L = Σ_ℓ R_ℓᵀ D_ℓ A_ℓ⁻¹ R_ℓ` (weights `D_ℓ = I` for the unweighted
//! additive variants) and the coarse correction `Ξ = R0ᵀ A0⁻¹ R0`:
//!
//! ```text
//! AS, RAS, ImpRAS      M⁻¹ = L + Ξ
//! HAS, HRAS, ImpHRAS   M⁻¹ = (I - Ξ A) L (I - A Ξ) + Ξ
//! ```
//!
//! One-level forms drop `Ξ`. The `Imp` kinds replace the PEC minors `A_ℓ`
//! by local matrices with an impedance condition on the artificial
//! boundary, solved on all edges of the subdomain with zero weight on the
//! edges outside its interior.
//!
//! All blocks are factorized from the matrix with preconditioner absorption,
//! which may differ from the absorption of the system being solved.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::assembly::{local_matrix_impedance, local_matrix_pec, DofMap, ProblemConfig};
use crate::decomposition::{galerkin_coarse_matrix, CoarseSpace, Cover, Subdomain};
use crate::direct::{factorize, factorize_with_coordinates, LdlFactor};
use crate::error::{Error, Result};
use crate::mesh::{Point, TetMesh};
use crate::sparse::{SparseComplexMatrix, SparseRealMatrix};

/// Member of the Schwarz family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PreconditionerKind {
    As,
    Ras,
    Hras,
    Has,
    ImpRas,
    ImpHras,
}

impl PreconditionerKind {
    pub const ALL: [PreconditionerKind; 6] = [Self::As, Self::Ras, Self::Hras, Self::Has, Self::ImpRas, Self::ImpHras];

    /// Uses partition-of-unity weights on the local sum.
    pub fn is_weighted(self) -> bool {
        !matches!(self, Self::As | Self::Has)
    }

    /// Projects the local sum against the coarse space.
    pub fn is_hybrid(self) -> bool {
        matches!(self, Self::Hras | Self::Has | Self::ImpHras)
    }

    /// Local solves carry an impedance condition on artificial boundaries.
    pub fn uses_impedance(self) -> bool {
        matches!(self, Self::ImpRas | Self::ImpHras)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::As => "AS",
            Self::Ras => "RAS",
            Self::Hras => "HRAS",
            Self::Has => "HAS",
            Self::ImpRas => "ImpRAS",
            Self::ImpHras => "ImpHRAS",
        }
    }
}

impl fmt::Display for PreconditionerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PreconditionerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "as" => Ok(Self::As),
            "ras" => Ok(Self::Ras),
            "hras" => Ok(Self::Hras),
            "has" => Ok(Self::Has),
            "impras" => Ok(Self::ImpRas),
            "imphras" => Ok(Self::ImpHras),
            _ => Err(Error::InvalidArgument(format!("unknown preconditioner kind '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Levels {
    OneLevel,
    TwoLevel,
}

impl Levels {
    pub fn count(self) -> usize {
        match self {
            Levels::OneLevel => 1,
            Levels::TwoLevel => 2,
        }
    }
}

/// Boundary condition imposed on the artificial boundary of local problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalProblem {
    /// Principal minors of the global matrix on interior unknowns.
    Pec,
    /// Impedance condition, solved on the closure unknowns.
    Impedance,
}

#[derive(Debug, Clone)]
struct LocalSolver {
    dofs: Vec<usize>,
    weights: Vec<f64>,
    factor: Arc<LdlFactor>,
}

/// Factorized local problems of one cover.
///
/// Box subdomains with the same extent and the same contact with the cube
/// surface are translates of each other and have identical local matrices
/// up to roundoff. Such subdomains share one factorization once their
/// matrices are checked to agree entrywise.
#[derive(Debug, Clone)]
pub struct LocalSolvers {
    problem: LocalProblem,
    n: usize,
    solvers: Vec<LocalSolver>,
}

fn check_absorption(config: &ProblemConfig) -> Result<()> {
    if config.kappa == 0.0 {
        return Err(Error::ZeroAbsorption);
    }
    Ok(())
}

/// Relative entrywise tolerance under which two local matrices count as the
/// same operator.
const SHARE_TOL: f64 = 1e-13;

fn same_matrix(a: &SparseComplexMatrix, b: &SparseComplexMatrix) -> bool {
    if a.nrows() != b.nrows() || a.row_ptr() != b.row_ptr() || a.col_idx() != b.col_idx() {
        return false;
    }
    let tol = SHARE_TOL * a.max_abs();
    a.values().iter().zip(b.values()).all(|(x, y)| (x - y).norm() <= tol)
}

/// Translation class of a box subdomain: per axis, whether it touches the
/// low and high cube faces, and its width.
type ShapeKey = [(bool, bool, usize); 3];

fn shape_key(s: &Subdomain, n: usize) -> ShapeKey {
    s.extended.map(|[lo, hi]| (lo == 0, hi == n, hi - lo))
}

/// Midpoints of the active edges, used for the fill-reducing ordering.
fn dof_coordinates(mesh: &TetMesh, dofs: &DofMap) -> Vec<Point> {
    dofs.active_edges()
        .iter()
        .map(|&e| {
            let [a, b] = mesh.edges()[e];
            let (p, q) = (mesh.vertices()[a], mesh.vertices()[b]);
            [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]), 0.5 * (p[2] + q[2])]
        })
        .collect()
}

/// Builds local solvers group by group. `local` returns the matrix, the
/// global unknowns and the prolongation weights of subdomain `i`.
fn build_shared<F>(cover: &Cover, mesh: &TetMesh, coords: &[Point], local: F) -> Result<Vec<LocalSolver>>
where
    F: Fn(usize) -> Result<(SparseComplexMatrix, Vec<usize>, Vec<f64>)> + Sync,
{
    let n = mesh.n_per_dir();
    let mut groups: HashMap<ShapeKey, Vec<usize>> = HashMap::new();
    for (i, s) in cover.subdomains.iter().enumerate() {
        groups.entry(shape_key(s, n)).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
    groups.sort_unstable();
    let factor = |a: &SparseComplexMatrix, dofs: &[usize]| -> Result<Arc<LdlFactor>> {
        let c: Vec<Point> = dofs.iter().map(|&d| coords[d]).collect();
        Ok(Arc::new(factorize_with_coordinates(a, &c)?))
    };
    let built = groups
        .par_iter()
        .map(|members| {
            let mut out = Vec::with_capacity(members.len());
            let (rep, rep_dofs, rep_w) = local(members[0])?;
            let rep_factor = factor(&rep, &rep_dofs)?;
            out.push((members[0], LocalSolver { dofs: rep_dofs, weights: rep_w, factor: rep_factor.clone() }));
            for &i in &members[1..] {
                let (a, dofs, weights) = local(i)?;
                let f = if same_matrix(&rep, &a) { rep_factor.clone() } else { factor(&a, &dofs)? };
                out.push((i, LocalSolver { dofs, weights, factor: f }));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut solvers: Vec<Option<LocalSolver>> = vec![None; cover.len()];
    for (i, s) in built.into_iter().flatten() {
        solvers[i] = Some(s);
    }
    Ok(solvers.into_iter().map(|s| s.expect("every subdomain is in one group")).collect())
}

impl LocalSolvers {
    /// Factorizes the minors `R_ℓ A R_ℓᵀ` of the preconditioner matrix.
    pub fn pec(
        mesh: &TetMesh,
        dofs: &DofMap,
        cover: &Cover,
        a_prec: &SparseComplexMatrix,
        config_prec: &ProblemConfig,
    ) -> Result<Self> {
        check_absorption(config_prec)?;
        for found in [a_prec.nrows(), dofs.len()] {
            if found != cover.n_dofs {
                return Err(Error::DimensionMismatch { expected: cover.n_dofs, found });
            }
        }
        let coords = dof_coordinates(mesh, dofs);
        let solvers = build_shared(cover, mesh, &coords, |i| {
            let s = &cover.subdomains[i];
            if s.interior_dofs.is_empty() {
                return Err(Error::EmptySubdomain);
            }
            let a = local_matrix_pec(a_prec, &s.interior_dofs)?;
            Ok((a, s.interior_dofs.clone(), s.pou_weights.clone()))
        })?;
        Ok(Self { problem: LocalProblem::Pec, n: cover.n_dofs, solvers })
    }

    /// Assembles and factorizes impedance local problems.
    pub fn impedance(mesh: &TetMesh, dofs: &DofMap, cover: &Cover, config_prec: &ProblemConfig) -> Result<Self> {
        check_absorption(config_prec)?;
        if dofs.len() != cover.n_dofs {
            return Err(Error::DimensionMismatch { expected: cover.n_dofs, found: dofs.len() });
        }
        let coords = dof_coordinates(mesh, dofs);
        let solvers = build_shared(cover, mesh, &coords, |i| {
            let s = &cover.subdomains[i];
            let (b, global) = local_matrix_impedance(mesh, &s.elements, dofs, config_prec)?;
            let mut weights = vec![0.0; global.len()];
            for (&d, &w) in s.interior_dofs.iter().zip(&s.pou_weights) {
                let pos = global.binary_search(&d).expect("interior unknowns lie in the closure");
                weights[pos] = w;
            }
            Ok((b, global, weights))
        })?;
        Ok(Self { problem: LocalProblem::Impedance, n: cover.n_dofs, solvers })
    }

    /// Number of distinct factorizations held.
    pub fn n_distinct_factors(&self) -> usize {
        let mut ptrs: Vec<*const LdlFactor> = self.solvers.iter().map(|s| Arc::as_ptr(&s.factor)).collect();
        ptrs.sort_unstable();
        ptrs.dedup();
        ptrs.len()
    }

    pub fn problem(&self) -> LocalProblem {
        self.problem
    }

    pub fn len(&self) -> usize {
        self.solvers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solvers.is_empty()
    }

    /// Bytes held by the distinct local factors.
    pub fn memory_bytes(&self) -> usize {
        let mut seen = std::collections::HashSet::new();
        self.solvers.iter().filter(|s| seen.insert(Arc::as_ptr(&s.factor))).map(|s| s.factor.memory_bytes()).sum()
    }

    /// `Σ R_ℓᵀ D_ℓ A_ℓ⁻¹ R_ℓ r`, or the unweighted sum. Local solves run in
    /// parallel; contributions are added in subdomain order.
    pub fn apply_sum(&self, r: &[Complex64], weighted: bool) -> Vec<Complex64> {
        let locals: Vec<Vec<Complex64>> = self
            .solvers
            .par_iter()
            .map(|s| {
                let rl: Vec<Complex64> = s.dofs.iter().map(|&d| r[d]).collect();
                let mut x = vec![Complex64::new(0.0, 0.0); rl.len()];
                s.factor.solve_into(&rl, &mut x);
                x
            })
            .collect();
        let mut z = vec![Complex64::new(0.0, 0.0); self.n];
        for (s, x) in self.solvers.iter().zip(locals) {
            if weighted {
                for ((&d, &w), v) in s.dofs.iter().zip(&s.weights).zip(x) {
                    z[d] += v * w;
                }
            } else {
                for (&d, v) in s.dofs.iter().zip(x) {
                    z[d] += v;
                }
            }
        }
        z
    }
}

/// Factorized coarse problem `R0 A R0ᵀ`.
#[derive(Debug, Clone)]
pub struct CoarseSolver {
    r0: SparseRealMatrix,
    factor: LdlFactor,
}

impl CoarseSolver {
    pub fn build(coarse: &CoarseSpace, a_prec: &SparseComplexMatrix, config_prec: &ProblemConfig) -> Result<Self> {
        check_absorption(config_prec)?;
        let a0 = galerkin_coarse_matrix(&coarse.r0, a_prec)?;
        Ok(Self { r0: coarse.r0.clone(), factor: factorize(&a0)? })
    }

    pub fn dim(&self) -> usize {
        self.factor.dim()
    }

    pub fn memory_bytes(&self) -> usize {
        self.factor.memory_bytes()
    }

    /// `Ξ r = R0ᵀ A0⁻¹ R0 r`.
    pub fn apply(&self, r: &[Complex64]) -> Vec<Complex64> {
        let mut rc = vec![Complex64::new(0.0, 0.0); self.r0.nrows()];
        self.r0.mul_vec(r, &mut rc);
        let mut xc = vec![Complex64::new(0.0, 0.0); rc.len()];
        self.factor.solve_into(&rc, &mut xc);
        let mut out = vec![Complex64::new(0.0, 0.0); self.r0.ncols()];
        self.r0.mul_transpose_vec(&xc, &mut out);
        out
    }
}

/// An assembled Schwarz preconditioner. Factorizations are shared through
/// `Arc`, so several kinds can be built on the same local and coarse solves.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    kind: PreconditionerKind,
    levels: Levels,
    locals: Arc<LocalSolvers>,
    coarse: Option<Arc<CoarseSolver>>,
    a_prec: Arc<SparseComplexMatrix>,
}

impl Preconditioner {
    /// Assembles and factorizes everything the kind needs.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        kind: PreconditionerKind,
        levels: Levels,
        mesh: &TetMesh,
        dofs: &DofMap,
        cover: &Cover,
        coarse: Option<&CoarseSpace>,
        config_prec: &ProblemConfig,
        a_prec: Arc<SparseComplexMatrix>,
    ) -> Result<Self> {
        check_absorption(config_prec)?;
        if levels == Levels::TwoLevel && coarse.is_none() {
            return Err(Error::MissingCoarseSpace);
        }
        let locals = if kind.uses_impedance() {
            LocalSolvers::impedance(mesh, dofs, cover, config_prec)?
        } else {
            LocalSolvers::pec(mesh, dofs, cover, &a_prec, config_prec)?
        };
        let coarse = match (levels, coarse) {
            (Levels::TwoLevel, Some(cs)) => Some(Arc::new(CoarseSolver::build(cs, &a_prec, config_prec)?)),
            _ => None,
        };
        Self::from_parts(kind, levels, Arc::new(locals), coarse, a_prec)
    }

    /// Combines existing factorizations.
    pub fn from_parts(
        kind: PreconditionerKind,
        levels: Levels,
        locals: Arc<LocalSolvers>,
        coarse: Option<Arc<CoarseSolver>>,
        a_prec: Arc<SparseComplexMatrix>,
    ) -> Result<Self> {
        let expected = if kind.uses_impedance() { LocalProblem::Impedance } else { LocalProblem::Pec };
        if locals.problem() != expected {
            return Err(Error::InvalidArgument(format!("{kind} needs {expected:?} local problems")));
        }
        if a_prec.nrows() != locals.n {
            return Err(Error::DimensionMismatch { expected: locals.n, found: a_prec.nrows() });
        }
        let coarse = match levels {
            Levels::OneLevel => None,
            Levels::TwoLevel => {
                let c = coarse.ok_or(Error::MissingCoarseSpace)?;
                if c.r0.ncols() != locals.n {
                    return Err(Error::DimensionMismatch { expected: locals.n, found: c.r0.ncols() });
                }
                Some(c)
            }
        };
        Ok(Self { kind, levels, locals, coarse, a_prec })
    }

    pub fn kind(&self) -> PreconditionerKind {
        self.kind
    }

    pub fn levels(&self) -> Levels {
        self.levels
    }

    pub fn dim(&self) -> usize {
        self.locals.n
    }

    pub fn n_local_factors(&self) -> usize {
        self.locals.len()
    }

    pub fn n_coarse_factors(&self) -> usize {
        usize::from(self.coarse.is_some())
    }

    pub fn coarse_dim(&self) -> Option<usize> {
        self.coarse.as_ref().map(|c| c.dim())
    }

    pub fn locals(&self) -> &Arc<LocalSolvers> {
        &self.locals
    }

    pub fn coarse(&self) -> Option<&Arc<CoarseSolver>> {
        self.coarse.as_ref()
    }

    /// `M⁻¹ r`.
    pub fn apply(&self, r: &[Complex64]) -> Result<Vec<Complex64>> {
        if r.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: r.len() });
        }
        let weighted = self.kind.is_weighted();
        let Some(coarse) = &self.coarse else {
            return Ok(self.locals.apply_sum(r, weighted));
        };
        if !self.kind.is_hybrid() {
            let mut z = self.locals.apply_sum(r, weighted);
            for (zi, xi) in z.iter_mut().zip(coarse.apply(r)) {
                *zi += xi;
            }
            return Ok(z);
        }
        // (I - ΞA) L (I - AΞ) r + Ξ r
        let y = coarse.apply(r);
        let ay = self.a_prec.apply(&y);
        let t: Vec<Complex64> = r.iter().zip(&ay).map(|(a, b)| a - b).collect();
        let mut z = self.locals.apply_sum(&t, weighted);
        let xz = coarse.apply(&self.a_prec.apply(&z));
        for ((zi, xi), yi) in z.iter_mut().zip(xz).zip(y) {
            *zi += yi - xi;
        }
        Ok(z)
    }
}
