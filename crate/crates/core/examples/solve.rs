//! Solves one PEC problem with two-level HRAS and prints the iteration count.

use std::sync::Arc;

use maxwell_dd::assembly::{assemble_global, assemble_rhs, BoundaryCondition, ProblemConfig};
use maxwell_dd::decomposition::{build_coarse_restriction, build_cover};
use maxwell_dd::krylov::{gmres, GmresConfig};
use maxwell_dd::mesh::build_nested_pair;
use maxwell_dd::precond::{Levels, Preconditioner, PreconditionerKind};

fn main() -> maxwell_dd::Result<()> {
    let pair = build_nested_pair(16, 4)?;
    let cfg = ProblemConfig::new(5.0, 25.0, BoundaryCondition::Pec);
    let (a, dofs) = assemble_global(&pair.fine, &cfg)?;
    let b = assemble_rhs(&pair.fine, &cfg, &dofs);
    let cover = build_cover(&pair.fine, &dofs, 4, 1)?;
    let coarse = build_coarse_restriction(&pair, BoundaryCondition::Pec)?;
    let a = Arc::new(a);
    let m = Preconditioner::build(
        PreconditionerKind::Hras,
        Levels::TwoLevel,
        &pair.fine,
        &dofs,
        &cover,
        Some(&coarse),
        &cfg,
        a.clone(),
    )?;
    let res = gmres(a.as_ref(), Some(&m), &b, None, &GmresConfig::default())?;
    println!("{} unknowns, {} iterations, converged: {}", dofs.len(), res.iterations, res.converged);
    Ok(())
}
