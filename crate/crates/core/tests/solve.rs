use std::sync::Arc;

use maxwell_dd::assembly::{assemble_ck, assemble_global, assemble_rhs, BoundaryCondition, ProblemConfig};
use maxwell_dd::decomposition::{build_coarse_restriction, build_cover};
use maxwell_dd::direct::factorize;
use maxwell_dd::krylov::{gmres, GmresConfig, GmresSide, InitialGuess};
use maxwell_dd::mesh::build_nested_pair;
use maxwell_dd::precond::{Levels, Preconditioner, PreconditionerKind};
use maxwell_dd::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    d / b.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn relative_residual(a: &maxwell_dd::sparse::SparseComplexMatrix, x: &[Complex64], b: &[Complex64]) -> f64 {
    rel_diff(&a.apply(x), b)
}

#[test]
fn every_kind_solves_a_small_problem() {
    for bc in [BoundaryCondition::Pec, BoundaryCondition::Impedance] {
        let pair = build_nested_pair(8, 2).unwrap();
        let cfg = ProblemConfig::new(4.0, 16.0, bc);
        let (a, dofs) = assemble_global(&pair.fine, &cfg).unwrap();
        let b = assemble_rhs(&pair.fine, &cfg, &dofs);
        let exact = factorize(&a).unwrap().solve(&b).unwrap();
        let cover = build_cover(&pair.fine, &dofs, 2, 1).unwrap();
        let cs = build_coarse_restriction(&pair, bc).unwrap();
        let a = Arc::new(a);
        for kind in PreconditionerKind::ALL {
            for levels in [Levels::OneLevel, Levels::TwoLevel] {
                let p =
                    Preconditioner::build(kind, levels, &pair.fine, &dofs, &cover, Some(&cs), &cfg, a.clone()).unwrap();
                let cfg = GmresConfig { tol: 1e-10, initial_guess: InitialGuess::Zero, ..GmresConfig::default() };
                let res = gmres(a.as_ref(), Some(&p), &b, None, &cfg).unwrap();
                assert!(res.converged, "{bc:?} {kind} {levels:?}");
                let rr = relative_residual(&a, &res.solution, &b);
                assert!(rr < 1e-9, "{bc:?} {kind} {levels:?} {rr:e} {}", res.final_residual());
                assert!(rel_diff(&res.solution, &exact) < 1e-6, "{bc:?} {kind} {levels:?}");
            }
        }
    }
}

#[test]
fn weighted_left_preconditioning_converges() {
    let pair = build_nested_pair(8, 2).unwrap();
    let k = 4.0;
    let cfg = ProblemConfig::new(k, k * k, BoundaryCondition::Pec);
    let (a, dofs) = assemble_global(&pair.fine, &cfg).unwrap();
    let ck = assemble_ck(&pair.fine, k, &dofs).unwrap();
    let b = assemble_rhs(&pair.fine, &cfg, &dofs);
    let cover = build_cover(&pair.fine, &dofs, 2, 2).unwrap();
    let cs = build_coarse_restriction(&pair, BoundaryCondition::Pec).unwrap();
    let a = Arc::new(a);
    let p = Preconditioner::build(
        PreconditionerKind::Has,
        Levels::TwoLevel,
        &pair.fine,
        &dofs,
        &cover,
        Some(&cs),
        &cfg,
        a.clone(),
    )
    .unwrap();
    let gcfg = GmresConfig {
        tol: 1e-8,
        initial_guess: InitialGuess::Zero,
        side: GmresSide::LeftWeighted,
        ..GmresConfig::default()
    };
    let res = gmres(a.as_ref(), Some(&p), &b, Some(&ck), &gcfg).unwrap();
    assert!(res.converged);
    assert!(res.residual_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    let rr = relative_residual(&a, &res.solution, &b);
    assert!(rr < 1e-5, "{rr:e} {:?}", res.residual_history);
}

#[test]
fn additive_schwarz_is_complex_symmetric() {
    // AS and HAS are built from symmetric pieces without weights
    let pair = build_nested_pair(4, 2).unwrap();
    let cfg = ProblemConfig::new(3.0, 9.0, BoundaryCondition::Pec);
    let (a, dofs) = assemble_global(&pair.fine, &cfg).unwrap();
    let cover = build_cover(&pair.fine, &dofs, 2, 1).unwrap();
    let cs = build_coarse_restriction(&pair, BoundaryCondition::Pec).unwrap();
    let a = Arc::new(a);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut v = || -> Vec<Complex64> {
        (0..dofs.len()).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
    };
    let (x, y) = (v(), v());
    let dot = |p: &[Complex64], q: &[Complex64]| -> Complex64 { p.iter().zip(q).map(|(s, t)| s * t).sum() };
    for kind in [PreconditionerKind::As, PreconditionerKind::Has] {
        for levels in [Levels::OneLevel, Levels::TwoLevel] {
            let p = Preconditioner::build(kind, levels, &pair.fine, &dofs, &cover, Some(&cs), &cfg, a.clone()).unwrap();
            // yᵀ M x = xᵀ M y
            let (l, r) = (dot(&y, &p.apply(&x).unwrap()), dot(&x, &p.apply(&y).unwrap()));
            assert!((l - r).norm() <= 1e-11 * l.norm(), "{kind} {levels:?}");
        }
    }
    // RAS is not symmetric
    let p = Preconditioner::build(PreconditionerKind::Ras, Levels::OneLevel, &pair.fine, &dofs, &cover, None, &cfg, a)
        .unwrap();
    let (l, r) = (dot(&y, &p.apply(&x).unwrap()), dot(&x, &p.apply(&y).unwrap()));
    assert!((l - r).norm() > 1e-6 * l.norm());
}
