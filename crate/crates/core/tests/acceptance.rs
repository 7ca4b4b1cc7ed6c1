//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::sync::Arc;
use std::time::Instant;

use maxwell_dd::assembly::{
    assemble_global, assemble_mass, assemble_on_elements, assemble_rhs_with, assemble_with_dofs, hcurl_error,
    local_matrix_impedance, local_matrix_pec, manufactured_curl, manufactured_field, BoundaryCondition, DofMap,
    OperatorCoefficients, ProblemConfig, RhsQuadrature, Source,
};
use maxwell_dd::decomposition::{
    build_coarse_restriction, build_cover, build_partition_of_unity, galerkin_coarse_matrix,
};
use maxwell_dd::direct::factorize;
use maxwell_dd::experiments::{fit_growth_exponent, run_experiment, ExperimentSpec, GrowthFit, KindSpec, Preset};
use maxwell_dd::krylov::{gmres, theorem_bound, GmresConfig, GmresSide, Identity, InitialGuess, LinearOperator};
use maxwell_dd::mesh::{build_cube_mesh, build_nested_pair};
use maxwell_dd::precond::{Levels, Preconditioner, PreconditionerKind};
use maxwell_dd::sparse::SparseComplexMatrix;
use maxwell_dd::Complex64;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn rel_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let d: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b)
}

fn dense(a: &SparseComplexMatrix) -> DMatrix<Complex64> {
    DMatrix::from_row_slice(a.nrows(), a.ncols(), &a.to_dense())
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn partition_of_unity() -> Outcome {
    let mut worst = 0.0f64;
    let mut covers = 0;
    for n in [4, 8, 12] {
        let mesh = build_cube_mesh(n).map_err(|e| e.to_string())?;
        let dofs = DofMap::new(&mesh, BoundaryCondition::Pec);
        for n_sub in [2, 4] {
            if n % n_sub != 0 {
                continue;
            }
            for layers in [1, 2] {
                let cover = build_cover(&mesh, &dofs, n_sub, layers).map_err(|e| e.to_string())?;
                let weights = build_partition_of_unity(&cover).map_err(|e| e.to_string())?;
                // Σ R_ℓᵀ D_ℓ R_ℓ is diagonal by construction; off-diagonal
                // entries are identically zero
                let mut diag = vec![0.0; cover.n_dofs];
                for (s, w) in cover.subdomains.iter().zip(&weights) {
                    for (&d, &x) in s.interior_dofs.iter().zip(w) {
                        diag[d] += x;
                    }
                }
                worst = diag.iter().fold(worst, |m, &d| m.max((d - 1.0).abs()));
                covers += 1;
            }
        }
    }
    check(worst <= 1e-15, format!("{covers} covers, max |Σ R^T D R - I| = {worst:.1e} (tol 1e-15)"))
}

fn coarse_consistency() -> Outcome {
    let k = 5.0;
    let mut worst = 0.0f64;
    for (nf, nc) in [(8, 4), (12, 4)] {
        let pair = build_nested_pair(nf, nc).map_err(|e| e.to_string())?;
        for bc in [BoundaryCondition::Pec, BoundaryCondition::Impedance] {
            for kappa in [k, k * k] {
                let cfg = ProblemConfig::new(k, kappa, bc);
                let (a, _) = assemble_global(&pair.fine, &cfg).map_err(|e| e.to_string())?;
                let cs = build_coarse_restriction(&pair, bc).map_err(|e| e.to_string())?;
                let gal = galerkin_coarse_matrix(&cs.r0, &a).map_err(|e| e.to_string())?;
                let direct = assemble_with_dofs(&pair.coarse, &cfg, &cs.coarse_dofs).map_err(|e| e.to_string())?;
                let (g, d) = (gal.to_dense(), direct.to_dense());
                let scale = direct.max_abs();
                let err = g.iter().zip(&d).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale;
                worst = worst.max(err);
            }
        }
    }
    check(worst <= 1e-10, format!("max relative entry error {worst:.1e} over 8 cases (tol 1e-10)"))
}

fn absorption_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mesh = build_cube_mesh(4).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (k, kappa) in [(5.0, 25.0), (10.0, 100.0)] {
        let cfg = ProblemConfig::new(k, kappa, BoundaryCondition::Pec);
        let (a, dofs) = assemble_global(&mesh, &cfg).map_err(|e| e.to_string())?;
        let m = assemble_mass(&mesh, &dofs).map_err(|e| e.to_string())?;
        for _ in 0..100 {
            let v = random_vec(dofs.len(), &mut rng);
            let (av, mv) = (a.apply(&v), m.apply(&v));
            let vav: Complex64 = v.iter().zip(&av).map(|(x, y)| x.conj() * y).sum();
            let vmv: Complex64 = v.iter().zip(&mv).map(|(x, y)| x.conj() * y).sum();
            let expect = -kappa * vmv.re;
            worst = worst.max((vav.im - expect).abs() / expect.abs());
        }
    }
    check(worst <= 1e-10, format!("max relative error {worst:.1e} over 200 vectors (tol 1e-10)"))
}

/// Dense `M⁻¹` built straight from the defining formulas.
fn dense_preconditioner(
    kind: PreconditionerKind,
    levels: Levels,
    a: &DMatrix<Complex64>,
    locals: &[(DMatrix<Complex64>, Vec<usize>, Vec<f64>)],
    xi: &DMatrix<Complex64>,
) -> DMatrix<Complex64> {
    let n = a.nrows();
    let mut l = DMatrix::<Complex64>::zeros(n, n);
    for (al, idx, w) in locals {
        let inv = al.clone().lu().try_inverse().expect("local matrix invertible");
        for (p, &i) in idx.iter().enumerate() {
            let wi = if kind.is_weighted() { w[p] } else { 1.0 };
            for (q, &j) in idx.iter().enumerate() {
                l[(i, j)] += inv[(p, q)] * wi;
            }
        }
    }
    if levels == Levels::OneLevel {
        return l;
    }
    if !kind.is_hybrid() {
        return l + xi;
    }
    let id = DMatrix::<Complex64>::identity(n, n);
    (&id - xi * a) * l * (&id - a * xi) + xi
}

fn formula_oracle() -> Outcome {
    let (n, n_sub, n_c) = (4, 2, 2);
    let pair = build_nested_pair(n, n_c).map_err(|e| e.to_string())?;
    let cfg = ProblemConfig::new(3.0, 9.0, BoundaryCondition::Pec);
    let (a, dofs) = assemble_global(&pair.fine, &cfg).map_err(|e| e.to_string())?;
    let cover = build_cover(&pair.fine, &dofs, n_sub, 1).map_err(|e| e.to_string())?;
    let cs = build_coarse_restriction(&pair, BoundaryCondition::Pec).map_err(|e| e.to_string())?;
    let ad = dense(&a);
    let r0 = DMatrix::from_row_slice(cs.r0.nrows(), cs.r0.ncols(), &cs.r0.to_dense());
    let a0 = &r0 * &ad * r0.transpose();
    let xi = r0.transpose() * a0.lu().try_inverse().ok_or("singular coarse matrix")? * &r0;

    let mut pec = Vec::new();
    let mut imp = Vec::new();
    for s in &cover.subdomains {
        let al = local_matrix_pec(&a, &s.interior_dofs).map_err(|e| e.to_string())?;
        pec.push((dense(&al), s.interior_dofs.clone(), s.pou_weights.clone()));
        let (b, global) = local_matrix_impedance(&pair.fine, &s.elements, &dofs, &cfg).map_err(|e| e.to_string())?;
        let mut w = vec![0.0; global.len()];
        for (&d, &x) in s.interior_dofs.iter().zip(&s.pou_weights) {
            w[global.binary_search(&d).unwrap()] = x;
        }
        imp.push((dense(&b), global, w));
    }

    let a = Arc::new(a);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let vs: Vec<Vec<Complex64>> = (0..20).map(|_| random_vec(dofs.len(), &mut rng)).collect();
    let mut worst = 0.0f64;
    let mut combos = 0;
    for kind in PreconditionerKind::ALL {
        for levels in [Levels::OneLevel, Levels::TwoLevel] {
            let p = Preconditioner::build(kind, levels, &pair.fine, &dofs, &cover, Some(&cs), &cfg, a.clone())
                .map_err(|e| e.to_string())?;
            let locals = if kind.uses_impedance() { &imp } else { &pec };
            let m = dense_preconditioner(kind, levels, &ad, locals, &xi);
            for v in &vs {
                let expect: Vec<Complex64> = (&m * DMatrix::from_column_slice(v.len(), 1, v)).iter().copied().collect();
                let got = p.apply(v).map_err(|e| e.to_string())?;
                worst = worst.max(rel_diff(&got, &expect));
            }
            combos += 1;
        }
    }
    check(
        worst <= 1e-9,
        format!("{combos} kind/level combinations, {} unknowns, max relative error {worst:.1e} (tol 1e-9)", dofs.len()),
    )
}

fn fem_convergence() -> Outcome {
    let mut errs = Vec::new();
    for n in [8, 16] {
        let mesh = build_cube_mesh(n).map_err(|e| e.to_string())?;
        let dofs = DofMap::new(&mesh, BoundaryCondition::Pec);
        let one = c(1.0, 0.0);
        let coeffs = OperatorCoefficients { stiffness: one, mass: one, surface: c(0.0, 0.0) };
        let all: Vec<usize> = (0..mesh.n_tets()).collect();
        let a = assemble_on_elements(&mesh, &all, &dofs, coeffs, &[]).map_err(|e| e.to_string())?;
        let f =
            assemble_rhs_with(&mesh, &Source::Manufactured { mass_coefficient: 1.0 }, &dofs, RhsQuadrature::default());
        let u = factorize(&a).and_then(|fac| fac.solve(&f)).map_err(|e| e.to_string())?;
        let err = hcurl_error(&mesh, &dofs, &u, manufactured_field, manufactured_curl).map_err(|e| e.to_string())?;
        errs.push(err.total());
    }
    let rate = (errs[0] / errs[1]).log2();
    check(
        (0.8..=1.2).contains(&rate),
        format!("H(curl) errors {:.3e} (n=8), {:.3e} (n=16), rate {rate:.3} (want [0.8, 1.2])", errs[0], errs[1]),
    )
}

fn label(kind: PreconditionerKind, levels: Levels) -> String {
    KindSpec::new(kind, levels).to_string()
}

fn iterations(table: &maxwell_dd::experiments::ResultTable, label: &str) -> Result<Vec<usize>, String> {
    let col = table.column(label).ok_or(format!("missing column {label}"))?;
    Ok(col.iter().map(|r| if r.converged { r.iterations } else { usize::MAX }).collect())
}

fn exp1_trend() -> Outcome {
    let mut spec = ExperimentSpec::preset(Preset::Exp1);
    spec.k_list = vec![5.0, 7.5, 10.0];
    let table = run_experiment(&spec).map_err(|e| e.to_string())?;
    if table.rows.len() != 3 {
        return Err(format!("expected 3 rows, got {}", table.rows.len()));
    }
    use PreconditionerKind::*;
    let two = Levels::TwoLevel;
    let (a, r, h) = (
        iterations(&table, &label(As, two))?,
        iterations(&table, &label(Ras, two))?,
        iterations(&table, &label(Hras, two))?,
    );
    let ordered = (0..3).all(|i| h[i] <= r[i] && r[i] <= a[i]);
    let (lo, hi) = (*h.iter().min().unwrap(), *h.iter().max().unwrap());
    let bounded = hi != usize::MAX && (hi - lo) as f64 <= 0.5 * lo as f64;
    let near = (6..=24).contains(&h[2]);
    check(
        ordered && bounded && near,
        format!(
            "k = 5/7.5/10: AS {a:?}, RAS {r:?}, HRAS {h:?}; ordering {ordered}, HRAS spread ≤ 50% {bounded}, HRAS(k=10) in [6, 24] {near}"
        ),
    )
}

fn exp4_two_level_benefit() -> Outcome {
    let mut spec = ExperimentSpec::preset(Preset::Exp4);
    spec.k_list = vec![5.0, 10.0];
    spec.alpha = 0.8;
    spec.alpha_prime = 0.8;
    use PreconditionerKind::ImpHras;
    spec.kinds = vec![KindSpec::new(ImpHras, Levels::TwoLevel), KindSpec::new(ImpHras, Levels::OneLevel)];
    let table = run_experiment(&spec).map_err(|e| e.to_string())?;
    if table.rows.len() != 2 {
        return Err(format!("expected 2 rows, got {}", table.rows.len()));
    }
    let two = iterations(&table, &label(ImpHras, Levels::TwoLevel))?;
    let one = iterations(&table, &label(ImpHras, Levels::OneLevel))?;
    let ok = two.iter().zip(&one).all(|(t, o)| t < o);
    check(ok, format!("k = 5/10: 2-level {two:?}, 1-level {one:?} (want 2-level < 1-level at each k)"))
}

fn exponent_fit() -> Outcome {
    let ks = [10.0, 20.0, 30.0, 40.0];
    let ys = [3.4e5, 7.1e6, 4.1e7, 1.3e8];
    let fit = GrowthFit::from_gamma(fit_growth_exponent(&ks, &ys).map_err(|e| e.to_string())?);
    check(
        (fit.gamma - 4.5).abs() <= 0.2 && (fit.xi - 1.0).abs() <= 0.05,
        format!("gamma {:.3} (want 4.5 ± 0.2), xi {:.3} (want 1.0 ± 0.05)", fit.gamma, fit.xi),
    )
}

struct Dense(DMatrix<Complex64>);

impl LinearOperator for Dense {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let v = &self.0 * DMatrix::from_column_slice(x.len(), 1, x);
        y.copy_from_slice(v.as_slice());
    }
}

fn random_dense(n: usize, shift: f64, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    let s = 1.0 / (n as f64).sqrt();
    DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { shift } else { 0.0 };
        c(d + s * rng.random_range(-1.0..1.0), s * rng.random_range(-1.0..1.0))
    })
}

/// Relative residuals of the exact minimizers over growing Krylov spaces,
/// from classical Gram-Schmidt (applied twice) and dense least squares.
fn oracle_history(a: &DMatrix<Complex64>, b: &[Complex64], steps: usize) -> Vec<f64> {
    let n = a.nrows();
    let bv = DMatrix::from_column_slice(n, 1, b);
    let beta = bv.norm();
    let mut basis: Vec<DMatrix<Complex64>> = vec![bv.unscale(beta)];
    let mut hist = vec![1.0];
    for m in 1..=steps {
        let mut w = a * &basis[m - 1];
        for _ in 0..2 {
            for q in &basis {
                let h = q.adjoint() * &w;
                w -= q * h[(0, 0)];
            }
        }
        let v = DMatrix::from_columns(&basis.iter().map(|q| q.column(0).into_owned()).collect::<Vec<_>>());
        let av = a * &v;
        let svd = av.clone().svd(true, true);
        let y = svd.solve(&bv, 1e-14).expect("least squares");
        hist.push((&bv - av * y).norm() / beta);
        if m == n {
            break;
        }
        let wn = w.norm();
        if wn < 1e-12 * beta {
            break;
        }
        basis.push(w.unscale(wn));
    }
    hist
}

fn gmres_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 30;
    let mut notes = Vec::new();
    let mut ok = true;

    // history against the dense oracle
    let mut worst = 0.0f64;
    for shift in [0.0, 1.5, 3.0] {
        let a = random_dense(n, shift, &mut rng);
        let b = random_vec(n, &mut rng);
        let cfg =
            GmresConfig { tol: 1e-13, max_iter: n, initial_guess: InitialGuess::Zero, side: GmresSide::RightStandard };
        let res = gmres(&Dense(a.clone()), None, &b, None, &cfg).map_err(|e| e.to_string())?;
        let oracle = oracle_history(&a, &b, res.iterations);
        for (x, y) in res.residual_history.iter().zip(&oracle) {
            worst = worst.max((x - y).abs());
        }
    }
    ok &= worst <= 1e-8;
    notes.push(format!("history vs dense oracle {worst:.1e} (tol 1e-8)"));

    // m distinct eigenvalues: at most m iterations
    let m = 5;
    let q = random_dense(n, 0.0, &mut rng).qr().q();
    let eig: Vec<Complex64> = (0..m).map(|_| c(rng.random_range(1.0..4.0), rng.random_range(-1.0..1.0))).collect();
    let d = DMatrix::from_fn(n, n, |i, j| if i == j { eig[i % m] } else { c(0.0, 0.0) });
    let a = &q * d * q.adjoint();
    let b = random_vec(n, &mut rng);
    let cfg =
        GmresConfig { tol: 1e-10, max_iter: n, initial_guess: InitialGuess::Zero, side: GmresSide::RightStandard };
    let res = gmres(&Dense(a), None, &b, None, &cfg).map_err(|e| e.to_string())?;
    ok &= res.converged && res.iterations <= m;
    notes.push(format!("{m} distinct eigenvalues: {} iterations", res.iterations));

    // weighted product with C = I reproduces the standard history
    let ad = random_dense(n, 2.0, &mut rng);
    let trip: Vec<(usize, usize, Complex64)> =
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| (i, j, ad[(i, j)])).collect();
    let sa = SparseComplexMatrix::from_triplets(n, n, trip).map_err(|e| e.to_string())?;
    let id = SparseComplexMatrix::identity(n, c(1.0, 0.0));
    let b = random_vec(n, &mut rng);
    let base = GmresConfig {
        tol: 1e-12,
        max_iter: n,
        initial_guess: InitialGuess::Random { seed: 1 },
        side: GmresSide::RightStandard,
    };
    let std = gmres(&sa, Some(&Identity(n)), &b, None, &base).map_err(|e| e.to_string())?;
    let wcfg = GmresConfig { side: GmresSide::LeftWeighted, ..base };
    let wtd = gmres(&sa, Some(&Identity(n)), &b, Some(&id), &wcfg).map_err(|e| e.to_string())?;
    let same_len = std.residual_history.len() == wtd.residual_history.len();
    let diff = std.residual_history.iter().zip(&wtd.residual_history).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    ok &= same_len && diff <= 1e-12;
    notes.push(format!("weighted vs standard {diff:.1e} (tol 1e-12)"));

    check(ok, notes.join("; "))
}

fn bound_evaluator() -> Outcome {
    let b = |h: f64, m: u32| theorem_bound(h, 1.0, m).map_err(|e| e.to_string());
    let exact = b(1.0, 2)? == 0.75;
    let mut monotone_m = true;
    for h in [0.5, 1.0, 2.0, 5.0] {
        let mut prev = b(h, 1)?;
        for m in 2..=50 {
            let v = b(h, m)?;
            monotone_m &= v < prev;
            prev = v;
        }
    }
    let ratios = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
    let mut toward_one = true;
    for m in [1, 2, 10] {
        let vals: Vec<f64> = ratios.iter().map(|&h| b(h, m)).collect::<Result<_, _>>()?;
        toward_one &= vals.windows(2).all(|w| w[0] < w[1]) && 1.0 - vals[vals.len() - 1] < 1e-4 * m as f64;
    }
    check(
        exact && monotone_m && toward_one,
        format!(
            "bound(1, 2) = 0.75 exactly {exact}; decreasing in m {monotone_m}; increasing to 1 in H/delta {toward_one}"
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("partition of unity", partition_of_unity),
        ("coarse-space consistency", coarse_consistency),
        ("absorption identity", absorption_identity),
        ("preconditioner formula oracle", formula_oracle),
        ("FEM convergence", fem_convergence),
        ("bounded iterations, generous overlap", exp1_trend),
        ("two-level benefit", exp4_two_level_benefit),
        ("exponent fit", exponent_fit),
        ("GMRES correctness", gmres_correctness),
        ("bound evaluator", bound_evaluator),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let out = f();
        let secs = t.elapsed().as_secs_f64();
        match out {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
