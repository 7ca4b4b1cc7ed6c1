//! Parameter sweeps over the wavenumber.
//!
//! For each `k` the driver picks a fine mesh with `h ~ k^{-3/2}`, a box
//! cover with `H_sub ~ k^{-α}` and a coarse mesh with `H ~ k^{-α'}`,
//! assembles the system with absorption `κ_prob` and the preconditioner
//! blocks with `κ_prec = k^β`, and solves with right-preconditioned GMRES
//! from a random initial guess.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};

use crate::assembly::{assemble_global, assemble_rhs, BoundaryCondition, ProblemConfig, Source};
use crate::decomposition::{build_coarse_restriction, build_cover};
use crate::error::{Error, Result};
use crate::krylov::{gmres, GmresConfig, GmresSide, InitialGuess};
use crate::mesh::build_nested_pair;
use crate::precond::{CoarseSolver, Levels, LocalSolvers, Preconditioner, PreconditionerKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Exp1,
    Exp2,
    Exp3,
    Exp4,
    Custom,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exp1" => Ok(Preset::Exp1),
            "exp2" => Ok(Preset::Exp2),
            "exp3" => Ok(Preset::Exp3),
            "exp4" => Ok(Preset::Exp4),
            "custom" => Ok(Preset::Custom),
            _ => Err(Error::InvalidArgument(format!("unknown preset '{s}'"))),
        }
    }
}

/// Absorption of the system being solved as a function of `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KappaRule {
    KSquared,
    K,
    Zero,
}

impl KappaRule {
    pub fn value(self, k: f64) -> f64 {
        match self {
            KappaRule::KSquared => k * k,
            KappaRule::K => k,
            KappaRule::Zero => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Overlap {
    /// One element layer, `δ ~ 2h`.
    TwoH,
    /// About a quarter of the subdomain width, at least one layer.
    Generous,
}

impl Overlap {
    pub fn layers(self, n_fine: usize, n_sub: usize) -> usize {
        match self {
            Overlap::TwoH => 1,
            Overlap::Generous => ((0.25 * n_fine as f64 / n_sub as f64).round() as usize).max(1),
        }
    }
}

impl FromStr for Overlap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "2h" | "twoh" => Ok(Overlap::TwoH),
            "generous" => Ok(Overlap::Generous),
            _ => Err(Error::InvalidArgument(format!("unknown overlap '{s}'"))),
        }
    }
}

/// A preconditioner column of the result table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KindSpec {
    pub kind: PreconditionerKind,
    pub levels: Levels,
}

impl KindSpec {
    pub fn new(kind: PreconditionerKind, levels: Levels) -> Self {
        Self { kind, levels }
    }
}

impl fmt::Display for KindSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}L", self.kind, self.levels.count())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub preset: Preset,
    pub k_list: Vec<f64>,
    /// `H_sub ~ k^-alpha`.
    pub alpha: f64,
    /// `H ~ k^-alpha_prime`.
    pub alpha_prime: f64,
    /// `kappa_prec = k^beta`.
    pub beta: f64,
    pub kappa_prob: KappaRule,
    pub bc: BoundaryCondition,
    pub overlap: Overlap,
    pub kinds: Vec<KindSpec>,
    /// `n_fine ≈ mesh_constant * k^{3/2}`.
    pub mesh_constant: f64,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    /// Rows whose estimated unknown count exceeds this are skipped.
    pub dof_cap: usize,
}

impl ExperimentSpec {
    pub fn preset(preset: Preset) -> Self {
        use PreconditionerKind::*;
        let two = |k| KindSpec::new(k, Levels::TwoLevel);
        let base = Self {
            preset,
            k_list: vec![5.0, 10.0],
            alpha: 0.8,
            alpha_prime: 0.8,
            beta: 2.0,
            kappa_prob: KappaRule::KSquared,
            bc: BoundaryCondition::Pec,
            overlap: Overlap::TwoH,
            kinds: vec![two(Hras)],
            mesh_constant: 1.3,
            seed: 0,
            tol: 1e-6,
            max_iter: 200,
            dof_cap: 2_000_000,
        };
        match preset {
            Preset::Exp1 => Self {
                k_list: vec![5.0, 7.5, 10.0],
                alpha: 1.0,
                alpha_prime: 1.0,
                overlap: Overlap::Generous,
                kinds: vec![two(As), two(Ras), two(Hras)],
                ..base
            },
            Preset::Exp2 => Self { kinds: vec![two(Ras), two(Hras), two(ImpRas), two(ImpHras)], ..base },
            Preset::Exp3 => {
                Self { bc: BoundaryCondition::Impedance, kappa_prob: KappaRule::K, kinds: vec![two(ImpHras)], ..base }
            }
            Preset::Exp4 => Self {
                bc: BoundaryCondition::Impedance,
                kappa_prob: KappaRule::Zero,
                beta: 1.0,
                kinds: vec![two(ImpHras), KindSpec::new(ImpHras, Levels::OneLevel)],
                ..base
            },
            Preset::Custom => base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_list.iter().any(|&k| !(k > 0.0) || !k.is_finite()) {
            return Err(Error::InvalidArgument("wavenumbers must be positive".into()));
        }
        if !(self.mesh_constant > 0.0) {
            return Err(Error::InvalidArgument("mesh constant must be positive".into()));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidArgument("need tol > 0 and max_iter >= 1".into()));
        }
        if self.alpha < 0.0 || self.alpha_prime < 0.0 {
            return Err(Error::InvalidArgument("alpha and alpha' must be nonnegative".into()));
        }
        Ok(())
    }

    fn needs_coarse(&self) -> bool {
        self.kinds.iter().any(|k| k.levels == Levels::TwoLevel)
    }
}

/// Mesh and solver parameters for one wavenumber.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedSizes {
    pub n_fine: usize,
    pub n_sub: usize,
    pub n_coarse: usize,
    pub overlap_layers: usize,
    pub kappa_prob: f64,
    pub kappa_prec: f64,
}

fn largest_divisor_at_most(n: usize, cap: usize) -> usize {
    (1..=cap.max(1).min(n)).rev().find(|d| n.is_multiple_of(*d)).unwrap_or(1)
}

/// Picks `n_fine` within `±3` of `round(c k^{3/2})` so that the desired
/// subdomain and coarse counts divide it as closely as possible; ties go to
/// the value nearest the target, then the smaller one.
pub fn resolve_sizes(spec: &ExperimentSpec, k: f64) -> Result<ResolvedSizes> {
    spec.validate()?;
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!("need k > 0, got {k}")));
    }
    let n0 = ((spec.mesh_constant * k.powf(1.5)).round() as usize).max(1);
    let want_sub = (k.powf(spec.alpha).round() as usize).max(1);
    let want_coarse = (k.powf(spec.alpha_prime).round() as usize).max(1);
    let lo = n0.saturating_sub(3).max(1);
    let (n_fine, n_sub, n_coarse) = (lo..=n0 + 3)
        .map(|n| (n, largest_divisor_at_most(n, want_sub), largest_divisor_at_most(n, want_coarse)))
        .min_by_key(|&(n, s, q)| ((want_sub - s) + (want_coarse - q), n.abs_diff(n0), n))
        .expect("nonempty search range");
    Ok(ResolvedSizes {
        n_fine,
        n_sub,
        n_coarse,
        overlap_layers: spec.overlap.layers(n_fine, n_sub),
        kappa_prob: spec.kappa_prob.value(k),
        kappa_prec: k.powf(spec.beta),
    })
}

/// Number of unknowns on an `n^3` mesh.
pub fn dof_count(n: usize, bc: BoundaryCondition) -> usize {
    let edges = 3 * n * (n + 1) * (n + 1) + 3 * n * n * (n + 1) + n * n * n;
    match bc {
        BoundaryCondition::Pec => edges - 18 * n * n,
        BoundaryCondition::Impedance => edges,
    }
}

/// Outcome of one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KindResult {
    pub iterations: usize,
    pub converged: bool,
    /// Setup plus solve, in seconds.
    pub time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub k: f64,
    pub n_dofs: usize,
    pub n_subdomains: usize,
    pub n_coarse_dofs: usize,
    pub results: Vec<KindResult>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub labels: Vec<String>,
    pub rows: Vec<ResultRow>,
}

/// Fitted exponent of one column and the size exponent `ξ = 2γ/9`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthFit {
    pub gamma: f64,
    pub xi: f64,
}

impl GrowthFit {
    pub fn from_gamma(gamma: f64) -> Self {
        Self { gamma, xi: gamma * 2.0 / 9.0 }
    }
}

/// Least-squares slope of `log y` against `log k`.
pub fn fit_growth_exponent(ks: &[f64], ys: &[f64]) -> Result<f64> {
    if ks.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: ks.len(), found: ys.len() });
    }
    if ks.len() < 2 {
        return Err(Error::InvalidArgument("need at least two points to fit".into()));
    }
    if ks.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument("values must be positive".into()));
    }
    let x: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
    let y: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let m = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("wavenumbers must not all coincide".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

impl ResultTable {
    /// Growth exponent of each iteration column; `None` with fewer than two
    /// rows.
    pub fn fit_iterations(&self) -> Vec<Option<GrowthFit>> {
        let ks: Vec<f64> = self.rows.iter().map(|r| r.k).collect();
        (0..self.labels.len())
            .map(|c| {
                let ys: Vec<f64> = self.rows.iter().map(|r| r.results[c].iterations as f64).collect();
                fit_growth_exponent(&ks, &ys).ok().map(GrowthFit::from_gamma)
            })
            .collect()
    }

    /// Iteration counts of the column with `label`.
    pub fn column(&self, label: &str) -> Option<Vec<KindResult>> {
        let c = self.labels.iter().position(|l| l == label)?;
        Some(self.rows.iter().map(|r| r.results[c]).collect())
    }
}

/// Runs every wavenumber in `spec.k_list`, skipping rows above the unknown cap.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    let mut table = ResultTable { labels: spec.kinds.iter().map(|k| k.to_string()).collect(), rows: Vec::new() };
    if spec.kinds.is_empty() {
        return Ok(table);
    }
    for &k in &spec.k_list {
        let sizes = resolve_sizes(spec, k)?;
        let estimate = dof_count(sizes.n_fine, spec.bc);
        if estimate > spec.dof_cap {
            warn!("k = {k}: {estimate} unknowns exceed the cap of {}, row skipped", spec.dof_cap);
            continue;
        }
        table.rows.push(run_row(spec, k, &sizes)?);
    }
    Ok(table)
}

fn run_row(spec: &ExperimentSpec, k: f64, sizes: &ResolvedSizes) -> Result<ResultRow> {
    info!("k = {k}: {sizes:?}");
    let start = Instant::now();
    let pair = build_nested_pair(sizes.n_fine, sizes.n_coarse)?;
    let mesh = &pair.fine;
    let cfg_prob = ProblemConfig { k, kappa: sizes.kappa_prob, bc: spec.bc, rhs: Source::GaussianBump };
    let cfg_prec = ProblemConfig { kappa: sizes.kappa_prec, ..cfg_prob };
    let (a_prob, dofs) = assemble_global(mesh, &cfg_prob)?;
    let a_prob = Arc::new(a_prob);
    let a_prec =
        if cfg_prec.kappa == cfg_prob.kappa { a_prob.clone() } else { Arc::new(assemble_global(mesh, &cfg_prec)?.0) };
    let rhs = assemble_rhs(mesh, &cfg_prob, &dofs);
    let cover = build_cover(mesh, &dofs, sizes.n_sub, sizes.overlap_layers)?;
    let coarse = if spec.needs_coarse() { Some(build_coarse_restriction(&pair, spec.bc)?) } else { None };
    let common = start.elapsed().as_secs_f64();

    let mut pec: Option<(Arc<LocalSolvers>, f64)> = None;
    let mut imp: Option<(Arc<LocalSolvers>, f64)> = None;
    let mut coarse_solver: Option<(Arc<CoarseSolver>, f64)> = None;
    let mut results = Vec::with_capacity(spec.kinds.len());
    for ks in &spec.kinds {
        let slot = if ks.kind.uses_impedance() { &mut imp } else { &mut pec };
        if slot.is_none() {
            let t = Instant::now();
            let locals = if ks.kind.uses_impedance() {
                LocalSolvers::impedance(mesh, &dofs, &cover, &cfg_prec)?
            } else {
                LocalSolvers::pec(mesh, &dofs, &cover, &a_prec, &cfg_prec)?
            };
            info!(
                "{} local factors ({} distinct, {:.1} MB) in {:.2}s",
                locals.len(),
                locals.n_distinct_factors(),
                locals.memory_bytes() as f64 / 1e6,
                t.elapsed().as_secs_f64()
            );
            *slot = Some((Arc::new(locals), t.elapsed().as_secs_f64()));
        }
        let (locals, local_time) = slot.clone().expect("local solvers built above");
        let (coarse_part, coarse_time) = match ks.levels {
            Levels::OneLevel => (None, 0.0),
            Levels::TwoLevel => {
                if coarse_solver.is_none() {
                    let t = Instant::now();
                    let cs = coarse.as_ref().ok_or(Error::MissingCoarseSpace)?;
                    let solver = CoarseSolver::build(cs, &a_prec, &cfg_prec)?;
                    coarse_solver = Some((Arc::new(solver), t.elapsed().as_secs_f64()));
                }
                let (c, t) = coarse_solver.clone().expect("coarse solver built above");
                (Some(c), t)
            }
        };
        let p = Preconditioner::from_parts(ks.kind, ks.levels, locals, coarse_part, a_prec.clone())?;
        let t = Instant::now();
        let gcfg = GmresConfig {
            tol: spec.tol,
            max_iter: spec.max_iter,
            initial_guess: InitialGuess::Random { seed: spec.seed },
            side: GmresSide::RightStandard,
        };
        let res = gmres(a_prob.as_ref(), Some(&p), &rhs, None, &gcfg)?;
        let solve = t.elapsed().as_secs_f64();
        info!("k = {k} {ks}: {} iterations, converged = {}, solve {solve:.2}s", res.iterations, res.converged);
        results.push(KindResult {
            iterations: res.iterations,
            converged: res.converged,
            time_s: common + local_time + coarse_time + solve,
        });
    }
    Ok(ResultRow {
        k,
        n_dofs: dofs.len(),
        n_subdomains: cover.len(),
        n_coarse_dofs: coarse.as_ref().map_or(0, |c| c.len()),
        results,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "md" | "markdown" => Ok(TableFormat::Markdown),
            _ => Err(Error::InvalidArgument(format!("unknown table format '{s}'"))),
        }
    }
}

fn header(table: &ResultTable) -> Vec<String> {
    let mut h: Vec<String> = ["k", "n", "N_sub", "n_CS"].map(String::from).to_vec();
    h.extend(table.labels.iter().map(|l| format!("#{l}")));
    h.extend(table.labels.iter().map(|l| format!("Time {l}")));
    h
}

fn iteration_cell(r: &KindResult) -> String {
    if r.converged {
        r.iterations.to_string()
    } else {
        format!("> {}", r.iterations)
    }
}

fn row_cells(row: &ResultRow) -> Vec<String> {
    let mut cells =
        vec![row.k.to_string(), row.n_dofs.to_string(), row.n_subdomains.to_string(), row.n_coarse_dofs.to_string()];
    cells.extend(row.results.iter().map(iteration_cell));
    cells.extend(row.results.iter().map(|r| format!("{:.2}", r.time_s)));
    cells
}

fn footer_cells(table: &ResultTable) -> Vec<Vec<String>> {
    let fits = table.fit_iterations();
    let line = |name: &str, f: &dyn Fn(&GrowthFit) -> f64| {
        let mut cells = vec![name.to_string(), String::new(), String::new(), String::new()];
        cells.extend(fits.iter().map(|g| g.as_ref().map_or(String::new(), |g| format!("{:.2}", f(g)))));
        cells.extend(fits.iter().map(|_| String::new()));
        cells
    };
    vec![line("gamma", &|g| g.gamma), line("xi", &|g| g.xi)]
}

/// Renders the table; `with_fit` appends `γ` and `ξ` rows for the
/// iteration columns.
pub fn emit_table(table: &ResultTable, format: TableFormat, with_fit: bool) -> String {
    let mut lines = vec![header(table)];
    lines.extend(table.rows.iter().map(row_cells));
    if with_fit && table.rows.len() >= 2 {
        lines.extend(footer_cells(table));
    }
    match format {
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for l in &lines {
                w.write_record(l).expect("writing to memory");
            }
            String::from_utf8(w.into_inner().expect("writing to memory")).expect("csv output is utf-8")
        }
        TableFormat::Markdown => {
            let mut out = String::new();
            for (i, l) in lines.iter().enumerate() {
                let _ = writeln!(out, "| {} |", l.join(" | "));
                if i == 0 {
                    let _ = writeln!(out, "|{}", "---|".repeat(l.len()));
                }
            }
            out
        }
    }
}

/// Parses the data rows of a CSV table produced by [`emit_table`].
pub fn parse_table_csv(text: &str) -> Result<ResultTable> {
    let bad = |m: &str| Error::InvalidArgument(format!("malformed result table: {m}"));
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let head: Vec<String> = rd.headers().map_err(|e| bad(&e.to_string()))?.iter().map(String::from).collect();
    if head.len() < 4 || !(head.len() - 4).is_multiple_of(2) {
        return Err(bad("unexpected column count"));
    }
    let nk = (head.len() - 4) / 2;
    let labels: Vec<String> = head[4..4 + nk].iter().map(|h| h.strip_prefix('#').unwrap_or(h).to_string()).collect();
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| bad(&e.to_string()))?;
        if rec.get(0) == Some("gamma") || rec.get(0) == Some("xi") {
            continue;
        }
        let num = |i: usize| rec.get(i).ok_or_else(|| bad("short row"));
        let k: f64 = num(0)?.parse().map_err(|_| bad("k"))?;
        let parse_usize = |s: &str| s.parse::<usize>().map_err(|_| bad(s));
        let mut results = Vec::with_capacity(nk);
        for c in 0..nk {
            let cell = num(4 + c)?;
            let (iterations, converged) = match cell.strip_prefix("> ") {
                Some(rest) => (parse_usize(rest)?, false),
                None => (parse_usize(cell)?, true),
            };
            let time_s: f64 = num(4 + nk + c)?.parse().map_err(|_| bad("time"))?;
            results.push(KindResult { iterations, converged, time_s });
        }
        rows.push(ResultRow {
            k,
            n_dofs: parse_usize(num(1)?)?,
            n_subdomains: parse_usize(num(2)?)?,
            n_coarse_dofs: parse_usize(num(3)?)?,
            results,
        });
    }
    Ok(ResultTable { labels, rows })
}
