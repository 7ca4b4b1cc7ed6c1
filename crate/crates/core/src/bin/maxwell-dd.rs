use std::fs;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use maxwell_dd::assembly::BoundaryCondition;
use maxwell_dd::experiments::{
    emit_table, fit_growth_exponent, run_experiment, ExperimentSpec, GrowthFit, KindSpec, Overlap, Preset, TableFormat,
};
use maxwell_dd::krylov::theorem_bound;
use maxwell_dd::precond::{Levels, PreconditionerKind};

/// Worker threads for local solves; defaults to all cores.
const THREADS_VAR: &str = "MAXWELL_DD_THREADS";

#[derive(Parser)]
#[command(version, about = "Schwarz-preconditioned GMRES for time-harmonic Maxwell problems on the unit cube")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Bc {
    Pec,
    Imp,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Md,
}

#[derive(Subcommand)]
enum Command {
    /// Run a wavenumber sweep and print the iteration table.
    Run {
        #[arg(long, default_value = "exp1")]
        preset: String,
        /// Comma-separated wavenumbers.
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<f64>>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        alpha_prime: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long, value_enum)]
        bc: Option<Bc>,
        /// `2h` or `generous`.
        #[arg(long)]
        overlap: Option<String>,
        /// Comma-separated kinds: as, ras, hras, has, impras, imphras.
        #[arg(long, value_delimiter = ',')]
        kinds: Option<Vec<String>>,
        /// 1 or 2; applies to every kind given with --kinds.
        #[arg(long)]
        levels: Option<u8>,
        #[arg(long)]
        mesh_constant: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Skip rows with more unknowns than this.
        #[arg(long)]
        cap: Option<usize>,
        #[arg(long, value_enum, default_value = "md")]
        format: Format,
        /// Also print growth exponents of the iteration columns.
        #[arg(long)]
        fit: bool,
        #[arg(long)]
        out: Option<String>,
    },
    /// Evaluate the GMRES convergence-factor bound.
    Bound {
        #[arg(long = "H")]
        h: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        m: u32,
    },
    /// Fit the growth exponent of a CSV column against another.
    Fit {
        file: String,
        #[arg(long, default_value = "k")]
        x: String,
        #[arg(long)]
        y: String,
    },
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(t) = std::env::var(THREADS_VAR) {
        match t.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => return fail(format!("{THREADS_VAR} must be a positive integer")),
        }
    }
    match Cli::parse().command {
        Command::Run {
            preset,
            k,
            alpha,
            alpha_prime,
            beta,
            bc,
            overlap,
            kinds,
            levels,
            mesh_constant,
            tol,
            max_iter,
            seed,
            cap,
            format,
            fit,
            out,
        } => {
            let preset: Preset = match preset.parse() {
                Ok(p) => p,
                Err(e) => return fail(e),
            };
            let mut spec = ExperimentSpec::preset(preset);
            if let Some(k) = k {
                spec.k_list = k;
            }
            if let Some(v) = alpha {
                spec.alpha = v;
            }
            if let Some(v) = alpha_prime {
                spec.alpha_prime = v;
            }
            if let Some(v) = beta {
                spec.beta = v;
            }
            if let Some(bc) = bc {
                spec.bc = match bc {
                    Bc::Pec => BoundaryCondition::Pec,
                    Bc::Imp => BoundaryCondition::Impedance,
                };
            }
            if let Some(o) = overlap {
                match o.parse::<Overlap>() {
                    Ok(o) => spec.overlap = o,
                    Err(e) => return fail(e),
                }
            }
            let lv = match levels {
                None => None,
                Some(1) => Some(Levels::OneLevel),
                Some(2) => Some(Levels::TwoLevel),
                Some(l) => return fail(format!("levels must be 1 or 2, got {l}")),
            };
            if let Some(kinds) = kinds {
                let mut list = Vec::new();
                for s in kinds {
                    match s.parse::<PreconditionerKind>() {
                        Ok(k) => list.push(KindSpec::new(k, lv.unwrap_or(Levels::TwoLevel))),
                        Err(e) => return fail(e),
                    }
                }
                spec.kinds = list;
            } else if let Some(lv) = lv {
                spec.kinds.iter_mut().for_each(|k| k.levels = lv);
            }
            if let Some(v) = mesh_constant {
                spec.mesh_constant = v;
            }
            if let Some(v) = tol {
                spec.tol = v;
            }
            if let Some(v) = max_iter {
                spec.max_iter = v;
            }
            if let Some(v) = seed {
                spec.seed = v;
            }
            if let Some(v) = cap {
                spec.dof_cap = v;
            }
            if let Err(e) = spec.validate() {
                return fail(e);
            }
            let table = match run_experiment(&spec) {
                Ok(t) => t,
                Err(e) => return fail(e),
            };
            let format = match format {
                Format::Csv => TableFormat::Csv,
                Format::Md => TableFormat::Markdown,
            };
            let text = emit_table(&table, format, fit);
            match out {
                Some(path) => {
                    if let Err(e) = fs::write(&path, text) {
                        return fail(format!("{path}: {e}"));
                    }
                }
                None => print!("{text}"),
            }
            ExitCode::SUCCESS
        }
        Command::Bound { h, delta, m } => match theorem_bound(h, delta, m) {
            Ok(v) => {
                println!("{v}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Fit { file, x, y } => {
            let text = match fs::read_to_string(&file) {
                Ok(t) => t,
                Err(e) => return fail(format!("{file}: {e}")),
            };
            match fit_columns(&text, &x, &y) {
                Ok(g) => {
                    let fit = GrowthFit::from_gamma(g);
                    println!("gamma = {:.4}\nxi = {:.4}", fit.gamma, fit.xi);
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
    }
}

fn fit_columns(text: &str, x: &str, y: &str) -> Result<f64, String> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let head = rd.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| head.iter().position(|h| h == name).ok_or(format!("no column '{name}'"));
    let (cx, cy) = (col(x)?, col(y)?);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for rec in rd.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        // footer and non-converged cells are skipped
        let (Some(a), Some(b)) = (rec.get(cx), rec.get(cy)) else { continue };
        if let (Ok(a), Ok(b)) = (a.parse::<f64>(), b.parse::<f64>()) {
            xs.push(a);
            ys.push(b);
        }
    }
    fit_growth_exponent(&xs, &ys).map_err(|e| e.to_string())
}
