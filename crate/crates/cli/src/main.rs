//! `mfbsde`: certify, solve, validate and bench mean-field quadratic BSDEs.
//!
//! Exit codes: 0 success, 1 solver or acceptance failure, 2 invalid input.
//! `MFBSDE_THREADS` sets the worker thread count.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use mfbsde::acceptance::{run_selected, Tolerances, CRITERIA};
use mfbsde::config::{ScenarioFile, SolverConfig};
use mfbsde::error::Error;
use mfbsde::meanfield::{
    scenario_certificate, simple_shift_applies, simulate_ensemble, MeanFieldSolver, SolveResult,
};
use mfbsde::oracle::fixtures;
use mfbsde::report::solve_csv;
use serde::Serialize;

use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "mfbsde", version, about = "Mean-field quadratic BSDE solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SolverKind {
    Local,
    Global,
    Picard,
    /// Simple shift when `f1` reads only `z` and `f2` only `(z, zbar)`,
    /// otherwise the shift fixed point.
    Shift,
    ShiftFixedPoint,
    Multidim,
}

#[derive(clap::Args)]
struct SolveArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    solver: SolverKind,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    /// UNSAFE: replace the certified window width by this value.
    #[arg(long)]
    override_epsilon: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the solvability certificate of a scenario.
    Certify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Solve a scenario and write CSV, JSON and manifest files.
    Solve {
        #[command(flatten)]
        args: SolveArgs,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run the acceptance suite.
    Validate {
        /// Print the report as JSON instead of one line per criterion.
        #[arg(long)]
        json: bool,
        /// Comma-separated criterion numbers; all when omitted.
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
    },
    /// Time a solver at several path counts.
    Bench {
        #[command(flatten)]
        args: SolveArgs,
        /// Comma-separated path counts; defaults to the configured count.
        #[arg(long, value_delimiter = ',')]
        path_counts: Vec<usize>,
    },
    /// Rebuild the stored oracle fixtures.
    Fixtures {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Certify { config, out_dir } => certify(&config, out_dir.as_deref()),
        Command::Solve { args, out_dir } => solve(&args, out_dir.as_deref()),
        Command::Validate { json, only } => validate(json, &only),
        Command::Bench { args, path_counts } => bench(&args, &path_counts),
        Command::Fixtures { out } => regenerate_fixtures(out.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("MFBSDE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("MFBSDE_THREADS must be a positive integer, got '{v}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn certify(config: &Path, out_dir: Option<&Path>) -> Result<ExitCode, Error> {
    let file = ScenarioFile::load(config)?;
    let cert = scenario_certificate(&file.spec).ok_or_else(|| {
        let k = &file.spec.constants;
        match mfbsde::certificate::certify(mfbsde::certificate::CertificateInputs {
            c: k.c,
            gamma: k.gamma,
            alpha: k.alpha,
            xi_bound: k.xi_bound,
            horizon: file.spec.horizon,
        }) {
            Err(e) => Error::from(e),
            Ok(_) => Error::Config("certificate unavailable".into()),
        }
    })?;
    println!("{cert}");
    let dir = output_dir(out_dir, &file);
    fs::create_dir_all(&dir)?;
    let path = dir.join(format!("{}.certificate.json", file.spec.name));
    fs::write(&path, serde_json::to_string_pretty(&cert)?)?;
    eprintln!("wrote {}", path.display());
    Ok(if cert.feasible { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn output_dir(flag: Option<&Path>, file: &ScenarioFile) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| file.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn solver_name(kind: SolverKind) -> &'static str {
    match kind {
        SolverKind::Local => "local",
        SolverKind::Global => "global",
        SolverKind::Picard => "picard",
        SolverKind::Shift => "shift",
        SolverKind::ShiftFixedPoint => "shift-fixed-point",
        SolverKind::Multidim => "multidim",
    }
}

fn effective_config(args: &SolveArgs, file: &ScenarioFile) -> Result<SolverConfig, Error> {
    let mut cfg = file.solver.clone();
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(p) = args.paths {
        cfg.paths = p;
    }
    if let Some(n) = args.steps {
        cfg.steps = n;
    }
    if let Some(e) = args.override_epsilon {
        cfg.override_epsilon = Some(e);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_solver(kind: SolverKind, file: &ScenarioFile, cfg: &SolverConfig) -> Result<SolveResult, Error> {
    let ens = simulate_ensemble(&file.spec, cfg)?;
    let solver = MeanFieldSolver::new(&file.spec, &ens, cfg)?;
    let res = match kind {
        SolverKind::Local => solver.local(None),
        SolverKind::Global => solver.global(),
        SolverKind::Picard => solver.picard(),
        SolverKind::Shift if !simple_shift_applies(&file.spec) && file.spec.is_additive() => {
            solver.shift_fixed_point()
        }
        SolverKind::Shift => solver.shift_simple(),
        SolverKind::ShiftFixedPoint => solver.shift_fixed_point(),
        SolverKind::Multidim => solver.multidim(),
    }?;
    Ok(res)
}

#[derive(Serialize)]
struct JsonOutput<'a> {
    manifest_hash: &'a str,
    result: mfbsde::meanfield::SolveSummary,
}

fn solve(args: &SolveArgs, out_dir: Option<&Path>) -> Result<ExitCode, Error> {
    let text = fs::read(&args.config)?;
    let file = ScenarioFile::load(&args.config)?;
    let cfg = effective_config(args, &file)?;
    if cfg.override_epsilon.is_some() {
        eprintln!("warning: epsilon override in use; the certified window width is bypassed");
    }
    let name = solver_name(args.solver);
    let res = run_solver(args.solver, &file, &cfg)?;

    let dir = output_dir(out_dir, &file);
    fs::create_dir_all(&dir)?;
    let stem = format!("{}.{name}", file.spec.name);
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    let manifest_path = dir.join(format!("{stem}.manifest.json"));
    let mut manifest = RunManifest::new(&args.config, &text, name, &cfg);
    manifest.outputs = [&csv_path, &json_path]
        .iter()
        .map(|p| p.display().to_string())
        .collect();
    let hash = manifest.hash();

    fs::write(&csv_path, solve_csv(&res, Some(&hash)))?;
    let json = JsonOutput {
        manifest_hash: &hash,
        result: res.summary(),
    };
    fs::write(&json_path, serde_json::to_string_pretty(&json)?)?;
    fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&serde_json::json!({ "hash": hash, "manifest": manifest }))?,
    )?;

    let trace = res.trace();
    println!(
        "{name}: {} window(s), {} iteration(s) in the terminal window, converged = {}",
        res.windows.len(),
        trace.iterations(),
        res.converged()
    );
    println!("E[Y_0] = {:?}", res.m_y.value(0));
    for w in &res.warnings {
        println!("warning: {w}");
    }
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(ExitCode::SUCCESS)
}

fn validate(json: bool, only: &[usize]) -> Result<ExitCode, Error> {
    let tol = Tolerances::from_env().map_err(Error::Config)?;
    if let Some(bad) = only.iter().find(|&&id| !(1..=CRITERIA.len()).contains(&id)) {
        return Err(Error::Config(format!("no criterion {bad}; valid numbers are 1 to {}", CRITERIA.len())));
    }
    let report = run_selected(&tol, only);
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        if !tol.overridden.is_empty() {
            println!("overridden tolerances: {}", tol.overridden.join(", "));
        }
        for c in &report.criteria {
            println!("{}", c.line());
        }
    }
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn bench(args: &SolveArgs, path_counts: &[usize]) -> Result<ExitCode, Error> {
    let file = ScenarioFile::load(&args.config)?;
    let base = effective_config(args, &file)?;
    let counts = if path_counts.is_empty() { vec![base.paths] } else { path_counts.to_vec() };
    println!("solver,paths,steps,seconds,iterations,m_y0");
    for paths in counts {
        let cfg = SolverConfig { paths, ..base.clone() };
        cfg.validate()?;
        let start = Instant::now();
        let res = run_solver(args.solver, &file, &cfg)?;
        println!(
            "{},{paths},{},{:.3},{},{}",
            solver_name(args.solver),
            cfg.steps,
            start.elapsed().as_secs_f64(),
            res.traces.iter().map(|t| t.iterations()).sum::<usize>(),
            res.m_y.value(0)[0]
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn regenerate_fixtures(out: Option<&Path>) -> Result<ExitCode, Error> {
    let dir = out.map(Path::to_path_buf).unwrap_or_else(fixtures::fixture_dir);
    for path in fixtures::regenerate(&dir)? {
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}
