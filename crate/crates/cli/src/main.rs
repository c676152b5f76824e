//! `cirdiv`: solve, verify and simulate the CIR-discounted dividend problem
//! from a JSON configuration.
//!
//! Exit codes: 0 success, 2 invalid configuration or input, 3 numerical
//! failure, 4 failed verification.

mod verify;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use cirdiv::config::RunConfig;
use cirdiv::fbsolve::{extract_boundary, hjb_residual, integrate_value, solve_penalized, BoundaryData};
use cirdiv::simulate::{run_dividend_policy, run_stopping_value, trace_path, write_trace_csv, Barrier, ConstantBarrier};
use cirdiv::{Boundary, ConstantRateSolution, Error, ModelParams};

#[derive(Parser)]
#[command(name = "cirdiv", version, about = "Optimal dividends under CIR stochastic discounting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for U, extract b, integrate V and write the grids.
    Solve(ConfigArgs),
    /// Run the invariant and Monte Carlo checks on the artifacts of `solve`.
    Verify {
        #[command(flatten)]
        config: ConfigArgs,
        /// Boundary CSV (`r,b`); defaults to `boundary.csv` in the output directory.
        #[arg(long)]
        boundary: Option<PathBuf>,
    },
    /// Monte Carlo estimates of U and V at the probe point.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        barrier: BarrierArgs,
    },
    /// Constant-rate barrier and roots for a discount rate `rho0`.
    Oracle {
        #[arg(long)]
        rho0: f64,
        /// Takes the model parameters from this file instead of the defaults.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write one path of (t, R, Z, K, S, D, I) under a barrier to trace.csv.
    Trace {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        barrier: BarrierArgs,
    },
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long, short)]
    config: PathBuf,
    /// Override a key, e.g. `--set solver.delta=0.005`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct BarrierArgs {
    /// Boundary CSV (`r,b`); defaults to `boundary.csv` in the output directory.
    #[arg(long, conflicts_with = "level")]
    boundary: Option<PathBuf>,
    /// Use the constant barrier `b ≡ LEVEL` instead of a boundary file.
    #[arg(long)]
    level: Option<f64>,
}

/// Failure classes, one per nonzero exit code.
#[derive(Debug)]
pub(crate) enum Failure {
    Input(anyhow::Error),
    Numerical(anyhow::Error),
    Verification(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Verification(_) => 4,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Domain(_) | Error::Parse(_) | Error::Io(_) | Error::Json(_) => {
                Failure::Input(e.into())
            }
            Error::Assembly { .. } | Error::NonConvergence { .. } | Error::LinearSolve(_) | Error::Numerical(_) => {
                Failure::Numerical(e.into())
            }
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

pub(crate) type Outcome<T> = std::result::Result<T, Failure>;

/// Configuration as loaded, with the effective document kept for the manifest.
pub(crate) struct Loaded {
    pub cfg: RunConfig<f64>,
    pub source: String,
    pub path: PathBuf,
    pub overrides: Vec<String>,
}

impl Loaded {
    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(&self.cfg.outputs)
    }
}

fn load(args: &ConfigArgs) -> Outcome<Loaded> {
    let source = fs::read_to_string(&args.config)
        .with_context(|| format!("cannot read config {}", args.config.display()))?;
    let cfg = RunConfig::<f64>::from_json_with_overrides(&source, &args.overrides)?;
    cfg.validate()?;
    Ok(Loaded { cfg, source, path: args.config.clone(), overrides: args.overrides.clone() })
}

/// Git-style blob id, `sha256("blob <len>\0" + content)`.
fn blob_id(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    hex::encode(h.finalize())
}

pub(crate) fn manifest(loaded: &Loaded, command: &str, extra_inputs: &[&Path]) -> Outcome<Value> {
    let mut inputs = vec![json!({
        "path": loaded.path.display().to_string(),
        "blob": blob_id(loaded.source.as_bytes()),
    })];
    for p in extra_inputs {
        let bytes = fs::read(p).with_context(|| format!("cannot read {}", p.display()))?;
        inputs.push(json!({"path": p.display().to_string(), "blob": blob_id(&bytes)}));
    }
    Ok(json!({
        "tool": "cirdiv",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": serde_json::to_value(&loaded.cfg).map_err(Error::from)?,
        "overrides": loaded.overrides,
        "seed": loaded.cfg.mc.seed,
        "inputs": inputs,
    }))
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Outcome<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value).map_err(Error::from)?;
    writeln!(w).map_err(Error::from)?;
    Ok(())
}

fn create(path: &Path) -> Outcome<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn out_dir(loaded: &Loaded) -> Outcome<PathBuf> {
    let dir = loaded.out_dir();
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(dir)
}

fn cmd_solve(loaded: &Loaded) -> Outcome<()> {
    let cfg = &loaded.cfg;
    let params = cfg.model.params();
    let disc = cfg.model.discount();
    let grid = cfg.grid.build(params.alpha)?;
    let data = BoundaryData::for_config(&cfg.solver, &grid, &params, &disc)?;
    let sol = solve_penalized(&cfg.solver, &grid, &params, &disc, &data)?;
    let ex = extract_boundary(&sol.field, cfg.level, &sol.fixed_columns)?;
    let v = integrate_value(&sol.field);
    let residuals = hjb_residual(&params, &disc, &sol.field, &v, &ex.boundary, ex.displacement, &sol.fixed_columns)?;

    let dir = out_dir(loaded)?;
    sol.field.write_csv(create(&dir.join("ugrid.csv"))?)?;
    v.write_csv(create(&dir.join("vgrid.csv"))?)?;
    ex.boundary.write_csv(create(&dir.join("boundary.csv"))?)?;
    write_json(&dir.join("residuals.json"), &residuals)?;
    let mut m = manifest(loaded, "solve", &[])?;
    m["solver"] = json!({
        "iterations": sol.iterations,
        "history": sol.history,
        "kappa": sol.kappa,
        "active_nodes": sol.active_nodes,
        "fixed_columns": sol.fixed_columns,
        "isotonic_displacement": ex.displacement,
        "warnings": ex.warnings,
    });
    write_json(&dir.join("manifest.json"), &m)?;
    log::info!(
        "solved in {} iterations, b in [{:.4}, {:.4}], artifacts in {}",
        sol.iterations,
        ex.boundary.min(),
        ex.boundary.max(),
        dir.display()
    );
    Ok(())
}

pub(crate) fn read_boundary(path: &Path) -> Outcome<Boundary<f64>> {
    let f = File::open(path).with_context(|| format!("cannot open boundary {}", path.display()))?;
    Ok(Boundary::read_csv(BufReader::new(f))?)
}

/// The barrier selected on the command line and the file it came from.
enum Selected {
    File(Boundary<f64>, PathBuf),
    Level(ConstantBarrier<f64>),
}

impl Selected {
    fn barrier(&self) -> &dyn Barrier<f64> {
        match self {
            Selected::File(b, _) => b,
            Selected::Level(c) => c,
        }
    }

    fn path(&self) -> Option<&Path> {
        match self {
            Selected::File(_, p) => Some(p),
            Selected::Level(_) => None,
        }
    }
}

fn select_barrier(loaded: &Loaded, args: &BarrierArgs) -> Outcome<Selected> {
    if let Some(level) = args.level {
        if level.is_nan() {
            return Err(Failure::Input(anyhow::anyhow!("barrier level must be a number")));
        }
        return Ok(Selected::Level(ConstantBarrier(level)));
    }
    let path = args.boundary.clone().unwrap_or_else(|| loaded.out_dir().join("boundary.csv"));
    Ok(Selected::File(read_boundary(&path)?, path))
}

fn cmd_simulate(loaded: &Loaded, args: &BarrierArgs) -> Outcome<()> {
    let cfg = &loaded.cfg;
    let (params, disc) = (cfg.model.params(), cfg.model.discount());
    let sel = select_barrier(loaded, args)?;
    let (z0, r0) = (cfg.probe.z0, cfg.probe.r0);
    let numerical = |e: Error| Failure::Numerical(e.into());
    let v = run_dividend_policy(&params, &disc, z0, r0, sel.barrier(), &cfg.mc).map_err(numerical)?;
    let u = run_stopping_value(&params, &disc, z0, r0, sel.barrier(), &cfg.mc).map_err(numerical)?;
    let extra: Vec<&Path> = sel.path().into_iter().collect();
    let report = json!({
        "r0": r0,
        "z0": z0,
        "dividends": v,
        "stopping": u,
        "manifest": manifest(loaded, "simulate", &extra)?,
    });
    let dir = out_dir(loaded)?;
    write_json(&dir.join("simulate.json"), &report)?;
    println!("{}", serde_json::to_string_pretty(&json!({"dividends": report["dividends"], "stopping": report["stopping"]})).map_err(Error::from)?);
    Ok(())
}

fn cmd_trace(loaded: &Loaded, args: &BarrierArgs) -> Outcome<()> {
    let cfg = &loaded.cfg;
    let (params, disc) = (cfg.model.params(), cfg.model.discount());
    let sel = select_barrier(loaded, args)?;
    let rows = trace_path(&params, &disc, cfg.probe.z0, cfg.probe.r0, sel.barrier(), &cfg.mc, cfg.probe.trace_path)?;
    let dir = out_dir(loaded)?;
    write_trace_csv(&rows, create(&dir.join("trace.csv"))?)?;
    log::info!("{} rows written to {}", rows.len(), dir.join("trace.csv").display());
    Ok(())
}

fn cmd_oracle(rho0: f64, config: Option<&Path>) -> Outcome<()> {
    let params = match config {
        Some(path) => {
            let loaded = load(&ConfigArgs { config: path.to_path_buf(), overrides: Vec::new() })?;
            loaded.cfg.model.params()
        }
        None => ModelParams::reference(),
    };
    let sol = ConstantRateSolution::new(&params, rho0)?;
    let step = (sol.barrier() - params.alpha) / 5.0;
    let samples: Vec<_> = (0..=10)
        .map(|k| {
            let z = params.alpha + step * k as f64;
            let (v, v_z) = sol.value_and_derivative(z);
            json!({"z": z, "v": v, "v_z": v_z})
        })
        .collect();
    let mut out = serde_json::to_value(sol).map_err(Error::from)?;
    out["samples"] = json!(samples);
    println!("{}", serde_json::to_string_pretty(&out).map_err(Error::from)?);
    Ok(())
}

fn run(cli: Cli) -> Outcome<()> {
    match cli.command {
        Command::Solve(args) => cmd_solve(&load(&args)?),
        Command::Verify { config, boundary } => {
            let loaded = load(&config)?;
            let path = boundary.unwrap_or_else(|| loaded.out_dir().join("boundary.csv"));
            verify::cmd_verify(&loaded, &path)
        }
        Command::Simulate { config, barrier } => cmd_simulate(&load(&config)?, &barrier),
        Command::Oracle { rho0, config } => cmd_oracle(rho0, config.as_deref()),
        Command::Trace { config, barrier } => cmd_trace(&load(&config)?, &barrier),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Input(e) => eprintln!("error: {e:#}"),
                Failure::Numerical(e) => eprintln!("numerical failure: {e:#}"),
                Failure::Verification(msg) => eprintln!("verification failed: {msg}"),
            }
            ExitCode::from(f.code())
        }
    }
}
