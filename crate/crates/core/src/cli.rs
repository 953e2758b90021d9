//! Command-line front end.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::ansatz::Variant;
use crate::basis::OccupationBasis;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::hf::{calibrate_t_hop, hf_iterate, write_trace_csv};
use crate::metrics::PeriodReport;
use crate::pipeline::{load_model, load_usage, run_grid, setup_period};
use crate::portfolio::{brute_force_solve, ingest_usage_csv, estimate_model, write_usage_csv, DemandModel};

#[derive(Debug, Parser)]
#[command(name = "fqaoa", version, about = "Demand-response portfolio optimisation with fermionic QAOA")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed (overrides `seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, env = "FQAOA_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic usage CSV.
    Synth,
    /// Estimate the demand model from the configured data and write model.json.
    Estimate {
        /// Read usage from this CSV instead of the configured source.
        #[arg(long)]
        usage: Option<PathBuf>,
    },
    /// Enumerate every feasible selection of each period.
    Oracle,
    /// Optimise the configured variants and write per-cell reports.
    Solve,
    /// Hartree-Fock iteration history for each mixing weight.
    HfTrace,
    /// Optimise all variants and write the comparison table.
    Compare,
}

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    Failure = 1,
    Config = 2,
    Data = 3,
    NotConverged = 4,
}

impl Status {
    pub fn of(err: &Error) -> Self {
        match err {
            Error::Config(_)
            | Error::InvalidParams(_)
            | Error::ParticleCount { .. }
            | Error::DimensionGuard { .. } => Status::Config,
            Error::Data(_)
            | Error::Csv(_)
            | Error::Json(_)
            | Error::Io(_)
            | Error::NotSymmetric(_)
            | Error::Degenerate(_) => Status::Data,
            _ => Status::Failure,
        }
    }
}

impl From<Status> for ExitCode {
    fn from(s: Status) -> Self {
        ExitCode::from(s as u8)
    }
}

pub fn main_with_args(args: impl IntoIterator<Item = String>) -> ExitCode {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Status::Config } else { Status::Ok }.into();
        }
    };
    match run(&cli) {
        Ok(status) => status.into(),
        Err(e) => {
            eprintln!("error: {e}");
            Status::of(&e).into()
        }
    }
}

fn resolve_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = Some(seed);
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<Status> {
    let cfg = resolve_config(&cli.common)?;
    init_threads(cli.common.threads)?;
    fs::create_dir_all(&cfg.out_dir)?;
    match &cli.command {
        Command::Synth => cmd_synth(&cfg).map(|_| Status::Ok),
        Command::Estimate { usage } => cmd_estimate(&cfg, usage.as_deref()).map(|_| Status::Ok),
        Command::Oracle => cmd_oracle(&cfg).map(|_| Status::Ok),
        Command::Solve => cmd_solve(&cfg, &cfg.variants),
        Command::HfTrace => cmd_hf_trace(&cfg).map(|_| Status::Ok),
        Command::Compare => cmd_solve(&cfg, &Variant::ALL),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<PathBuf> {
    let path = cfg.out_dir.join("usage.csv");
    write_usage_csv(&load_usage(cfg)?, &path)?;
    Ok(path)
}

pub fn cmd_estimate(cfg: &RunConfig, usage: Option<&Path>) -> Result<PathBuf> {
    let model = match usage {
        Some(p) => estimate_model(&ingest_usage_csv(p)?)?,
        None => load_model(cfg)?,
    };
    let path = cfg.out_dir.join("model.json");
    model.save(&path)?;
    Ok(path)
}

#[derive(Debug, Serialize)]
struct OracleEntry {
    period: usize,
    times: Vec<usize>,
    #[serde(rename = "E_min")]
    e_min: f64,
    #[serde(rename = "E_max")]
    e_max: f64,
    #[serde(rename = "W")]
    width: f64,
    /// Optimal selections as site lists.
    argmin: Vec<Vec<usize>>,
    #[serde(rename = "random_sampling_delta_E")]
    random_excess: f64,
    #[serde(rename = "random_sampling_delta_E_over_W")]
    random_excess_ratio: f64,
}

pub fn cmd_oracle(cfg: &RunConfig) -> Result<PathBuf> {
    let model = load_model(cfg)?;
    let basis = OccupationBasis::with_max_sites(cfg.participants, cfg.requests, cfg.max_sites)?;
    let mut entries = Vec::new();
    for &t in &cfg.periods {
        let inst = cfg.instance(t);
        let o = brute_force_solve(&inst, &model, &basis)?;
        let excess = o.random_sampling_excess();
        entries.push(OracleEntry {
            period: t,
            times: inst.times.clone(),
            e_min: o.e_min,
            e_max: o.e_max,
            width: o.width,
            argmin: o
                .argmin
                .iter()
                .map(|&x| (0..cfg.participants).filter(|l| x >> l & 1 == 1).collect())
                .collect(),
            random_excess: excess,
            random_excess_ratio: if o.width > 0.0 { excess / o.width } else { 0.0 },
        });
    }
    let path = cfg.out_dir.join("oracle.json");
    write_json(&path, &entries)?;
    Ok(path)
}

fn report_stem(r: &PeriodReport) -> String {
    format!("{}_T{}_p{}", r.variant, r.instance.period, r.p)
}

fn histogram_csv(r: &PeriodReport) -> String {
    let mut s = String::from("lower,upper,mass\n");
    for (k, m) in r.histogram.masses.iter().enumerate() {
        writeln!(s, "{},{},{}", r.histogram.edges[k], r.histogram.edges[k + 1], m).unwrap();
    }
    s
}

/// Runs the grid, writes reports and the table. Returns `NotConverged` when a
/// Hartree-Fock iteration missed its tolerance; outputs are written anyway.
pub fn cmd_solve(cfg: &RunConfig, variants: &[Variant]) -> Result<Status> {
    let model = load_model(cfg)?;
    let grid = run_grid(cfg, &model, variants)?;
    let dir = cfg.out_dir.join("reports");
    fs::create_dir_all(&dir)?;
    for r in grid.reports(&model, &cfg.levels, cfg.report.bins)? {
        let stem = report_stem(&r);
        write_json(&dir.join(format!("{stem}.json")), &r)?;
        fs::write(dir.join(format!("{stem}_hist.csv")), histogram_csv(&r))?;
    }
    let table = grid.table(&cfg.levels);
    fs::write(cfg.out_dir.join("table.csv"), table.to_csv())?;
    fs::write(cfg.out_dir.join("table.json"), table.to_json()? + "\n")?;
    if grid.hf_converged() {
        Ok(Status::Ok)
    } else {
        for s in grid.setups.iter().filter(|s| !s.hf.converged) {
            eprintln!(
                "warning: Hartree-Fock did not converge for period {} after {} iterations",
                s.instance.period_start, s.hf.iterations
            );
        }
        Ok(Status::NotConverged)
    }
}

/// One trace CSV per mixing weight for the configured trace period.
pub fn cmd_hf_trace(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let model: DemandModel = load_model(cfg)?;
    let setup = setup_period(cfg, &model, cfg.hf.trace_period)?;
    let basis = setup.basis.as_ref();
    let t_hop = calibrate_t_hop(&setup.instance, &model, basis)?;
    let mut paths = Vec::new();
    for &alpha in &cfg.hf.trace_alphas {
        let mut settings = cfg.hf.settings();
        settings.alpha = alpha;
        let sol = hf_iterate(&setup.instance, &model, t_hop, &settings)?;
        if !sol.converged {
            eprintln!(
                "note: alpha={alpha} did not converge within {} iterations",
                settings.max_iter
            );
        }
        let path = cfg
            .out_dir
            .join(format!("hf_trace_T{}_alpha{alpha}.csv", cfg.hf.trace_period));
        write_trace_csv(&sol.trace, &path)?;
        paths.push(path);
    }
    Ok(paths)
}
