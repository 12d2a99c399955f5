//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use crate::error::{Error, Result};
use crate::estimator::{fit, EmConfig};
use crate::inference::{bootstrap_fit, select_models, standardize_report};
use crate::io::{
    read_data, read_item_map, write_data, write_item_map, write_json, write_selection,
    BootstrapOutput, FitReport, ItemMap, LoadedData, RecoveryOutput, RunConfig, FORMAT_VERSION,
};
use crate::model::{MissingMode, ModelSpec, Parametrization};
use crate::simulate::{build_scenario, generate, recovery_study, Missingness, Scenario};

#[derive(Debug, Parser)]
#[command(name = "lcirt", version, about = "Multidimensional latent class IRT with non-ignorable missingness")]
pub struct Cli {
    /// Worker threads for multi-start, bootstrap and recovery (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Exit with status 4 when a fit does not converge.
    #[arg(long, global = true)]
    pub strict: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one model and write parameter tables.
    Fit(FitArgs),
    /// Fit a grid of models and compare them by BIC and likelihood-ratio tests.
    Select(FitArgs),
    /// Nonparametric bootstrap standard errors and percentile intervals.
    Bootstrap(BootstrapArgs),
    /// Write a simulated dataset, its item map and the true parameters.
    Simulate(SimulateArgs),
    /// Monte Carlo parameter-recovery study for a scenario.
    Recovery(RecoveryArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub k1: Option<usize>,
    #[arg(long)]
    pub k2: Option<usize>,
    #[arg(long)]
    pub parametrization: Option<Parametrization>,
    #[arg(long)]
    pub missing_mode: Option<MissingMode>,
    #[arg(long)]
    pub n_starts: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

impl ModelArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.k1 {
            cfg.model.ability_classes = v;
        }
        if let Some(v) = self.k2 {
            cfg.model.propensity_classes = v;
        }
        if let Some(v) = self.parametrization {
            cfg.model.parametrization = v;
        }
        if let Some(v) = self.missing_mode {
            cfg.model.missing_mode = v;
        }
        if let Some(v) = self.n_starts {
            cfg.em.n_starts = v;
        }
        if let Some(v) = self.seed {
            cfg.em.seed = v;
        }
        if let Some(v) = self.max_iter {
            cfg.em.max_iter = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Subject-by-column data table.
    #[arg(long)]
    pub data: PathBuf,
    /// `item,dimension` table.
    #[arg(long)]
    pub items: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub fit: FitArgs,
    /// Bootstrap replicates `B`.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Seed of the resampling streams.
    #[arg(long)]
    pub bootstrap_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Standard scenario 1..=12.
    #[arg(long, conflicts_with_all = ["n", "m", "missingness"])]
    pub scenario: Option<u8>,
    /// Custom design: subjects.
    #[arg(long, requires_all = ["m", "missingness"])]
    pub n: Option<usize>,
    /// Custom design: items (even).
    #[arg(long)]
    pub m: Option<usize>,
    /// Custom design: none, v-only or u-and-v.
    #[arg(long)]
    pub missingness: Option<Missingness>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RecoveryArgs {
    #[arg(long)]
    pub scenario: u8,
    /// Replications `R`.
    #[arg(long, default_value_t = 100)]
    pub replications: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// TOML run configuration (only the `em` section is used).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Failure of a command, mapped to the process exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad input, configuration, parse or IO (exit 2).
    Input(Error),
    /// Numerical breakdown (exit 3).
    Numerical(Error),
    /// A fit did not converge under `--strict` (exit 4).
    NotConverged(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::NotConverged(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Input(e) | Failure::Numerical(e) => write!(f, "{e}"),
            Failure::NotConverged(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Numerical(_)
            | Error::RootFinding { .. }
            | Error::NegativeDeviance { .. }
            | Error::DegenerateDimension { .. } => Failure::Numerical(e),
            _ => Failure::Input(e),
        }
    }
}

struct Loaded {
    map: ItemMap,
    data: LoadedData,
    config: RunConfig,
    spec: ModelSpec,
}

fn load(args: &FitArgs) -> Result<Loaded> {
    let config = args.model.resolve()?;
    let map = read_item_map(&args.items)?;
    let data = read_data(&args.data, &map, config.covariates.as_deref())?;
    let spec = config.spec(map.design.n_dims(), map.items.len(), data.data.n_covariates())?;
    Ok(Loaded {
        map,
        data,
        config,
        spec,
    })
}

fn check_converged(strict: bool, converged: bool, what: &str) -> std::result::Result<(), Failure> {
    if converged {
        return Ok(());
    }
    let msg = format!("{what} did not converge");
    if strict {
        Err(Failure::NotConverged(msg))
    } else {
        warn!("{msg}");
        Ok(())
    }
}

fn fit_report(l: &Loaded, cfg: &EmConfig) -> Result<(crate::estimator::FitResult, FitReport)> {
    let d = &l.data.data;
    let result = fit(&l.spec, &l.map.design, d, cfg)?;
    let std = standardize_report(&result, &l.map.design, d)?;
    let report = FitReport::build(
        &result,
        &std,
        &l.map,
        &l.data.covariate_names,
        d.n_subjects(),
        d.missing_count(),
    );
    Ok((result, report))
}

pub fn cmd_fit(args: &FitArgs, strict: bool) -> std::result::Result<(), Failure> {
    let l = load(args)?;
    let (result, report) = fit_report(&l, &l.config.em)?;
    for w in &result.warnings {
        warn!("{w}");
    }
    report.write(&args.out)?;
    info!(
        "{}: loglik {:.4}, npar {}, BIC {:.4}",
        l.spec.label(),
        result.loglik,
        result.npar,
        result.bic
    );
    check_converged(strict, result.converged, &l.spec.label())
}

pub fn cmd_select(args: &FitArgs, strict: bool) -> std::result::Result<(), Failure> {
    let l = load(args)?;
    let (s, m, c) = (l.spec.dims, l.spec.items, l.spec.covariates);
    let grid = l
        .config
        .selection_grid()
        .into_iter()
        .map(|g| {
            ModelSpec::new(
                s,
                g.ability_classes,
                g.propensity_classes,
                m,
                c,
                g.parametrization,
                g.missing_mode,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let (report, _) = select_models(&grid, &l.map.design, &l.data.data, &l.config.em, FORMAT_VERSION)?;
    write_selection(&report, &args.out)?;
    if let Some(best) = report.best() {
        info!("lowest BIC: {}", best.label);
    }
    for row in &report.rows {
        if let Some(e) = &row.error {
            warn!("{}: {e}", row.label);
        }
    }
    let all = report.rows.iter().all(|r| r.converged);
    check_converged(strict, all, "at least one model of the grid")
}

pub fn cmd_bootstrap(args: &BootstrapArgs, strict: bool) -> std::result::Result<(), Failure> {
    let l = load(&args.fit)?;
    let replicates = args.replicates.unwrap_or(l.config.bootstrap.replicates);
    let seed = args.bootstrap_seed.unwrap_or(l.config.bootstrap.seed);
    let (result, report) = fit_report(&l, &l.config.em)?;
    check_converged(strict, result.converged, &l.spec.label())?;
    let boot = bootstrap_fit(&result, &l.map.design, &l.data.data, &l.config.em, replicates, seed)?;
    if boot.non_converged + boot.failed > 0 {
        warn!(
            "{} replicates did not converge, {} failed",
            boot.non_converged, boot.failed
        );
    }
    report.write(&args.fit.out)?;
    BootstrapOutput {
        format_version: FORMAT_VERSION,
        model: l.spec,
        loglik: result.loglik,
        bootstrap: boot,
    }
    .write(&args.fit.out)?;
    Ok(())
}

fn scenario_from(args: &SimulateArgs) -> Result<Scenario> {
    match (args.scenario, args.n, args.m, args.missingness) {
        (Some(id), None, None, None) => build_scenario(id, args.seed),
        (None, Some(n), Some(m), Some(miss)) => Scenario::custom(n, m, miss, args.seed),
        _ => Err(Error::config(
            "give either --scenario or all of --n, --m and --missingness",
        )),
    }
}

/// Writes `data.csv`, `items.csv` and `truth.json` for a scenario.
pub fn write_simulation(scenario: &Scenario, out: &Path) -> Result<()> {
    let sample = generate(scenario)?;
    let map = ItemMap::generic(&scenario.design);
    let covariates: Vec<String> = (1..=scenario.truth.spec.covariates)
        .map(|j| format!("x{j}"))
        .collect();
    write_data(out.join("data.csv"), &sample.data, &map, &covariates)?;
    write_item_map(out.join("items.csv"), &map)?;
    #[derive(serde::Serialize)]
    struct Truth<'a> {
        format_version: u32,
        scenario: &'a Scenario,
    }
    write_json(
        out.join("truth.json"),
        &Truth {
            format_version: FORMAT_VERSION,
            scenario,
        },
    )
}

pub fn cmd_simulate(args: &SimulateArgs) -> std::result::Result<(), Failure> {
    let scenario = scenario_from(args)?;
    write_simulation(&scenario, &args.out)?;
    info!("{} written to {}", scenario.label(), args.out.display());
    Ok(())
}

pub fn cmd_recovery(args: &RecoveryArgs) -> std::result::Result<(), Failure> {
    let cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let scenario = build_scenario(args.scenario, args.seed)?;
    let report = recovery_study(&scenario, args.replications, &cfg.em)?;
    if report.non_converged + report.failed > 0 {
        warn!(
            "{} replications did not converge, {} failed",
            report.non_converged, report.failed
        );
    }
    RecoveryOutput {
        format_version: FORMAT_VERSION,
        seed: args.seed,
        recovery: report,
    }
    .write(&args.out)?;
    Ok(())
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> std::result::Result<(), Failure> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Input(Error::config(format!("--workers: {e}"))))?;
    }
    match &cli.command {
        Command::Fit(a) => cmd_fit(a, cli.strict),
        Command::Select(a) => cmd_select(a, cli.strict),
        Command::Bootstrap(a) => cmd_bootstrap(a, cli.strict),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Recovery(a) => cmd_recovery(a),
    }
}
