//! `amis` command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{read_partial, run_experiment, Algorithm, ExperimentConfig, PartialConfig};
use crate::distributions::{GaussianComponent, MixtureProposal, ParameterPoint};
use crate::report::{reports_to_csv, sweep_to_csv, traces_to_jsonl, write_atomic};
use crate::simulation::{counterfactual_sweep, ExperimentReport, RunTrace, SyntheticLandscape};

#[derive(Debug, Parser)]
#[command(name = "amis", version, about = "Adaptive mixture importance sampling for parameter tuning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment cell and write its report row.
    Run(RunArgs),
    /// Run an (algorithm x gamma x ESS threshold) matrix, one row per cell.
    Table(TableArgs),
    /// Emit counterfactual estimates next to the exact expectation.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long = "ess-threshold")]
    pub ess_threshold: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Report CSV path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-iteration trace, one JSON object per line.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub parallel: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub algo: Option<String>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TableArgs {
    /// Comma-separated algorithms.
    #[arg(long, value_delimiter = ',', num_args = 0.., default_values_t = ["GIS".to_string(), "MVU".into(), "GU".into(), "PCU".into()])]
    pub algos: Vec<String>,
    #[arg(long, value_delimiter = ',', num_args = 0.., default_values_t = [0.0, 10.0, 100.0])]
    pub gammas: Vec<f64>,
    #[arg(long = "ess-thresholds", value_delimiter = ',', num_args = 0.., default_values_t = [0.0, 0.4])]
    pub ess_thresholds: Vec<f64>,
    /// Single-algorithm shorthand, equivalent to `--algos <name>`.
    #[arg(long, conflicts_with = "algos")]
    pub algo: Option<String>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Mixture proposal as `mean:sigma[:rate]` components joined by commas,
    /// e.g. `1:1,6:1,11:1,16:1`. Repeat for several proposals; equal rates
    /// are used when none are given.
    #[arg(long = "proposal", required = true)]
    pub proposals: Vec<String>,
    #[arg(long = "sigma-p", default_value_t = 1.0)]
    pub sigma_p: f64,
    /// Explicit comma-separated grid means.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["grid_from", "grid_to"])]
    pub grid: Option<Vec<f64>>,
    #[arg(long = "grid-from", allow_negative_numbers = true)]
    pub grid_from: Option<f64>,
    #[arg(long = "grid-to", allow_negative_numbers = true)]
    pub grid_to: Option<f64>,
    #[arg(long = "grid-step", default_value_t = 0.5)]
    pub grid_step: f64,
    #[arg(long = "mu-star", default_value_t = 10.0, allow_negative_numbers = true)]
    pub mu_star: f64,
    #[arg(long = "sigma-star", default_value_t = 1.0)]
    pub sigma_star: f64,
    #[arg(long, default_value_t = 100.0)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV path; with several proposals, `-<index>` is added to the file stem.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Amis(#[from] crate::error::AmisError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

impl CommonArgs {
    fn partial(&self) -> Result<PartialConfig, CliError> {
        let base = match &self.config {
            Some(p) => read_partial(p)?,
            None => PartialConfig::default(),
        };
        Ok(base.overlay(PartialConfig {
            gamma: self.gamma,
            ess_threshold: self.ess_threshold,
            master_seed: self.seed,
            r_runs: self.runs,
            t_iterations: self.iters,
            n_samples: self.samples,
            out: self.out.clone(),
            trace: self.trace.clone(),
            ..Default::default()
        }))
    }
}

/// Writes to `path`, or stdout when there is none.
fn emit(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_atomic(p, contents).map_err(io_err(p)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes())
                .and_then(|_| out.flush())
                .map_err(io_err(Path::new("<stdout>")))
        }
    }
}

fn emit_outputs(
    out: Option<&Path>,
    trace: Option<&Path>,
    reports: &[ExperimentReport],
    traces: &[RunTrace],
) -> Result<(), CliError> {
    let csv = reports_to_csv(reports).map_err(io_err(Path::new("<csv>")))?;
    if let Some(t) = trace {
        let lines = traces_to_jsonl(traces).map_err(io_err(t))?;
        write_atomic(t, &lines).map_err(io_err(t))?;
    }
    emit(out, &csv)
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let mut partial = args.common.partial()?;
    if let Some(a) = &args.algo {
        partial.algorithm = Some(a.clone());
    }
    let cfg = partial.resolve()?;
    let (report, traces) = run_experiment(&cfg, args.common.parallel)?;
    emit_outputs(cfg.out.as_deref(), cfg.trace.as_deref(), &[report], &traces)
}

/// The cells of a table run, ordered ESS threshold, then gamma, then algorithm.
pub fn table_cells(
    base: &PartialConfig,
    algos: &[Algorithm],
    gammas: &[f64],
    ess_thresholds: &[f64],
) -> Result<Vec<ExperimentConfig>, CliError> {
    if algos.is_empty() || gammas.is_empty() || ess_thresholds.is_empty() {
        return Err(usage("table needs at least one algorithm, gamma and ESS threshold"));
    }
    let mut cells = Vec::new();
    for &ess in ess_thresholds {
        for &gamma in gammas {
            for algo in algos {
                let cell = base.clone().overlay(PartialConfig {
                    algorithm: Some(algo.name().to_string()),
                    gamma: Some(gamma),
                    ess_threshold: Some(ess),
                    ..Default::default()
                });
                cells.push(cell.resolve()?);
            }
        }
    }
    Ok(cells)
}

pub fn cmd_table(args: &TableArgs) -> Result<(), CliError> {
    let names: Vec<String> = match &args.algo {
        Some(a) => vec![a.clone()],
        None => args.algos.iter().filter(|s| !s.trim().is_empty()).cloned().collect(),
    };
    let algos = names
        .iter()
        .map(|n| n.trim().parse::<Algorithm>())
        .collect::<Result<Vec<_>, _>>()?;
    let base = args.common.partial()?;
    let cells = table_cells(&base, &algos, &args.gammas, &args.ess_thresholds)?;
    let mut reports = Vec::with_capacity(cells.len());
    let mut all_traces = Vec::new();
    for cell in &cells {
        let (report, traces) = run_experiment(cell, args.common.parallel)?;
        reports.push(report);
        if args.common.trace.is_some() {
            all_traces.extend(traces);
        }
    }
    let out = base.out.as_deref();
    emit_outputs(out, base.trace.as_deref(), &reports, &all_traces)
}

/// Parses `mean:sigma[:rate],...` into a mixture.
pub fn parse_proposal(spec: &str) -> Result<MixtureProposal, CliError> {
    let mut comps = Vec::new();
    let mut rates = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let fields: Vec<f64> = part
            .split(':')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| usage(format!("bad proposal component `{part}`")))?;
        let (m, s, w) = match fields.as_slice() {
            [m, s] => (*m, *s, None),
            [m, s, w] => (*m, *s, Some(*w)),
            _ => return Err(usage(format!("proposal component `{part}` must be mean:sigma[:rate]"))),
        };
        comps.push(GaussianComponent::isotropic(ParameterPoint::new(vec![m])?, s)?);
        rates.push(w);
    }
    if comps.is_empty() {
        return Err(usage("empty proposal"));
    }
    let rates: Vec<f64> = if rates.iter().all(Option::is_none) {
        vec![1.0 / comps.len() as f64; comps.len()]
    } else if rates.iter().all(Option::is_some) {
        rates.into_iter().flatten().collect()
    } else {
        return Err(usage("give a rate for every proposal component or for none"));
    };
    Ok(MixtureProposal::new(comps, rates)?)
}

fn sweep_grid(args: &SweepArgs) -> Result<Vec<f64>, CliError> {
    let grid = match (&args.grid, args.grid_from, args.grid_to) {
        (Some(g), _, _) => g.clone(),
        (None, Some(lo), Some(hi)) => {
            if !(args.grid_step > 0.0) || hi < lo {
                return Err(usage("grid range needs --grid-from <= --grid-to and a positive --grid-step"));
            }
            let steps = ((hi - lo) / args.grid_step + 1e-9).floor() as usize;
            (0..=steps).map(|i| lo + i as f64 * args.grid_step).collect()
        }
        _ => return Err(usage("sweep needs --grid or both --grid-from and --grid-to")),
    };
    if grid.is_empty() {
        return Err(usage("sweep grid is empty"));
    }
    Ok(grid)
}

fn indexed_path(path: &Path, index: usize) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}-{index}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{index}"),
    };
    path.with_file_name(name)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let grid: Vec<ParameterPoint> = sweep_grid(args)?
        .into_iter()
        .map(|g| ParameterPoint::new(vec![g]))
        .collect::<Result<_, _>>()?;
    if args.samples == 0 {
        return Err(usage("--samples must be at least 1"));
    }
    let proposals = args
        .proposals
        .iter()
        .map(|p| parse_proposal(p))
        .collect::<Result<Vec<_>, _>>()?;
    let land = SyntheticLandscape::new(
        ParameterPoint::new(vec![args.mu_star])?,
        args.sigma_star,
        args.amplitude,
        0.0,
    )?;
    let mut outputs = Vec::with_capacity(proposals.len());
    for (i, q) in proposals.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        rng.set_stream(i as u64);
        let points = counterfactual_sweep(&land, q, args.sigma_p, &grid, args.samples, &mut rng)?;
        outputs.push(sweep_to_csv(&points));
    }
    match (&args.out, outputs.len()) {
        (Some(p), 1) => emit(Some(p), &outputs[0]),
        (Some(p), _) => outputs
            .iter()
            .enumerate()
            .try_for_each(|(i, o)| emit(Some(&indexed_path(p, i)), o)),
        (None, _) => outputs.iter().try_for_each(|o| emit(None, o)),
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Table(a) => cmd_table(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("amis: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proposal_specs() {
        let q = parse_proposal("1:1,6:1,11:1,16:1").unwrap();
        assert_eq!(q.len(), 4);
        assert_eq!(q.weights(), &[0.25; 4]);
        let q = parse_proposal("5:1:0.8,5:3:0.2").unwrap();
        assert_eq!(q.weights(), &[0.8, 0.2]);
        assert!(parse_proposal("5:1:0.8,5:3").is_err());
        assert!(parse_proposal("5").is_err());
        assert!(parse_proposal("").is_err());
        assert!(parse_proposal("5:-1").is_err());
    }

    #[test]
    fn default_matrix_has_24_cells() {
        let base = PartialConfig::default();
        let cells = table_cells(&base, &Algorithm::ALL, &[0.0, 10.0, 100.0], &[0.0, 0.4]).unwrap();
        assert_eq!(cells.len(), 24);
        assert_eq!(cells[0].algorithm, Algorithm::Gis);
        assert_eq!(cells[3].algorithm, Algorithm::Pcu);
        assert_eq!(cells[4].gamma, 10.0);
        assert_eq!(cells[12].ess_threshold, 0.4);
        assert!(matches!(table_cells(&base, &[], &[0.0], &[0.0]), Err(CliError::Usage(_))));
    }

    #[test]
    fn indexed_paths() {
        assert_eq!(indexed_path(Path::new("/tmp/s.csv"), 1), PathBuf::from("/tmp/s-1.csv"));
        assert_eq!(indexed_path(Path::new("s"), 0), PathBuf::from("s-0"));
    }
}
