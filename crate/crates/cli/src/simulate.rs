use std::path::{Path, PathBuf};

use pairscreen::export::{write_metrics, write_participants};
use pairscreen::harness::{run_grid, RunOptions, ScenarioMetrics};
use pairscreen::registry::Strategies;
use pairscreen::trial::TrialGenerator;
use serde::Serialize;

use crate::analyze::{create, ensure_dir, write_text};
use crate::charts::metric_charts;
use crate::config::RunConfigFile;
use crate::error::{CliError, CliResult};

pub const DEFAULT_OUT: &str = "pairscreen-out";

/// Command-line overrides of a run configuration.
#[derive(Debug, Clone, Default)]
pub struct SimulateOptions {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub no_charts: bool,
}

#[derive(Debug, Clone)]
pub struct SimulateReport {
    pub metrics: Vec<ScenarioMetrics>,
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    scenario_id: &'a str,
    prevalence: f64,
    signs_rate: f64,
    ascert1: Option<f64>,
    ascert2: Option<f64>,
    threshold1: f64,
    threshold2: f64,
    rho0: f64,
    rho1: f64,
    transform: &'a str,
    true_auc1: f64,
    true_auc2: f64,
    reps: usize,
    realized_ascert1: f64,
    realized_ascert2: f64,
    mean_observed_cases: f64,
    mean_interval_cases: f64,
}

fn write_summary(metrics: &[ScenarioMetrics], path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for m in metrics {
        w.serialize(SummaryRow {
            scenario_id: &m.scenario_id,
            prevalence: m.prevalence,
            signs_rate: m.signs_rate,
            ascert1: m.targets.map(|t| t[0]),
            ascert2: m.targets.map(|t| t[1]),
            threshold1: m.thresholds[0],
            threshold2: m.thresholds[1],
            rho0: m.rho0,
            rho1: m.rho1,
            transform: &m.transform,
            true_auc1: m.true_auc[0],
            true_auc2: m.true_auc[1],
            reps: m.reps,
            realized_ascert1: m.mean_percent_ascertainment[0],
            realized_ascert2: m.mean_percent_ascertainment[1],
            mean_observed_cases: m.mean_observed_cases,
            mean_interval_cases: m.mean_interval_cases,
        })
        .map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// The configuration with command-line overrides applied.
pub fn apply_overrides(
    mut file: RunConfigFile,
    opts: &SimulateOptions,
) -> CliResult<RunConfigFile> {
    if let Some(s) = opts.seed {
        file.scenario.seed = s;
    }
    if let Some(r) = opts.reps {
        file.scenario.reps = r;
    }
    if let Some(w) = opts.workers {
        file.workers = Some(w);
    }
    if opts.no_charts {
        file.output.charts = false;
    }
    file.validate()?;
    Ok(file)
}

/// Runs every grid cell of a validated configuration.
pub fn run_config(file: &RunConfigFile) -> CliResult<Vec<ScenarioMetrics>> {
    let opts = RunOptions {
        workers: file.workers.unwrap_or(0),
        analyses: file.analyses.clone(),
    };
    Ok(run_grid(&file.grid()?, Strategies::builtin(), &opts)?)
}

/// Writes metrics.csv, summary.csv, the effective configuration and charts.
pub fn write_outputs(
    file: &RunConfigFile,
    metrics: &[ScenarioMetrics],
    dir: &Path,
) -> CliResult<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let mut files = Vec::new();
    let p = dir.join("metrics.csv");
    write_metrics(metrics, create(&p)?)?;
    files.push(p);
    let p = dir.join("summary.csv");
    write_summary(metrics, &p)?;
    files.push(p);
    let p = dir.join("config.json");
    let effective = RunConfigFile {
        workers: None,
        ..file.clone()
    };
    let json = serde_json::to_string_pretty(&effective).map_err(|e| CliError::io(&p, e))?;
    write_text(&p, &(json + "\n"))?;
    files.push(p);
    if file.output.charts {
        for (stem, svg) in metric_charts(&file.sweep, metrics) {
            let p = dir.join(format!("{stem}.svg"));
            write_text(&p, &svg)?;
            files.push(p);
        }
    }
    Ok(files)
}

pub fn cmd_simulate(config_path: &Path, opts: &SimulateOptions) -> CliResult<SimulateReport> {
    let file = apply_overrides(RunConfigFile::load(config_path)?, opts)?;
    let out_dir = opts
        .out
        .clone()
        .or_else(|| file.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let metrics = run_config(&file)?;
    let files = write_outputs(&file, &metrics, &out_dir)?;
    Ok(SimulateReport {
        metrics,
        out_dir,
        files,
    })
}

/// Writes replication `rep` of grid cell `cell` as participant CSV and
/// returns the referral thresholds it used.
pub fn cmd_export(
    config_path: &Path,
    cell: usize,
    rep: u64,
    seed: Option<u64>,
    out: &Path,
) -> CliResult<[f64; 2]> {
    let opts = SimulateOptions {
        seed,
        ..Default::default()
    };
    let file = apply_overrides(RunConfigFile::load(config_path)?, &opts)?;
    let cells = file.grid()?.cells()?;
    let n_cells = cells.len();
    let cfg = cells.into_iter().nth(cell).ok_or_else(|| {
        CliError::Config(format!(
            "cell {cell} does not exist; the grid has {n_cells} cells"
        ))
    })?;
    let generator = TrialGenerator::new(&cfg, Strategies::builtin())?;
    let data = generator.draw(rep);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    write_participants(&data, std::io::BufWriter::new(create(out)?))?;
    Ok(generator.thresholds())
}
