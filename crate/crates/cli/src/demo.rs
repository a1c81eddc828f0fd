use std::path::PathBuf;

use pairscreen::analysis::CorrectedCaseCount;
use pairscreen::export::{write_metrics, write_participants};
use pairscreen::harness::ScenarioMetrics;
use pairscreen::registry::Strategies;
use pairscreen::roc::VarianceModel;
use pairscreen::trial::{Referral, TrialGenerator};

use crate::analyze::{
    create, ensure_dir, write_analysis, write_text, AnalyzeOptions, AnalyzeReport,
};
use crate::config::{OutputSpec, RunConfigFile, ScenarioSpec, ScoreSpec, Sweep};
use crate::error::CliResult;
use crate::simulate::run_config;

pub const DEMO_SEED: u64 = 2012;
pub const DEMO_REPS: usize = 10_000;
pub const DEMO_AUC: [f64; 2] = [0.77, 0.71];
/// Ascertainment of the cautious and the liberal referral rule.
pub const DEMO_ASCERTAINMENT: [f64; 2] = [0.0001, 0.97];

#[derive(Debug, Clone, Default)]
pub struct DemoOptions {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub calibration: Option<String>,
}

#[derive(Debug, Clone)]
pub struct DemoReport {
    /// Analyses of the first replication of the alternative scenario.
    pub trial: AnalyzeReport,
    pub alternative: ScenarioMetrics,
    pub null: ScenarioMetrics,
    pub files: Vec<PathBuf>,
}

/// Oral cancer screening trial: 50,000 participants, 1% prevalence, 10%
/// signs and symptoms, cautious test 1 against liberal test 2.
pub fn demo_config(auc: [f64; 2], opts: &DemoOptions) -> RunConfigFile {
    RunConfigFile {
        scenario: ScenarioSpec {
            n: 50_000,
            prevalence: 0.01,
            signs_rate: 0.1,
            scores: ScoreSpec::Auc {
                auc1: auc[0],
                auc2: auc[1],
                rho0: 0.3,
                rho1: 0.3,
            },
            referral: Referral::Ascertainment {
                t1: DEMO_ASCERTAINMENT[0],
                t2: DEMO_ASCERTAINMENT[1],
                calibration: opts
                    .calibration
                    .clone()
                    .unwrap_or_else(|| pairscreen::calibrate::DEFAULT_CALIBRATION.to_string()),
            },
            transform: Default::default(),
            reps: opts.reps.unwrap_or(DEMO_REPS),
            seed: opts.seed.unwrap_or(DEMO_SEED),
            alpha: pairscreen::trial::DEFAULT_ALPHA,
            variance: VarianceModel::Independent,
        },
        sweep: Sweep::default(),
        analyses: vec!["true".into(), "observed".into(), "corrected".into()],
        output: OutputSpec {
            dir: None,
            charts: false,
        },
        workers: opts.workers,
    }
}

fn run_one(file: &RunConfigFile, id: &str) -> CliResult<ScenarioMetrics> {
    file.validate()?;
    let mut m = run_config(file)?.remove(0);
    m.scenario_id = id.to_string();
    Ok(m)
}

pub fn cmd_demo(opts: &DemoOptions) -> CliResult<DemoReport> {
    let out = opts
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("pairscreen-demo"));
    ensure_dir(&out)?;
    let alt = demo_config(DEMO_AUC, opts);
    let null_cfg = demo_config([DEMO_AUC[0], DEMO_AUC[0]], opts);
    alt.validate()?;
    let mut files = Vec::new();

    let cell = alt.grid()?.cells()?.remove(0);
    let generator = TrialGenerator::new(&cell, Strategies::builtin())?;
    let data = generator.draw(0);
    let p = out.join("demo_participants.csv");
    write_participants(&data, std::io::BufWriter::new(create(&p)?))?;
    files.push(p);
    let analyze = AnalyzeOptions {
        thresholds: generator.thresholds(),
        settings: cell.test_settings(),
        case_count: CorrectedCaseCount::Observed,
        out: out.clone(),
    };
    let trial = write_analysis(
        &data,
        &analyze,
        "Hypothetical oral cancer screening trial",
        "demo_",
    )?;
    files.extend(trial.files.iter().cloned());

    let alternative = run_one(&alt, "alternative")?;
    let null = run_one(&null_cfg, "null")?;
    let p = out.join("validation.csv");
    write_metrics(&[alternative.clone(), null.clone()], create(&p)?)?;
    files.push(p);
    let p = out.join("demo_config.json");
    let json = serde_json::to_string_pretty(&[&alt, &null_cfg])
        .map_err(|e| crate::error::CliError::io(&p, e))?;
    write_text(&p, &(json + "\n"))?;
    files.push(p);

    Ok(DemoReport {
        trial,
        alternative,
        null,
        files,
    })
}
