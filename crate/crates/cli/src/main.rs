use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pairscreen::analysis::{AnalysisResult, CorrectedCaseCount, TestSettings};
use pairscreen::harness::ScenarioMetrics;
use pairscreen::roc::VarianceModel;
use pairscreen_cli::analyze::{cmd_analyze, AnalyzeOptions, AnalyzeReport};
use pairscreen_cli::demo::{cmd_demo, DemoOptions};
use pairscreen_cli::simulate::{cmd_export, cmd_simulate, SimulateOptions};
use pairscreen_cli::CliResult;

#[derive(Parser)]
#[command(
    name = "pairscreen",
    version,
    about = "Paired screening trial simulation and bias-corrected ROC comparison"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variance {
    Paired,
    Independent,
}

#[derive(Clone, Copy, ValueEnum)]
enum CaseCount {
    Observed,
    Inflated,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulation study described by a JSON config.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        /// Worker threads (0 = all cores).
        #[arg(long, env = "PAIRSCREEN_WORKERS")]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_charts: bool,
    },
    /// Analyze participant-level data from a paired screening trial.
    Analyze {
        data: PathBuf,
        /// Referral threshold of test 1.
        #[arg(long, allow_hyphen_values = true)]
        a1: f64,
        /// Referral threshold of test 2.
        #[arg(long, allow_hyphen_values = true)]
        a2: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value = "paired")]
        variance: Variance,
        /// Case count used in the corrected variance.
        #[arg(long, value_enum, default_value = "observed")]
        case_count: CaseCount,
        #[arg(long, default_value = "pairscreen-analysis")]
        out: PathBuf,
    },
    /// Run the built-in oral cancer screening demonstration.
    Demo {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, env = "PAIRSCREEN_WORKERS")]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Threshold calibration strategy.
        #[arg(long)]
        calibration: Option<String>,
    },
    /// Write one simulated trial as participant CSV.
    Export {
        config: PathBuf,
        /// Grid cell index.
        #[arg(long, default_value_t = 0)]
        cell: usize,
        #[arg(long, default_value_t = 0)]
        rep: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.3}"))
}

fn print_metrics(metrics: &[ScenarioMetrics]) {
    println!(
        "{:<12} {:>7} {:>6} {:>13} {:<10} {:>7} {:>6} {:>6} {:>8}",
        "scenario", "prev", "signs", "ascert", "analysis", "reject", "crf", "wrf", "diff"
    );
    for m in metrics {
        let ascert = m
            .targets
            .map_or_else(|| "-".into(), |t| format!("{}/{}", t[0], t[1]));
        for a in &m.analyses {
            println!(
                "{:<12} {:>7} {:>6} {:>13} {:<10} {:>7.3} {:>6} {:>6} {:>+8.4}",
                m.scenario_id,
                m.prevalence,
                m.signs_rate,
                ascert,
                a.analysis,
                a.rejection_rate,
                opt(a.crf),
                opt(a.wrf),
                a.mean_diff
            );
        }
    }
}

fn print_results(results: &[AnalysisResult]) {
    println!(
        "{:<10} {:>7} {:>7} {:>8} {:>8} {:>9} {:>7} {:>7}",
        "analysis", "auc1", "auc2", "diff", "z", "p", "reject", "favors"
    );
    for r in results {
        println!(
            "{:<10} {:>7.4} {:>7.4} {:>+8.4} {:>8.3} {:>9.2e} {:>7} {:>7}",
            r.kind.as_str(),
            r.auc1,
            r.auc2,
            r.diff,
            r.z,
            r.p_value,
            r.reject,
            r.favored_test.as_str()
        );
    }
}

fn report_analysis(report: &AnalyzeReport) {
    let c = &report.counts;
    println!(
        "{} participants, {} observed cases ({} screen-detected, {} interval)",
        c.participants, c.observed_cases, c.screen_detected, c.interval
    );
    print_results(&report.results);
    if let Some(p) = &report.correction {
        println!(
            "correction: lambda = {:.4}, quadrant {}, weighting {}",
            p.lambda_hat,
            p.selected_quadrant,
            if p.weighting_applied {
                "applied"
            } else {
                "not applied"
            }
        );
    }
    for w in report.warnings() {
        eprintln!("warning: {w}");
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            reps,
            workers,
            out,
            no_charts,
        } => {
            let opts = SimulateOptions {
                seed,
                reps,
                workers,
                out,
                no_charts,
            };
            let report = cmd_simulate(&config, &opts)?;
            print_metrics(&report.metrics);
            println!(
                "wrote {} files to {}",
                report.files.len(),
                report.out_dir.display()
            );
            Ok(())
        }
        Command::Analyze {
            data,
            a1,
            a2,
            alpha,
            variance,
            case_count,
            out,
        } => {
            let opts = AnalyzeOptions {
                thresholds: [a1, a2],
                settings: TestSettings {
                    alpha,
                    variance: match variance {
                        Variance::Paired => VarianceModel::Paired,
                        Variance::Independent => VarianceModel::Independent,
                    },
                },
                case_count: match case_count {
                    CaseCount::Observed => CorrectedCaseCount::Observed,
                    CaseCount::Inflated => CorrectedCaseCount::Inflated,
                },
                out,
            };
            let report = cmd_analyze(&data, &opts)?;
            report_analysis(&report);
            report.status()
        }
        Command::Demo {
            seed,
            reps,
            workers,
            out,
            calibration,
        } => {
            let report = cmd_demo(&DemoOptions {
                seed,
                reps,
                workers,
                out,
                calibration,
            })?;
            println!("single trial:");
            report_analysis(&report.trial);
            println!("\nvalidation simulation:");
            print_metrics(&[report.alternative, report.null]);
            Ok(())
        }
        Command::Export {
            config,
            cell,
            rep,
            seed,
            out,
        } => {
            let t = cmd_export(&config, cell, rep, seed, &out)?;
            println!("thresholds: --a1 {} --a2 {}", t[0], t[1]);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
