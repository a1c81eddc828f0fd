use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pairscreen::analysis::{CorrectedCaseCount, TestSettings};
use pairscreen::export::read_metrics;
use pairscreen::registry::Strategies;
use pairscreen::trial::TrialGenerator;
use pairscreen_cli::analyze::{analyze_dataset, cmd_analyze, write_analysis_csv, AnalyzeOptions};
use pairscreen_cli::config::RunConfigFile;
use pairscreen_cli::simulate::cmd_export;
use tempfile::TempDir;

const SMALL: &str = r#"{
  "scenario": {
    "n": 20000, "prevalence": 0.05, "signs_rate": 0.1,
    "scores": {"auc": {"auc1": 0.78, "auc2": 0.74}},
    "referral": {"ascertainment": {"t1": 0.15, "t2": 0.8}},
    "reps": 6, "seed": 99
  },
  "sweep": {"prevalence": [0.03, 0.05]}
}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pairscreen"))
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn settings() -> TestSettings {
    TestSettings::default()
}

#[test]
fn exported_trial_reanalyzes_bit_for_bit() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let csv = dir.path().join("trial.csv");
    let thresholds = cmd_export(&cfg, 1, 3, None, &csv).unwrap();

    let file = RunConfigFile::load(&cfg).unwrap();
    let cell = file.grid().unwrap().cells().unwrap().remove(1);
    let generator = TrialGenerator::new(&cell, Strategies::builtin()).unwrap();
    assert_eq!(generator.thresholds(), thresholds);
    let direct = analyze_dataset(
        &generator.draw(3),
        &settings(),
        CorrectedCaseCount::Observed,
    )
    .unwrap();
    assert_eq!(direct.results.len(), 3);

    let opts = AnalyzeOptions {
        thresholds,
        settings: settings(),
        case_count: CorrectedCaseCount::Observed,
        out: dir.path().join("analysis"),
    };
    let report = cmd_analyze(&csv, &opts).unwrap();
    assert_eq!(report.results, direct.results);
    assert_eq!(report.correction, direct.correction);
    report.status().unwrap();
}

#[test]
fn binary_export_and_analyze_match_in_process_output() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let csv = dir.path().join("trial.csv");
    let o = bin()
        .args([
            "export",
            cfg.to_str().unwrap(),
            "--rep",
            "2",
            "--out",
            csv.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let args: Vec<&str> = stdout
        .trim()
        .trim_start_matches("thresholds: ")
        .split_whitespace()
        .collect();
    assert_eq!(args[0], "--a1");
    let out = dir.path().join("an");
    let o = bin()
        .arg("analyze")
        .arg(&csv)
        .args(&args)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));

    let file = RunConfigFile::load(&cfg).unwrap();
    let cell = file.grid().unwrap().cells().unwrap().remove(0);
    let data = TrialGenerator::new(&cell, Strategies::builtin())
        .unwrap()
        .draw(2);
    let direct = analyze_dataset(&data, &settings(), CorrectedCaseCount::Observed).unwrap();
    let mut expected = Vec::new();
    write_analysis_csv(&direct.results, &mut expected).unwrap();
    assert_eq!(fs::read(out.join("analysis.csv")).unwrap(), expected);
    assert!(fs::read_to_string(out.join("roc.svg"))
        .unwrap()
        .starts_with("<svg"));
}

fn simulate(cfg: &Path, out: &Path, workers: &str) {
    let o = bin()
        .args([
            "simulate",
            cfg.to_str().unwrap(),
            "--workers",
            workers,
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn simulate_output_is_independent_of_workers() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    simulate(&cfg, &a, "1");
    simulate(&cfg, &b, "3");
    let mut names: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.iter().any(|n| n == "metrics.csv") && names.iter().any(|n| n == "crf.svg"));
    for n in &names {
        assert_eq!(
            fs::read(a.join(n)).unwrap(),
            fs::read(b.join(n)).unwrap(),
            "{n:?}"
        );
    }
    let rows = read_metrics(fs::File::open(a.join("metrics.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 2 * 3);
    assert!(rows.iter().all(|r| r.reps == 6));
}

#[test]
fn seed_override_changes_results() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    simulate(&cfg, &a, "1");
    let o = bin()
        .args([
            "simulate",
            cfg.to_str().unwrap(),
            "--seed",
            "100",
            "--no-charts",
            "--out",
            b.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_ne!(
        fs::read(a.join("metrics.csv")).unwrap(),
        fs::read(b.join("metrics.csv")).unwrap()
    );
    assert!(!b.join("rejection_rate.svg").exists());
}

#[test]
fn config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        &SMALL.replace("\"signs_rate\"", "\"sign_rate\""),
    );
    let o = bin()
        .args(["simulate", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), &SMALL.replace("[0.03, 0.05]", "[0.03, 1.05]"));
    let o = bin()
        .args(["simulate", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));

    let cfg = write_config(dir.path(), SMALL);
    let o = bin()
        .args(["export", cfg.to_str().unwrap(), "--cell", "7", "--out"])
        .arg(dir.path().join("x.csv"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("2 cells"));
}

fn analyze(csv: &Path, out: &Path) -> Output {
    bin()
        .arg("analyze")
        .arg(csv)
        .args(["--a1", "0", "--a2", "0", "--out"])
        .arg(out)
        .output()
        .unwrap()
}

fn noncases(n: usize) -> String {
    let mut s = String::from("id,x1,x2,observed_status\n");
    for i in 0..n {
        let x = (i as f64 * 0.37).sin();
        let y = (i as f64 * 0.91).cos();
        s.push_str(&format!("{},{x},{y},0\n", i + 1));
    }
    s
}

#[test]
fn data_errors_exit_3() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("d.csv");
    fs::write(&csv, noncases(50)).unwrap();
    let o = analyze(&csv, &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("no observed cases"));

    fs::write(&csv, noncases(5).replace("3,", "3,abc,")).unwrap();
    let o = analyze(&csv, &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("row 4"), "{}", stderr(&o));

    let o = analyze(&dir.path().join("missing.csv"), &dir.path().join("o"));
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn unusable_correction_exits_4_with_partial_output() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("d.csv");
    // Every quadrant holding cases has a constant test 1 score.
    let mut s = noncases(200);
    for (i, (x, y)) in [(1.0, -1.0), (1.0, -2.0), (-1.0, 3.0), (-1.0, 4.0)]
        .iter()
        .enumerate()
    {
        s.push_str(&format!("{},{x},{y},1\n", 201 + i));
    }
    fs::write(&csv, s).unwrap();
    let out = dir.path().join("o");
    let o = analyze(&csv, &out);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let written = fs::read_to_string(out.join("analysis.csv")).unwrap();
    assert!(written.contains("\nobserved,"));
    assert!(!written.contains("\ncorrected,") && !written.contains("\ntrue,"));
}

#[test]
fn bundled_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for e in fs::read_dir(&dir).unwrap() {
        let p = e.unwrap().path();
        let c = RunConfigFile::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        if p.ends_with("table2.json") {
            assert_eq!(c.grid().unwrap().len(), 18);
            assert_eq!(c.scenario.reps, 10_000);
        }
        n += 1;
    }
    assert!(n >= 9);
}
