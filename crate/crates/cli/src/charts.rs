//! Charts built from simulation metrics and analysis results.

use pairscreen::analysis::AnalysisResult;
use pairscreen::harness::ScenarioMetrics;
use pairscreen::roc::{roc_curve, ScoreMoments};

use crate::config::{Factor, Sweep};
use crate::svg::{Chart, Series, XAxis, PALETTE};

fn pct(v: f64) -> String {
    let s = format!("{:.2}", 100.0 * v);
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn level_label(f: Factor, m: &ScenarioMetrics) -> String {
    match f {
        Factor::Prevalence => format!("prevalence {}%", pct(m.prevalence)),
        Factor::SignsRate => format!("signs {}%", pct(m.signs_rate)),
        Factor::Ascertainment => match m.targets {
            Some(t) => format!("{}/{}", pct(t[0]), pct(t[1])),
            None => format!("{:.3}/{:.3}", m.thresholds[0], m.thresholds[1]),
        },
        Factor::Correlations => format!("{}/{}", m.rho0, m.rho1),
        Factor::Transforms => m.transform.clone(),
    }
}

/// Rejection rate, CRF and WRF against the swept factor with the most levels
/// (the earlier one on ties), one chart set per combination of the others.
/// Returns (file stem, SVG) pairs.
pub fn metric_charts(sweep: &Sweep, metrics: &[ScenarioMetrics]) -> Vec<(String, String)> {
    let varying: Vec<Factor> = Factor::ALL
        .into_iter()
        .filter(|f| f.levels(sweep) > 1)
        .collect();
    let x_factor = varying
        .iter()
        .copied()
        .rev()
        .max_by_key(|f| f.levels(sweep));
    let others: Vec<Factor> = varying
        .iter()
        .copied()
        .filter(|f| Some(*f) != x_factor)
        .collect();

    let mut groups: Vec<(String, Vec<&ScenarioMetrics>)> = Vec::new();
    for m in metrics {
        let key = others
            .iter()
            .map(|f| level_label(*f, m))
            .collect::<Vec<_>>()
            .join(", ");
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(m),
            None => groups.push((key, vec![m])),
        }
    }

    let analyses: Vec<String> = metrics
        .first()
        .map(|m| m.analyses.iter().map(|a| a.analysis.clone()).collect())
        .unwrap_or_default();

    type Pick = fn(&pairscreen::harness::AnalysisMetrics) -> Option<f64>;
    let measures: [(&str, &str, Pick); 3] = [
        ("rejection_rate", "rejection rate", |a| {
            Some(a.rejection_rate)
        }),
        ("crf", "correct rejection fraction", |a| a.crf),
        ("wrf", "wrong rejection fraction", |a| a.wrf),
    ];

    let mut out = Vec::new();
    for (gi, (key, cells)) in groups.iter().enumerate() {
        let (x_axis, xs): (XAxis, Vec<f64>) = match x_factor {
            Some(Factor::Prevalence) => (
                XAxis::Continuous,
                cells.iter().map(|m| m.prevalence).collect(),
            ),
            Some(Factor::SignsRate) => (
                XAxis::Continuous,
                cells.iter().map(|m| m.signs_rate).collect(),
            ),
            Some(f) => (
                XAxis::Categorical(cells.iter().map(|m| level_label(f, m)).collect()),
                (0..cells.len()).map(|i| i as f64).collect(),
            ),
            None => (
                XAxis::Categorical(cells.iter().map(|m| m.scenario_id.clone()).collect()),
                (0..cells.len()).map(|i| i as f64).collect(),
            ),
        };
        let x_label = x_factor.map_or("scenario", |f| f.label()).to_string();
        for (stem, label, pick) in measures {
            let series: Vec<Series> = analyses
                .iter()
                .enumerate()
                .filter_map(|(ai, name)| {
                    let points: Vec<(f64, f64)> = cells
                        .iter()
                        .zip(&xs)
                        .filter_map(|(m, &x)| m.analysis(name).and_then(pick).map(|y| (x, y)))
                        .collect();
                    (!points.is_empty()).then(|| Series {
                        name: name.clone(),
                        points,
                        color: PALETTE[ai % PALETTE.len()],
                        dashed: false,
                        markers: true,
                    })
                })
                .collect();
            if series.is_empty() {
                continue;
            }
            let title = if key.is_empty() {
                label.to_string()
            } else {
                format!("{label} ({key})")
            };
            let chart = Chart {
                title,
                x_label: x_label.clone(),
                y_label: label.to_string(),
                x_axis: x_axis.clone(),
                x_range: None,
                y_range: Some((0.0, 1.0)),
                diagonal: false,
                series,
            };
            let file = if groups.len() == 1 {
                stem.to_string()
            } else {
                format!("{stem}_{gi:02}")
            };
            out.push((file, chart.render()));
        }
    }
    out
}

/// Fitted binormal ROC curves: one colour per analysis, solid for test 1
/// and dashed for test 2.
pub fn roc_chart(title: &str, results: &[AnalysisResult]) -> String {
    let mut series = Vec::new();
    for (i, r) in results.iter().enumerate() {
        for j in 0..2 {
            let case = ScoreMoments::new(r.case_params.mean(j), r.case_params.var(j));
            let noncase = ScoreMoments::new(r.noncase_params.mean(j), r.noncase_params.var(j));
            series.push(Series {
                name: format!(
                    "{} test {} ({:.3})",
                    r.kind,
                    j + 1,
                    if j == 0 { r.auc1 } else { r.auc2 }
                ),
                points: roc_curve(case, noncase),
                color: PALETTE[i % PALETTE.len()],
                dashed: j == 1,
                markers: false,
            });
        }
    }
    Chart {
        title: title.to_string(),
        x_label: "1 - specificity".into(),
        y_label: "sensitivity".into(),
        x_axis: XAxis::Continuous,
        x_range: Some((0.0, 1.0)),
        y_range: Some((0.0, 1.0)),
        diagonal: true,
        series,
    }
    .render()
}
