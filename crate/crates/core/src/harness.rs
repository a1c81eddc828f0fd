//! Replication engine: runs scenarios many times and summarizes how often
//! each analysis rejects, and whether its rejections point the right way.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::Analysis;
use crate::error::{Error, Result};
use crate::gauss::{std_normal_quantile, BivNormParams};
use crate::registry::Strategies;
use crate::rng::derive_seed;
use crate::roc::{binormal_auc, FavoredTest, ScoreMoments};
use crate::transform::TransformSpec;
use crate::trial::{percent_ascertainment, Referral, ScenarioConfig, TrialGenerator};

/// Case mean giving `target_auc` against the given non-case distribution.
pub fn auc_to_case_mean(target_auc: f64, noncase: ScoreMoments, case_var: f64) -> Result<f64> {
    if !(target_auc > 0.0 && target_auc < 1.0) {
        return Err(Error::Domain(format!(
            "AUC must lie in (0, 1), got {target_auc}"
        )));
    }
    Ok(noncase.mean + std_normal_quantile(target_auc)? * (case_var + noncase.var).sqrt())
}

/// True AUCs implied by a scenario's class distributions.
pub fn scenario_aucs(config: &ScenarioConfig) -> [f64; 2] {
    let auc = |j: usize| {
        binormal_auc(
            ScoreMoments::new(config.case_params.mean(j), config.case_params.var(j)),
            ScoreMoments::new(config.noncase_params.mean(j), config.noncase_params.var(j)),
        )
    };
    [auc(0), auc(1)]
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Worker threads; 0 uses all available cores.
    pub workers: usize,
    /// Registered analysis names, in report order.
    pub analyses: Vec<String>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            workers: 0,
            analyses: vec!["true".into(), "observed".into(), "corrected".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisMetrics {
    pub analysis: String,
    /// Replications in which the analysis produced a result.
    pub reps: usize,
    pub rejection_rate: f64,
    /// Share of replications rejecting in favour of the truly better test;
    /// absent when the tests are truly equal.
    pub crf: Option<f64>,
    /// Share rejecting in favour of the truly worse test.
    pub wrf: Option<f64>,
    pub mean_auc1: f64,
    pub mean_auc2: f64,
    pub mean_diff: f64,
    pub sd_diff: f64,
    /// Monte Carlo standard error of the rejection rate.
    pub mc_se: f64,
    /// Replications with a degraded result or no result at all.
    pub degradations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioMetrics {
    pub scenario_id: String,
    pub prevalence: f64,
    pub signs_rate: f64,
    pub targets: Option<[f64; 2]>,
    pub thresholds: [f64; 2],
    pub rho0: f64,
    pub rho1: f64,
    pub transform: String,
    pub true_auc: [f64; 2],
    pub reps: usize,
    /// Mean realized percent ascertainment over replications with observed cases.
    pub mean_percent_ascertainment: [f64; 2],
    pub mean_observed_cases: f64,
    pub mean_interval_cases: f64,
    pub analyses: Vec<AnalysisMetrics>,
}

impl ScenarioMetrics {
    pub fn analysis(&self, name: &str) -> Option<&AnalysisMetrics> {
        self.analyses.iter().find(|a| a.analysis == name)
    }
}

#[derive(Debug, Clone, Copy)]
struct Decision {
    reject: bool,
    favored: FavoredTest,
    auc: [f64; 2],
    diff: f64,
    degraded: bool,
}

struct RepOutcome {
    decisions: Vec<Option<Decision>>,
    percent_ascertainment: Option<[f64; 2]>,
    observed: usize,
    interval: usize,
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

fn resolve_analyses(
    strategies: &Strategies,
    names: &[String],
) -> Result<Vec<(String, Arc<dyn Analysis>)>> {
    names
        .iter()
        .map(|n| Ok((n.clone(), strategies.analyses.get(n)?)))
        .collect()
}

/// Runs one scenario on the calling thread's rayon pool.
fn run_scenario_in(
    id: &str,
    config: &ScenarioConfig,
    strategies: &Strategies,
    analyses: &[(String, Arc<dyn Analysis>)],
) -> Result<ScenarioMetrics> {
    let generator = TrialGenerator::new(config, strategies)?;
    let settings = config.test_settings();
    let outcomes: Vec<RepOutcome> = (0..config.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let data = generator.draw(rep);
            let decisions = analyses
                .iter()
                .map(|(_, a)| {
                    a.run(&data, &settings).ok().map(|r| Decision {
                        reject: r.reject,
                        favored: r.favored_test,
                        auc: [r.auc1, r.auc2],
                        diff: r.diff,
                        degraded: r.degraded,
                    })
                })
                .collect();
            let pa = match (
                percent_ascertainment(&data, 0),
                percent_ascertainment(&data, 1),
            ) {
                (Ok(p1), Ok(p2)) => Some([p1, p2]),
                _ => None,
            };
            RepOutcome {
                decisions,
                percent_ascertainment: pa,
                observed: data.counts.observed_cases,
                interval: data.counts.interval,
            }
        })
        .collect();

    let true_auc = scenario_aucs(config);
    let better = if (true_auc[0] - true_auc[1]).abs() < 1e-12 {
        None
    } else if true_auc[0] > true_auc[1] {
        Some(FavoredTest::Test1)
    } else {
        Some(FavoredTest::Test2)
    };

    let mut metrics = Vec::with_capacity(analyses.len());
    for (k, (name, _)) in analyses.iter().enumerate() {
        let mut done = 0usize;
        let mut rejected = 0usize;
        let mut correct = 0usize;
        let mut wrong = 0usize;
        let mut degraded = 0usize;
        let (mut s1, mut s2, mut sd, mut sd2) = (0.0, 0.0, 0.0, 0.0);
        for o in &outcomes {
            match o.decisions[k] {
                None => degraded += 1,
                Some(d) => {
                    done += 1;
                    degraded += d.degraded as usize;
                    s1 += d.auc[0];
                    s2 += d.auc[1];
                    sd += d.diff;
                    sd2 += d.diff * d.diff;
                    if d.reject {
                        rejected += 1;
                        if let Some(b) = better {
                            if d.favored == b {
                                correct += 1;
                            } else {
                                wrong += 1;
                            }
                        }
                    }
                }
            }
        }
        let n = done as f64;
        let rate = if done > 0 {
            rejected as f64 / n
        } else {
            f64::NAN
        };
        let mean_diff = sd / n;
        metrics.push(AnalysisMetrics {
            analysis: name.clone(),
            reps: done,
            rejection_rate: rate,
            crf: better.map(|_| correct as f64 / n),
            wrf: better.map(|_| wrong as f64 / n),
            mean_auc1: s1 / n,
            mean_auc2: s2 / n,
            mean_diff,
            sd_diff: if done > 1 {
                ((sd2 - n * mean_diff * mean_diff) / (n - 1.0))
                    .max(0.0)
                    .sqrt()
            } else {
                f64::NAN
            },
            mc_se: (rate * (1.0 - rate) / n).sqrt(),
            degradations: degraded,
        });
    }

    let mut pa_sum = [0.0; 2];
    let mut pa_n = 0usize;
    let (mut obs, mut int) = (0usize, 0usize);
    for o in &outcomes {
        if let Some(p) = o.percent_ascertainment {
            pa_sum[0] += p[0];
            pa_sum[1] += p[1];
            pa_n += 1;
        }
        obs += o.observed;
        int += o.interval;
    }
    let reps = outcomes.len() as f64;
    Ok(ScenarioMetrics {
        scenario_id: id.to_string(),
        prevalence: config.prevalence,
        signs_rate: config.signs_rate,
        targets: config.targets(),
        thresholds: generator.thresholds(),
        rho0: config.noncase_params.rho(),
        rho1: config.case_params.rho(),
        transform: generator.transform_label(),
        true_auc,
        reps: outcomes.len(),
        mean_percent_ascertainment: [pa_sum[0] / pa_n as f64, pa_sum[1] / pa_n as f64],
        mean_observed_cases: obs as f64 / reps,
        mean_interval_cases: int as f64 / reps,
        analyses: metrics,
    })
}

/// Runs `config.reps` replications. Results depend only on the config, not
/// on the number of workers.
pub fn run_scenario(
    config: &ScenarioConfig,
    strategies: &Strategies,
    opts: &RunOptions,
) -> Result<ScenarioMetrics> {
    let analyses = resolve_analyses(strategies, &opts.analyses)?;
    build_pool(opts.workers)?.install(|| run_scenario_in("s000", config, strategies, &analyses))
}

/// A base scenario and the factors swept around it. Empty lists keep the
/// base value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorGrid {
    pub base: ScenarioConfig,
    #[serde(default)]
    pub prevalence: Vec<f64>,
    #[serde(default)]
    pub signs_rate: Vec<f64>,
    /// Ascertainment target pairs as fractions.
    #[serde(default)]
    pub ascertainment: Vec<[f64; 2]>,
    /// (rho0, rho1) pairs.
    #[serde(default)]
    pub correlations: Vec<[f64; 2]>,
    #[serde(default)]
    pub transforms: Vec<TransformSpec>,
}

impl FactorGrid {
    pub fn single(base: ScenarioConfig) -> Self {
        Self {
            base,
            prevalence: vec![],
            signs_rate: vec![],
            ascertainment: vec![],
            correlations: vec![],
            transforms: vec![],
        }
    }

    pub fn len(&self) -> usize {
        [
            self.prevalence.len(),
            self.signs_rate.len(),
            self.ascertainment.len(),
            self.correlations.len(),
            self.transforms.len(),
        ]
        .iter()
        .map(|&n| n.max(1))
        .product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Every cell's scenario, prevalence varying slowest and transform
    /// fastest. Each cell gets its own seed derived from the base seed.
    pub fn cells(&self) -> Result<Vec<ScenarioConfig>> {
        fn or_base<T: Clone>(v: &[T], base: T) -> Vec<T> {
            if v.is_empty() {
                vec![base]
            } else {
                v.to_vec()
            }
        }
        let b = &self.base;
        let calibration = match &b.referral {
            Referral::Ascertainment { calibration, .. } => calibration.clone(),
            Referral::Thresholds { .. } => crate::calibrate::DEFAULT_CALIBRATION.to_string(),
        };
        let prevalences = or_base(&self.prevalence, b.prevalence);
        let signs = or_base(&self.signs_rate, b.signs_rate);
        let referrals: Vec<Referral> = if self.ascertainment.is_empty() {
            vec![b.referral.clone()]
        } else {
            self.ascertainment
                .iter()
                .map(|t| Referral::Ascertainment {
                    t1: t[0],
                    t2: t[1],
                    calibration: calibration.clone(),
                })
                .collect()
        };
        let correlations = or_base(
            &self.correlations,
            [b.noncase_params.rho(), b.case_params.rho()],
        );
        let transforms = or_base(&self.transforms, b.transform.clone());

        let mut out = Vec::with_capacity(self.len());
        for &prevalence in &prevalences {
            for &signs_rate in &signs {
                for referral in &referrals {
                    for &[rho0, rho1] in &correlations {
                        for transform in &transforms {
                            let idx = out.len() as u64;
                            let cfg = ScenarioConfig {
                                prevalence,
                                signs_rate,
                                referral: referral.clone(),
                                noncase_params: b.noncase_params.with_rho(rho0)?,
                                case_params: b.case_params.with_rho(rho1)?,
                                transform: transform.clone(),
                                seed: derive_seed(b.seed, idx),
                                ..b.clone()
                            };
                            cfg.validate()?;
                            out.push(cfg);
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// One metrics entry per grid cell, in `FactorGrid::cells` order.
pub fn run_grid(
    grid: &FactorGrid,
    strategies: &Strategies,
    opts: &RunOptions,
) -> Result<Vec<ScenarioMetrics>> {
    let cells = grid.cells()?;
    let analyses = resolve_analyses(strategies, &opts.analyses)?;
    // Fail fast on unresolvable cells before spending time on any of them.
    for c in &cells {
        TrialGenerator::new(c, strategies)?;
    }
    let pool = build_pool(opts.workers)?;
    pool.install(|| {
        cells
            .iter()
            .enumerate()
            .map(|(i, c)| run_scenario_in(&format!("s{i:03}"), c, strategies, &analyses))
            .collect()
    })
}

/// Non-case N(0, 1) on both tests, unit case variances, case means set from
/// the target AUCs.
pub fn standard_score_model(
    auc: [f64; 2],
    rho0: f64,
    rho1: f64,
) -> Result<(BivNormParams, BivNormParams)> {
    let noncase = BivNormParams::new(0.0, 0.0, 1.0, 1.0, rho0)?;
    let m = |a| auc_to_case_mean(a, ScoreMoments::new(0.0, 1.0), 1.0);
    let case = BivNormParams::new(m(auc[0])?, m(auc[1])?, 1.0, 1.0, rho1)?;
    Ok((case, noncase))
}
