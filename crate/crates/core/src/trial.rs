//! Paired screening trial data: configuration, participant records and the
//! generator that turns a scenario into one simulated trial.

use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analysis::TestSettings;
use crate::error::{Error, Result};
use crate::gauss::BivNormParams;
use crate::registry::Strategies;
use crate::rng::{self, Purpose, SimRng};
use crate::roc::VarianceModel;
use crate::transform::{ScoreTransform, TransformContext, TransformSpec};

pub const DEFAULT_ALPHA: f64 = 0.05;

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_calibration() -> String {
    crate::calibrate::DEFAULT_CALIBRATION.to_string()
}

/// How the referral thresholds of suspicion are obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Referral {
    /// Raw score thresholds.
    Thresholds { a1: f64, a2: f64 },
    /// Percent-ascertainment targets as fractions, resolved by a named
    /// calibration strategy.
    Ascertainment {
        t1: f64,
        t2: f64,
        #[serde(default = "default_calibration")]
        calibration: String,
    },
}

/// A complete simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n: usize,
    pub prevalence: f64,
    pub signs_rate: f64,
    pub case_params: BivNormParams,
    pub noncase_params: BivNormParams,
    pub referral: Referral,
    #[serde(default)]
    pub transform: TransformSpec,
    pub reps: usize,
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Variance model of the AUC-difference test.
    #[serde(default)]
    pub variance: VarianceModel,
}

fn check_prob(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
    }
}

impl ScenarioConfig {
    pub fn test_settings(&self) -> TestSettings {
        TestSettings {
            alpha: self.alpha,
            variance: self.variance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if self.n > u32::MAX as usize {
            return Err(Error::Config(format!("n must not exceed {}", u32::MAX)));
        }
        check_prob("prevalence", self.prevalence)?;
        check_prob("signs_rate", self.signs_rate)?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.reps == 0 {
            return Err(Error::Config("reps must be positive".into()));
        }
        match &self.referral {
            Referral::Thresholds { a1, a2 } => {
                if a1.is_nan() || a2.is_nan() {
                    return Err(Error::Config("thresholds must not be NaN".into()));
                }
            }
            Referral::Ascertainment { t1, t2, .. } => {
                for (name, t) in [("t1", t1), ("t2", t2)] {
                    if !(*t > 0.0 && *t < 1.0) {
                        return Err(Error::Config(format!(
                            "ascertainment target {name} must lie in (0, 1), got {t}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Referral thresholds (a1, a2), calibrating ascertainment targets if needed.
    pub fn resolve_thresholds(&self, strategies: &Strategies) -> Result<[f64; 2]> {
        match &self.referral {
            Referral::Thresholds { a1, a2 } => Ok([*a1, *a2]),
            Referral::Ascertainment {
                t1,
                t2,
                calibration,
            } => strategies.calibrations.get(calibration)?.calibrate(
                &self.case_params,
                [*t1, *t2],
                self.signs_rate,
            ),
        }
    }

    /// Ascertainment targets, when the referral is given that way.
    pub fn targets(&self) -> Option<[f64; 2]> {
        match &self.referral {
            Referral::Ascertainment { t1, t2, .. } => Some([*t1, *t2]),
            Referral::Thresholds { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseClass {
    NonCase,
    ScreenDetected,
    Interval,
    Missed,
}

impl CaseClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaseClass::NonCase => "non_case",
            CaseClass::ScreenDetected => "screen_detected",
            CaseClass::Interval => "interval",
            CaseClass::Missed => "missed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "non_case" => Some(CaseClass::NonCase),
            "screen_detected" => Some(CaseClass::ScreenDetected),
            "interval" => Some(CaseClass::Interval),
            "missed" => Some(CaseClass::Missed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticipantRecord {
    pub id: u32,
    pub x: [f64; 2],
    pub true_case: bool,
    pub observed_case: bool,
    pub case_class: CaseClass,
    /// Signs-and-symptoms draw during follow-up; only meaningful for true cases.
    pub signs: bool,
}

/// Observed status and case class of one participant.
///
/// Non-cases are never observed as cases: the gold standard is taken as
/// perfectly specific, so any biopsy they receive is negative.
pub fn assign_observed_status(
    x: [f64; 2],
    true_case: bool,
    thresholds: [f64; 2],
    signs: bool,
) -> (bool, CaseClass) {
    if !true_case {
        return (false, CaseClass::NonCase);
    }
    if x[0] >= thresholds[0] || x[1] >= thresholds[1] {
        (true, CaseClass::ScreenDetected)
    } else if signs {
        (true, CaseClass::Interval)
    } else {
        (false, CaseClass::Missed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CaseCounts {
    pub participants: usize,
    pub true_cases: usize,
    pub observed_cases: usize,
    pub screen_detected: usize,
    pub interval: usize,
    pub missed: usize,
    pub non_cases: usize,
}

impl CaseCounts {
    pub fn from_records(records: &[ParticipantRecord]) -> Self {
        let mut c = CaseCounts {
            participants: records.len(),
            ..Default::default()
        };
        for r in records {
            c.true_cases += r.true_case as usize;
            c.observed_cases += r.observed_case as usize;
            match r.case_class {
                CaseClass::NonCase => c.non_cases += 1,
                CaseClass::ScreenDetected => c.screen_detected += 1,
                CaseClass::Interval => c.interval += 1,
                CaseClass::Missed => c.missed += 1,
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialDataset {
    pub records: Vec<ParticipantRecord>,
    pub thresholds: [f64; 2],
    pub counts: CaseCounts,
    /// False for ingested data that carries only observed status.
    pub true_status_known: bool,
}

impl TrialDataset {
    pub fn new(
        records: Vec<ParticipantRecord>,
        thresholds: [f64; 2],
        true_status_known: bool,
    ) -> Self {
        let counts = CaseCounts::from_records(&records);
        Self {
            records,
            thresholds,
            counts,
            true_status_known,
        }
    }

    /// Re-derive observed status and case class from scores, thresholds and
    /// the stored signs draws.
    pub fn reclassify(&mut self) {
        for r in &mut self.records {
            let (obs, class) = assign_observed_status(r.x, r.true_case, self.thresholds, r.signs);
            r.observed_case = obs;
            r.case_class = class;
        }
        self.counts = CaseCounts::from_records(&self.records);
    }

    pub fn observed_case_points(&self) -> Vec<[f64; 2]> {
        self.records
            .iter()
            .filter(|r| r.observed_case)
            .map(|r| r.x)
            .collect()
    }
}

/// Percent ascertainment of test `test` (0 or 1): 100 times the number of
/// cases scoring at or above the test's threshold over the number of
/// observed cases.
pub fn percent_ascertainment(data: &TrialDataset, test: usize) -> Result<f64> {
    let observed = data.counts.observed_cases;
    if observed == 0 {
        return Err(Error::NoObservedCases);
    }
    let above = data
        .records
        .iter()
        .filter(|r| r.observed_case && r.x[test] >= data.thresholds[test])
        .count();
    Ok(100.0 * above as f64 / observed as f64)
}

/// Draws trials for one scenario. Construction resolves thresholds and the
/// score transform once; each replication then only samples.
pub struct TrialGenerator {
    config: ScenarioConfig,
    thresholds: [f64; 2],
    transform: Box<dyn ScoreTransform>,
}

impl std::fmt::Debug for TrialGenerator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrialGenerator")
            .field("thresholds", &self.thresholds)
            .field("transform", &self.transform.label())
            .finish()
    }
}

impl TrialGenerator {
    pub fn new(config: &ScenarioConfig, strategies: &Strategies) -> Result<Self> {
        config.validate()?;
        let thresholds = config.resolve_thresholds(strategies)?;
        let ctx = TransformContext {
            case_params: config.case_params,
            noncase_params: config.noncase_params,
        };
        let transform = strategies
            .transforms
            .get(&config.transform.name)?
            .build(&config.transform.params, &ctx)?;
        Ok(Self {
            config: config.clone(),
            thresholds,
            transform,
        })
    }

    pub fn thresholds(&self) -> [f64; 2] {
        self.thresholds
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn transform_label(&self) -> String {
        self.transform.label()
    }

    /// Replication `rep`, reproducible from (seed, rep) alone.
    pub fn draw(&self, rep: u64) -> TrialDataset {
        let mut scores = rng::stream(self.config.seed, rep, Purpose::Scores);
        let mut extra = rng::stream(self.config.seed, rep, Purpose::Transform);
        self.draw_with(&mut scores, &mut extra)
    }

    pub fn draw_with(&self, scores: &mut SimRng, transform_rng: &mut SimRng) -> TrialDataset {
        let cfg = &self.config;
        let cases = if cfg.prevalence <= 0.0 {
            0
        } else if cfg.prevalence >= 1.0 {
            cfg.n
        } else {
            Binomial::new(cfg.n as u64, cfg.prevalence)
                .expect("validated probability")
                .sample(scores) as usize
        };
        let mut records = Vec::with_capacity(cfg.n);
        let case_draw = Sampler::new(&cfg.case_params);
        let noncase_draw = Sampler::new(&cfg.noncase_params);
        for i in 0..cfg.n {
            let true_case = i < cases;
            let x = if true_case {
                case_draw.sample(scores)
            } else {
                noncase_draw.sample(scores)
            };
            let signs = true_case && scores.random::<f64>() < cfg.signs_rate;
            records.push(ParticipantRecord {
                id: i as u32,
                x,
                true_case,
                observed_case: false,
                case_class: CaseClass::NonCase,
                signs,
            });
        }
        self.transform.apply(&mut records, transform_rng);
        let mut data = TrialDataset::new(records, self.thresholds, true);
        data.reclassify();
        data
    }
}

/// One trial for `config`, drawing from `rng` (transform draws follow the
/// score draws on the same stream).
pub fn draw_trial(config: &ScenarioConfig, rng: &mut SimRng) -> Result<TrialDataset> {
    let gen = TrialGenerator::new(config, Strategies::builtin())?;
    let mut transform_rng = rng.clone();
    let data = gen.draw_with(rng, &mut transform_rng);
    Ok(data)
}

struct Sampler {
    mu: [f64; 2],
    sd: [f64; 2],
    rho: f64,
    rho_c: f64,
}

impl Sampler {
    fn new(p: &BivNormParams) -> Self {
        Self {
            mu: [p.mu1(), p.mu2()],
            sd: [p.sd(0), p.sd(1)],
            rho: p.rho(),
            rho_c: (1.0 - p.rho() * p.rho()).sqrt(),
        }
    }

    #[inline]
    fn sample(&self, rng: &mut SimRng) -> [f64; 2] {
        let z1: f64 = StandardNormal.sample(rng);
        let z2: f64 = StandardNormal.sample(rng);
        [
            self.mu[0] + self.sd[0] * z1,
            self.mu[1] + self.sd[1] * (self.rho * z1 + self.rho_c * z2),
        ]
    }
}
