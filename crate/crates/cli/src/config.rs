//! JSON run configuration.

use std::path::{Path, PathBuf};

use pairscreen::gauss::BivNormParams;
use pairscreen::harness::{standard_score_model, FactorGrid};
use pairscreen::registry::Strategies;
use pairscreen::roc::VarianceModel;
use pairscreen::transform::TransformSpec;
use pairscreen::trial::{Referral, ScenarioConfig, DEFAULT_ALPHA};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_rho() -> f64 {
    0.3
}

fn default_analyses() -> Vec<String> {
    vec!["true".into(), "observed".into(), "corrected".into()]
}

fn default_true() -> bool {
    true
}

/// Score distributions, either by target AUCs or explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ScoreSpec {
    /// Non-case scores N(0, 1), unit case variances, case means giving the
    /// target AUCs.
    Auc {
        auc1: f64,
        auc2: f64,
        #[serde(default = "default_rho")]
        rho0: f64,
        #[serde(default = "default_rho")]
        rho1: f64,
    },
    Params {
        case: BivNormParams,
        noncase: BivNormParams,
    },
}

impl ScoreSpec {
    pub fn params(&self) -> CliResult<(BivNormParams, BivNormParams)> {
        match self {
            ScoreSpec::Auc {
                auc1,
                auc2,
                rho0,
                rho1,
            } => {
                for (name, a) in [("auc1", auc1), ("auc2", auc2)] {
                    if !(*a > 0.0 && *a < 1.0) {
                        return Err(CliError::Config(format!(
                            "scores.auc.{name} must lie in (0, 1), got {a}"
                        )));
                    }
                }
                Ok(standard_score_model([*auc1, *auc2], *rho0, *rho1)?)
            }
            ScoreSpec::Params { case, noncase } => Ok((*case, *noncase)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub n: usize,
    pub prevalence: f64,
    pub signs_rate: f64,
    pub scores: ScoreSpec,
    pub referral: Referral,
    #[serde(default)]
    pub transform: TransformSpec,
    pub reps: usize,
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub variance: VarianceModel,
}

impl ScenarioSpec {
    pub fn to_config(&self) -> CliResult<ScenarioConfig> {
        let (case_params, noncase_params) = self.scores.params()?;
        Ok(ScenarioConfig {
            n: self.n,
            prevalence: self.prevalence,
            signs_rate: self.signs_rate,
            case_params,
            noncase_params,
            referral: self.referral.clone(),
            transform: self.transform.clone(),
            reps: self.reps,
            seed: self.seed,
            alpha: self.alpha,
            variance: self.variance,
        })
    }
}

/// Factors swept around the base scenario; empty lists keep the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    #[serde(default)]
    pub prevalence: Vec<f64>,
    #[serde(default)]
    pub signs_rate: Vec<f64>,
    #[serde(default)]
    pub ascertainment: Vec<[f64; 2]>,
    #[serde(default)]
    pub correlations: Vec<[f64; 2]>,
    #[serde(default)]
    pub transforms: Vec<TransformSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub charts: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: None,
            charts: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub scenario: ScenarioSpec,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default = "default_analyses")]
    pub analyses: Vec<String>,
    #[serde(default)]
    pub output: OutputSpec,
    /// Worker threads; 0 or absent uses every core.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl RunConfigFile {
    pub fn parse(text: &str, origin: &str) -> CliResult<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
        cfg.validate()
            .map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Checks every probability and strategy name by building each grid cell.
    pub fn validate(&self) -> CliResult<()> {
        let strategies = Strategies::builtin();
        for name in &self.analyses {
            strategies.analyses.get(name)?;
        }
        for p in self.sweep.prevalence.iter().chain(&self.sweep.signs_rate) {
            if !(0.0..=1.0).contains(p) {
                return Err(CliError::Config(format!(
                    "swept probability {p} is outside [0, 1]"
                )));
            }
        }
        for c in self.grid()?.cells()? {
            c.validate()?;
            pairscreen::trial::TrialGenerator::new(&c, strategies)?;
        }
        Ok(())
    }

    pub fn grid(&self) -> CliResult<FactorGrid> {
        Ok(FactorGrid {
            base: self.scenario.to_config()?,
            prevalence: self.sweep.prevalence.clone(),
            signs_rate: self.sweep.signs_rate.clone(),
            ascertainment: self.sweep.ascertainment.clone(),
            correlations: self.sweep.correlations.clone(),
            transforms: self.sweep.transforms.clone(),
        })
    }
}

/// Swept factors in grid order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    Prevalence,
    SignsRate,
    Ascertainment,
    Correlations,
    Transforms,
}

impl Factor {
    pub const ALL: [Factor; 5] = [
        Factor::Prevalence,
        Factor::SignsRate,
        Factor::Ascertainment,
        Factor::Correlations,
        Factor::Transforms,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Factor::Prevalence => "prevalence",
            Factor::SignsRate => "rate of signs and symptoms",
            Factor::Ascertainment => "ascertainment targets",
            Factor::Correlations => "correlations (rho0/rho1)",
            Factor::Transforms => "score transform",
        }
    }

    pub fn levels(&self, sweep: &Sweep) -> usize {
        match self {
            Factor::Prevalence => sweep.prevalence.len(),
            Factor::SignsRate => sweep.signs_rate.len(),
            Factor::Ascertainment => sweep.ascertainment.len(),
            Factor::Correlations => sweep.correlations.len(),
            Factor::Transforms => sweep.transforms.len(),
        }
    }
}

/// Referral by ascertainment targets with the default calibration.
pub fn ascertainment(t1: f64, t2: f64) -> Referral {
    Referral::Ascertainment {
        t1,
        t2,
        calibration: pairscreen::calibrate::DEFAULT_CALIBRATION.to_string(),
    }
}
