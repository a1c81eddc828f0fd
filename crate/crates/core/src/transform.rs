//! Score transforms applied to simulated scores before observed status is
//! assigned: identity, correlated zero inflation, and binning to bin midpoints.

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::gauss::BivNormParams;
use crate::rng::SimRng;
use crate::trial::{ParticipantRecord, TrialDataset};

/// Named transform plus its strategy-specific parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub params: Value,
}

impl Default for TransformSpec {
    fn default() -> Self {
        Self {
            name: "gaussian".into(),
            params: Value::Null,
        }
    }
}

impl TransformSpec {
    pub fn new(name: &str, params: Value) -> Self {
        Self {
            name: name.into(),
            params,
        }
    }
}

pub struct TransformContext {
    pub case_params: BivNormParams,
    pub noncase_params: BivNormParams,
}

pub trait ScoreTransform: Send + Sync {
    /// Short description used in reports, e.g. `binned(0.5)`.
    fn label(&self) -> String;
    fn apply(&self, records: &mut [ParticipantRecord], rng: &mut SimRng);
}

pub trait TransformFactory: Send + Sync {
    fn build(&self, params: &Value, ctx: &TransformContext) -> Result<Box<dyn ScoreTransform>>;
}

fn parse_params<T: for<'de> Deserialize<'de>>(name: &str, params: &Value) -> Result<T> {
    serde_json::from_value(params.clone())
        .map_err(|e| Error::Config(format!("transform `{name}` parameters: {e}")))
}

pub struct Identity;

impl ScoreTransform for Identity {
    fn label(&self) -> String {
        "gaussian".into()
    }
    fn apply(&self, _records: &mut [ParticipantRecord], _rng: &mut SimRng) {}
}

pub struct GaussianFactory;

impl TransformFactory for GaussianFactory {
    fn build(&self, params: &Value, _ctx: &TransformContext) -> Result<Box<dyn ScoreTransform>> {
        match params {
            Value::Null => Ok(Box::new(Identity)),
            Value::Object(m) if m.is_empty() => Ok(Box::new(Identity)),
            _ => Err(Error::Config(
                "transform `gaussian` takes no parameters".into(),
            )),
        }
    }
}

/// Joint zero probabilities for one disease class: P(test 1 zero) = p1,
/// P(test 2 zero) = p2, P(both zero) = q.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeroCell {
    pub p1: f64,
    pub p2: f64,
    /// Defaults to the midpoint of the admissible interval for q.
    #[serde(default)]
    pub q: Option<f64>,
}

impl ZeroCell {
    pub fn new(p1: f64, p2: f64, q: Option<f64>) -> Result<Self> {
        let cell = Self { p1, p2, q };
        cell.joint()?;
        Ok(cell)
    }

    /// Admissible range of q given the marginals.
    pub fn frechet_bounds(p1: f64, p2: f64) -> (f64, f64) {
        ((p1 + p2 - 1.0).max(0.0), p1.min(p2))
    }

    /// q under the median-agreement rule.
    pub fn median_q(p1: f64, p2: f64) -> f64 {
        let (lo, hi) = Self::frechet_bounds(p1, p2);
        0.5 * (lo + hi)
    }

    /// Cell probabilities (both zero, only test 1 zero, only test 2 zero).
    pub fn joint(&self) -> Result<(f64, f64, f64)> {
        for (n, p) in [("p1", self.p1), ("p2", self.p2)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!(
                    "zero probability {n} must lie in [0, 1], got {p}"
                )));
            }
        }
        let q = self.q.unwrap_or_else(|| Self::median_q(self.p1, self.p2));
        let cells = [q, self.p1 - q, self.p2 - q, 1.0 - self.p1 - self.p2 + q];
        if cells.iter().any(|c| *c < -1e-12) || q.is_nan() {
            let (lo, hi) = Self::frechet_bounds(self.p1, self.p2);
            return Err(Error::Config(format!(
                "joint zero probability q = {q} outside its admissible range [{lo}, {hi}] for p1 = {}, p2 = {}",
                self.p1, self.p2
            )));
        }
        Ok((q, (self.p1 - q).max(0.0), (self.p2 - q).max(0.0)))
    }

    fn draw(&self, rng: &mut SimRng) -> [bool; 2] {
        let (both, only1, only2) = self.joint().expect("validated on construction");
        let u: f64 = rng.random();
        if u < both {
            [true, true]
        } else if u < both + only1 {
            [true, false]
        } else if u < both + only1 + only2 {
            [false, true]
        } else {
            [false, false]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeroWeighting {
    pub noncase: ZeroCell,
    pub case: ZeroCell,
}

impl ScoreTransform for ZeroWeighting {
    fn label(&self) -> String {
        format!(
            "zero_weighted({}/{}|{}/{})",
            self.noncase.p1, self.noncase.p2, self.case.p1, self.case.p2
        )
    }

    fn apply(&self, records: &mut [ParticipantRecord], rng: &mut SimRng) {
        for r in records {
            let cell = if r.true_case {
                &self.case
            } else {
                &self.noncase
            };
            let zero = cell.draw(rng);
            for (x, z) in r.x.iter_mut().zip(zero) {
                if z {
                    *x = 0.0;
                }
            }
        }
    }
}

pub struct ZeroWeightingFactory;

impl TransformFactory for ZeroWeightingFactory {
    fn build(&self, params: &Value, _ctx: &TransformContext) -> Result<Box<dyn ScoreTransform>> {
        let zw: ZeroWeighting = parse_params("zero_weighted", params)?;
        zw.noncase.joint()?;
        zw.case.joint()?;
        Ok(Box::new(zw))
    }
}

/// Replace each score by the midpoint of its bin; bins are anchored at 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Binning {
    pub width_multiplier: f64,
    pub widths: [f64; 2],
}

impl Binning {
    pub fn new(width_multiplier: f64, case_vars: [f64; 2]) -> Result<Self> {
        if !(width_multiplier > 0.0 && width_multiplier.is_finite()) {
            return Err(Error::Config(format!(
                "bin width multiplier must be positive, got {width_multiplier}"
            )));
        }
        Ok(Self {
            width_multiplier,
            widths: [
                width_multiplier * case_vars[0],
                width_multiplier * case_vars[1],
            ],
        })
    }

    #[inline]
    pub fn bin(&self, x: f64, test: usize) -> f64 {
        let w = self.widths[test];
        ((x / w).floor() + 0.5) * w
    }
}

impl ScoreTransform for Binning {
    fn label(&self) -> String {
        format!("binned({})", self.width_multiplier)
    }

    fn apply(&self, records: &mut [ParticipantRecord], _rng: &mut SimRng) {
        for r in records {
            for j in 0..2 {
                r.x[j] = self.bin(r.x[j], j);
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BinningParams {
    width_multiplier: f64,
}

pub struct BinningFactory;

impl TransformFactory for BinningFactory {
    fn build(&self, params: &Value, ctx: &TransformContext) -> Result<Box<dyn ScoreTransform>> {
        let p: BinningParams = parse_params("binned", params)?;
        Ok(Box::new(Binning::new(
            p.width_multiplier,
            [ctx.case_params.var1(), ctx.case_params.var2()],
        )?))
    }
}

/// Zero-inflate a dataset's scores by class, then re-derive observed status.
pub fn apply_zero_weighting(
    data: &TrialDataset,
    noncase: ZeroCell,
    case: ZeroCell,
    rng: &mut SimRng,
) -> Result<TrialDataset> {
    noncase.joint()?;
    case.joint()?;
    let mut out = data.clone();
    ZeroWeighting { noncase, case }.apply(&mut out.records, rng);
    out.reclassify();
    Ok(out)
}

/// Bin a dataset's scores (width = multiplier x case variance of each test),
/// then re-derive observed status.
pub fn apply_binning(
    data: &TrialDataset,
    width_multiplier: f64,
    case_vars: [f64; 2],
) -> Result<TrialDataset> {
    let binning = Binning::new(width_multiplier, case_vars)?;
    let mut out = data.clone();
    for r in &mut out.records {
        for j in 0..2 {
            r.x[j] = binning.bin(r.x[j], j);
        }
    }
    out.reclassify();
    Ok(out)
}
