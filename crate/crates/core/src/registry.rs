//! Named strategy registries.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use crate::analysis::{
    Analysis, CorrectedAnalysis, CorrectedCaseCount, ObservedAnalysis, TrueAnalysis,
};
use crate::calibrate::{MarginalCalibration, ObservedCalibration, ThresholdCalibration};
use crate::error::{Error, Result};
use crate::transform::{BinningFactory, GaussianFactory, TransformFactory, ZeroWeightingFactory};

pub struct Registry<T: ?Sized> {
    family: &'static str,
    entries: BTreeMap<String, Arc<T>>,
}

impl<T: ?Sized> Clone for Registry<T> {
    fn clone(&self) -> Self {
        Self {
            family: self.family,
            entries: self.entries.clone(),
        }
    }
}

impl<T: ?Sized> Registry<T> {
    pub fn new(family: &'static str) -> Self {
        Self {
            family,
            entries: BTreeMap::new(),
        }
    }

    /// Adds or replaces the entry under `name`.
    pub fn register(&mut self, name: &str, entry: Arc<T>) {
        self.entries.insert(name.to_string(), entry);
    }

    pub fn get(&self, name: &str) -> Result<Arc<T>> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownStrategy {
                family: self.family,
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }
}

#[derive(Clone)]
pub struct Strategies {
    pub transforms: Registry<dyn TransformFactory>,
    pub calibrations: Registry<dyn ThresholdCalibration>,
    pub analyses: Registry<dyn Analysis>,
}

impl Strategies {
    pub fn empty() -> Self {
        Self {
            transforms: Registry::new("transform"),
            calibrations: Registry::new("calibration"),
            analyses: Registry::new("analysis"),
        }
    }

    pub fn with_builtins() -> Self {
        let mut s = Self::empty();
        s.transforms.register("gaussian", Arc::new(GaussianFactory));
        s.transforms
            .register("zero_weighted", Arc::new(ZeroWeightingFactory));
        s.transforms.register("binned", Arc::new(BinningFactory));
        s.calibrations
            .register("marginal", Arc::new(MarginalCalibration));
        s.calibrations
            .register("observed", Arc::new(ObservedCalibration));
        s.analyses.register("true", Arc::new(TrueAnalysis));
        s.analyses.register("observed", Arc::new(ObservedAnalysis));
        s.analyses.register(
            "corrected",
            Arc::new(CorrectedAnalysis {
                case_count: CorrectedCaseCount::Observed,
            }),
        );
        s.analyses.register(
            "corrected_inflated",
            Arc::new(CorrectedAnalysis {
                case_count: CorrectedCaseCount::Inflated,
            }),
        );
        s
    }

    pub fn builtin() -> &'static Strategies {
        static BUILTIN: OnceLock<Strategies> = OnceLock::new();
        BUILTIN.get_or_init(Strategies::with_builtins)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_name_lists_alternatives() {
        match Strategies::builtin().transforms.get("lognormal") {
            Err(Error::UnknownStrategy {
                family,
                name,
                available,
            }) => {
                assert_eq!(family, "transform");
                assert_eq!(name, "lognormal");
                assert_eq!(available, "binned, gaussian, zero_weighted");
            }
            _ => panic!("expected an unknown-strategy error"),
        }
        assert!(Strategies::builtin().calibrations.contains("observed"));
    }
}
