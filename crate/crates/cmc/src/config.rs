use std::path::Path;

use serde::{Deserialize, Serialize};

use cmc_core::Mode;

use crate::error::{Error, Result, Stage};
use crate::format::load_json;

/// Every tunable of the pipeline. Missing JSON fields take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Watershed seeds are components of pixels with boundary below this.
    pub seed_threshold: f64,
    /// Deepest merge chain of a candidate.
    pub max_merges: u32,
    /// Optional cap on the merge scores inside a candidate.
    pub score_threshold: Option<f64>,
    pub n_trees: usize,
    pub rng_seed: u64,
    #[serde(with = "mode_name")]
    pub mode: Mode,
    pub ignore_background: bool,
    /// Seconds.
    pub time_limit: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed_threshold: 0.3,
            max_merges: 5,
            score_threshold: None,
            n_trees: 32,
            rng_seed: 42,
            mode: Mode::Full,
            ignore_background: true,
            time_limit: 300.0,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let config: PipelineConfig = load_json(path, Stage::Config)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::invalid(Stage::Config, m));
        if !(0.0..=1.0).contains(&self.seed_threshold) {
            return fail(format!(
                "seed_threshold must be in [0, 1], got {}",
                self.seed_threshold
            ));
        }
        if let Some(t) = self.score_threshold {
            if !(t.is_finite() && t >= 0.0) {
                return fail(format!(
                    "score_threshold must be finite and non-negative, got {t}"
                ));
            }
        }
        if self.n_trees == 0 {
            return fail("n_trees must be at least 1".into());
        }
        if self.time_limit.is_nan() || self.time_limit <= 0.0 {
            return fail(format!(
                "time_limit must be positive, got {}",
                self.time_limit
            ));
        }
        Ok(())
    }
}

mod mode_name {
    use cmc_core::Mode;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(mode: &Mode, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(mode.as_str())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mode, D::Error> {
        let name = String::deserialize(d)?;
        name.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_defaults() {
        let config = PipelineConfig {
            mode: Mode::LeafMulticutOnly,
            score_threshold: Some(2.5),
            ..Default::default()
        };
        let text = serde_json::to_string(&config).unwrap();
        assert!(text.contains("\"mode\":\"mc\""));
        assert_eq!(
            serde_json::from_str::<PipelineConfig>(&text).unwrap(),
            config
        );
        let partial: PipelineConfig =
            serde_json::from_str(r#"{"max_merges": 2, "mode": "mt"}"#).unwrap();
        assert_eq!(partial.max_merges, 2);
        assert_eq!(partial.mode, Mode::MergeTreeOnly);
        assert_eq!(partial.n_trees, PipelineConfig::default().n_trees);
    }

    #[test]
    fn validation() {
        assert!(PipelineConfig::default().validate().is_ok());
        for bad in [
            PipelineConfig {
                seed_threshold: 1.5,
                ..Default::default()
            },
            PipelineConfig {
                score_threshold: Some(-1.0),
                ..Default::default()
            },
            PipelineConfig {
                n_trees: 0,
                ..Default::default()
            },
            PipelineConfig {
                time_limit: 0.0,
                ..Default::default()
            },
            PipelineConfig {
                time_limit: f64::NAN,
                ..Default::default()
            },
        ] {
            assert_eq!(bad.validate().unwrap_err().stage(), Stage::Config);
        }
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"mode": "best"}"#).is_err());
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"trees": 3}"#).is_err());
    }
}
