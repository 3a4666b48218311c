//! The run configuration document: one JSON file drives bank generation,
//! dataset synthesis, training and evaluation. Unknown keys are rejected;
//! every field has a default.

use serde::{Deserialize, Serialize};

use super::train::{Strategy, StrategyConfig};
use super::PipelineError;
use crate::nn::{AdamParams, ConditioningMode};
use crate::util;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub n_classes: usize,
    pub clips_per_class: usize,
    pub train_per_class: usize,
    pub seed: u64,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            n_classes: 10,
            clips_per_class: 40,
            train_per_class: 30,
            seed: 11,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainBankSection {
    /// How many of the preset training rooms to use (1..=9).
    pub rooms: usize,
    pub rirs_per_room: usize,
    pub seed: u64,
}

impl Default for TrainBankSection {
    fn default() -> Self {
        Self {
            rooms: 9,
            rirs_per_room: 100,
            seed: 101,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TestBankSection {
    pub rirs_per_room: usize,
    pub seed: u64,
}

impl Default for TestBankSection {
    fn default() -> Self {
        Self {
            rirs_per_room: 12,
            seed: 202,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub channels: [usize; 4],
    pub fc_width: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            channels: [8, 16, 32, 32],
            fc_width: 512,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub clean_mix_prob: f64,
    /// conditioned | scale_only | bias_only (applies to Cndt).
    pub conditioning: String,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            batch_size: 64,
            max_epochs: 100,
            learning_rate: 1e-4,
            clean_mix_prob: 0.5,
            conditioning: "conditioned".to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Trial seeds; one full train/eval cycle per strategy per seed.
    pub seeds: Vec<u64>,
    pub strategies: Vec<String>,
    pub dataset: DatasetSection,
    pub train_bank: TrainBankSection,
    pub test_bank: TestBankSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub deconv_lambda: f64,
    pub eval_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seeds: vec![1, 2, 3],
            strategies: vec![
                "base".to_string(),
                "deconv".to_string(),
                "aug".to_string(),
                "cndt".to_string(),
            ],
            dataset: DatasetSection::default(),
            train_bank: TrainBankSection::default(),
            test_bank: TestBankSection::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            deconv_lambda: 1e-3,
            eval_seed: 303,
        }
    }
}

impl RunConfig {
    pub fn from_json(json: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(json).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Stable fingerprint of the effective configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        util::fingerprint(canonical.as_bytes())
    }

    pub fn parsed_strategies(&self) -> Result<Vec<Strategy>, PipelineError> {
        self.strategies.iter().map(|s| Strategy::parse(s)).collect()
    }

    pub fn conditioning_mode(&self) -> Result<ConditioningMode, PipelineError> {
        match self.train.conditioning.as_str() {
            "conditioned" => Ok(ConditioningMode::Conditioned),
            "scale_only" => Ok(ConditioningMode::ScaleOnly),
            "bias_only" => Ok(ConditioningMode::BiasOnly),
            other => Err(PipelineError::Config(format!(
                "unknown conditioning mode `{other}`"
            ))),
        }
    }

    pub fn strategy_config(
        &self,
        strategy: Strategy,
        seed: u64,
    ) -> Result<StrategyConfig, PipelineError> {
        Ok(StrategyConfig {
            strategy,
            conditioning_mode: self.conditioning_mode()?,
            clean_mix_prob: self.train.clean_mix_prob,
            batch_size: self.train.batch_size,
            max_epochs: self.train.max_epochs,
            adam: AdamParams {
                lr: self.train.learning_rate,
                ..AdamParams::default()
            },
            channels: self.model.channels,
            fc_width: self.model.fc_width,
            seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_hash_stably() {
        let cfg = RunConfig::default();
        let json = cfg.to_json();
        let back = RunConfig::from_json(&json).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_json(r#"{ "surprise": 1 }"#).unwrap_err();
        assert!(matches!(err, PipelineError::Config(_)));
        let nested = RunConfig::from_json(r#"{ "train": { "warmup": 5 } }"#);
        assert!(nested.is_err());
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = RunConfig::from_json(r#"{ "seeds": [9], "train": { "max_epochs": 5 } }"#).unwrap();
        assert_eq!(cfg.seeds, vec![9]);
        assert_eq!(cfg.train.max_epochs, 5);
        assert_eq!(cfg.train.batch_size, 64);
        assert_eq!(cfg.dataset.n_classes, 10);
    }

    #[test]
    fn strategy_and_mode_parsing() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.parsed_strategies().unwrap().len(), 4);
        let mut bad = RunConfig::default();
        bad.strategies = vec!["warp".into()];
        assert!(matches!(
            bad.parsed_strategies(),
            Err(PipelineError::UnknownStrategy(_))
        ));
        bad.train.conditioning = "psychic".into();
        assert!(bad.conditioning_mode().is_err());
    }
}
