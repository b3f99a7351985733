//! Experiment configuration: a TOML file with one section per stage,
//! overridden key by key from the command line.

use std::path::Path;

use gaitmag::logs::Modality;
use gaitmag::pipeline::{PreprocessConfig, SplitMode};
use gaitmag::simgait::{CohortConfig, NoiseSpec};
use gaitnet::{Architecture, CnnConfig, LstmConfig, ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::{CliError, Overrides};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub architecture: Architecture,
    pub cnn: CnnConfig,
    pub lstm: LstmConfig,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            architecture: Architecture::Lstm,
            cnn: CnnConfig::default(),
            lstm: LstmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub runs: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { runs: 8 }
    }
}

/// `seed` is the master seed; it replaces the cohort, shuffle and training
/// seeds of the nested sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub modality: Modality,
    pub simulate: CohortConfig,
    pub preprocess: PreprocessConfig,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub eval: EvalSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            modality: Modality::Magnetic,
            simulate: CohortConfig::default(),
            preprocess: PreprocessConfig::default(),
            model: ModelSection::default(),
            train: TrainConfig::default(),
            eval: EvalSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>, flags: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
                toml::from_str(&text)
                    .map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?
            }
            None => ExperimentConfig::default(),
        };
        cfg.apply(flags);
        cfg.resolve_seeds();
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, f: &Overrides) {
        macro_rules! set {
            ($flag:expr, $target:expr) => {
                if let Some(v) = $flag.clone() {
                    $target = v;
                }
            };
        }
        set!(f.seed, self.seed);
        set!(f.modality, self.modality);
        set!(f.subjects, self.simulate.n_subjects);
        set!(f.recordings, self.simulate.recordings_per_activity);
        set!(f.duration, self.simulate.duration_s);
        set!(f.rate, self.simulate.rate_hz);
        set!(f.weight_effect, self.simulate.weight_effect);
        set!(f.window_len, self.preprocess.window_len);
        set!(f.arch, self.model.architecture);
        set!(f.epochs, self.train.epochs);
        set!(f.batch_size, self.train.batch_size);
        set!(f.lr, self.train.learning_rate);
        set!(f.runs, self.eval.runs);
        if f.noiseless {
            self.simulate.noise = NoiseSpec::none();
        }
        if f.lowpass_imu {
            self.preprocess.lowpass_imu = true;
        }
        if f.split_by_subject {
            self.preprocess.split.mode = SplitMode::BySubject;
        }
    }

    fn resolve_seeds(&mut self) {
        self.simulate.master_seed = self.seed;
        self.preprocess.split.shuffle_seed = self.seed;
        self.train.seed = self.seed;
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let v = |e: String| CliError::Validation(e);
        if self.seed > i64::MAX as u64 {
            return Err(v(format!("seed {} exceeds {}", self.seed, i64::MAX)));
        }
        self.simulate.validate().map_err(|e| v(e.to_string()))?;
        self.preprocess.validate().map_err(|e| v(e.to_string()))?;
        self.train.validate().map_err(|e| v(e.to_string()))?;
        let n_features = gaitmag::pipeline::feature_names(self.modality).len();
        self.model_config(n_features)
            .validate()
            .map_err(|e| v(e.to_string()))?;
        if self.eval.runs < 2 {
            return Err(v("eval.runs must be at least 2".into()));
        }
        Ok(())
    }

    pub fn model_config(&self, n_features: usize) -> ModelConfig {
        ModelConfig {
            cnn: self.model.cnn.clone(),
            lstm: self.model.lstm.clone(),
            ..ModelConfig::new(
                self.model.architecture,
                self.preprocess.window_len,
                n_features,
            )
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises to TOML")
    }
}
