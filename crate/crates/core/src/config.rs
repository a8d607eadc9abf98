//! Run configuration.
//!
//! A flat `key = value` text document with `#` comments. Every key has a
//! default (the paper-like desk-scale setup); unknown keys are errors. The
//! fixed VAE/OC-SVM configuration is the reported best-found setup and is
//! what the fast path trains; hyperparameter search runs only when a trial
//! budget is requested.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model_selection::{KernelFamily, SearchStrategy};
use crate::neural::{Activation, OptimizerKind};
use crate::scoring::KlMode;
use crate::signals::SplitPlan;
use crate::synth::{DamageScenario, ExcitationSpec, StructuralModel};
use crate::vae::{TrainConfig, VaeArchitecture};

/// Complete run configuration with paper-like defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Frame length `s`.
    pub frame_len: usize,
    /// Master seed for splits, initialization and excitation.
    pub split_seed: u64,
    pub kfold_k: usize,
    pub holdout_fraction: f64,
    /// Search budgets, used only when a search is requested.
    pub vae_trials: usize,
    pub ocsvm_trials: usize,
    pub strategy: SearchStrategy,
    // Fixed (fast-path) autoencoder configuration.
    pub vae_hidden_layers: usize,
    pub vae_hidden_neurons: usize,
    pub vae_activation: Activation,
    pub vae_latent_dim: usize,
    pub vae_optimizer: OptimizerKind,
    pub vae_learning_rate: f64,
    pub vae_max_epochs: usize,
    pub vae_patience: usize,
    pub vae_beta: f64,
    pub vae_batch_size: usize,
    // Fixed one-class SVM configuration.
    pub ocsvm_nu: f64,
    pub ocsvm_kernel: KernelFamily,
    pub ocsvm_poly_order: u32,
    pub ocsvm_tol: f64,
    // Synthetic structure and excitation.
    pub story_masses: Vec<f64>,
    pub story_stiffnesses: Vec<f64>,
    pub damping_ratio: f64,
    pub sampling_rate_hz: f64,
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    /// Recording duration per case, one entry per scenario.
    pub case_durations_s: Vec<f64>,
    pub snr_db: f64,
    /// 1-based story the shaker force acts on.
    pub force_story: usize,
    /// Damage ladder; scenario 1 is always undamaged.
    pub scenarios: Vec<DamageScenario>,
    // FDD baseline parameters.
    pub fdd_nfft: usize,
    pub fdd_overlap: f64,
    pub fdd_min_prominence_db: f64,
    /// Number of modes reported in the frequency table.
    pub fdd_max_modes: usize,
    pub kl_mode: KlMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            frame_len: 128,
            split_seed: 42,
            kfold_k: 10,
            holdout_fraction: 0.2,
            vae_trials: 100,
            ocsvm_trials: 50,
            strategy: SearchStrategy::Random,
            vae_hidden_layers: 1,
            vae_hidden_neurons: 60,
            vae_activation: Activation::Sigmoid,
            vae_latent_dim: 20,
            vae_optimizer: OptimizerKind::Adam,
            vae_learning_rate: 1e-3,
            vae_max_epochs: 1000,
            vae_patience: 50,
            vae_beta: 0.002,
            vae_batch_size: 32,
            ocsvm_nu: 1e-3,
            ocsvm_kernel: KernelFamily::Rbf,
            ocsvm_poly_order: 3,
            ocsvm_tol: 1e-6,
            story_masses: vec![1000.0, 1000.0, 1000.0, 750.0],
            story_stiffnesses: vec![2.4e7; 4],
            damping_ratio: 0.0015,
            sampling_rate_hz: 200.0,
            band_low_hz: 5.0,
            band_high_hz: 50.0,
            case_durations_s: vec![120.0, 120.0, 120.0, 120.0, 120.0, 300.0, 360.0, 360.0, 360.0],
            snr_db: 40.0,
            force_story: 4,
            scenarios: crate::synth::default_scenarios(),
            fdd_nfft: 1024,
            fdd_overlap: 0.5,
            fdd_min_prominence_db: 6.0,
            fdd_max_modes: 2,
            kl_mode: KlMode::CaseToUndamaged,
        }
    }
}

fn join_floats(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_float_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|field| {
            field
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{key}: {field:?} is not a number")))
        })
        .collect()
}

fn parse_scalar<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

impl RunConfig {
    /// Parse a config document on top of the defaults. Unknown keys are
    /// errors; omitted keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = RunConfig::default();
        let mut scenario_overrides: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        for (line_idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got {raw:?}", line_idx + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "frame_len" => config.frame_len = parse_scalar(key, value)?,
                "split_seed" => config.split_seed = parse_scalar(key, value)?,
                "kfold_k" => config.kfold_k = parse_scalar(key, value)?,
                "holdout_fraction" => config.holdout_fraction = parse_scalar(key, value)?,
                "vae_trials" => config.vae_trials = parse_scalar(key, value)?,
                "ocsvm_trials" => config.ocsvm_trials = parse_scalar(key, value)?,
                "strategy" => config.strategy = SearchStrategy::from_name(value)?,
                "vae_hidden_layers" => config.vae_hidden_layers = parse_scalar(key, value)?,
                "vae_hidden_neurons" => config.vae_hidden_neurons = parse_scalar(key, value)?,
                "vae_activation" => config.vae_activation = Activation::from_name(value)?,
                "vae_latent_dim" => config.vae_latent_dim = parse_scalar(key, value)?,
                "vae_optimizer" => config.vae_optimizer = OptimizerKind::from_name(value)?,
                "vae_learning_rate" => config.vae_learning_rate = parse_scalar(key, value)?,
                "vae_max_epochs" => config.vae_max_epochs = parse_scalar(key, value)?,
                "vae_patience" => config.vae_patience = parse_scalar(key, value)?,
                "vae_beta" => config.vae_beta = parse_scalar(key, value)?,
                "vae_batch_size" => config.vae_batch_size = parse_scalar(key, value)?,
                "ocsvm_nu" => config.ocsvm_nu = parse_scalar(key, value)?,
                "ocsvm_kernel" => config.ocsvm_kernel = KernelFamily::from_name(value)?,
                "ocsvm_poly_order" => config.ocsvm_poly_order = parse_scalar(key, value)?,
                "ocsvm_tol" => config.ocsvm_tol = parse_scalar(key, value)?,
                "story_masses" => config.story_masses = parse_float_list(key, value)?,
                "story_stiffnesses" => config.story_stiffnesses = parse_float_list(key, value)?,
                "damping_ratio" => config.damping_ratio = parse_scalar(key, value)?,
                "sampling_rate_hz" => config.sampling_rate_hz = parse_scalar(key, value)?,
                "band_low_hz" => config.band_low_hz = parse_scalar(key, value)?,
                "band_high_hz" => config.band_high_hz = parse_scalar(key, value)?,
                "case_durations_s" => config.case_durations_s = parse_float_list(key, value)?,
                "snr_db" => config.snr_db = parse_scalar(key, value)?,
                "force_story" => config.force_story = parse_scalar(key, value)?,
                "fdd_nfft" => config.fdd_nfft = parse_scalar(key, value)?,
                "fdd_overlap" => config.fdd_overlap = parse_scalar(key, value)?,
                "fdd_min_prominence_db" => config.fdd_min_prominence_db = parse_scalar(key, value)?,
                "fdd_max_modes" => config.fdd_max_modes = parse_scalar(key, value)?,
                "kl_mode" => config.kl_mode = KlMode::from_name(value)?,
                _ if key.starts_with("scenario_") => {
                    let id: u32 = key["scenario_".len()..]
                        .parse()
                        .map_err(|_| Error::Config(format!("bad scenario key {key:?}")))?;
                    if id < 2 {
                        return Err(Error::Config("scenario_1 is always undamaged and cannot be overridden".to_string()));
                    }
                    scenario_overrides.insert(id, parse_float_list(key, value)?);
                }
                other => return Err(Error::Config(format!("unknown key {other:?}"))),
            }
        }
        for (id, multipliers) in scenario_overrides {
            let scenario = DamageScenario::new(id, multipliers)?;
            match config.scenarios.iter_mut().find(|s| s.scenario_id == id) {
                Some(slot) => *slot = scenario,
                None => config.scenarios.push(scenario),
            }
        }
        config.scenarios.sort_by_key(|s| s.scenario_id);
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical text rendering; `parse(to_text())` reproduces the config
    /// exactly (floats use the shortest round-trip representation).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut push = |key: &str, value: String| {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&value);
            out.push('\n');
        };
        push("frame_len", self.frame_len.to_string());
        push("split_seed", self.split_seed.to_string());
        push("kfold_k", self.kfold_k.to_string());
        push("holdout_fraction", self.holdout_fraction.to_string());
        push("vae_trials", self.vae_trials.to_string());
        push("ocsvm_trials", self.ocsvm_trials.to_string());
        push("strategy", self.strategy.name().to_string());
        push("vae_hidden_layers", self.vae_hidden_layers.to_string());
        push("vae_hidden_neurons", self.vae_hidden_neurons.to_string());
        push("vae_activation", self.vae_activation.name().to_string());
        push("vae_latent_dim", self.vae_latent_dim.to_string());
        push("vae_optimizer", self.vae_optimizer.name().to_string());
        push("vae_learning_rate", self.vae_learning_rate.to_string());
        push("vae_max_epochs", self.vae_max_epochs.to_string());
        push("vae_patience", self.vae_patience.to_string());
        push("vae_beta", self.vae_beta.to_string());
        push("vae_batch_size", self.vae_batch_size.to_string());
        push("ocsvm_nu", self.ocsvm_nu.to_string());
        push("ocsvm_kernel", self.ocsvm_kernel.name().to_string());
        push("ocsvm_poly_order", self.ocsvm_poly_order.to_string());
        push("ocsvm_tol", self.ocsvm_tol.to_string());
        push("story_masses", join_floats(&self.story_masses));
        push("story_stiffnesses", join_floats(&self.story_stiffnesses));
        push("damping_ratio", self.damping_ratio.to_string());
        push("sampling_rate_hz", self.sampling_rate_hz.to_string());
        push("band_low_hz", self.band_low_hz.to_string());
        push("band_high_hz", self.band_high_hz.to_string());
        push("case_durations_s", join_floats(&self.case_durations_s));
        push("snr_db", self.snr_db.to_string());
        push("force_story", self.force_story.to_string());
        for scenario in self.scenarios.iter().filter(|s| s.scenario_id >= 2) {
            push(
                &format!("scenario_{}", scenario.scenario_id),
                join_floats(&scenario.stiffness_multipliers),
            );
        }
        push("fdd_nfft", self.fdd_nfft.to_string());
        push("fdd_overlap", self.fdd_overlap.to_string());
        push("fdd_min_prominence_db", self.fdd_min_prominence_db.to_string());
        push("fdd_max_modes", self.fdd_max_modes.to_string());
        push("kl_mode", self.kl_mode.name().to_string());
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_len == 0 {
            return Err(Error::Config("frame_len must be at least 1".to_string()));
        }
        self.split_plan().validate()?;
        self.train_config(0).validate()?;
        let stories = self.story_masses.len();
        if self.story_stiffnesses.len() != stories || stories == 0 {
            return Err(Error::Config("story_masses and story_stiffnesses must be non-empty and equally long".to_string()));
        }
        if self.force_story == 0 || self.force_story > stories {
            return Err(Error::Config(format!(
                "force_story {} out of range 1..={stories}",
                self.force_story
            )));
        }
        if self.scenarios.is_empty() || !self.scenarios[0].is_undamaged() || self.scenarios[0].scenario_id != 1 {
            return Err(Error::Config("scenario 1 must exist and be undamaged".to_string()));
        }
        for scenario in &self.scenarios {
            if scenario.stiffness_multipliers.len() != stories {
                return Err(Error::Config(format!(
                    "scenario {} has {} multipliers for {stories} stories",
                    scenario.scenario_id,
                    scenario.stiffness_multipliers.len()
                )));
            }
        }
        if self.case_durations_s.len() != self.scenarios.len() {
            return Err(Error::Config(format!(
                "{} case durations for {} scenarios",
                self.case_durations_s.len(),
                self.scenarios.len()
            )));
        }
        if !(self.ocsvm_nu > 0.0 && self.ocsvm_nu <= 1.0) {
            return Err(Error::Config(format!("ocsvm_nu must lie in (0, 1], got {}", self.ocsvm_nu)));
        }
        // Structural model and excitation invariants.
        self.structural_model()?;
        self.excitation_spec(1)?.validate()?;
        Ok(())
    }

    pub fn split_plan(&self) -> SplitPlan {
        SplitPlan {
            fold_count: self.kfold_k,
            holdout_fraction: self.holdout_fraction,
            seed: self.split_seed,
        }
    }

    pub fn structural_model(&self) -> Result<StructuralModel> {
        StructuralModel::new(
            self.story_masses.clone(),
            self.story_stiffnesses.clone(),
            self.damping_ratio,
        )
    }

    /// Excitation for one scenario; each case gets its own noise stream.
    pub fn excitation_spec(&self, case_id: u32) -> Result<ExcitationSpec> {
        let idx = self
            .scenarios
            .iter()
            .position(|s| s.scenario_id == case_id)
            .ok_or_else(|| Error::Config(format!("no scenario with id {case_id}")))?;
        Ok(ExcitationSpec {
            duration_s: self.case_durations_s[idx],
            sampling_rate_hz: self.sampling_rate_hz,
            band_low_hz: self.band_low_hz,
            band_high_hz: self.band_high_hz,
            seed: crate::seeds::mix_seed(self.split_seed, 0xDA7A_0000 + case_id as u64),
        })
    }

    pub fn vae_architecture(&self) -> VaeArchitecture {
        VaeArchitecture {
            input_dim: self.frame_len,
            hidden_layers: self.vae_hidden_layers,
            hidden_neurons: self.vae_hidden_neurons,
            activation: self.vae_activation,
            latent_dim: self.vae_latent_dim,
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            max_epochs: self.vae_max_epochs,
            patience: self.vae_patience,
            validation_fraction: self.holdout_fraction,
            learning_rate: self.vae_learning_rate,
            optimizer: self.vae_optimizer,
            beta: self.vae_beta,
            batch_size: self.vae_batch_size,
            seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let config = RunConfig::default();
        config.validate().unwrap();
        let text = config.to_text();
        let parsed = RunConfig::parse(&text).unwrap();
        assert_eq!(parsed, config);
    }

    #[test]
    fn overrides_and_comments() {
        let text = "\n# tighter run\nframe_len = 64\nsplit_seed = 7   # inline comment\nscenario_9 = 0.5,0.5,0.5,0.5\n";
        let config = RunConfig::parse(text).unwrap();
        assert_eq!(config.frame_len, 64);
        assert_eq!(config.split_seed, 7);
        let s9 = config.scenarios.iter().find(|s| s.scenario_id == 9).unwrap();
        assert_eq!(s9.stiffness_multipliers, vec![0.5; 4]);
        assert_eq!(config.kfold_k, 10, "untouched keys keep defaults");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = RunConfig::parse("frames = 12\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("unknown key"));
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(RunConfig::parse("frame_len 128\n").is_err());
        assert!(RunConfig::parse("frame_len = twelve\n").is_err());
        assert!(RunConfig::parse("scenario_1 = 1,1,1,1\n").is_err());
    }

    #[test]
    fn cross_field_validation() {
        assert!(RunConfig::parse("force_story = 9\n").is_err(), "only 4 stories");
        assert!(RunConfig::parse("story_masses = 1000,1000\n").is_err(), "stiffness list length");
        assert!(RunConfig::parse("band_high_hz = 150\n").is_err(), "Nyquist");
        assert!(RunConfig::parse("scenario_3 = 0.9,0.9\n").is_err(), "multiplier count");
    }

    #[test]
    fn per_case_excitation_streams_differ() {
        let config = RunConfig::default();
        let a = config.excitation_spec(1).unwrap();
        let b = config.excitation_spec(2).unwrap();
        assert_ne!(a.seed, b.seed);
        assert_eq!(a.duration_s, 120.0);
        assert_eq!(config.excitation_spec(7).unwrap().duration_s, 360.0);
    }
}
