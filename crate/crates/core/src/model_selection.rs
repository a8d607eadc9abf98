//! Cross-validated hyperparameter search.
//!
//! Model selection is staged: first the autoencoder (minimizing the mean
//! k-fold validation reconstruction MSE), then — with its features frozen —
//! the one-class SVM (maximizing the mean k-fold validation inlier
//! fraction). Two strategies share one driver: uniform random sampling (the
//! reference, fully reproducible) and an expected-improvement proposal on an
//! isotropic Gaussian-process surrogate over a normalized encoding of the
//! space.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract, FeatureScaler};
use crate::neural::{Activation, OptimizerKind};
use crate::ocsvm::{classify, fit, Classification, KernelSpec};
use crate::seeds::mix_seed;
use crate::signals::{fold_indices, Frame, NormalizationStats};
use crate::vae::{reconstruct, train, TrainConfig, VaeArchitecture, VaeMode};

/// Autoencoder search ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeSearchSpace {
    pub hidden_layers: (usize, usize),
    pub hidden_neurons: (usize, usize),
    pub activations: Vec<Activation>,
    pub latent_dim: (usize, usize),
    pub optimizers: Vec<OptimizerKind>,
    pub learning_rates: Vec<f64>,
}

impl Default for VaeSearchSpace {
    fn default() -> Self {
        Self {
            hidden_layers: (1, 3),
            hidden_neurons: (4, 128),
            activations: vec![Activation::Relu, Activation::LeakyRelu, Activation::Sigmoid],
            latent_dim: (2, 40),
            optimizers: vec![OptimizerKind::Adam, OptimizerKind::Sgd],
            learning_rates: vec![1e-4, 1e-3, 1e-2],
        }
    }
}

/// One sampled autoencoder configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeTrialConfig {
    pub hidden_layers: usize,
    pub hidden_neurons: usize,
    pub activation: String,
    pub latent_dim: usize,
    pub optimizer: String,
    pub learning_rate: f64,
}

impl VaeTrialConfig {
    pub fn activation_kind(&self) -> Result<Activation> {
        Activation::from_name(&self.activation)
    }

    pub fn optimizer_kind(&self) -> Result<OptimizerKind> {
        OptimizerKind::from_name(&self.optimizer)
    }
}

/// One-class SVM search ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct OcSvmSearchSpace {
    pub nu: (f64, f64),
    pub kernels: Vec<KernelFamily>,
    pub poly_order: (u32, u32),
}

impl Default for OcSvmSearchSpace {
    fn default() -> Self {
        Self {
            nu: (1e-3, 1.0),
            kernels: vec![KernelFamily::Rbf, KernelFamily::Polynomial, KernelFamily::Linear],
            poly_order: (2, 4),
        }
    }
}

/// Kernel family without scale parameters; γ for RBF comes from the data
/// heuristic at fit time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelFamily {
    Rbf,
    Polynomial,
    Linear,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Rbf => "rbf",
            KernelFamily::Polynomial => "polynomial",
            KernelFamily::Linear => "linear",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "rbf" => Ok(KernelFamily::Rbf),
            "polynomial" => Ok(KernelFamily::Polynomial),
            "linear" => Ok(KernelFamily::Linear),
            other => Err(Error::Config(format!("unknown kernel {other:?}"))),
        }
    }

    /// Concrete kernel for a training set: RBF γ from the variance
    /// heuristic, polynomial with unit scale and offset.
    pub fn kernel_for(self, order: u32, train_features: &[Vec<f64>]) -> Result<KernelSpec> {
        match self {
            KernelFamily::Rbf => KernelSpec::rbf_with_default_gamma(train_features),
            KernelFamily::Polynomial => Ok(KernelSpec::Polynomial {
                order,
                coef0: 1.0,
                scale: 1.0,
            }),
            KernelFamily::Linear => Ok(KernelSpec::Linear),
        }
    }
}

/// One sampled one-class SVM configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcSvmTrialConfig {
    pub nu: f64,
    pub kernel: KernelFamily,
    pub poly_order: u32,
}

/// A space that can be sampled and embedded into the unit cube for the
/// surrogate strategy.
pub trait SearchSpace {
    type Config: Clone + Serialize;
    fn sample(&self, rng: &mut ChaCha8Rng) -> Self::Config;
    /// Normalized coordinates in [0, 1]^d.
    fn encode(&self, config: &Self::Config) -> Vec<f64>;
    fn contains(&self, config: &Self::Config) -> bool;
}

impl SearchSpace for VaeSearchSpace {
    type Config = VaeTrialConfig;

    fn sample(&self, rng: &mut ChaCha8Rng) -> VaeTrialConfig {
        VaeTrialConfig {
            hidden_layers: rng.random_range(self.hidden_layers.0..=self.hidden_layers.1),
            hidden_neurons: rng.random_range(self.hidden_neurons.0..=self.hidden_neurons.1),
            activation: self.activations[rng.random_range(0..self.activations.len())]
                .name()
                .to_string(),
            latent_dim: rng.random_range(self.latent_dim.0..=self.latent_dim.1),
            optimizer: self.optimizers[rng.random_range(0..self.optimizers.len())]
                .name()
                .to_string(),
            learning_rate: self.learning_rates[rng.random_range(0..self.learning_rates.len())],
        }
    }

    fn encode(&self, config: &VaeTrialConfig) -> Vec<f64> {
        let span = |v: usize, lo: usize, hi: usize| {
            if hi > lo {
                (v - lo) as f64 / (hi - lo) as f64
            } else {
                0.0
            }
        };
        let act_idx = self
            .activations
            .iter()
            .position(|a| a.name() == config.activation)
            .unwrap_or(0);
        let opt_idx = self
            .optimizers
            .iter()
            .position(|o| o.name() == config.optimizer)
            .unwrap_or(0);
        let lr_idx = self
            .learning_rates
            .iter()
            .position(|&lr| lr == config.learning_rate)
            .unwrap_or(0);
        vec![
            span(config.hidden_layers, self.hidden_layers.0, self.hidden_layers.1),
            span(config.hidden_neurons, self.hidden_neurons.0, self.hidden_neurons.1),
            act_idx as f64 / (self.activations.len().max(2) - 1) as f64,
            span(config.latent_dim, self.latent_dim.0, self.latent_dim.1),
            opt_idx as f64 / (self.optimizers.len().max(2) - 1) as f64,
            lr_idx as f64 / (self.learning_rates.len().max(2) - 1) as f64,
        ]
    }

    fn contains(&self, config: &VaeTrialConfig) -> bool {
        (self.hidden_layers.0..=self.hidden_layers.1).contains(&config.hidden_layers)
            && (self.hidden_neurons.0..=self.hidden_neurons.1).contains(&config.hidden_neurons)
            && self.activations.iter().any(|a| a.name() == config.activation)
            && (self.latent_dim.0..=self.latent_dim.1).contains(&config.latent_dim)
            && self.optimizers.iter().any(|o| o.name() == config.optimizer)
            && self.learning_rates.contains(&config.learning_rate)
    }
}

impl SearchSpace for OcSvmSearchSpace {
    type Config = OcSvmTrialConfig;

    fn sample(&self, rng: &mut ChaCha8Rng) -> OcSvmTrialConfig {
        OcSvmTrialConfig {
            nu: rng.random_range(self.nu.0..=self.nu.1),
            kernel: self.kernels[rng.random_range(0..self.kernels.len())],
            poly_order: rng.random_range(self.poly_order.0..=self.poly_order.1),
        }
    }

    fn encode(&self, config: &OcSvmTrialConfig) -> Vec<f64> {
        let kernel_idx = self
            .kernels
            .iter()
            .position(|k| *k == config.kernel)
            .unwrap_or(0);
        vec![
            (config.nu - self.nu.0) / (self.nu.1 - self.nu.0).max(1e-12),
            kernel_idx as f64 / (self.kernels.len().max(2) - 1) as f64,
            (config.poly_order - self.poly_order.0) as f64
                / (self.poly_order.1 - self.poly_order.0).max(1) as f64,
        ]
    }

    fn contains(&self, config: &OcSvmTrialConfig) -> bool {
        config.nu >= self.nu.0
            && config.nu <= self.nu.1
            && self.kernels.contains(&config.kernel)
            && (self.poly_order.0..=self.poly_order.1).contains(&config.poly_order)
    }
}

/// Outcome of one evaluated configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord<C> {
    pub trial: usize,
    pub config: C,
    /// `None` marks a failed trial (worst possible objective).
    pub objective: Option<f64>,
    pub per_fold: Vec<f64>,
    pub wall_time_s: f64,
    pub seed: u64,
}

impl<C> TrialRecord<C> {
    /// Objective with failures mapped to the worst value for the direction.
    pub fn objective_or_worst(&self, direction: Direction) -> f64 {
        self.objective.unwrap_or(match direction {
            Direction::Minimize => f64::INFINITY,
            Direction::Maximize => f64::NEG_INFINITY,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

impl Direction {
    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Minimize => a < b,
            Direction::Maximize => a > b,
        }
    }
}

/// Trial-proposal strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchStrategy {
    /// Uniform sampling from the space; the reproducible reference.
    Random,
    /// Gaussian-process surrogate with expected improvement after a
    /// 10-trial random warm start.
    Surrogate,
}

impl SearchStrategy {
    pub fn name(self) -> &'static str {
        match self {
            SearchStrategy::Random => "random",
            SearchStrategy::Surrogate => "surrogate",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "random" => Ok(SearchStrategy::Random),
            "surrogate" => Ok(SearchStrategy::Surrogate),
            other => Err(Error::Config(format!("unknown search strategy {other:?}"))),
        }
    }
}

/// Best trial plus the full history.
#[derive(Debug, Clone)]
pub struct SearchOutcome<C> {
    pub best: TrialRecord<C>,
    pub history: Vec<TrialRecord<C>>,
}

const WARM_START_TRIALS: usize = 10;
const CANDIDATE_POOL: usize = 256;

/// Run a hyperparameter search.
///
/// The objective returns `(objective, per-fold values)`; an `Err` marks the
/// trial failed. The random strategy's full trial sequence is a pure
/// function of `(space, trials, seed)`.
pub fn search<S: SearchSpace>(
    space: &S,
    mut objective: impl FnMut(&S::Config) -> Result<(f64, Vec<f64>)>,
    trials: usize,
    strategy: SearchStrategy,
    direction: Direction,
    seed: u64,
) -> Result<SearchOutcome<S::Config>> {
    if trials == 0 {
        return Err(Error::Config("at least one trial is required".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut history: Vec<TrialRecord<S::Config>> = Vec::with_capacity(trials);

    for trial in 0..trials {
        let config = match strategy {
            SearchStrategy::Random => space.sample(&mut rng),
            SearchStrategy::Surrogate => {
                if trial < WARM_START_TRIALS {
                    space.sample(&mut rng)
                } else {
                    propose_by_expected_improvement(space, &history, direction, &mut rng)
                }
            }
        };
        let started = Instant::now();
        let (objective_value, per_fold) = match objective(&config) {
            Ok((value, per_fold)) => (Some(value), per_fold),
            Err(_) => (None, Vec::new()),
        };
        history.push(TrialRecord {
            trial,
            config,
            objective: objective_value,
            per_fold,
            wall_time_s: started.elapsed().as_secs_f64(),
            seed,
        });
    }

    let best = history
        .iter()
        .filter(|t| t.objective.is_some())
        .min_by(|a, b| {
            let (x, y) = (a.objective.unwrap(), b.objective.unwrap());
            if direction.better(x, y) {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Greater
            }
        })
        .cloned()
        .ok_or_else(|| Error::Numerical("all trials failed".to_string()))?;
    Ok(SearchOutcome { best, history })
}

/// Propose the candidate with the best expected improvement under an
/// isotropic GP fitted to the finished trials.
fn propose_by_expected_improvement<S: SearchSpace>(
    space: &S,
    history: &[TrialRecord<S::Config>],
    direction: Direction,
    rng: &mut ChaCha8Rng,
) -> S::Config {
    let finished: Vec<(&S::Config, f64)> = history
        .iter()
        .filter_map(|t| t.objective.map(|o| (&t.config, o)))
        .collect();
    if finished.len() < 2 {
        return space.sample(rng);
    }

    // Standardize objectives as a minimization target.
    let raw: Vec<f64> = finished
        .iter()
        .map(|(_, o)| match direction {
            Direction::Minimize => *o,
            Direction::Maximize => -*o,
        })
        .collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    let std = (raw.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / raw.len() as f64)
        .sqrt()
        .max(1e-12);
    let y: Vec<f64> = raw.iter().map(|v| (v - mean) / std).collect();
    let x: Vec<Vec<f64>> = finished.iter().map(|(c, _)| space.encode(c)).collect();
    let y_best = y.iter().cloned().fold(f64::INFINITY, f64::min);

    let gp = match GaussianProcess::fit(&x, &y) {
        Some(gp) => gp,
        None => return space.sample(rng),
    };

    let mut best_candidate: Option<(S::Config, f64)> = None;
    for _ in 0..CANDIDATE_POOL {
        let candidate = space.sample(rng);
        let coords = space.encode(&candidate);
        let (mu, var) = gp.predict(&coords);
        let sigma = var.max(1e-12).sqrt();
        let u = (y_best - mu) / sigma;
        let ei = sigma * (u * normal_cdf(u) + normal_pdf(u));
        if best_candidate.as_ref().map_or(true, |(_, b)| ei > *b) {
            best_candidate = Some((candidate, ei));
        }
    }
    best_candidate.expect("candidate pool is non-empty").0
}

/// Isotropic squared-exponential GP with fixed hyperparameters on
/// standardized targets.
struct GaussianProcess {
    x: Vec<Vec<f64>>,
    weights: DVector<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    length_scale: f64,
}

const GP_NOISE: f64 = 1e-4;

impl GaussianProcess {
    fn kernel(a: &[f64], b: &[f64], length_scale: f64) -> f64 {
        let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        (-0.5 * sq / (length_scale * length_scale)).exp()
    }

    fn fit(x: &[Vec<f64>], y: &[f64]) -> Option<Self> {
        let n = x.len();
        let d = x[0].len() as f64;
        // A third of the unit-cube diagonal keeps the kernel informative
        // across the whole normalized space.
        let length_scale = (d.sqrt() / 3.0).max(0.1);
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                k[(i, j)] = Self::kernel(&x[i], &x[j], length_scale);
            }
            k[(i, i)] += GP_NOISE;
        }
        let chol = k.cholesky()?;
        let weights = chol.solve(&DVector::from_row_slice(y));
        Some(Self {
            x: x.to_vec(),
            weights,
            chol,
            length_scale,
        })
    }

    fn predict(&self, coords: &[f64]) -> (f64, f64) {
        let k_star = DVector::from_fn(self.x.len(), |i, _| {
            Self::kernel(&self.x[i], coords, self.length_scale)
        });
        let mu = k_star.dot(&self.weights);
        let v = self.chol.solve(&k_star);
        let var = 1.0 + GP_NOISE - k_star.dot(&v);
        (mu, var.max(0.0))
    }
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Abramowitz–Stegun 7.1.26 erf approximation, |error| < 1.5e-7.
fn normal_cdf(x: f64) -> f64 {
    let z = x / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.3275911 * z.abs());
    let poly = t
        * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let erf = 1.0 - poly * (-z * z).exp();
    let signed = if z >= 0.0 { erf } else { -erf };
    0.5 * (1.0 + signed)
}

/// Mean k-fold validation reconstruction MSE of one autoencoder
/// configuration.
///
/// Per fold, a model is trained on the fold's training split (its internal
/// 20 % validation subset drives early stopping) and evaluated as the mean
/// per-frame reconstruction MSE on the fold's validation split.
pub fn cv_objective_vae(
    config: &VaeTrialConfig,
    frames: &[Frame],
    k: usize,
    seed: u64,
    train_template: &TrainConfig,
    normalization: NormalizationStats,
) -> Result<(f64, Vec<f64>)> {
    if frames.is_empty() {
        return Err(Error::Data("no frames for cross-validation".to_string()));
    }
    let arch = VaeArchitecture {
        input_dim: frames[0].values.len(),
        hidden_layers: config.hidden_layers,
        hidden_neurons: config.hidden_neurons,
        activation: config.activation_kind()?,
        latent_dim: config.latent_dim,
    };
    let folds = fold_indices(frames.len(), k, seed)?;
    let mut per_fold = Vec::with_capacity(k);
    for (fold_idx, (train_idx, val_idx)) in folds.iter().enumerate() {
        let train_frames: Vec<Frame> = train_idx.iter().map(|&i| frames[i].clone()).collect();
        let fold_config = TrainConfig {
            learning_rate: config.learning_rate,
            optimizer: config.optimizer_kind()?,
            seed: mix_seed(seed, fold_idx as u64),
            ..*train_template
        };
        let (model, _) = train(&train_frames, &arch, VaeMode::Variational, &fold_config, normalization)?;
        let mut mse = 0.0;
        for &i in val_idx {
            let frame = &frames[i];
            let x_hat = reconstruct(&model, frame)?;
            mse += frame
                .values
                .iter()
                .zip(x_hat.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / frame.values.len() as f64;
        }
        per_fold.push(mse / val_idx.len() as f64);
    }
    Ok((per_fold.iter().sum::<f64>() / per_fold.len() as f64, per_fold))
}

/// Mean k-fold validation inlier fraction of one one-class SVM
/// configuration over standardized feature points.
pub fn cv_objective_ocsvm(
    config: &OcSvmTrialConfig,
    features: &[Vec<f64>],
    k: usize,
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    let folds = fold_indices(features.len(), k, seed)?;
    let mut per_fold = Vec::with_capacity(k);
    for (train_idx, val_idx) in &folds {
        let train_features: Vec<Vec<f64>> = train_idx.iter().map(|&i| features[i].clone()).collect();
        let kernel = config.kernel.kernel_for(config.poly_order, &train_features)?;
        let model = fit(&train_features, config.nu, kernel, crate::ocsvm::DEFAULT_TOL)?;
        let inliers = val_idx
            .iter()
            .filter(|&&i| classify(&model, &features[i]) == Classification::Inlier)
            .count();
        per_fold.push(inliers as f64 / val_idx.len() as f64);
    }
    Ok((per_fold.iter().sum::<f64>() / per_fold.len() as f64, per_fold))
}

/// Line-delimited JSON history, one record per trial.
pub fn history_to_jsonl<C: Serialize>(history: &[TrialRecord<C>]) -> Result<String> {
    let mut out = String::new();
    for record in history {
        let line = serde_json::to_string(&serde_json::json!({
            "trial": record.trial,
            "config": record.config,
            "objective": record.objective,
            "per_fold": record.per_fold,
            "wall_time_s": record.wall_time_s,
            "seed": record.seed,
        }))
        .map_err(|e| Error::Data(format!("cannot serialize trial history: {e}")))?;
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

/// Helper shared by the pipeline and tests: standardized feature points of
/// normalized undamaged frames under a trained model.
pub fn standardized_features(
    frames: &[Frame],
    model: &crate::vae::VaeModel,
) -> Result<(Vec<Vec<f64>>, FeatureScaler)> {
    let features = extract(frames, model)?;
    let scaler = FeatureScaler::fit(&features)?;
    Ok((scaler.transform_all(&features), scaler))
}
