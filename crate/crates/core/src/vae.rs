//! Variational autoencoder over signal frames.
//!
//! The probabilistic encoder maps a normalized frame to the mean and
//! log-variance of a diagonal Gaussian posterior; a reparameterized sample is
//! decoded back to the frame domain through a Sigmoid output layer. Training
//! minimizes the negative ELBO (squared reconstruction error summed over the
//! frame plus β times the KL divergence from the unit Gaussian prior) with
//! early stopping on a validation split. A deterministic mode disables
//! sampling and the KL term, turning the same code path into a plain
//! autoencoder baseline.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::neural::{
    backward, forward, init_network, Activation, DenseNetwork, Gradients, OptimizerKind,
    OptimizerState,
};
use crate::seeds::mix_seed;
use crate::signals::{holdout_split, Frame, NormalizationStats};

/// Latent behaviour of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VaeMode {
    /// Probabilistic encoder (μ, log σ²) with reparameterized sampling.
    Variational,
    /// Plain autoencoder: the encoder output is the code, no sampling, no KL.
    Deterministic,
}

impl VaeMode {
    pub fn name(self) -> &'static str {
        match self {
            VaeMode::Variational => "variational",
            VaeMode::Deterministic => "deterministic",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "variational" => Ok(VaeMode::Variational),
            "deterministic" => Ok(VaeMode::Deterministic),
            other => Err(Error::Config(format!("unknown VAE mode {other:?}"))),
        }
    }
}

/// Encoder/decoder sizing drawn from the hyperparameter search space.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeArchitecture {
    /// Frame length `s`.
    pub input_dim: usize,
    /// Number of hidden layers in each of encoder and decoder.
    pub hidden_layers: usize,
    /// Neurons per hidden layer.
    pub hidden_neurons: usize,
    /// Hidden-layer activation.
    pub activation: Activation,
    /// Latent dimension `L`.
    pub latent_dim: usize,
}

impl VaeArchitecture {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_layers == 0 || self.hidden_neurons == 0 || self.latent_dim == 0 {
            return Err(Error::Config(format!("degenerate architecture {self:?}")));
        }
        Ok(())
    }

    fn encoder_sizes(&self, mode: VaeMode) -> Vec<usize> {
        let out = match mode {
            VaeMode::Variational => 2 * self.latent_dim,
            VaeMode::Deterministic => self.latent_dim,
        };
        let mut sizes = vec![self.input_dim];
        sizes.extend(std::iter::repeat(self.hidden_neurons).take(self.hidden_layers));
        sizes.push(out);
        sizes
    }

    fn decoder_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.latent_dim];
        sizes.extend(std::iter::repeat(self.hidden_neurons).take(self.hidden_layers));
        sizes.push(self.input_dim);
        sizes
    }
}

/// Trained autoencoder for one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel {
    pub encoder: DenseNetwork,
    pub decoder: DenseNetwork,
    pub latent_dim: usize,
    pub mode: VaeMode,
    /// Min-max statistics the model's frames were normalized with.
    pub normalization: NormalizationStats,
}

impl VaeModel {
    pub fn frame_len(&self) -> usize {
        self.encoder.input_dim()
    }
}

/// Freshly initialized model with Glorot-uniform weights.
pub fn build_model(
    arch: &VaeArchitecture,
    mode: VaeMode,
    normalization: NormalizationStats,
    seed: u64,
) -> Result<VaeModel> {
    arch.validate()?;
    let depth = arch.hidden_layers;
    let mut enc_acts = vec![arch.activation; depth];
    enc_acts.push(Activation::Identity);
    let mut dec_acts = vec![arch.activation; depth];
    dec_acts.push(Activation::Sigmoid);
    Ok(VaeModel {
        encoder: init_network(&arch.encoder_sizes(mode), &enc_acts, mix_seed(seed, 0xE2C0DE))?,
        decoder: init_network(&arch.decoder_sizes(), &dec_acts, mix_seed(seed, 0xDEC0DE))?,
        latent_dim: arch.latent_dim,
        mode,
        normalization,
    })
}

/// Posterior parameters for one frame: `(μ, log σ²)`.
///
/// In deterministic mode the encoder output is returned as μ with a `-∞`
/// log-variance sentinel, so `reparameterize` collapses to the identity.
pub fn encode(model: &VaeModel, frame: &Frame) -> Result<(DVector<f64>, DVector<f64>)> {
    let x = DVector::from_row_slice(&frame.values);
    let (out, _) = forward(&model.encoder, &x)?;
    split_encoder_output(model, out)
}

fn split_encoder_output(model: &VaeModel, out: DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    let l = model.latent_dim;
    match model.mode {
        VaeMode::Variational => {
            if out.len() != 2 * l {
                return Err(Error::Data(format!(
                    "encoder produced {} outputs, expected {}",
                    out.len(),
                    2 * l
                )));
            }
            let mu = out.rows(0, l).into_owned();
            let log_var = out.rows(l, l).into_owned();
            Ok((mu, log_var))
        }
        VaeMode::Deterministic => {
            if out.len() != l {
                return Err(Error::Data(format!(
                    "encoder produced {} outputs, expected {}",
                    out.len(),
                    l
                )));
            }
            Ok((out, DVector::from_element(l, f64::NEG_INFINITY)))
        }
    }
}

/// `z_i = μ_i + exp(log σ²_i / 2) · ε_i`.
pub fn reparameterize(mu: &DVector<f64>, log_var: &DVector<f64>, eps: &DVector<f64>) -> DVector<f64> {
    debug_assert_eq!(mu.len(), log_var.len());
    debug_assert_eq!(mu.len(), eps.len());
    DVector::from_fn(mu.len(), |i, _| mu[i] + (log_var[i] / 2.0).exp() * eps[i])
}

/// Decode a latent vector into a reconstruction; every component lies in
/// (0, 1) because the decoder output layer is a Sigmoid.
pub fn decode(model: &VaeModel, z: &DVector<f64>) -> Result<DVector<f64>> {
    let (out, _) = forward(&model.decoder, z)?;
    Ok(out)
}

/// `KL(N(μ, σ²) ‖ N(0, I)) = ½ Σᵢ (μᵢ² + σᵢ² − log σᵢ² − 1)`, non-negative.
pub fn kl_to_standard_normal(mu: &DVector<f64>, log_var: &DVector<f64>) -> f64 {
    debug_assert_eq!(mu.len(), log_var.len());
    0.5 * mu
        .iter()
        .zip(log_var.iter())
        .map(|(&m, &lv)| m * m + lv.exp() - lv - 1.0)
        .sum::<f64>()
}

/// The three terms of the per-frame training objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

/// Negative-ELBO loss: squared reconstruction error summed over the frame
/// plus `β` times the KL term.
pub fn elbo_loss(
    x: &DVector<f64>,
    x_hat: &DVector<f64>,
    mu: &DVector<f64>,
    log_var: &DVector<f64>,
    beta: f64,
) -> LossParts {
    debug_assert_eq!(x.len(), x_hat.len());
    let recon: f64 = x.iter().zip(x_hat.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    let kl = kl_to_standard_normal(mu, log_var);
    LossParts {
        total: recon + beta * kl,
        recon,
        kl,
    }
}

/// Loss and exact encoder/decoder gradients for one frame with a fixed noise
/// draw. This is the single code path used by training, the gradient checks
/// and the deterministic baseline (which passes `beta = 0` and no noise).
pub fn loss_gradients(
    model: &VaeModel,
    x: &DVector<f64>,
    eps: &DVector<f64>,
    beta: f64,
) -> Result<(Gradients, Gradients, LossParts)> {
    let (enc_out, enc_cache) = forward(&model.encoder, x)?;
    let (mu, log_var) = split_encoder_output(model, enc_out)?;
    let l = model.latent_dim;

    let (z, variational) = match model.mode {
        VaeMode::Variational => (reparameterize(&mu, &log_var, eps), true),
        VaeMode::Deterministic => (mu.clone(), false),
    };
    let (x_hat, dec_cache) = forward(&model.decoder, &z)?;

    let parts = if variational {
        elbo_loss(x, &x_hat, &mu, &log_var, beta)
    } else {
        let recon: f64 = x.iter().zip(x_hat.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        LossParts {
            total: recon,
            recon,
            kl: 0.0,
        }
    };

    // d recon / d x̂ for the summed squared error.
    let d_xhat = DVector::from_fn(x.len(), |i, _| 2.0 * (x_hat[i] - x[i]));
    let (dec_grads, dz) = backward(&model.decoder, &dec_cache, &d_xhat)?;

    let enc_out_grad = if variational {
        // dz/dμ = 1, dz/d(logσ²) = ½ σ ε; KL adds μ and ½(σ² − 1).
        let mut g = DVector::zeros(2 * l);
        for i in 0..l {
            g[i] = dz[i] + beta * mu[i];
            g[l + i] = dz[i] * 0.5 * (log_var[i] / 2.0).exp() * eps[i]
                + beta * 0.5 * (log_var[i].exp() - 1.0);
        }
        g
    } else {
        dz
    };
    let (enc_grads, _) = backward(&model.encoder, &enc_cache, &enc_out_grad)?;
    Ok((enc_grads, dec_grads, parts))
}

/// Training loop parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Fraction of training frames withheld as the early-stopping set.
    pub validation_fraction: f64,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Weight of the KL term; 1 recovers the plain ELBO.
    pub beta: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 1000,
            patience: 50,
            validation_fraction: 0.2,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            beta: 1.0,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patience >= self.max_epochs {
            return Err(Error::Config(format!(
                "patience {} must be below max epochs {}",
                self.patience, self.max_epochs
            )));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config("validation fraction must lie in (0, 1)".to_string()));
        }
        if !(self.learning_rate > 0.0) || self.batch_size == 0 {
            return Err(Error::Config("learning rate and batch size must be positive".to_string()));
        }
        Ok(())
    }
}

/// Loss trajectory of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub train_loss: f64,
    pub val_loss: f64,
    /// Mean per-frame reconstruction MSE on the validation split (inference
    /// path, `z = μ`), the model-selection metric.
    pub val_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose parameters were restored (0-based).
    pub best_epoch: usize,
}

/// Train an autoencoder on undamaged frames.
///
/// Holds out `validation_fraction` of the frames, draws one fresh ε per frame
/// per epoch, stops after `patience` epochs without validation improvement
/// (or at `max_epochs`) and returns the parameters of the best validation
/// epoch.
pub fn train(
    frames: &[Frame],
    arch: &VaeArchitecture,
    mode: VaeMode,
    config: &TrainConfig,
    normalization: NormalizationStats,
) -> Result<(VaeModel, TrainingHistory)> {
    config.validate()?;
    if frames.is_empty() {
        return Err(Error::Data("cannot train on zero frames".to_string()));
    }
    if let Some(bad) = frames.iter().find(|f| f.source_case != 1) {
        return Err(Error::Data(format!(
            "training frame from case {}; only undamaged (case 1) frames may be used",
            bad.source_case
        )));
    }
    if frames.iter().any(|f| f.values.len() != arch.input_dim) {
        return Err(Error::Data(format!(
            "frame length does not match architecture input {}",
            arch.input_dim
        )));
    }

    let (train_frames, val_frames) = holdout_split(frames, config.validation_fraction, mix_seed(config.seed, 0x591D))?;
    if train_frames.is_empty() {
        return Err(Error::Data("validation split left no training frames".to_string()));
    }
    let train_x: Vec<DVector<f64>> = train_frames
        .iter()
        .map(|f| DVector::from_row_slice(&f.values))
        .collect();
    let val_x: Vec<DVector<f64>> = val_frames
        .iter()
        .map(|f| DVector::from_row_slice(&f.values))
        .collect();

    let mut model = build_model(arch, mode, normalization, mix_seed(config.seed, 0x1417))?;
    let mut enc_opt = OptimizerState::new(config.optimizer, config.learning_rate, &model.encoder);
    let mut dec_opt = OptimizerState::new(config.optimizer, config.learning_rate, &model.decoder);

    let beta = match mode {
        VaeMode::Variational => config.beta,
        VaeMode::Deterministic => 0.0,
    };

    let mut history = Vec::new();
    let mut best: Option<(f64, DenseNetwork, DenseNetwork, usize)> = None;
    let mut stale_epochs = 0usize;

    for epoch in 0..config.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 0xe000 + epoch as u64));
        let mut order: Vec<usize> = (0..train_x.len()).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);

        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut enc_acc = Gradients::zeros_like(&model.encoder);
            let mut dec_acc = Gradients::zeros_like(&model.decoder);
            for &idx in batch {
                let eps = DVector::from_fn(model.latent_dim, |_, _| {
                    StandardNormal.sample(&mut rng)
                });
                let (enc_g, dec_g, parts) = loss_gradients(&model, &train_x[idx], &eps, beta)?;
                if !parts.total.is_finite() {
                    return Err(Error::Numerical(format!(
                        "non-finite loss at epoch {epoch}: recon={}, kl={}",
                        parts.recon, parts.kl
                    )));
                }
                epoch_loss += parts.total;
                enc_acc.accumulate(&enc_g);
                dec_acc.accumulate(&dec_g);
            }
            let inv = 1.0 / batch.len() as f64;
            enc_acc.scale(inv);
            dec_acc.scale(inv);
            enc_opt.step(&mut model.encoder, &enc_acc)?;
            dec_opt.step(&mut model.decoder, &dec_acc)?;
        }
        let train_loss = epoch_loss / train_x.len() as f64;

        let (val_loss, val_mse) = validation_metrics(&model, &val_x, beta)?;
        history.push(EpochStats {
            train_loss,
            val_loss,
            val_mse,
        });

        let improved = best.as_ref().map_or(true, |(best_loss, ..)| val_loss < *best_loss);
        if improved {
            best = Some((val_loss, model.encoder.clone(), model.decoder.clone(), epoch));
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= config.patience {
                break;
            }
        }
    }

    let (_, encoder, decoder, best_epoch) = best.expect("at least one epoch ran");
    model.encoder = encoder;
    model.decoder = decoder;
    Ok((
        model,
        TrainingHistory {
            epochs: history,
            best_epoch,
        },
    ))
}

/// Deterministic validation metrics: loss with `z = μ` plus the per-frame
/// reconstruction MSE used for model selection.
fn validation_metrics(model: &VaeModel, val_x: &[DVector<f64>], beta: f64) -> Result<(f64, f64)> {
    let mut total = 0.0;
    let mut mse = 0.0;
    for x in val_x {
        let (enc_out, _) = forward(&model.encoder, x)?;
        let (mu, log_var) = split_encoder_output(model, enc_out)?;
        let x_hat = decode(model, &mu)?;
        let recon: f64 = x.iter().zip(x_hat.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        let kl = if beta > 0.0 {
            kl_to_standard_normal(&mu, &log_var)
        } else {
            0.0
        };
        total += recon + beta * kl;
        mse += recon / x.len() as f64;
    }
    let n = val_x.len().max(1) as f64;
    Ok((total / n, mse / n))
}

/// Inference-time reconstruction: decode the posterior mean, no sampling.
pub fn reconstruct(model: &VaeModel, frame: &Frame) -> Result<DVector<f64>> {
    let (mu, _) = encode(model, frame)?;
    decode(model, &mu)
}
