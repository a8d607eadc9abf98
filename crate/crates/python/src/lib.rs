//! Python bindings for the core damage-detection toolkit.
//!
//! Exposes the signal framing, autoencoder, feature, one-class SVM, shear
//! frame simulator and FDD operations as plain functions and two classes
//! (`Vae`, `OneClassSvm`). Build with
//! `cargo build --release -p shmdetect-python`; the resulting
//! `libshmdetect_py.so` imports as the `shmdetect_py` module (see
//! `python/smoke_test.py`).

use nalgebra::DVector;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use shmdetect::error::Error;
use shmdetect::features;
use shmdetect::neural::Activation;
use shmdetect::ocsvm;
use shmdetect::signals::{Frame, NormalizationStats, SensorRecord};
use shmdetect::synth;
use shmdetect::vae;

fn to_py_err(err: Error) -> PyErr {
    match err {
        Error::Numerical(msg) => PyRuntimeError::new_err(msg),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn frame_from(values: Vec<f64>) -> Frame {
    Frame {
        values,
        source_sensor: 1,
        source_case: 1,
        index: 0,
    }
}

/// Cut a signal into non-overlapping frames of `frame_len`, discarding the
/// remainder.
#[pyfunction]
fn window(samples: Vec<f64>, frame_len: usize) -> PyResult<Vec<Vec<f64>>> {
    let record = SensorRecord::new(1, samples, 1.0).map_err(to_py_err)?;
    let frames = shmdetect::signals::window(&record, frame_len, 1).map_err(to_py_err)?;
    Ok(frames.into_iter().map(|f| f.values).collect())
}

/// KL divergence of `N(mu, exp(log_var))` from the unit Gaussian.
#[pyfunction]
fn kl_to_standard_normal(mu: Vec<f64>, log_var: Vec<f64>) -> PyResult<f64> {
    if mu.len() != log_var.len() {
        return Err(PyValueError::new_err("mu and log_var lengths differ"));
    }
    Ok(vae::kl_to_standard_normal(
        &DVector::from_vec(mu),
        &DVector::from_vec(log_var),
    ))
}

/// `z = mu + exp(log_var/2) * eps`.
#[pyfunction]
fn reparameterize(mu: Vec<f64>, log_var: Vec<f64>, eps: Vec<f64>) -> PyResult<Vec<f64>> {
    if mu.len() != log_var.len() || mu.len() != eps.len() {
        return Err(PyValueError::new_err("mu, log_var and eps lengths differ"));
    }
    Ok(vae::reparameterize(
        &DVector::from_vec(mu),
        &DVector::from_vec(log_var),
        &DVector::from_vec(eps),
    )
    .as_slice()
    .to_vec())
}

/// Mean squared reconstruction error.
#[pyfunction]
fn mse_feature(x: Vec<f64>, x_hat: Vec<f64>) -> PyResult<f64> {
    features::mse_feature(&x, &x_hat).map_err(to_py_err)
}

/// Original-to-reconstructed-signal ratio in dB.
#[pyfunction]
fn orsr_feature(x: Vec<f64>, x_hat: Vec<f64>) -> PyResult<f64> {
    features::orsr_feature(&x, &x_hat).map_err(to_py_err)
}

/// Probability of damage in percent: `100*outliers/frames`.
#[pyfunction]
fn pod(outlier_count: usize, frame_count: usize) -> PyResult<f64> {
    shmdetect::scoring::pod(outlier_count, frame_count).map_err(to_py_err)
}

/// Modal frequencies (Hz) and unit-max mode shapes of a shear frame.
#[pyfunction]
fn analytic_modes(
    story_masses: Vec<f64>,
    story_stiffnesses: Vec<f64>,
    damping_ratio: f64,
) -> PyResult<Vec<(f64, Vec<f64>)>> {
    let model =
        synth::StructuralModel::new(story_masses, story_stiffnesses, damping_ratio).map_err(to_py_err)?;
    Ok(synth::analytic_modes(&model)
        .into_iter()
        .map(|m| (m.frequency_hz, m.shape))
        .collect())
}

/// Band-limited white-noise series, deterministic under the seed.
#[pyfunction]
fn bandlimited_noise(
    duration_s: f64,
    sampling_rate_hz: f64,
    band_low_hz: f64,
    band_high_hz: f64,
    seed: u64,
) -> PyResult<Vec<f64>> {
    synth::bandlimited_noise(&synth::ExcitationSpec {
        duration_s,
        sampling_rate_hz,
        band_low_hz,
        band_high_hz,
        seed,
    })
    .map_err(to_py_err)
}

/// Story accelerations of a damaged shear frame under band-limited noise;
/// one list per story.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn simulate(
    story_masses: Vec<f64>,
    story_stiffnesses: Vec<f64>,
    stiffness_multipliers: Vec<f64>,
    damping_ratio: f64,
    duration_s: f64,
    sampling_rate_hz: f64,
    band_low_hz: f64,
    band_high_hz: f64,
    seed: u64,
    force_story: usize,
) -> PyResult<Vec<Vec<f64>>> {
    let model =
        synth::StructuralModel::new(story_masses, story_stiffnesses, damping_ratio).map_err(to_py_err)?;
    let scenario = synth::DamageScenario::new(2, stiffness_multipliers).map_err(to_py_err)?;
    let spec = synth::ExcitationSpec {
        duration_s,
        sampling_rate_hz,
        band_low_hz,
        band_high_hz,
        seed,
    };
    let records = synth::simulate(&model, &scenario, &spec, force_story).map_err(to_py_err)?;
    Ok(records.into_iter().map(|r| r.samples).collect())
}

/// FDD modal frequencies from multi-channel records.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn fdd_modes(
    channels: Vec<Vec<f64>>,
    sampling_rate_hz: f64,
    nfft: usize,
    overlap: f64,
    band_low_hz: f64,
    band_high_hz: f64,
    min_prominence_db: f64,
) -> PyResult<Vec<f64>> {
    let records: Vec<SensorRecord> = channels
        .into_iter()
        .enumerate()
        .map(|(i, samples)| SensorRecord::new(i as u32 + 1, samples, sampling_rate_hz))
        .collect::<Result<_, _>>()
        .map_err(to_py_err)?;
    let estimate = shmdetect::fdd::estimate_modes(
        &records,
        nfft,
        overlap,
        (band_low_hz, band_high_hz),
        min_prominence_db,
    )
    .map_err(to_py_err)?;
    Ok(estimate.mode_frequencies)
}

/// Variational (or plain, with `deterministic=True`) autoencoder trained on
/// undamaged frames normalized to [0, 1].
#[pyclass]
struct Vae {
    model: vae::VaeModel,
}

#[pymethods]
impl Vae {
    #[new]
    #[pyo3(signature = (frames, latent_dim, hidden_neurons=60, hidden_layers=1,
                        activation="sigmoid", learning_rate=1e-3, beta=0.002,
                        max_epochs=300, patience=50, seed=0, deterministic=false))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        frames: Vec<Vec<f64>>,
        latent_dim: usize,
        hidden_neurons: usize,
        hidden_layers: usize,
        activation: &str,
        learning_rate: f64,
        beta: f64,
        max_epochs: usize,
        patience: usize,
        seed: u64,
        deterministic: bool,
    ) -> PyResult<Self> {
        if frames.is_empty() {
            return Err(PyValueError::new_err("no frames"));
        }
        let arch = vae::VaeArchitecture {
            input_dim: frames[0].len(),
            hidden_layers,
            hidden_neurons,
            activation: Activation::from_name(activation).map_err(to_py_err)?,
            latent_dim,
        };
        let config = vae::TrainConfig {
            max_epochs,
            patience,
            learning_rate,
            beta,
            seed,
            ..vae::TrainConfig::default()
        };
        let mode = if deterministic {
            vae::VaeMode::Deterministic
        } else {
            vae::VaeMode::Variational
        };
        let frames: Vec<Frame> = frames.into_iter().map(frame_from).collect();
        let stats = NormalizationStats::new(0.0, 1.0).map_err(to_py_err)?;
        let (model, _) = vae::train(&frames, &arch, mode, &config, stats).map_err(to_py_err)?;
        Ok(Self { model })
    }

    /// Deterministic reconstruction through the posterior mean.
    fn reconstruct(&self, frame: Vec<f64>) -> PyResult<Vec<f64>> {
        let out = vae::reconstruct(&self.model, &frame_from(frame)).map_err(to_py_err)?;
        Ok(out.as_slice().to_vec())
    }

    /// Posterior parameters `(mu, log_var)` for one frame.
    fn encode(&self, frame: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let (mu, log_var) = vae::encode(&self.model, &frame_from(frame)).map_err(to_py_err)?;
        Ok((mu.as_slice().to_vec(), log_var.as_slice().to_vec()))
    }

    /// `(mse, orsr_db)` of one frame against its reconstruction.
    fn features(&self, frame: Vec<f64>) -> PyResult<(f64, f64)> {
        let x_hat = self.reconstruct(frame.clone())?;
        Ok((
            features::mse_feature(&frame, &x_hat).map_err(to_py_err)?,
            features::orsr_feature(&frame, &x_hat).map_err(to_py_err)?,
        ))
    }

    #[getter]
    fn latent_dim(&self) -> usize {
        self.model.latent_dim
    }
}

/// ν-one-class SVM fitted on feature points.
#[pyclass]
struct OneClassSvm {
    model: ocsvm::OcSvmModel,
}

#[pymethods]
impl OneClassSvm {
    #[new]
    #[pyo3(signature = (points, nu, kernel="rbf", gamma=None, poly_order=3, tol=1e-6))]
    fn new(
        points: Vec<Vec<f64>>,
        nu: f64,
        kernel: &str,
        gamma: Option<f64>,
        poly_order: u32,
        tol: f64,
    ) -> PyResult<Self> {
        let spec = match kernel {
            "rbf" => match gamma {
                Some(gamma) => ocsvm::KernelSpec::Rbf { gamma },
                None => ocsvm::KernelSpec::rbf_with_default_gamma(&points).map_err(to_py_err)?,
            },
            "linear" => ocsvm::KernelSpec::Linear,
            "polynomial" => ocsvm::KernelSpec::Polynomial {
                order: poly_order,
                coef0: 1.0,
                scale: 1.0,
            },
            other => return Err(PyValueError::new_err(format!("unknown kernel {other:?}"))),
        };
        let model = ocsvm::fit(&points, nu, spec, tol).map_err(to_py_err)?;
        Ok(Self { model })
    }

    /// Signed decision value; negative means outlier.
    fn decision(&self, x: Vec<f64>) -> f64 {
        ocsvm::decision(&self.model, &x)
    }

    /// True when the point lies inside the learned boundary.
    fn is_inlier(&self, x: Vec<f64>) -> bool {
        ocsvm::classify(&self.model, &x) == ocsvm::Classification::Inlier
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.model.rho
    }

    #[getter]
    fn nu(&self) -> f64 {
        self.model.nu
    }

    #[getter]
    fn support_vector_count(&self) -> usize {
        self.model.alphas.len()
    }
}

#[pymodule]
fn shmdetect_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(window, m)?)?;
    m.add_function(wrap_pyfunction!(kl_to_standard_normal, m)?)?;
    m.add_function(wrap_pyfunction!(reparameterize, m)?)?;
    m.add_function(wrap_pyfunction!(mse_feature, m)?)?;
    m.add_function(wrap_pyfunction!(orsr_feature, m)?)?;
    m.add_function(wrap_pyfunction!(pod, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_modes, m)?)?;
    m.add_function(wrap_pyfunction!(bandlimited_noise, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(fdd_modes, m)?)?;
    m.add_class::<Vae>()?;
    m.add_class::<OneClassSvm>()?;
    Ok(())
}
