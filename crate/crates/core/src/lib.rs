//! Semi-supervised detection of structural damage from vibration data.
//!
//! The toolkit trains, per sensor, a variational autoencoder on acceleration
//! frames recorded in the undamaged state, extracts reconstruction-based
//! damage-sensitive features (MSE and ORSR), classifies frames with a
//! ν-one-class SVM and aggregates the results into per-sensor and per-case
//! probability-of-damage scores. A lumped-mass shear-frame simulator
//! ([`synth`]) provides benchmark-like data for desk-scale verification, and a
//! Frequency Domain Decomposition baseline ([`fdd`]) estimates modal
//! frequencies for comparison.
//!
//! Pipeline: [`signals`] → [`vae`] → [`features`] → [`ocsvm`] → [`scoring`],
//! with [`model_selection`] for cross-validated hyperparameter search and
//! [`pipeline`] orchestrating the CLI commands.

pub mod bundle;
pub mod config;
pub mod error;
pub mod fdd;
pub mod features;
pub mod model_selection;
pub mod neural;
pub mod ocsvm;
pub mod pipeline;
pub mod scoring;
mod seeds;
pub mod signals;
pub mod synth;
pub mod vae;

pub use error::{Error, Result};
