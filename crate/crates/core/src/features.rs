//! Damage-sensitive features from a frame and its reconstruction.
//!
//! Two scalars per frame: the reconstruction MSE and the
//! original-to-reconstructed-signal ratio (ORSR) in decibels. Before the
//! one-class SVM sees them, features are standardized with statistics fitted
//! on undamaged training features only.

use crate::error::{Error, Result};
use crate::signals::Frame;
use crate::vae::{reconstruct, VaeModel};

/// Value returned for the ORSR of a zero-energy original signal.
pub const ORSR_FLOOR_DB: f64 = -120.0;

/// Raw feature pair with the identifiers of its source frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    /// Reconstruction mean squared error, non-negative.
    pub mse: f64,
    /// Original-to-reconstructed-signal ratio in dB.
    pub orsr_db: f64,
    pub sensor: u32,
    pub case: u32,
    pub index: usize,
}

/// `(1/n) Σ (xᵢ − x̂ᵢ)²`.
pub fn mse_feature(x: &[f64], x_hat: &[f64]) -> Result<f64> {
    if x.len() != x_hat.len() || x.is_empty() {
        return Err(Error::Data(format!(
            "mse needs equal non-empty lengths, got {} and {}",
            x.len(),
            x_hat.len()
        )));
    }
    Ok(x.iter()
        .zip(x_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / x.len() as f64)
}

/// `10 log₁₀(Σ xᵢ² / Σ x̂ᵢ²)` in decibels.
///
/// A zero-energy original produces the configured [`ORSR_FLOOR_DB`] floor
/// instead of −∞; a zero-energy reconstruction is a data error (the Sigmoid
/// decoder cannot produce one).
pub fn orsr_feature(x: &[f64], x_hat: &[f64]) -> Result<f64> {
    if x.len() != x_hat.len() || x.is_empty() {
        return Err(Error::Data(format!(
            "orsr needs equal non-empty lengths, got {} and {}",
            x.len(),
            x_hat.len()
        )));
    }
    let num: f64 = x.iter().map(|v| v * v).sum();
    let den: f64 = x_hat.iter().map(|v| v * v).sum();
    if den <= 0.0 {
        return Err(Error::Data("reconstruction has zero energy".to_string()));
    }
    if num <= 0.0 {
        eprintln!("warning: zero-energy original signal, ORSR floored at {ORSR_FLOOR_DB} dB");
        return Ok(ORSR_FLOOR_DB);
    }
    Ok(10.0 * (num / den).log10())
}

/// Extract one raw feature pair per frame, order preserved. Frames must be
/// normalized with the model's statistics; reconstruction uses the
/// deterministic inference path.
pub fn extract(frames: &[Frame], model: &VaeModel) -> Result<Vec<FeatureVector>> {
    frames
        .iter()
        .map(|frame| {
            let x_hat = reconstruct(model, frame)?;
            Ok(FeatureVector {
                mse: mse_feature(&frame.values, x_hat.as_slice())?,
                orsr_db: orsr_feature(&frame.values, x_hat.as_slice())?,
                sensor: frame.source_sensor,
                case: frame.source_case,
                index: frame.index,
            })
        })
        .collect()
}

/// Componentwise zero-mean unit-variance scaling, fitted on undamaged
/// training features only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureScaler {
    pub mean: [f64; 2],
    pub std: [f64; 2],
}

impl FeatureScaler {
    pub fn fit(features: &[FeatureVector]) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Data("cannot fit a scaler on zero features".to_string()));
        }
        let n = features.len() as f64;
        let mean = [
            features.iter().map(|f| f.mse).sum::<f64>() / n,
            features.iter().map(|f| f.orsr_db).sum::<f64>() / n,
        ];
        let var = [
            features.iter().map(|f| (f.mse - mean[0]).powi(2)).sum::<f64>() / n,
            features.iter().map(|f| (f.orsr_db - mean[1]).powi(2)).sum::<f64>() / n,
        ];
        Ok(Self {
            mean,
            std: [var[0].sqrt().max(1e-12), var[1].sqrt().max(1e-12)],
        })
    }

    pub fn transform(&self, feature: &FeatureVector) -> [f64; 2] {
        [
            (feature.mse - self.mean[0]) / self.std[0],
            (feature.orsr_db - self.mean[1]) / self.std[1],
        ]
    }

    pub fn transform_all(&self, features: &[FeatureVector]) -> Vec<Vec<f64>> {
        features
            .iter()
            .map(|f| self.transform(f).to_vec())
            .collect()
    }
}

/// CSV dump (`sensor,case,index,mse,orsr_db`) for scatter plotting.
pub fn features_to_csv(features: &[FeatureVector]) -> String {
    let mut out = String::from("sensor,case,index,mse,orsr_db\n");
    for f in features {
        out.push_str(&format!("{},{},{},{},{}\n", f.sensor, f.case, f.index, f.mse, f.orsr_db));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mse_of_identical_signals_is_zero() {
        assert_eq!(mse_feature(&[0.2, 0.7], &[0.2, 0.7]).unwrap(), 0.0);
    }

    #[test]
    fn mse_hand_computed_values() {
        assert_eq!(mse_feature(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        let got = mse_feature(&[1.0, 2.0, 3.0], &[1.0, 2.0, 5.0]).unwrap();
        assert!((got - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mse_rejects_length_mismatch() {
        assert!(mse_feature(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn orsr_of_identical_signals_is_zero_db() {
        assert_eq!(orsr_feature(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 0.0);
    }

    #[test]
    fn orsr_energy_ratio_in_decibels() {
        // Σx² = 100, Σx̂² = 10 → 10 dB.
        let x = [10.0, 0.0];
        let x_hat = [1.0, 3.0];
        assert!((orsr_feature(&x, &x_hat).unwrap() - 10.0).abs() < 1e-12);
        assert!((orsr_feature(&x_hat, &x).unwrap() + 10.0).abs() < 1e-12);
    }

    #[test]
    fn orsr_zero_energy_original_is_floored() {
        let got = orsr_feature(&[0.0, 0.0], &[0.5, 0.5]).unwrap();
        assert_eq!(got, ORSR_FLOOR_DB);
    }

    fn feature(mse: f64, orsr: f64) -> FeatureVector {
        FeatureVector {
            mse,
            orsr_db: orsr,
            sensor: 1,
            case: 1,
            index: 0,
        }
    }

    #[test]
    fn scaler_standardizes_to_zero_mean_unit_variance() {
        let features: Vec<FeatureVector> = (0..50)
            .map(|i| feature(0.01 + 0.001 * i as f64, -3.0 + 0.2 * i as f64))
            .collect();
        let scaler = FeatureScaler::fit(&features).unwrap();
        let transformed = scaler.transform_all(&features);
        for dim in 0..2 {
            let mean: f64 = transformed.iter().map(|t| t[dim]).sum::<f64>() / 50.0;
            let var: f64 = transformed.iter().map(|t| (t[dim] - mean).powi(2)).sum::<f64>() / 50.0;
            assert!(mean.abs() < 1e-10, "dim {dim} mean {mean}");
            assert!((var - 1.0).abs() < 1e-10, "dim {dim} var {var}");
        }
    }

    #[test]
    fn csv_dump_layout() {
        let csv = features_to_csv(&[FeatureVector {
            mse: 0.25,
            orsr_db: -1.5,
            sensor: 2,
            case: 3,
            index: 7,
        }]);
        assert_eq!(csv, "sensor,case,index,mse,orsr_db\n2,3,7,0.25,-1.5\n");
    }

    proptest! {
        #[test]
        fn mse_scales_quadratically(
            x in proptest::collection::vec(-10.0f64..10.0, 1..32),
            alpha in 0.1f64..10.0,
        ) {
            let x_hat: Vec<f64> = x.iter().map(|v| v * 0.5 + 0.1).collect();
            let base = mse_feature(&x, &x_hat).unwrap();
            let sx: Vec<f64> = x.iter().map(|v| alpha * v).collect();
            let sx_hat: Vec<f64> = x_hat.iter().map(|v| alpha * v).collect();
            let scaled = mse_feature(&sx, &sx_hat).unwrap();
            prop_assert!((scaled - alpha * alpha * base).abs() <= 1e-9 * scaled.abs().max(1.0));
        }

        #[test]
        fn orsr_is_antisymmetric(
            (x, y) in (1usize..32).prop_flat_map(|n| (
                proptest::collection::vec(0.1f64..5.0, n),
                proptest::collection::vec(0.1f64..5.0, n),
            )),
        ) {
            let ab = orsr_feature(&x, &y).unwrap();
            let ba = orsr_feature(&y, &x).unwrap();
            prop_assert!((ab + ba).abs() < 1e-10);
        }
    }
}
