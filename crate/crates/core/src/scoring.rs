//! Probability-of-damage aggregation and latent-space diagnostics.
//!
//! Per (sensor, case) the PoD is the percentage of frames the one-class SVM
//! classifies as outliers; per case the PoD values are averaged over sensors
//! (with spread statistics). The latent diagnostics fit a diagonal Gaussian
//! to the encoder means of each case and report its KL divergence from the
//! undamaged case, which grows with damage severity.

use std::collections::BTreeMap;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::features::{extract, FeatureScaler};
use crate::ocsvm::{classify, Classification, OcSvmModel};
use crate::signals::{apply_normalization, Frame, NormalizationStats};
use crate::vae::{encode, kl_to_standard_normal, VaeModel};

/// Everything trained for one sensor, the unit the bundle persists.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    pub sensor_id: u32,
    pub normalization: NormalizationStats,
    pub vae: VaeModel,
    pub scaler: FeatureScaler,
    pub ocsvm: OcSvmModel,
    /// Frame indices of the undamaged recording withheld at training time;
    /// the case-1 report column is computed on exactly these frames.
    pub holdout_indices: Vec<usize>,
}

/// `100·c/n` percent.
pub fn pod(outlier_count: usize, frame_count: usize) -> Result<f64> {
    if frame_count == 0 {
        return Err(Error::Data("PoD of zero frames".to_string()));
    }
    if outlier_count > frame_count {
        return Err(Error::Data(format!(
            "outlier count {outlier_count} exceeds frame count {frame_count}"
        )));
    }
    Ok(100.0 * outlier_count as f64 / frame_count as f64)
}

/// Mean, population standard deviation and range of per-sensor PoD values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PodSummary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

/// Unweighted average over sensors with spread statistics.
pub fn pod_avg(pods: &[f64]) -> Result<PodSummary> {
    if pods.is_empty() {
        return Err(Error::Data("PoD average of zero sensors".to_string()));
    }
    let n = pods.len() as f64;
    let mean = pods.iter().sum::<f64>() / n;
    let var = pods.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n;
    Ok(PodSummary {
        mean,
        std: var.sqrt(),
        min: pods.iter().cloned().fold(f64::INFINITY, f64::min),
        max: pods.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Diagonal Gaussian fitted to the encoder means of one case.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSummary {
    pub mean: Vec<f64>,
    /// Population variances, floored at 1e-12.
    pub variance: Vec<f64>,
}

/// Fit the componentwise sample mean and population variance of the encoder
/// μ vectors over the given (normalized) frames.
pub fn latent_summary(model: &VaeModel, frames: &[Frame]) -> Result<LatentSummary> {
    if frames.len() < 2 {
        return Err(Error::Data(format!(
            "latent summary needs at least 2 frames, got {}",
            frames.len()
        )));
    }
    let l = model.latent_dim;
    let mut mean = vec![0.0; l];
    let mut mus: Vec<DVector<f64>> = Vec::with_capacity(frames.len());
    for frame in frames {
        let (mu, _) = encode(model, frame)?;
        for d in 0..l {
            mean[d] += mu[d];
        }
        mus.push(mu);
    }
    let n = frames.len() as f64;
    for m in &mut mean {
        *m /= n;
    }
    let mut variance = vec![0.0; l];
    for mu in &mus {
        for d in 0..l {
            let diff = mu[d] - mean[d];
            variance[d] += diff * diff;
        }
    }
    for v in &mut variance {
        *v = (*v / n).max(1e-12);
    }
    Ok(LatentSummary { mean, variance })
}

/// Closed-form KL divergence between diagonal Gaussians:
/// `KL(a‖b) = ½ Σ_d [ln(σ²_b/σ²_a) + (σ²_a + (μ_a−μ_b)²)/σ²_b − 1]`.
pub fn kl_between(a: &LatentSummary, b: &LatentSummary) -> Result<f64> {
    if a.mean.len() != b.mean.len() {
        return Err(Error::Data(format!(
            "latent dimensions differ: {} vs {}",
            a.mean.len(),
            b.mean.len()
        )));
    }
    let mut total = 0.0;
    for d in 0..a.mean.len() {
        let va = a.variance[d];
        let vb = b.variance[d];
        let dmu = a.mean[d] - b.mean[d];
        total += (vb / va).ln() + (va + dmu * dmu) / vb - 1.0;
    }
    Ok(0.5 * total)
}

/// How the per-case KL column is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KlMode {
    /// KL(damaged-case Gaussian ‖ undamaged-case Gaussian) over encoder means.
    CaseToUndamaged,
    /// Mean per-frame KL of the posterior from the unit-Gaussian prior.
    MeanPriorKl,
}

impl KlMode {
    pub fn name(self) -> &'static str {
        match self {
            KlMode::CaseToUndamaged => "cases",
            KlMode::MeanPriorKl => "prior",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "cases" => Ok(KlMode::CaseToUndamaged),
            "prior" => Ok(KlMode::MeanPriorKl),
            other => Err(Error::Config(format!("unknown KL mode {other:?}"))),
        }
    }
}

/// One cell of the PoD matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PodEntry {
    pub sensor_id: u32,
    pub case_id: u32,
    pub pod_percent: f64,
    pub frame_count: usize,
    pub outlier_count: usize,
}

/// PoD matrix over sensors × cases with the per-case averages.
#[derive(Debug, Clone, PartialEq)]
pub struct PodReport {
    pub sensor_ids: Vec<u32>,
    pub case_ids: Vec<u32>,
    /// Row-major: one entry per (sensor, case), sensors outermost.
    pub entries: Vec<PodEntry>,
    pub averages: Vec<(u32, PodSummary)>,
}

impl PodReport {
    pub fn entry(&self, sensor_id: u32, case_id: u32) -> Option<&PodEntry> {
        self.entries
            .iter()
            .find(|e| e.sensor_id == sensor_id && e.case_id == case_id)
    }

    pub fn average(&self, case_id: u32) -> Option<&PodSummary> {
        self.averages.iter().find(|(c, _)| *c == case_id).map(|(_, s)| s)
    }

    /// Aligned plain-text table: one row per sensor, one column per case,
    /// PoD to two decimals, average row at the bottom.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<10}", "Sensor"));
        for case in &self.case_ids {
            out.push_str(&format!("{:>10}", format!("Case {case}")));
        }
        out.push('\n');
        for &sensor in &self.sensor_ids {
            out.push_str(&format!("{sensor:<10}"));
            for &case in &self.case_ids {
                let entry = self.entry(sensor, case).expect("complete matrix");
                out.push_str(&format!("{:>10.2}", entry.pod_percent));
            }
            out.push('\n');
        }
        out.push_str(&format!("{:<10}", "PoD_avg"));
        for &case in &self.case_ids {
            let summary = self.average(case).expect("complete averages");
            out.push_str(&format!("{:>10.2}", summary.mean));
        }
        out.push('\n');
        out.push_str(&format!("{:<10}", "std"));
        for &case in &self.case_ids {
            let summary = self.average(case).expect("complete averages");
            out.push_str(&format!("{:>10.2}", summary.std));
        }
        out.push('\n');
        out
    }

    /// CSV twin of [`PodReport::to_text`] with full-precision values.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sensor");
        for case in &self.case_ids {
            out.push_str(&format!(",case_{case}"));
        }
        out.push('\n');
        for &sensor in &self.sensor_ids {
            out.push_str(&format!("{sensor}"));
            for &case in &self.case_ids {
                out.push_str(&format!(",{}", self.entry(sensor, case).expect("complete matrix").pod_percent));
            }
            out.push('\n');
        }
        for (label, field) in [
            ("pod_avg", 0usize),
            ("pod_std", 1),
            ("pod_min", 2),
            ("pod_max", 3),
        ] {
            out.push_str(label);
            for &case in &self.case_ids {
                let s = self.average(case).expect("complete averages");
                let value = match field {
                    0 => s.mean,
                    1 => s.std,
                    2 => s.min,
                    _ => s.max,
                };
                out.push_str(&format!(",{value}"));
            }
            out.push('\n');
        }
        out
    }
}

/// KL divergence of every damaged case from the undamaged case.
#[derive(Debug, Clone, PartialEq)]
pub struct KlTable {
    pub sensor_ids: Vec<u32>,
    /// Damaged cases only.
    pub case_ids: Vec<u32>,
    /// Row-major (sensor, case) KL values.
    pub entries: Vec<(u32, u32, f64)>,
    /// Mean over sensors per case.
    pub averages: Vec<(u32, f64)>,
}

impl KlTable {
    pub fn value(&self, sensor_id: u32, case_id: u32) -> Option<f64> {
        self.entries
            .iter()
            .find(|(s, c, _)| *s == sensor_id && *c == case_id)
            .map(|(_, _, v)| *v)
    }

    pub fn average(&self, case_id: u32) -> Option<f64> {
        self.averages.iter().find(|(c, _)| *c == case_id).map(|(_, v)| *v)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<10}", "Sensor"));
        for case in &self.case_ids {
            out.push_str(&format!("{:>10}", format!("Case {case}")));
        }
        out.push('\n');
        for &sensor in &self.sensor_ids {
            out.push_str(&format!("{sensor:<10}"));
            for &case in &self.case_ids {
                out.push_str(&format!("{:>10.3}", self.value(sensor, case).expect("complete table")));
            }
            out.push('\n');
        }
        out.push_str(&format!("{:<10}", "KL_avg"));
        for &case in &self.case_ids {
            out.push_str(&format!("{:>10.3}", self.average(case).expect("complete averages")));
        }
        out.push('\n');
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("sensor");
        for case in &self.case_ids {
            out.push_str(&format!(",case_{case}"));
        }
        out.push('\n');
        for &sensor in &self.sensor_ids {
            out.push_str(&format!("{sensor}"));
            for &case in &self.case_ids {
                out.push_str(&format!(",{}", self.value(sensor, case).expect("complete table")));
            }
            out.push('\n');
        }
        out.push_str("kl_avg");
        for &case in &self.case_ids {
            out.push_str(&format!(",{}", self.average(case).expect("complete averages")));
        }
        out.push('\n');
        out
    }
}

/// Classify every frame of one case for one sensor and count outliers.
/// Frames are raw; normalization and feature scaling use the sensor's stored
/// statistics.
pub fn score_case(sensor: &SensorModel, frames: &[Frame]) -> Result<PodEntry> {
    if frames.is_empty() {
        return Err(Error::Data(format!(
            "sensor {}: no frames to score",
            sensor.sensor_id
        )));
    }
    let case_id = frames[0].source_case;
    let normalized: Vec<Frame> = frames
        .iter()
        .map(|f| apply_normalization(f, &sensor.normalization))
        .collect();
    let features = extract(&normalized, &sensor.vae)?;
    let points = sensor.scaler.transform_all(&features);
    let outlier_count = points
        .iter()
        .filter(|p| classify(&sensor.ocsvm, p) == Classification::Outlier)
        .count();
    Ok(PodEntry {
        sensor_id: sensor.sensor_id,
        case_id,
        pod_percent: pod(outlier_count, frames.len())?,
        frame_count: frames.len(),
        outlier_count,
    })
}

/// Build the full PoD matrix and KL table from raw per-case, per-sensor
/// frames.
///
/// `case_frames` maps case id → (sensor id → raw frames). The undamaged
/// column (case 1) is restricted to each sensor's stored holdout indices;
/// the latent KL table is computed over all frames of each case.
pub fn build_report(
    sensors: &[SensorModel],
    case_frames: &BTreeMap<u32, BTreeMap<u32, Vec<Frame>>>,
    kl_mode: KlMode,
) -> Result<(PodReport, KlTable)> {
    if sensors.is_empty() {
        return Err(Error::Data("no sensor models".to_string()));
    }
    let sensor_ids: Vec<u32> = sensors.iter().map(|s| s.sensor_id).collect();
    let case_ids: Vec<u32> = case_frames.keys().copied().collect();

    let mut entries = Vec::new();
    for sensor in sensors {
        for (&case_id, by_sensor) in case_frames {
            let frames = by_sensor.get(&sensor.sensor_id).ok_or_else(|| {
                Error::Data(format!(
                    "case {case_id} has no frames for sensor {}",
                    sensor.sensor_id
                ))
            })?;
            let scored: Vec<Frame> = if case_id == 1 {
                frames
                    .iter()
                    .filter(|f| sensor.holdout_indices.contains(&f.index))
                    .cloned()
                    .collect()
            } else {
                frames.clone()
            };
            entries.push(score_case(sensor, &scored)?);
        }
    }

    let mut averages = Vec::new();
    for &case_id in &case_ids {
        let pods: Vec<f64> = entries
            .iter()
            .filter(|e| e.case_id == case_id)
            .map(|e| e.pod_percent)
            .collect();
        averages.push((case_id, pod_avg(&pods)?));
    }
    let report = PodReport {
        sensor_ids: sensor_ids.clone(),
        case_ids: case_ids.clone(),
        entries,
        averages,
    };

    let kl_table = build_kl_table(sensors, case_frames, kl_mode)?;
    Ok((report, kl_table))
}

fn build_kl_table(
    sensors: &[SensorModel],
    case_frames: &BTreeMap<u32, BTreeMap<u32, Vec<Frame>>>,
    kl_mode: KlMode,
) -> Result<KlTable> {
    let damaged_cases: Vec<u32> = case_frames.keys().copied().filter(|&c| c != 1).collect();
    let mut entries = Vec::new();
    for sensor in sensors {
        let undamaged = case_frames
            .get(&1)
            .and_then(|m| m.get(&sensor.sensor_id))
            .ok_or_else(|| Error::Data("KL table needs undamaged (case 1) frames".to_string()))?;
        let undamaged_norm: Vec<Frame> = undamaged
            .iter()
            .map(|f| apply_normalization(f, &sensor.normalization))
            .collect();
        let base_summary = latent_summary(&sensor.vae, &undamaged_norm)?;
        for &case_id in &damaged_cases {
            let frames = case_frames[&case_id]
                .get(&sensor.sensor_id)
                .ok_or_else(|| Error::Data(format!("case {case_id} missing sensor {}", sensor.sensor_id)))?;
            let normalized: Vec<Frame> = frames
                .iter()
                .map(|f| apply_normalization(f, &sensor.normalization))
                .collect();
            let value = match kl_mode {
                KlMode::CaseToUndamaged => {
                    let summary = latent_summary(&sensor.vae, &normalized)?;
                    kl_between(&summary, &base_summary)?
                }
                KlMode::MeanPriorKl => {
                    let mut total = 0.0;
                    for frame in &normalized {
                        let (mu, log_var) = encode(&sensor.vae, frame)?;
                        total += kl_to_standard_normal(&mu, &log_var);
                    }
                    total / normalized.len() as f64
                }
            };
            entries.push((sensor.sensor_id, case_id, value));
        }
    }
    let mut averages = Vec::new();
    for &case_id in &damaged_cases {
        let values: Vec<f64> = entries
            .iter()
            .filter(|(_, c, _)| *c == case_id)
            .map(|(_, _, v)| *v)
            .collect();
        averages.push((case_id, values.iter().sum::<f64>() / values.len() as f64));
    }
    Ok(KlTable {
        sensor_ids: sensors.iter().map(|s| s.sensor_id).collect(),
        case_ids: damaged_cases,
        entries,
        averages,
    })
}
