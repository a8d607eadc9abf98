//! Sensor records, framing, min-max normalization and data splits.
//!
//! Raw multi-sensor acceleration histories are segmented into fixed-length,
//! non-overlapping frames, normalized to [0, 1] with statistics fitted on
//! undamaged training data only, and partitioned into holdout and k-fold
//! splits. All splits are deterministic under a fixed seed.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One sensor's raw acceleration time series with sampling metadata.
#[derive(Debug, Clone)]
pub struct SensorRecord {
    /// Integer sensor label (CSV column header).
    pub sensor_id: u32,
    /// Acceleration samples in acquisition order.
    pub samples: Vec<f64>,
    /// Sampling rate in Hz.
    pub sampling_rate_hz: f64,
}

impl SensorRecord {
    /// Build a record, validating that samples are non-empty and finite and
    /// the sampling rate is positive.
    pub fn new(sensor_id: u32, samples: Vec<f64>, sampling_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Data(format!("sensor {sensor_id}: empty sample list")));
        }
        if !(sampling_rate_hz > 0.0) {
            return Err(Error::Data(format!(
                "sensor {sensor_id}: sampling rate must be positive, got {sampling_rate_hz}"
            )));
        }
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "sensor {sensor_id}: non-finite sample at position {pos}"
            )));
        }
        Ok(Self {
            sensor_id,
            samples,
            sampling_rate_hz,
        })
    }

    /// Number of samples in the record.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// A fixed-length signal window, the unit of training and scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    /// Window samples; length equals the configured frame length.
    pub values: Vec<f64>,
    /// Sensor the window was cut from.
    pub source_sensor: u32,
    /// Structural case the recording belongs to (1 = undamaged).
    pub source_case: u32,
    /// Ordinal of the window within its sensor record.
    pub index: usize,
}

/// Per-sensor min-max statistics used to map samples into [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationStats {
    pub min: f64,
    pub max: f64,
}

impl NormalizationStats {
    /// Validate that the range is non-degenerate.
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(max > min) {
            return Err(Error::Data(format!(
                "degenerate normalization range: min={min}, max={max}"
            )));
        }
        Ok(Self { min, max })
    }

    pub fn span(&self) -> f64 {
        self.max - self.min
    }
}

/// Split parameters shared by the holdout and k-fold partitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitPlan {
    /// Number of cross-validation folds, at least 2.
    pub fold_count: usize,
    /// Fraction of frames withheld for final evaluation, in (0, 1).
    pub holdout_fraction: f64,
    /// Seed driving every shuffle.
    pub seed: u64,
}

impl SplitPlan {
    pub fn validate(&self) -> Result<()> {
        if self.fold_count < 2 {
            return Err(Error::Config(format!(
                "fold count must be at least 2, got {}",
                self.fold_count
            )));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::Config(format!(
                "holdout fraction must lie in (0, 1), got {}",
                self.holdout_fraction
            )));
        }
        Ok(())
    }
}

/// Load a multi-sensor CSV: a header row of integer sensor identifiers
/// followed by one comma-separated row of accelerations per time step, one
/// column per sensor. Returns one record per column with sample order
/// preserved.
pub fn load_csv(path: &Path, sampling_rate_hz: f64) -> Result<Vec<SensorRecord>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    parse_csv(&text, sampling_rate_hz)
        .map_err(|e| match e {
            Error::Data(msg) => Error::Data(format!("{}: {msg}", path.display())),
            other => other,
        })
}

/// Parse the CSV body of [`load_csv`] from an in-memory string.
pub fn parse_csv(text: &str, sampling_rate_hz: f64) -> Result<Vec<SensorRecord>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Data("empty file".to_string()))?;
    let sensor_ids: Vec<u32> = header
        .split(',')
        .enumerate()
        .map(|(col, field)| {
            field.trim().parse::<u32>().map_err(|_| {
                Error::Data(format!(
                    "line 1, column {}: header entry {:?} is not an integer sensor id",
                    col + 1,
                    field.trim()
                ))
            })
        })
        .collect::<Result<_>>()?;
    if sensor_ids.is_empty() {
        return Err(Error::Data("header has no sensor columns".to_string()));
    }

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); sensor_ids.len()];
    let mut body_rows = 0usize;
    for (line_idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != sensor_ids.len() {
            return Err(Error::Data(format!(
                "line {}: expected {} columns, found {}",
                line_idx + 1,
                sensor_ids.len(),
                fields.len()
            )));
        }
        for (col, field) in fields.iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| {
                Error::Data(format!(
                    "line {}, column {}: {:?} is not a number",
                    line_idx + 1,
                    col + 1,
                    field.trim()
                ))
            })?;
            if !value.is_finite() {
                return Err(Error::Data(format!(
                    "line {}, column {}: non-finite value",
                    line_idx + 1,
                    col + 1
                )));
            }
            columns[col].push(value);
        }
        body_rows += 1;
    }
    if body_rows == 0 {
        return Err(Error::Data("no data rows after the header".to_string()));
    }

    sensor_ids
        .into_iter()
        .zip(columns)
        .map(|(id, samples)| SensorRecord::new(id, samples, sampling_rate_hz))
        .collect()
}

/// Cut a record into exactly `⌊len/s⌋` contiguous non-overlapping frames of
/// length `s`, discarding the trailing remainder.
pub fn window(record: &SensorRecord, s: usize, source_case: u32) -> Result<Vec<Frame>> {
    if s == 0 {
        return Err(Error::Config("frame length must be at least 1".to_string()));
    }
    let n_frames = record.samples.len() / s;
    let frames = (0..n_frames)
        .map(|i| Frame {
            values: record.samples[i * s..(i + 1) * s].to_vec(),
            source_sensor: record.sensor_id,
            source_case,
            index: i,
        })
        .collect();
    Ok(frames)
}

/// Fit min-max statistics over every value of the given frames.
///
/// Fit on undamaged training frames only; the same statistics are reused for
/// all cases at scoring time.
pub fn fit_normalization(frames: &[Frame]) -> Result<NormalizationStats> {
    if frames.is_empty() {
        return Err(Error::Data("cannot fit normalization on zero frames".to_string()));
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for frame in frames {
        for &v in &frame.values {
            min = min.min(v);
            max = max.max(v);
        }
    }
    NormalizationStats::new(min, max)
}

/// Map each value through `(v - min)/(max - min)`, clamping out-of-range
/// values to [0, 1] so that damaged signals exceeding the fitted amplitude
/// range remain scorable.
pub fn apply_normalization(frame: &Frame, stats: &NormalizationStats) -> Frame {
    let span = stats.span();
    Frame {
        values: frame
            .values
            .iter()
            .map(|&v| ((v - stats.min) / span).clamp(0.0, 1.0))
            .collect(),
        source_sensor: frame.source_sensor,
        source_case: frame.source_case,
        index: frame.index,
    }
}

/// Split frames into disjoint (train, test) sets with `⌈fraction·N⌉` test
/// frames, deterministically under the seed.
pub fn holdout_split(
    frames: &[Frame],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<Frame>, Vec<Frame>)> {
    if frames.is_empty() {
        return Err(Error::Data("cannot split zero frames".to_string()));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "holdout fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let n = frames.len();
    let test_size = ((fraction * n as f64).ceil() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = order[..test_size].iter().map(|&i| frames[i].clone()).collect();
    let train = order[test_size..].iter().map(|&i| frames[i].clone()).collect();
    Ok((train, test))
}

/// Shuffled index partition behind [`kfold`]: `(train, validation)` index
/// pairs with balanced fold sizes.
pub fn fold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    if n < k {
        return Err(Error::Data(format!("cannot make {k} folds from {n} items")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let base = n / k;
    let extra = n % k;
    let mut pairs = Vec::with_capacity(k);
    let mut start = 0usize;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        let validation = order[start..start + size].to_vec();
        let train: Vec<usize> = order[..start]
            .iter()
            .chain(order[start + size..].iter())
            .copied()
            .collect();
        pairs.push((train, validation));
        start += size;
    }
    Ok(pairs)
}

/// Shuffle frames into `k` cross-validation folds whose sizes differ by at
/// most one. Returns `(train, validation)` pairs; the validation folds are
/// disjoint and their union is the input.
pub fn kfold(frames: &[Frame], k: usize, seed: u64) -> Result<Vec<(Vec<Frame>, Vec<Frame>)>> {
    let pairs = fold_indices(frames.len(), k, seed)?;
    Ok(pairs
        .into_iter()
        .map(|(train, validation)| {
            (
                train.iter().map(|&i| frames[i].clone()).collect(),
                validation.iter().map(|&i| frames[i].clone()).collect(),
            )
        })
        .collect())
}

/// Render frames in the line-per-frame debug format:
/// `sensor_id,case_id,v1,...,vs`.
pub fn export_frames(frames: &[Frame]) -> String {
    let mut out = String::new();
    for frame in frames {
        out.push_str(&format!("{},{}", frame.source_sensor, frame.source_case));
        for v in &frame.values {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}
