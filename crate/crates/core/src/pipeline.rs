//! End-to-end command orchestration.
//!
//! The four pipeline stages behind the CLI verbs: `generate` writes the
//! synthetic scenario dataset, `train` builds one (VAE, OC-SVM) pair per
//! sensor from the undamaged recording, `score` emits the PoD and KL tables
//! for every case, and `fdd` produces the modal-frequency baseline table.
//! Per-sensor work runs in parallel; every output is a pure function of
//! (config, seeds, data).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::bundle::ModelBundle;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fdd::{estimate_modes, frequency_shift_table, ModeShift};
use crate::features::{extract, FeatureScaler};
use crate::model_selection::{
    cv_objective_ocsvm, cv_objective_vae, history_to_jsonl, search, Direction, OcSvmSearchSpace,
    SearchStrategy, VaeSearchSpace,
};
use crate::scoring::{build_report, KlTable, PodReport, SensorModel};
use crate::seeds::mix_seed;
use crate::signals::{
    apply_normalization, fit_normalization, holdout_split, load_csv, window, Frame, SensorRecord,
};
use crate::synth::{add_measurement_noise, analytic_modes, simulate};
use crate::vae::{train, VaeMode};

/// File name of one scenario's recording.
pub fn case_file_name(case_id: u32) -> String {
    format!("case_{case_id}.csv")
}

/// Write the scenario ladder as CSVs plus a manifest of ground truth.
///
/// The manifest holds, per case, the true stiffness multipliers, the scalar
/// severity and the analytic modal frequencies of the damaged structure.
pub fn cmd_generate(config: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::Data(format!("cannot create {}: {e}", out_dir.display())))?;
    let model = config.structural_model()?;
    let stories = model.story_count();

    let mut written = Vec::new();
    let mut manifest = String::from("case,severity");
    for s in 1..=stories {
        manifest.push_str(&format!(",mult_{s}"));
    }
    for m in 1..=stories {
        manifest.push_str(&format!(",f_{m}_hz"));
    }
    manifest.push('\n');

    for scenario in &config.scenarios {
        let spec = config.excitation_spec(scenario.scenario_id)?;
        // Run the shaker through the startup transient and keep the steady
        // tail: three decay constants of the damaged first mode, capped.
        let damaged = model.with_scenario(scenario)?;
        let omega1 = analytic_modes(&damaged)[0].frequency_hz * std::f64::consts::TAU;
        let warmup_s = (3.0 / (model.damping_ratio.max(1e-3) * omega1)).min(45.0);
        let warmup_samples = (warmup_s * spec.sampling_rate_hz).round() as usize;
        let extended = crate::synth::ExcitationSpec {
            duration_s: spec.duration_s + warmup_samples as f64 / spec.sampling_rate_hz,
            ..spec
        };
        let clean: Vec<SensorRecord> = simulate(&model, scenario, &extended, config.force_story)?
            .into_iter()
            .map(|r| {
                SensorRecord::new(
                    r.sensor_id,
                    r.samples[warmup_samples..].to_vec(),
                    r.sampling_rate_hz,
                )
            })
            .collect::<Result<_>>()?;
        let noisy = add_measurement_noise(
            &clean,
            config.snr_db,
            mix_seed(config.split_seed, 0x4E01_5E00 + scenario.scenario_id as u64),
        );
        let path = out_dir.join(case_file_name(scenario.scenario_id));
        std::fs::write(&path, records_to_csv(&noisy))
            .map_err(|e| Error::Data(format!("cannot write {}: {e}", path.display())))?;
        written.push(path);

        manifest.push_str(&format!("{},{}", scenario.scenario_id, scenario.severity()));
        for m in &scenario.stiffness_multipliers {
            manifest.push_str(&format!(",{m}"));
        }
        let damaged = model.with_scenario(scenario)?;
        for mode in analytic_modes(&damaged) {
            manifest.push_str(&format!(",{}", mode.frequency_hz));
        }
        manifest.push('\n');
    }
    let manifest_path = out_dir.join("manifest.csv");
    std::fs::write(&manifest_path, manifest)
        .map_err(|e| Error::Data(format!("cannot write {}: {e}", manifest_path.display())))?;
    written.push(manifest_path);
    Ok(written)
}

fn records_to_csv(records: &[SensorRecord]) -> String {
    let mut out = records
        .iter()
        .map(|r| r.sensor_id.to_string())
        .collect::<Vec<_>>()
        .join(",");
    out.push('\n');
    let len = records[0].len();
    for row in 0..len {
        let mut first = true;
        for record in records {
            if !first {
                out.push(',');
            }
            out.push_str(&record.samples[row].to_string());
            first = false;
        }
        out.push('\n');
    }
    out
}

/// Training options from the CLI.
#[derive(Debug, Clone)]
pub struct TrainOptions {
    /// Run the hyperparameter search with this budget per stage instead of
    /// the fixed best-found configuration (the default fast path).
    pub search_trials: Option<usize>,
    pub strategy: SearchStrategy,
    /// Train the deterministic plain-autoencoder baseline.
    pub ae_baseline: bool,
    /// Override the config's master seed.
    pub seed_override: Option<u64>,
    /// Where search histories are written (one JSONL per sensor and stage).
    pub history_dir: Option<PathBuf>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            search_trials: None,
            strategy: SearchStrategy::Random,
            ae_baseline: false,
            seed_override: None,
            history_dir: None,
        }
    }
}

/// Train one (VAE, OC-SVM) pair per sensor on the undamaged recording and
/// assemble the bundle.
pub fn cmd_train(config: &RunConfig, data_dir: &Path, options: &TrainOptions) -> Result<ModelBundle> {
    let mut config = config.clone();
    if let Some(seed) = options.seed_override {
        config.split_seed = seed;
    }
    config.validate()?;

    let undamaged_path = data_dir.join(case_file_name(1));
    let records = load_csv(&undamaged_path, config.sampling_rate_hz)?;

    let sensors: Result<Vec<SensorModel>> = records
        .par_iter()
        .map(|record| train_sensor(&config, record, options))
        .collect();
    let mut sensors = sensors?;
    sensors.sort_by_key(|s| s.sensor_id);
    Ok(ModelBundle { config, sensors })
}

fn train_sensor(config: &RunConfig, record: &SensorRecord, options: &TrainOptions) -> Result<SensorModel> {
    let sensor_id = record.sensor_id;
    let sensor_seed = mix_seed(config.split_seed, sensor_id as u64);
    let with_context = |e: Error| match e {
        Error::Config(m) => Error::Config(format!("sensor {sensor_id}: {m}")),
        Error::Data(m) => Error::Data(format!("sensor {sensor_id}: {m}")),
        Error::Numerical(m) => Error::Numerical(format!("sensor {sensor_id}: {m}")),
    };
    train_sensor_inner(config, record, options, sensor_seed).map_err(with_context)
}

fn train_sensor_inner(
    config: &RunConfig,
    record: &SensorRecord,
    options: &TrainOptions,
    sensor_seed: u64,
) -> Result<SensorModel> {
    let frames = window(record, config.frame_len, 1)?;
    let (train_frames, holdout_frames) =
        holdout_split(&frames, config.holdout_fraction, mix_seed(sensor_seed, 0x0140))?;
    let holdout_indices: Vec<usize> = holdout_frames.iter().map(|f| f.index).collect();

    let normalization = fit_normalization(&train_frames)?;
    let normalized: Vec<Frame> = train_frames
        .iter()
        .map(|f| apply_normalization(f, &normalization))
        .collect();

    let mode = if options.ae_baseline {
        VaeMode::Deterministic
    } else {
        VaeMode::Variational
    };

    // Stage 1: autoencoder configuration (fixed fast path or k-fold search).
    let mut arch = config.vae_architecture();
    let mut train_template = config.train_config(mix_seed(sensor_seed, 0x7A11));
    if let Some(budget) = options.search_trials {
        let space = VaeSearchSpace::default();
        let cv_seed = mix_seed(sensor_seed, 0xCF01);
        let template = train_template;
        let outcome = search(
            &space,
            |candidate| cv_objective_vae(candidate, &normalized, config.kfold_k, cv_seed, &template, normalization),
            budget.max(1),
            options.strategy,
            Direction::Minimize,
            mix_seed(sensor_seed, 0x5EA0),
        )?;
        if let Some(dir) = &options.history_dir {
            write_history(dir, record.sensor_id, "vae", &history_to_jsonl(&outcome.history)?)?;
        }
        let best = &outcome.best.config;
        arch.hidden_layers = best.hidden_layers;
        arch.hidden_neurons = best.hidden_neurons;
        arch.activation = best.activation_kind()?;
        arch.latent_dim = best.latent_dim;
        train_template.learning_rate = best.learning_rate;
        train_template.optimizer = best.optimizer_kind()?;
    }

    // Final autoencoder on all training frames.
    let (vae, _) = train(&normalized, &arch, mode, &train_template, normalization)?;

    // Stage 2: features frozen, then the one-class SVM. The boundary is
    // calibrated on out-of-fold features: each training frame is featured by
    // a fold model that never saw it, because a reconstruction model scores
    // its own training frames optimistically and a boundary fitted on those
    // flags a large share of fresh undamaged frames as outliers.
    let features = out_of_fold_features(&normalized, &arch, mode, &train_template, normalization, sensor_seed)?;
    let scaler = FeatureScaler::fit(&features)?;
    let points = scaler.transform_all(&features);

    let (nu, kernel) = if let Some(budget) = options.search_trials {
        let space = OcSvmSearchSpace::default();
        let cv_seed = mix_seed(sensor_seed, 0xCF02);
        let outcome = search(
            &space,
            |candidate| cv_objective_ocsvm(candidate, &points, config.kfold_k, cv_seed),
            budget.max(1),
            options.strategy,
            Direction::Maximize,
            mix_seed(sensor_seed, 0x5EA1),
        )?;
        if let Some(dir) = &options.history_dir {
            write_history(dir, record.sensor_id, "ocsvm", &history_to_jsonl(&outcome.history)?)?;
        }
        let best = &outcome.best.config;
        (best.nu, best.kernel.kernel_for(best.poly_order, &points)?)
    } else {
        (
            config.ocsvm_nu,
            config.ocsvm_kernel.kernel_for(config.ocsvm_poly_order, &points)?,
        )
    };
    let ocsvm = crate::ocsvm::fit(&points, nu, kernel, config.ocsvm_tol)?;

    Ok(SensorModel {
        sensor_id: record.sensor_id,
        normalization,
        vae,
        scaler,
        ocsvm,
        holdout_indices,
    })
}

/// Folds used for the boundary-calibration features.
const CALIBRATION_FOLDS: usize = 4;

/// One damage-sensitive feature per frame, each computed by a model trained
/// without that frame.
fn out_of_fold_features(
    normalized: &[Frame],
    arch: &crate::vae::VaeArchitecture,
    mode: VaeMode,
    train_template: &crate::vae::TrainConfig,
    normalization: crate::signals::NormalizationStats,
    sensor_seed: u64,
) -> Result<Vec<crate::features::FeatureVector>> {
    let folds = crate::signals::fold_indices(
        normalized.len(),
        CALIBRATION_FOLDS,
        mix_seed(sensor_seed, 0xF01D),
    )?;
    let mut slots: Vec<Option<crate::features::FeatureVector>> = vec![None; normalized.len()];
    for (fold_idx, (train_idx, val_idx)) in folds.iter().enumerate() {
        let fold_frames: Vec<Frame> = train_idx.iter().map(|&i| normalized[i].clone()).collect();
        let fold_config = crate::vae::TrainConfig {
            seed: mix_seed(sensor_seed, 0xF0_1D00 + fold_idx as u64),
            ..*train_template
        };
        let (fold_vae, _) = train(&fold_frames, arch, mode, &fold_config, normalization)?;
        let val_frames: Vec<Frame> = val_idx.iter().map(|&i| normalized[i].clone()).collect();
        for (&i, feature) in val_idx.iter().zip(extract(&val_frames, &fold_vae)?) {
            slots[i] = Some(feature);
        }
    }
    Ok(slots
        .into_iter()
        .map(|s| s.expect("folds partition the frame set"))
        .collect())
}

fn write_history(dir: &Path, sensor_id: u32, stage: &str, content: &str) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Data(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(format!("history_sensor_{sensor_id}_{stage}.jsonl"));
    std::fs::write(&path, content)
        .map_err(|e| Error::Data(format!("cannot write {}: {e}", path.display())))
}

/// Frames of every case CSV in the data directory, keyed by case then
/// sensor.
fn load_case_frames(
    config: &RunConfig,
    data_dir: &Path,
) -> Result<BTreeMap<u32, BTreeMap<u32, Vec<Frame>>>> {
    let mut case_frames = BTreeMap::new();
    for scenario in &config.scenarios {
        let case_id = scenario.scenario_id;
        let path = data_dir.join(case_file_name(case_id));
        if !path.exists() {
            continue;
        }
        let records = load_csv(&path, config.sampling_rate_hz)?;
        let mut by_sensor = BTreeMap::new();
        for record in &records {
            by_sensor.insert(record.sensor_id, window(record, config.frame_len, case_id)?);
        }
        case_frames.insert(case_id, by_sensor);
    }
    if case_frames.is_empty() {
        return Err(Error::Data(format!(
            "no case CSVs found under {}",
            data_dir.display()
        )));
    }
    Ok(case_frames)
}

/// Score every case in the data directory with a trained bundle and write
/// the PoD and KL tables (text + CSV) to `out_dir`.
pub fn cmd_score(bundle: &ModelBundle, data_dir: &Path, out_dir: &Path) -> Result<(PodReport, KlTable)> {
    let config = &bundle.config;
    let case_frames = load_case_frames(config, data_dir)?;
    if !case_frames.contains_key(&1) {
        return Err(Error::Data("scoring requires the undamaged case_1.csv".to_string()));
    }

    // The data must carry exactly the sensors the bundle was trained on.
    let data_sensors: Vec<u32> = case_frames[&1].keys().copied().collect();
    let bundle_sensors: Vec<u32> = bundle.sensors.iter().map(|s| s.sensor_id).collect();
    if data_sensors != bundle_sensors {
        return Err(Error::Data(format!(
            "sensor mismatch: bundle has {bundle_sensors:?}, data has {data_sensors:?}"
        )));
    }

    let (report, kl_table) = build_report(&bundle.sensors, &case_frames, config.kl_mode)?;

    // Raw feature dump across all cases for scatter plotting.
    let mut all_features = Vec::new();
    for sensor in &bundle.sensors {
        for by_sensor in case_frames.values() {
            let frames = &by_sensor[&sensor.sensor_id];
            let normalized: Vec<Frame> = frames
                .iter()
                .map(|f| apply_normalization(f, &sensor.normalization))
                .collect();
            all_features.extend(extract(&normalized, &sensor.vae)?);
        }
    }

    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::Data(format!("cannot create {}: {e}", out_dir.display())))?;
    for (name, content) in [
        ("pod_report.txt", report.to_text()),
        ("pod_report.csv", report.to_csv()),
        ("kl_table.txt", kl_table.to_text()),
        ("kl_table.csv", kl_table.to_csv()),
        ("features.csv", crate::features::features_to_csv(&all_features)),
    ] {
        let path = out_dir.join(name);
        std::fs::write(&path, content)
            .map_err(|e| Error::Data(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok((report, kl_table))
}

/// Modal frequencies and frequency variations per case.
#[derive(Debug, Clone, PartialEq)]
pub struct FddTable {
    /// Undamaged modal frequencies (first `fdd_max_modes` picked).
    pub undamaged: Vec<f64>,
    /// Per damaged case, the mode pairing against the undamaged modes.
    pub cases: Vec<(u32, Vec<ModeShift>)>,
}

impl FddTable {
    /// Table layout: one row per mode, one column per case,
    /// `frequency (variation %)` cells, `-` for unresolved modes.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<6}{:>18}", "Mode", "Case 1"));
        for (case, _) in &self.cases {
            out.push_str(&format!("{:>18}", format!("Case {case}")));
        }
        out.push('\n');
        for (mode_idx, &f_undamaged) in self.undamaged.iter().enumerate() {
            out.push_str(&format!("{:<6}{:>18}", mode_idx + 1, format!("{f_undamaged:.2} (0)")));
            for (_, shifts) in &self.cases {
                let cell = match shifts.get(mode_idx) {
                    Some(ModeShift {
                        damaged_hz: Some(f),
                        percent: Some(p),
                        ..
                    }) => format!("{f:.2} ({p:.2})"),
                    _ => "-".to_string(),
                };
                out.push_str(&format!("{cell:>18}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("mode,case_1_hz");
        for (case, _) in &self.cases {
            out.push_str(&format!(",case_{case}_hz,case_{case}_variation_pct"));
        }
        out.push('\n');
        for (mode_idx, &f_undamaged) in self.undamaged.iter().enumerate() {
            out.push_str(&format!("{},{}", mode_idx + 1, f_undamaged));
            for (_, shifts) in &self.cases {
                match shifts.get(mode_idx) {
                    Some(ModeShift {
                        damaged_hz: Some(f),
                        percent: Some(p),
                        ..
                    }) => out.push_str(&format!(",{f},{p}")),
                    _ => out.push_str(",,"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Run the FDD baseline over every case CSV and write the frequency table
/// and per-case singular-value spectra to `out_dir`.
pub fn cmd_fdd(config: &RunConfig, data_dir: &Path, out_dir: &Path) -> Result<FddTable> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::Data(format!("cannot create {}: {e}", out_dir.display())))?;

    let band = (config.band_low_hz, config.band_high_hz);
    let mut estimates: BTreeMap<u32, crate::fdd::ModalEstimate> = BTreeMap::new();
    for scenario in &config.scenarios {
        let case_id = scenario.scenario_id;
        let path = data_dir.join(case_file_name(case_id));
        if !path.exists() {
            continue;
        }
        let records = load_csv(&path, config.sampling_rate_hz)?;
        let estimate = estimate_modes(
            &records,
            config.fdd_nfft,
            config.fdd_overlap,
            band,
            config.fdd_min_prominence_db,
        )?;
        let mut spectrum_csv = String::from("frequency_hz,first_singular_value\n");
        for (f, s) in estimate.frequencies.iter().zip(&estimate.first_singular_values) {
            spectrum_csv.push_str(&format!("{f},{s}\n"));
        }
        let spectrum_path = out_dir.join(format!("fdd_spectrum_case_{case_id}.csv"));
        std::fs::write(&spectrum_path, spectrum_csv)
            .map_err(|e| Error::Data(format!("cannot write {}: {e}", spectrum_path.display())))?;
        estimates.insert(case_id, estimate);
    }
    let undamaged_est = estimates
        .get(&1)
        .ok_or_else(|| Error::Data("FDD requires the undamaged case_1.csv".to_string()))?;
    let undamaged: Vec<f64> = undamaged_est
        .mode_frequencies
        .iter()
        .copied()
        .take(config.fdd_max_modes)
        .collect();

    let mut cases = Vec::new();
    for (&case_id, estimate) in estimates.iter().filter(|(&c, _)| c != 1) {
        let damaged: Vec<f64> = estimate
            .mode_frequencies
            .iter()
            .copied()
            .take(config.fdd_max_modes)
            .collect();
        cases.push((case_id, frequency_shift_table(&undamaged, &damaged)?));
    }
    let table = FddTable { undamaged, cases };

    for (name, content) in [("fdd_table.txt", table.to_text()), ("fdd_table.csv", table.to_csv())] {
        let path = out_dir.join(name);
        std::fs::write(&path, content)
            .map_err(|e| Error::Data(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(table)
}

/// `score` + `fdd` in one go, using the bundle's embedded config.
pub fn cmd_report(
    bundle: &ModelBundle,
    data_dir: &Path,
    out_dir: &Path,
) -> Result<(PodReport, KlTable, FddTable)> {
    let (report, kl) = cmd_score(bundle, data_dir, out_dir)?;
    let fdd = cmd_fdd(&bundle.config, data_dir, out_dir)?;
    Ok((report, kl, fdd))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Desk-scale config: short records and light training so the full
    /// pipeline runs in seconds.
    pub(crate) fn quick_config() -> RunConfig {
        let mut config = RunConfig::default();
        config.frame_len = 64;
        config.case_durations_s = vec![40.0; 9];
        config.vae_hidden_neurons = 24;
        config.vae_latent_dim = 8;
        config.vae_max_epochs = 120;
        config.vae_patience = 20;
        config.kfold_k = 4;
        config
    }

    #[test]
    fn generate_writes_ladder_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = quick_config();
        config.case_durations_s = vec![5.0; 9];
        let written = cmd_generate(&config, dir.path()).unwrap();
        assert_eq!(written.len(), 10, "9 cases + manifest");
        let manifest = std::fs::read_to_string(dir.path().join("manifest.csv")).unwrap();
        assert!(manifest.starts_with("case,severity,mult_1"));
        assert_eq!(manifest.lines().count(), 10);
        let case1 = std::fs::read_to_string(dir.path().join("case_1.csv")).unwrap();
        assert!(case1.starts_with("1,2,3,4\n"));
        assert_eq!(case1.lines().count(), 1 + 1000, "header + 5 s at 200 Hz");
    }

    #[test]
    fn generate_is_byte_deterministic() {
        let mut config = quick_config();
        config.case_durations_s = vec![3.0; 9];
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        cmd_generate(&config, dir_a.path()).unwrap();
        cmd_generate(&config, dir_b.path()).unwrap();
        for case in 1..=9u32 {
            let a = std::fs::read(dir_a.path().join(case_file_name(case))).unwrap();
            let b = std::fs::read(dir_b.path().join(case_file_name(case))).unwrap();
            assert_eq!(a, b, "case {case} differs between runs");
        }
    }

    #[test]
    fn manifest_frequencies_match_analytic_modes() {
        let mut config = quick_config();
        config.case_durations_s = vec![3.0; 9];
        let dir = tempfile::tempdir().unwrap();
        cmd_generate(&config, dir.path()).unwrap();
        let manifest = std::fs::read_to_string(dir.path().join("manifest.csv")).unwrap();
        let model = config.structural_model().unwrap();
        let expected = analytic_modes(&model);
        let row: Vec<&str> = manifest.lines().nth(1).unwrap().split(',').collect();
        // case,severity,4 multipliers, then 4 frequencies.
        let f1: f64 = row[6].parse().unwrap();
        assert!((f1 - expected[0].frequency_hz).abs() < 1e-12);
    }
}
