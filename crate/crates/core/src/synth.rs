//! Lumped-mass shear-frame simulator.
//!
//! Generates benchmark-like multi-story acceleration data under band-limited
//! white-noise excitation, with damage modeled as per-story stiffness
//! reduction. Responses are integrated with the unconditionally stable
//! Newmark average-acceleration scheme; modal frequencies and shapes are
//! available analytically as an oracle for the FDD baseline.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::seeds::mix_seed;
use crate::signals::SensorRecord;

/// Lumped-mass shear frame: one lateral DOF per story, fixed base.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralModel {
    /// Story masses in kg, bottom story first.
    pub story_masses: Vec<f64>,
    /// Inter-story stiffnesses in N/m; entry `i` connects story `i` to the
    /// story below (the ground for the first entry).
    pub story_stiffnesses: Vec<f64>,
    /// Modal damping ratio applied to all modes, in [0, 0.2].
    pub damping_ratio: f64,
}

impl StructuralModel {
    pub fn new(story_masses: Vec<f64>, story_stiffnesses: Vec<f64>, damping_ratio: f64) -> Result<Self> {
        if story_masses.is_empty() || story_masses.len() != story_stiffnesses.len() {
            return Err(Error::Config(format!(
                "mass and stiffness lists must be non-empty and equally long, got {} and {}",
                story_masses.len(),
                story_stiffnesses.len()
            )));
        }
        if story_masses.iter().any(|&m| !(m > 0.0)) || story_stiffnesses.iter().any(|&k| !(k > 0.0)) {
            return Err(Error::Config("masses and stiffnesses must be strictly positive".to_string()));
        }
        if !(0.0..=0.2).contains(&damping_ratio) {
            return Err(Error::Config(format!(
                "damping ratio must lie in [0, 0.2], got {damping_ratio}"
            )));
        }
        Ok(Self {
            story_masses,
            story_stiffnesses,
            damping_ratio,
        })
    }

    pub fn story_count(&self) -> usize {
        self.story_masses.len()
    }

    /// Diagonal mass matrix.
    pub fn mass_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(self.story_masses.clone()))
    }

    /// Tridiagonal shear-frame stiffness matrix with the scenario's per-story
    /// multipliers applied.
    pub fn stiffness_matrix(&self, scenario: &DamageScenario) -> Result<DMatrix<f64>> {
        let n = self.story_count();
        if scenario.stiffness_multipliers.len() != n {
            return Err(Error::Config(format!(
                "scenario {} has {} multipliers for a {}-story model",
                scenario.scenario_id,
                scenario.stiffness_multipliers.len(),
                n
            )));
        }
        let k: Vec<f64> = self
            .story_stiffnesses
            .iter()
            .zip(&scenario.stiffness_multipliers)
            .map(|(&k, &m)| k * m)
            .collect();
        let mut mat = DMatrix::zeros(n, n);
        for i in 0..n {
            mat[(i, i)] = k[i] + if i + 1 < n { k[i + 1] } else { 0.0 };
            if i + 1 < n {
                mat[(i, i + 1)] = -k[i + 1];
                mat[(i + 1, i)] = -k[i + 1];
            }
        }
        Ok(mat)
    }

    /// The model with a scenario's stiffness reduction baked in.
    pub fn with_scenario(&self, scenario: &DamageScenario) -> Result<StructuralModel> {
        if scenario.stiffness_multipliers.len() != self.story_count() {
            return Err(Error::Config(format!(
                "scenario {} does not match the {}-story model",
                scenario.scenario_id,
                self.story_count()
            )));
        }
        StructuralModel::new(
            self.story_masses.clone(),
            self.story_stiffnesses
                .iter()
                .zip(&scenario.stiffness_multipliers)
                .map(|(&k, &m)| k * m)
                .collect(),
            self.damping_ratio,
        )
    }
}

/// Per-story stiffness reduction; multiplier 1.0 on every story means
/// undamaged.
#[derive(Debug, Clone, PartialEq)]
pub struct DamageScenario {
    pub scenario_id: u32,
    /// Per-story stiffness multipliers in (0, 1].
    pub stiffness_multipliers: Vec<f64>,
}

impl DamageScenario {
    pub fn new(scenario_id: u32, stiffness_multipliers: Vec<f64>) -> Result<Self> {
        if stiffness_multipliers
            .iter()
            .any(|&m| !(m > 0.0 && m <= 1.0))
        {
            return Err(Error::Config(format!(
                "scenario {scenario_id}: stiffness multipliers must lie in (0, 1]"
            )));
        }
        Ok(Self {
            scenario_id,
            stiffness_multipliers,
        })
    }

    /// All-ones scenario for a model with `stories` stories.
    pub fn undamaged(scenario_id: u32, stories: usize) -> Self {
        Self {
            scenario_id,
            stiffness_multipliers: vec![1.0; stories],
        }
    }

    pub fn is_undamaged(&self) -> bool {
        self.stiffness_multipliers.iter().all(|&m| m == 1.0)
    }

    /// Mean per-story stiffness reduction, a scalar severity measure used to
    /// order scenarios in rank-correlation checks.
    pub fn severity(&self) -> f64 {
        let n = self.stiffness_multipliers.len() as f64;
        1.0 - self.stiffness_multipliers.iter().sum::<f64>() / n
    }
}

/// Band-limited white-noise excitation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitationSpec {
    pub duration_s: f64,
    pub sampling_rate_hz: f64,
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub seed: u64,
}

impl ExcitationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) || !(self.sampling_rate_hz > 0.0) {
            return Err(Error::Config("duration and sampling rate must be positive".to_string()));
        }
        if !(self.band_low_hz > 0.0 && self.band_low_hz < self.band_high_hz) {
            return Err(Error::Config(format!(
                "excitation band [{}, {}] Hz is not an increasing positive interval",
                self.band_low_hz, self.band_high_hz
            )));
        }
        if self.band_high_hz >= self.sampling_rate_hz / 2.0 {
            return Err(Error::Config(format!(
                "band edge {} Hz violates the Nyquist limit {} Hz",
                self.band_high_hz,
                self.sampling_rate_hz / 2.0
            )));
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        (self.duration_s * self.sampling_rate_hz).round() as usize
    }
}

/// A modal frequency with its mass-normalized, unit-max-amplitude shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub frequency_hz: f64,
    pub shape: Vec<f64>,
}

/// Solve the generalized eigenproblem `K φ = ω² M φ` for the shear frame.
///
/// Frequencies are returned ascending; each shape is scaled to unit maximum
/// absolute amplitude with the largest component positive.
pub fn analytic_modes(model: &StructuralModel) -> Vec<Mode> {
    let undamaged = DamageScenario::undamaged(0, model.story_count());
    let k = model.stiffness_matrix(&undamaged).expect("matching story count");
    let m = model.mass_matrix();
    generalized_modes(&m, &k)
}

fn generalized_modes(m: &DMatrix<f64>, k: &DMatrix<f64>) -> Vec<Mode> {
    let n = m.nrows();
    // M is diagonal: reduce to the standard symmetric problem
    // (M^-1/2 K M^-1/2) ψ = ω² ψ with φ = M^-1/2 ψ.
    let inv_sqrt_m: Vec<f64> = (0..n).map(|i| 1.0 / m[(i, i)].sqrt()).collect();
    let mut a = k.clone();
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] *= inv_sqrt_m[i] * inv_sqrt_m[j];
        }
    }
    // Symmetrize against rounding before the eigensolve.
    let a = (&a + a.transpose()) * 0.5;
    let eig = a.symmetric_eigen();

    let mut modes: Vec<Mode> = (0..n)
        .map(|col| {
            let lambda = eig.eigenvalues[col];
            assert!(lambda > 0.0, "stiffness matrix must be positive definite");
            let mut shape: Vec<f64> = (0..n)
                .map(|row| eig.eigenvectors[(row, col)] * inv_sqrt_m[row])
                .collect();
            let (max_idx, max_abs) = shape
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.abs()))
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            let scale = shape[max_idx].signum() * max_abs;
            for v in &mut shape {
                *v /= scale;
            }
            Mode {
                frequency_hz: lambda.sqrt() / TAU,
                shape,
            }
        })
        .collect();
    modes.sort_by(|a, b| a.frequency_hz.partial_cmp(&b.frequency_hz).unwrap());
    modes
}

/// Synthesize a band-limited white-noise force series.
///
/// The spectrum has uniformly random phase and constant magnitude inside
/// `[band_low, band_high]` (unit power spectral density, so the series level
/// does not depend on the record length) and is exactly zero outside; the
/// series is the real inverse transform, deterministic under the seed.
pub fn bandlimited_noise(spec: &ExcitationSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    noise_series(spec.sample_count(), spec.sampling_rate_hz, spec.band_low_hz, spec.band_high_hz, spec.seed)
}

fn noise_series(n: usize, fs: f64, band_low: f64, band_high: f64, seed: u64) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Config("excitation too short".to_string()));
    }
    let df = fs / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n];
    let mut in_band_bins = 0usize;
    for k in 1..=n / 2 {
        let f = k as f64 * df;
        if f < band_low || f > band_high {
            continue;
        }
        in_band_bins += 1;
        let phase: f64 = rng.random::<f64>() * TAU;
        let coeff = Complex64::from_polar(1.0, phase);
        if k == n - k {
            // Nyquist bin must stay real.
            spectrum[k] = Complex64::new(phase.cos().signum(), 0.0);
        } else {
            spectrum[k] = coeff;
            spectrum[n - k] = coeff.conj();
        }
    }
    if in_band_bins == 0 {
        return Err(Error::Config(format!(
            "band [{band_low}, {band_high}] Hz contains no frequency bins at Δf = {df} Hz"
        )));
    }
    let mut buf = spectrum;
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    // Mean square = bandwidth × (unit PSD), independent of n.
    let bandwidth = band_high - band_low;
    let scale = (bandwidth / (2.0 * in_band_bins as f64)).sqrt();
    Ok(buf.iter().map(|c| c.re * scale).collect())
}

/// Displacement, velocity and acceleration histories from the Newmark
/// average-acceleration integrator.
#[derive(Debug, Clone)]
pub struct NewmarkResponse {
    pub displacements: Vec<DVector<f64>>,
    pub velocities: Vec<DVector<f64>>,
    pub accelerations: Vec<DVector<f64>>,
}

/// Integrate `M ẍ + C ẋ + K x = F(t)` with Newmark β=1/4, γ=1/2
/// (average acceleration, unconditionally stable) from the given initial
/// state. `force(step)` supplies the load vector at each time step; the
/// response holds `steps` states sampled at `dt`, the initial state included.
pub fn newmark_integrate(
    m: &DMatrix<f64>,
    c: &DMatrix<f64>,
    k: &DMatrix<f64>,
    x0: DVector<f64>,
    v0: DVector<f64>,
    dt: f64,
    steps: usize,
    force: impl Fn(usize) -> DVector<f64>,
) -> NewmarkResponse {
    const BETA: f64 = 0.25;
    const GAMMA: f64 = 0.5;

    let a1 = 1.0 / (BETA * dt * dt);
    let a2 = 1.0 / (BETA * dt);
    let a3 = 1.0 / (2.0 * BETA) - 1.0;
    let a4 = GAMMA / (BETA * dt);
    let a5 = GAMMA / BETA - 1.0;
    let a6 = dt * (GAMMA / (2.0 * BETA) - 1.0);

    let m_lu = m.clone().lu();
    let rhs0 = force(0) - c * &v0 - k * &x0;
    let acc0 = m_lu.solve(&rhs0).expect("mass matrix is invertible");

    let k_eff = k + c * a4 + m * a1;
    let k_eff_lu = k_eff.lu();

    let mut displacements = Vec::with_capacity(steps);
    let mut velocities = Vec::with_capacity(steps);
    let mut accelerations = Vec::with_capacity(steps);
    displacements.push(x0);
    velocities.push(v0);
    accelerations.push(acc0);

    for step in 1..steps {
        let x = &displacements[step - 1];
        let v = &velocities[step - 1];
        let a = &accelerations[step - 1];
        let f_eff = force(step) + m * (x * a1 + v * a2 + a * a3) + c * (x * a4 + v * a5 + a * a6);
        let x_next = k_eff_lu.solve(&f_eff).expect("effective stiffness is invertible");
        let a_next = (&x_next - x) * a1 - v * a2 - a * a3;
        let v_next = v + (a * (1.0 - GAMMA) + &a_next * GAMMA) * dt;
        assert!(
            x_next.iter().all(|v| v.is_finite()),
            "Newmark integration produced a non-finite state at step {step}"
        );
        displacements.push(x_next);
        velocities.push(v_next);
        accelerations.push(a_next);
    }
    NewmarkResponse {
        displacements,
        velocities,
        accelerations,
    }
}

/// Rayleigh damping matrix `C = a₀M + a₁K` matched to the model's damping
/// ratio at the first two modal frequencies (at the single frequency for a
/// one-story model).
pub fn rayleigh_damping(m: &DMatrix<f64>, k: &DMatrix<f64>, zeta: f64) -> DMatrix<f64> {
    if zeta == 0.0 {
        return DMatrix::zeros(m.nrows(), m.ncols());
    }
    let modes = generalized_modes(m, k);
    let w1 = modes[0].frequency_hz * TAU;
    if modes.len() == 1 {
        return m * (2.0 * zeta * w1);
    }
    let w2 = modes[1].frequency_hz * TAU;
    let a0 = 2.0 * zeta * w1 * w2 / (w1 + w2);
    let a1 = 2.0 * zeta / (w1 + w2);
    m * a0 + k * a1
}

/// Internal integrator oversampling of [`simulate`]. The average-acceleration
/// scheme elongates a mode's period by about `(ω·Δt)²/12`; integrating at the
/// output rate alone would push the upper modes several percent flat, so the
/// response is integrated on a finer grid and decimated.
const SIMULATE_OVERSAMPLE: usize = 4;

/// Simulate the damaged structure under band-limited noise applied at
/// `force_story` (1-based) and return one absolute-acceleration channel per
/// story, sensor ids 1..=stories, sampled at the spec's rate.
pub fn simulate(
    model: &StructuralModel,
    scenario: &DamageScenario,
    spec: &ExcitationSpec,
    force_story: usize,
) -> Result<Vec<SensorRecord>> {
    spec.validate()?;
    let n = model.story_count();
    if force_story == 0 || force_story > n {
        return Err(Error::Config(format!(
            "force story {force_story} out of range 1..={n}"
        )));
    }
    let m = model.mass_matrix();
    let k = model.stiffness_matrix(scenario)?;
    let c = rayleigh_damping(&m, &k, model.damping_ratio);

    let n_out = spec.sample_count();
    let steps = n_out * SIMULATE_OVERSAMPLE;
    let fs_internal = spec.sampling_rate_hz * SIMULATE_OVERSAMPLE as f64;
    let force_series = noise_series(steps, fs_internal, spec.band_low_hz, spec.band_high_hz, spec.seed)?;
    let dt = 1.0 / fs_internal;

    let response = newmark_integrate(
        &m,
        &c,
        &k,
        DVector::zeros(n),
        DVector::zeros(n),
        dt,
        steps,
        |step| {
            let mut f = DVector::zeros(n);
            f[force_story - 1] = force_series[step];
            f
        },
    );

    (0..n)
        .map(|story| {
            let samples: Vec<f64> = response
                .accelerations
                .iter()
                .step_by(SIMULATE_OVERSAMPLE)
                .map(|a| a[story])
                .collect();
            SensorRecord::new(story as u32 + 1, samples, spec.sampling_rate_hz)
        })
        .collect()
}

/// Add white Gaussian measurement noise at the given signal-to-noise ratio.
pub fn add_measurement_noise(records: &[SensorRecord], snr_db: f64, seed: u64) -> Vec<SensorRecord> {
    records
        .iter()
        .map(|rec| {
            let power = rec.samples.iter().map(|v| v * v).sum::<f64>() / rec.samples.len() as f64;
            let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, rec.sensor_id as u64));
            let samples = rec
                .samples
                .iter()
                .map(|&v| v + sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            SensorRecord {
                sensor_id: rec.sensor_id,
                samples,
                sampling_rate_hz: rec.sampling_rate_hz,
            }
        })
        .collect()
}

/// Four-story model with paper-like floor masses. The uniform story
/// stiffness puts the first mode near 9 Hz so that every mode of every
/// ladder scenario stays inside the 5-50 Hz excitation band.
pub fn default_model() -> StructuralModel {
    StructuralModel::new(
        vec![1000.0, 1000.0, 1000.0, 750.0],
        vec![2.4e7; 4],
        0.0015,
    )
    .expect("default model parameters are valid")
}

/// Nine-scenario ladder: scenario 1 undamaged, severity increasing overall,
/// with scenarios 2 and 6 deliberately mild.
pub fn default_scenarios() -> Vec<DamageScenario> {
    let ladder: [(u32, [f64; 4]); 9] = [
        (1, [1.0, 1.0, 1.0, 1.0]),
        (2, [0.97, 1.0, 1.0, 1.0]),
        (3, [0.90, 1.0, 1.0, 0.90]),
        (4, [0.85, 0.85, 0.85, 0.85]),
        (5, [0.75, 0.75, 0.78, 0.78]),
        (6, [0.95, 0.97, 1.0, 1.0]),
        (7, [0.55, 0.55, 0.55, 0.55]),
        (8, [0.45, 0.48, 0.48, 0.48]),
        (9, [0.33, 0.33, 0.36, 0.36]),
    ];
    ladder
        .iter()
        .map(|(id, mult)| DamageScenario::new(*id, mult.to_vec()).expect("valid ladder"))
        .collect()
}
