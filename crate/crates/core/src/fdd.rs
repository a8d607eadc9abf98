//! Frequency Domain Decomposition baseline.
//!
//! Classical output-only modal identification: Welch-averaged cross-power
//! spectral density matrices over all sensor channels, a singular value
//! decomposition per frequency line, and peak picking on the first
//! singular-value spectrum. Modal frequencies shift down when stiffness
//! drops, which is the traditional damage indicator the learned pipeline is
//! compared against.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::signals::SensorRecord;

/// Welch cross-spectral estimate: one Hermitian `n×n` matrix per frequency.
#[derive(Debug, Clone)]
pub struct CpsdEstimate {
    /// One-sided frequency grid in Hz, `nfft/2 + 1` lines.
    pub frequencies: Vec<f64>,
    /// Cross-spectral matrix per frequency line.
    pub matrices: Vec<DMatrix<Complex64>>,
    pub nfft: usize,
    pub overlap: f64,
    /// Number of averaged segments.
    pub segment_count: usize,
}

/// Modal frequencies picked from the first singular-value spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalEstimate {
    /// Picked modal frequencies in Hz, ascending.
    pub mode_frequencies: Vec<f64>,
    /// Frequency grid of the spectrum below.
    pub frequencies: Vec<f64>,
    /// First singular value per frequency line.
    pub first_singular_values: Vec<f64>,
}

/// Hann-windowed, overlap-averaged cross-power spectral densities.
///
/// `G_xy(f)` is the segment mean of `X(f)·conj(Y(f))` with one-sided
/// window-power normalization; matrices are Hermitian by construction.
pub fn welch_cpsd(records: &[SensorRecord], nfft: usize, overlap: f64) -> Result<CpsdEstimate> {
    if records.is_empty() {
        return Err(Error::Data("no records".to_string()));
    }
    if !nfft.is_power_of_two() || nfft < 4 {
        return Err(Error::Config(format!("nfft must be a power of two ≥ 4, got {nfft}")));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::Config(format!("overlap fraction must lie in [0, 1), got {overlap}")));
    }
    let len = records[0].len();
    let fs = records[0].sampling_rate_hz;
    if records.iter().any(|r| r.len() != len || r.sampling_rate_hz != fs) {
        return Err(Error::Data("records must share length and sampling rate".to_string()));
    }
    if len < nfft {
        return Err(Error::Data(format!("records of length {len} are shorter than nfft {nfft}")));
    }

    let hop = ((1.0 - overlap) * nfft as f64).round().max(1.0) as usize;
    let starts: Vec<usize> = (0..)
        .map(|s| s * hop)
        .take_while(|&start| start + nfft <= len)
        .collect();
    let segment_count = starts.len();

    let window: Vec<f64> = (0..nfft)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / nfft as f64).cos()))
        .collect();
    let window_power: f64 = window.iter().map(|w| w * w).sum();

    let n_channels = records.len();
    let n_freq = nfft / 2 + 1;
    let fft = FftPlanner::new().plan_fft_forward(nfft);

    // Accumulate Σ_seg X_i(f)·conj(X_j(f)) for the upper triangle.
    let mut accum: Vec<DMatrix<Complex64>> = vec![DMatrix::zeros(n_channels, n_channels); n_freq];
    let mut spectra: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); nfft]; n_channels];
    for &start in &starts {
        for (channel, record) in records.iter().enumerate() {
            let buf = &mut spectra[channel];
            for (i, value) in buf.iter_mut().enumerate() {
                *value = Complex64::new(record.samples[start + i] * window[i], 0.0);
            }
            fft.process(buf);
        }
        for f in 0..n_freq {
            for i in 0..n_channels {
                for j in i..n_channels {
                    accum[f][(i, j)] += spectra[i][f] * spectra[j][f].conj();
                }
            }
        }
    }

    let frequencies: Vec<f64> = (0..n_freq).map(|k| k as f64 * fs / nfft as f64).collect();
    let matrices = accum
        .into_iter()
        .enumerate()
        .map(|(f, mut m)| {
            // One-sided PSD scaling; DC and Nyquist lines are not doubled.
            let one_sided = if f == 0 || f == n_freq - 1 { 1.0 } else { 2.0 };
            let scale = one_sided / (fs * window_power * segment_count as f64);
            for i in 0..n_channels {
                for j in i..n_channels {
                    let value = m[(i, j)] * scale;
                    if i == j {
                        m[(i, i)] = Complex64::new(value.re, 0.0);
                    } else {
                        m[(i, j)] = value;
                        m[(j, i)] = value.conj();
                    }
                }
            }
            m
        })
        .collect();

    Ok(CpsdEstimate {
        frequencies,
        matrices,
        nfft,
        overlap,
        segment_count,
    })
}

/// Singular values of every cross-spectral matrix, descending per frequency.
/// For Hermitian positive semidefinite matrices these equal the eigenvalues.
pub fn svd_spectrum(cpsd: &CpsdEstimate) -> Vec<Vec<f64>> {
    cpsd.matrices
        .iter()
        .map(|m| {
            let eig = m.clone().symmetric_eigen();
            let mut values: Vec<f64> = eig.eigenvalues.iter().map(|v| v.abs()).collect();
            values.sort_by(|a, b| b.partial_cmp(a).unwrap());
            values
        })
        .collect()
}

/// First singular value per frequency line.
pub fn first_singular_values(cpsd: &CpsdEstimate) -> Vec<f64> {
    svd_spectrum(cpsd).into_iter().map(|v| v[0]).collect()
}

/// Pick modal peaks inside `band`.
///
/// A line is a peak when it is a local maximum, sits no more than 60 dB below
/// the band maximum (numerical-floor gate), exceeds the local median by
/// `min_prominence_db`, and has at least `min_prominence_db` of topographic
/// prominence (height above the highest saddle toward a higher line — this
/// rejects wiggles on resonance skirts). Frequencies are refined by
/// three-point parabolic interpolation on the dB values and returned
/// ascending.
pub fn pick_peaks(
    frequencies: &[f64],
    spectrum: &[f64],
    band: (f64, f64),
    min_prominence_db: f64,
) -> Result<Vec<f64>> {
    if frequencies.len() != spectrum.len() || frequencies.is_empty() {
        return Err(Error::Data("spectrum and frequency grid must match".to_string()));
    }
    let (low, high) = band;
    if !(low < high) || high > *frequencies.last().unwrap() {
        return Err(Error::Config(format!("empty or out-of-grid band [{low}, {high}] Hz")));
    }
    let in_band: Vec<usize> = (0..frequencies.len())
        .filter(|&i| frequencies[i] >= low && frequencies[i] <= high)
        .collect();
    if in_band.len() < 3 {
        return Err(Error::Config("band covers fewer than three frequency lines".to_string()));
    }
    let first = in_band[0];
    let last = *in_band.last().unwrap();
    // Local median window: a tenth of the band, at least ±3 lines.
    let half_width = (in_band.len() / 10).max(3);

    let floor = 1e-300;
    let band_max = in_band.iter().map(|&i| spectrum[i]).fold(floor, f64::max);
    let level_gate = band_max * 1e-6;
    let db: Vec<f64> = spectrum.iter().map(|&v| 10.0 * v.max(floor).log10()).collect();

    // Base of a peak on one side: the minimum between the peak and the next
    // strictly higher line (or the band edge).
    let side_base = |i: usize, step: isize| -> f64 {
        let mut base = spectrum[i];
        let mut k = i as isize;
        loop {
            k += step;
            if k < first as isize || k > last as isize {
                break;
            }
            let v = spectrum[k as usize];
            if v > spectrum[i] {
                break;
            }
            base = base.min(v);
        }
        base
    };

    let mut peaks = Vec::new();
    for &i in &in_band {
        if i == 0 || i + 1 >= spectrum.len() {
            continue;
        }
        if !(spectrum[i] > spectrum[i - 1] && spectrum[i] > spectrum[i + 1]) {
            continue;
        }
        if spectrum[i] < level_gate {
            continue;
        }
        let lo = i.saturating_sub(half_width).max(first);
        let hi = (i + half_width).min(last);
        let mut neighborhood: Vec<f64> = (lo..=hi).map(|k| spectrum[k]).collect();
        neighborhood.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let local_median = neighborhood[neighborhood.len() / 2].max(floor);
        if 10.0 * (spectrum[i] / local_median).log10() < min_prominence_db {
            continue;
        }
        let saddle = side_base(i, -1).max(side_base(i, 1)).max(floor);
        if 10.0 * (spectrum[i] / saddle).log10() < min_prominence_db {
            continue;
        }
        // Parabolic refinement on dB values.
        let (l, c, r) = (db[i - 1], db[i], db[i + 1]);
        let denom = l - 2.0 * c + r;
        let delta = if denom.abs() > 1e-300 {
            (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        let bin_width = frequencies[1] - frequencies[0];
        peaks.push(frequencies[i] + delta * bin_width);
    }
    Ok(peaks)
}

/// Full FDD chain: Welch CPSD → first singular values → peak picking.
pub fn estimate_modes(
    records: &[SensorRecord],
    nfft: usize,
    overlap: f64,
    band: (f64, f64),
    min_prominence_db: f64,
) -> Result<ModalEstimate> {
    let cpsd = welch_cpsd(records, nfft, overlap)?;
    let first = first_singular_values(&cpsd);
    let mode_frequencies = pick_peaks(&cpsd.frequencies, &first, band, min_prominence_db)?;
    Ok(ModalEstimate {
        mode_frequencies,
        frequencies: cpsd.frequencies,
        first_singular_values: first,
    })
}

/// One row of the frequency-variation table.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeShift {
    pub undamaged_hz: f64,
    /// Matched damaged frequency, or `None` when no peak paired up.
    pub damaged_hz: Option<f64>,
    /// `100·(f_damaged − f_undamaged)/f_undamaged`.
    pub percent: Option<f64>,
}

/// Pair damaged against undamaged modes and compute percent variations.
///
/// Equal-length lists pair by ascending order (the table convention even for
/// large shifts). With unequal counts each damaged peak is assigned to the
/// closest unmatched undamaged mode within a ±30 % relative window; undamaged
/// modes left over are reported missing.
pub fn frequency_shift_table(undamaged: &[f64], damaged: &[f64]) -> Result<Vec<ModeShift>> {
    if undamaged.iter().any(|&f| f == 0.0) {
        return Err(Error::Data("zero undamaged frequency".to_string()));
    }
    let shift = |fu: f64, fd: f64| 100.0 * (fd - fu) / fu;

    if undamaged.len() == damaged.len() {
        return Ok(undamaged
            .iter()
            .zip(damaged)
            .map(|(&fu, &fd)| ModeShift {
                undamaged_hz: fu,
                damaged_hz: Some(fd),
                percent: Some(shift(fu, fd)),
            })
            .collect());
    }

    let mut assigned: Vec<Option<f64>> = vec![None; undamaged.len()];
    let mut used = vec![false; damaged.len()];
    for (slot, &fu) in undamaged.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (j, &fd) in damaged.iter().enumerate() {
            if used[j] {
                continue;
            }
            let rel = (fd - fu).abs() / fu;
            if rel <= 0.30 && best.map_or(true, |(_, b)| rel < b) {
                best = Some((j, rel));
            }
        }
        if let Some((j, _)) = best {
            used[j] = true;
            assigned[slot] = Some(damaged[j]);
        }
    }
    Ok(undamaged
        .iter()
        .zip(assigned)
        .map(|(&fu, fd)| ModeShift {
            undamaged_hz: fu,
            damaged_hz: fd,
            percent: fd.map(|fd| shift(fu, fd)),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{analytic_modes, default_model, simulate, DamageScenario, ExcitationSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn sine_record(freq: f64, fs: f64, n: usize, id: u32) -> SensorRecord {
        let samples = (0..n)
            .map(|i| (std::f64::consts::TAU * freq * i as f64 / fs).sin())
            .collect();
        SensorRecord::new(id, samples, fs).unwrap()
    }

    #[test]
    fn sinusoid_auto_spectrum_peaks_at_grid_frequency() {
        let fs = 200.0;
        let nfft = 1024;
        // Put the tone exactly on a grid line: k·fs/nfft with k = 123.
        let f0 = 123.0 * fs / nfft as f64;
        let rec = sine_record(f0, fs, 8192, 1);
        let cpsd = welch_cpsd(&[rec], nfft, 0.5).unwrap();
        let first = first_singular_values(&cpsd);
        let peak_bin = 123usize;
        let level = first[peak_bin];
        for offset in [3usize, 4, 5] {
            let neighbor = first[peak_bin - offset].max(first[peak_bin + offset]);
            assert!(
                10.0 * (level / neighbor).log10() >= 20.0,
                "tone only {} dB above ±{offset} bins",
                10.0 * (level / neighbor).log10()
            );
        }
    }

    #[test]
    fn cross_spectra_are_hermitian_exactly() {
        let fs = 100.0;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let records: Vec<SensorRecord> = (0..3)
            .map(|id| {
                let samples = (0..2048)
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect();
                SensorRecord::new(id + 1, samples, fs).unwrap()
            })
            .collect();
        let cpsd = welch_cpsd(&records, 256, 0.5).unwrap();
        for m in &cpsd.matrices {
            for i in 0..3 {
                assert_eq!(m[(i, i)].im, 0.0);
                assert!(m[(i, i)].re >= 0.0);
                for j in (i + 1)..3 {
                    assert_eq!(m[(i, j)], m[(j, i)].conj());
                }
            }
        }
    }

    #[test]
    fn white_noise_auto_spectrum_is_flat_after_averaging() {
        let fs = 200.0;
        let nfft = 256;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // 64 half-overlapping segments need (64+1)·nfft/2 samples.
        let n = 65 * nfft / 2;
        let samples: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let rec = SensorRecord::new(1, samples, fs).unwrap();
        let cpsd = welch_cpsd(&[rec], nfft, 0.5).unwrap();
        assert!(cpsd.segment_count >= 64, "got {} segments", cpsd.segment_count);
        let first = first_singular_values(&cpsd);
        // Skip DC and Nyquist edges where one-sided scaling differs.
        let interior = &first[2..first.len() - 2];
        let max = interior.iter().cloned().fold(f64::MIN, f64::max);
        let min = interior.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min < 3.0, "flatness ratio {}", max / min);
    }

    #[test]
    fn welch_rejects_bad_inputs() {
        let rec = sine_record(5.0, 100.0, 512, 1);
        assert!(welch_cpsd(&[], 256, 0.5).is_err());
        assert!(welch_cpsd(&[rec.clone()], 300, 0.5).is_err(), "nfft not a power of two");
        assert!(welch_cpsd(&[rec.clone()], 1024, 0.5).is_err(), "records shorter than nfft");
        assert!(welch_cpsd(&[rec], 256, 1.0).is_err());
    }

    #[test]
    fn rank_one_matrix_singular_values() {
        let v = [
            Complex64::new(1.0, 0.5),
            Complex64::new(-2.0, 0.0),
            Complex64::new(0.0, 1.5),
        ];
        let mut m = DMatrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = v[i] * v[j].conj();
            }
        }
        let est = CpsdEstimate {
            frequencies: vec![0.0],
            matrices: vec![m],
            nfft: 4,
            overlap: 0.0,
            segment_count: 1,
        };
        let sv = svd_spectrum(&est);
        let norm_sq: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        assert!((sv[0][0] - norm_sq).abs() < 1e-12 * norm_sq);
        assert!(sv[0][1] < 1e-10 * norm_sq);
        assert!(sv[0][2] < 1e-10 * norm_sq);
    }

    #[test]
    fn identity_matrix_singular_values_are_one() {
        let est = CpsdEstimate {
            frequencies: vec![0.0],
            matrices: vec![DMatrix::identity(4, 4)],
            nfft: 4,
            overlap: 0.0,
            segment_count: 1,
        };
        let sv = svd_spectrum(&est);
        assert!(sv[0].iter().all(|&s| (s - 1.0).abs() < 1e-14));
    }

    #[test]
    fn single_tone_picked_within_a_tenth_of_a_bin() {
        let fs = 200.0;
        let nfft = 1024;
        let f0 = 123.0 * fs / nfft as f64;
        let rec = sine_record(f0, fs, 16384, 1);
        let est = estimate_modes(&[rec], nfft, 0.5, (5.0, 50.0), 6.0).unwrap();
        assert_eq!(est.mode_frequencies.len(), 1, "picked {:?}", est.mode_frequencies);
        let bin = fs / nfft as f64;
        assert!(
            (est.mode_frequencies[0] - f0).abs() < 0.1 * bin,
            "picked {} vs tone {f0}",
            est.mode_frequencies[0]
        );
    }

    #[test]
    fn flat_spectrum_has_no_peaks() {
        let frequencies: Vec<f64> = (0..512).map(|k| k as f64 * 0.1).collect();
        let spectrum = vec![1.0; 512];
        let peaks = pick_peaks(&frequencies, &spectrum, (5.0, 40.0), 6.0).unwrap();
        assert!(peaks.is_empty());
    }

    #[test]
    fn pick_peaks_rejects_empty_band() {
        let frequencies: Vec<f64> = (0..64).map(|k| k as f64).collect();
        let spectrum = vec![1.0; 64];
        assert!(pick_peaks(&frequencies, &spectrum, (50.0, 10.0), 6.0).is_err());
        assert!(pick_peaks(&frequencies, &spectrum, (10.0, 1000.0), 6.0).is_err());
    }

    #[test]
    fn sigma_ratio_peaks_near_structural_mode() {
        let model = default_model();
        let spec = ExcitationSpec {
            duration_s: 60.0,
            sampling_rate_hz: 200.0,
            band_low_hz: 5.0,
            band_high_hz: 50.0,
            seed: 41,
        };
        let records = simulate(&model, &DamageScenario::undamaged(1, 4), &spec, 4).unwrap();
        let cpsd = welch_cpsd(&records, 1024, 0.5).unwrap();
        let sv = svd_spectrum(&cpsd);
        let f1 = analytic_modes(&model)[0].frequency_hz;
        let bin = 200.0 / 1024.0;
        let near_mode = (f1 / bin).round() as usize;
        let ratio_at_mode = sv[near_mode][0] / sv[near_mode][1].max(1e-300);
        let away = ((f1 + 5.0) / bin).round() as usize;
        let ratio_away = sv[away][0] / sv[away][1].max(1e-300);
        assert!(
            ratio_at_mode > 10.0 * ratio_away,
            "σ₁/σ₂ {ratio_at_mode} at mode vs {ratio_away} away"
        );
    }

    #[test]
    fn peaks_invariant_under_uniform_amplitude_scaling() {
        let fs = 200.0;
        let spec = ExcitationSpec {
            duration_s: 40.0,
            sampling_rate_hz: fs,
            band_low_hz: 5.0,
            band_high_hz: 50.0,
            seed: 13,
        };
        let records = simulate(&default_model(), &DamageScenario::undamaged(1, 4), &spec, 4).unwrap();
        let scaled: Vec<SensorRecord> = records
            .iter()
            .map(|r| {
                SensorRecord::new(
                    r.sensor_id,
                    r.samples.iter().map(|v| v * 7.0).collect(),
                    r.sampling_rate_hz,
                )
                .unwrap()
            })
            .collect();
        let a = estimate_modes(&records, 1024, 0.5, (5.0, 50.0), 6.0).unwrap();
        let b = estimate_modes(&scaled, 1024, 0.5, (5.0, 50.0), 6.0).unwrap();
        assert_eq!(a.mode_frequencies.len(), b.mode_frequencies.len());
        for (fa, fb) in a.mode_frequencies.iter().zip(&b.mode_frequencies) {
            assert!((fa - fb).abs() < 1e-9, "{fa} vs {fb}");
        }
    }

    #[test]
    fn shift_table_identical_modes() {
        let rows = frequency_shift_table(&[7.47, 7.76], &[7.47, 7.76]).unwrap();
        assert!(rows.iter().all(|r| r.percent == Some(0.0)));
    }

    #[test]
    fn shift_table_severe_drop_pairs_by_order() {
        let rows = frequency_shift_table(&[7.47, 7.76], &[2.63, 3.62]).unwrap();
        let p0 = rows[0].percent.unwrap();
        assert!((p0 + 64.79).abs() < 0.01, "got {p0}");
    }

    #[test]
    fn shift_table_uniform_half_stiffness() {
        let undamaged = [7.47, 21.5, 32.2];
        let damaged: Vec<f64> = undamaged.iter().map(|f| f / 2f64.sqrt()).collect();
        let rows = frequency_shift_table(&undamaged, &damaged).unwrap();
        let expected = 100.0 * (1.0 / 2f64.sqrt() - 1.0);
        for row in rows {
            assert!((row.percent.unwrap() - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn shift_table_reports_missing_modes() {
        // Damaged case resolved only one mode near the first undamaged one.
        let rows = frequency_shift_table(&[7.47, 7.76], &[7.40]).unwrap();
        assert_eq!(rows[0].damaged_hz, Some(7.40));
        assert_eq!(rows[1].damaged_hz, None);
        assert_eq!(rows[1].percent, None);
    }

    #[test]
    fn shift_table_rejects_zero_frequency() {
        assert!(frequency_shift_table(&[0.0], &[1.0]).is_err());
    }

    #[test]
    fn noise_excited_frame_modes_match_analytic_within_two_percent() {
        let model = default_model();
        let spec = ExcitationSpec {
            duration_s: 60.0,
            sampling_rate_hz: 200.0,
            band_low_hz: 5.0,
            band_high_hz: 50.0,
            seed: 29,
        };
        let records = simulate(&model, &DamageScenario::undamaged(1, 4), &spec, 4).unwrap();
        let est = estimate_modes(&records, 1024, 0.5, (5.0, 50.0), 6.0).unwrap();
        let analytic = analytic_modes(&model);
        assert!(est.mode_frequencies.len() >= 2, "picked {:?}", est.mode_frequencies);
        for (picked, truth) in est.mode_frequencies.iter().take(2).zip(&analytic) {
            let rel = (picked - truth.frequency_hz).abs() / truth.frequency_hz;
            assert!(rel < 0.02, "picked {picked} vs analytic {}", truth.frequency_hz);
        }
    }
}
