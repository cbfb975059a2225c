//! Spectral measurement oracles: harmonicity, centroid, band energies, and
//! the per-clip summary the census is built from.

use crate::error::{Error, Result};
use crate::fft;
use crate::synth::AudioBuffer;

use super::pitch::{estimate_f0, median_f0, F0Estimator, PitchFrame};

/// Spectral analysis window (samples at 16 kHz: 64 ms) and FFT size.
const SPEC_WINDOW: usize = 1024;
const SPEC_NFFT: usize = 2048;

/// Harmonic band half-width: a fraction of the fundamental, floored at the
/// analysis resolution so the main lobe of each partial is captured.
const BAND_FRACTION: f64 = 0.03;

/// Everything measured about one clip in a single pass.
#[derive(Clone, Debug, Default)]
pub struct ClipAnalysis {
    pub median_f0: Option<f64>,
    /// Fraction of energy in harmonic bands, averaged over voiced frames.
    pub harmonicity: Option<f64>,
    /// Energy-weighted mean frequency of the whole clip.
    pub centroid_hz: f64,
    /// Centroid after removing harmonic bands in voiced frames.
    pub residual_centroid_hz: f64,
    /// Entropy (nats) of the harmonic band-energy distribution.
    pub harmonic_entropy: Option<f64>,
    /// Mean harmonic / residual band energy over analyzed frames, dB.
    pub harmonic_db: Option<f64>,
    pub residual_db: Option<f64>,
    /// Correlation between the harmonic level track (tone-like reference
    /// partials of the clip's median spectrum) and the noise-band level
    /// track; `None` when either track lacks the dynamic range or frame
    /// count to estimate it.
    pub volume_correlation: Option<f64>,
    /// Median |frame-to-frame| pitch change over voiced frames, semitones
    /// (median so octave glitches do not dominate).
    pub semitone_delta: Option<f64>,
    pub voiced_fraction: f64,
}

fn frame_spectrum(samples: &[f64], window: &[f64]) -> Vec<f64> {
    let frame: Vec<f64> = samples.iter().zip(window).map(|(s, w)| s * w).collect();
    let mags = fft::magnitude_spectrum(&frame, SPEC_NFFT);
    mags.into_iter().map(|m| m * m).collect()
}

/// 4-term Blackman-Harris window: -92 dB sidelobes, so the noise-floor
/// estimate does not ride on harmonic leakage even in dense combs.
fn blackman_harris(len: usize) -> Vec<f64> {
    const A: [f64; 4] = [0.35875, 0.48829, 0.14128, 0.01168];
    (0..len)
        .map(|i| {
            let x = std::f64::consts::TAU * i as f64 / len as f64;
            A[0] - A[1] * x.cos() + A[2] * (2.0 * x).cos() - A[3] * (3.0 * x).cos()
        })
        .collect()
}

/// Marks the power-spectrum bins belonging to harmonic bands around `k * f0`.
fn harmonic_bins(f0: f64, sample_rate: f64, n_bins: usize, marks: &mut [bool]) {
    mark_harmonics(f0, sample_rate, n_bins, 2.0, marks);
}

fn mark_harmonics(f0: f64, sample_rate: f64, n_bins: usize, min_bins: f64, marks: &mut [bool]) {
    let bin_hz = sample_rate / SPEC_NFFT as f64;
    let half_width = (BAND_FRACTION * f0).max(min_bins * bin_hz);
    let nyquist = sample_rate / 2.0;
    marks.iter_mut().for_each(|m| *m = false);
    let mut k = 1.0;
    while k * f0 <= nyquist {
        let center = k * f0;
        let lo = ((center - half_width) / bin_hz).floor().max(0.0) as usize;
        let hi = (((center + half_width) / bin_hz).ceil() as usize).min(n_bins - 1);
        for m in &mut marks[lo..=hi] {
            *m = true;
        }
        k += 1.0;
    }
}

/// Fraction of spectral energy inside narrow bands around the harmonics of
/// the supplied pitch track, averaged over voiced frames.
pub fn harmonicity_ratio(audio: &AudioBuffer, pitch: &[PitchFrame]) -> Result<f64> {
    let total: f64 = audio.samples.iter().map(|s| s * s).sum();
    if total <= 0.0 {
        return Err(Error::Parameter("harmonicity is undefined for silent audio".into()));
    }
    let sr = audio.sample_rate as f64;
    let window = fft::hann_periodic(SPEC_WINDOW);
    let n_bins = SPEC_NFFT / 2 + 1;
    let mut marks = vec![false; n_bins];
    let mut acc = 0.0;
    let mut count = 0usize;
    for frame in pitch.iter().filter(|f| f.voiced) {
        let start = ((frame.time * sr) as usize).saturating_sub(SPEC_WINDOW / 2);
        if start + SPEC_WINDOW > audio.len() {
            continue;
        }
        let power = frame_spectrum(&audio.samples[start..start + SPEC_WINDOW], &window);
        let total_p: f64 = power.iter().sum();
        if total_p <= 0.0 {
            continue;
        }
        harmonic_bins(frame.f0_hz, sr, n_bins, &mut marks);
        let harm: f64 = power
            .iter()
            .zip(&marks)
            .filter(|(_, &m)| m)
            .map(|(p, _)| p)
            .sum();
        acc += harm / total_p;
        count += 1;
    }
    if count == 0 {
        return Err(Error::Parameter("no voiced frames to measure".into()));
    }
    Ok(acc / count as f64)
}

/// Energy-weighted mean frequency of the magnitude spectrum, Hz.
pub fn spectral_centroid(audio: &AudioBuffer) -> Result<f64> {
    let total: f64 = audio.samples.iter().map(|s| s * s).sum();
    if total <= 0.0 {
        return Err(Error::Parameter("centroid is undefined for silent audio".into()));
    }
    let sr = audio.sample_rate as f64;
    let window = fft::hann_periodic(SPEC_WINDOW);
    let bin_hz = sr / SPEC_NFFT as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut start = 0;
    while start + SPEC_WINDOW <= audio.len() {
        let power = frame_spectrum(&audio.samples[start..start + SPEC_WINDOW], &window);
        for (i, p) in power.iter().enumerate() {
            num += i as f64 * bin_hz * p;
            den += p;
        }
        start += SPEC_WINDOW / 2;
    }
    if den <= 0.0 {
        return Err(Error::Parameter("centroid is undefined for silent audio".into()));
    }
    Ok(num / den)
}

/// Full single-pass clip analysis. `active` flags label frames (at the
/// dataset's label frame rate) in which the event is on; spectral statistics
/// that feed the census are restricted to those frames.
pub fn analyze_clip(audio: &AudioBuffer, active: impl Fn(f64) -> bool) -> Result<ClipAnalysis> {
    analyze_clip_with_band(audio, active, None)
}

/// Like [`analyze_clip`], with an optional frequency band (Hz) in which the
/// clip's inharmonic component is known to live. When given, the volume
/// correlation pairs the harmonic track with the level inside that band
/// (harmonic bins excluded); a band-limited noise floor is invisible to a
/// global percentile, so a blind floor would ride on harmonic residue.
pub fn analyze_clip_with_band(
    audio: &AudioBuffer,
    active: impl Fn(f64) -> bool,
    noise_band_hz: Option<(f64, f64)>,
) -> Result<ClipAnalysis> {
    Ok(analyze_clip_with_band_impl(audio, active, noise_band_hz)?.0)
}

fn analyze_clip_with_band_impl(
    audio: &AudioBuffer,
    active: impl Fn(f64) -> bool,
    noise_band_hz: Option<(f64, f64)>,
) -> Result<(ClipAnalysis, LevelTracks)> {
    let sr = audio.sample_rate as f64;
    let est = F0Estimator::for_sample_rate(audio.sample_rate);
    let pitch = estimate_f0(audio, &est)?;
    if pitch.is_empty() {
        return Ok((
            ClipAnalysis::default(),
            LevelTracks {
                times: Vec::new(),
                harm: Vec::new(),
                noise: Vec::new(),
            },
        ));
    }

    let window = fft::hann_periodic(SPEC_WINDOW);
    let floor_window = blackman_harris(SPEC_WINDOW);
    let n_bins = SPEC_NFFT / 2 + 1;
    let bin_hz = sr / SPEC_NFFT as f64;
    let mut marks = vec![false; n_bins];
    // wider exclusion for the noise-level path: the Blackman-Harris main
    // lobe spans ~4 bins, so partial shoulders reach past the narrow marks
    let mut marks_wide = vec![false; n_bins];

    let mut harm_sum = 0.0;
    let mut harm_frames = 0usize;
    let mut centroid_num = 0.0;
    let mut centroid_den = 0.0;
    let mut resid_num = 0.0;
    let mut resid_den = 0.0;
    let mut entropy_sum = 0.0;
    let mut entropy_frames = 0usize;
    let mut harm_track = Vec::new();
    let mut resid_track = Vec::new();
    let mut harm_corr_track = Vec::new();
    let mut floor_track = Vec::new();
    let mut track_times = Vec::new();
    // (time, f0, noise level, power spectrum) per voiced active frame
    let mut corr_candidates: Vec<(f64, f64, f64, Vec<f64>)> = Vec::new();

    for frame in &pitch {
        if !active(frame.time) {
            continue;
        }
        let start = ((frame.time * sr) as usize).saturating_sub(SPEC_WINDOW / 2);
        if start + SPEC_WINDOW > audio.len() {
            continue;
        }
        let power = frame_spectrum(&audio.samples[start..start + SPEC_WINDOW], &window);
        let total: f64 = power.iter().sum();
        if total <= 0.0 {
            continue;
        }
        for (i, p) in power.iter().enumerate() {
            centroid_num += i as f64 * bin_hz * p;
            centroid_den += p;
        }

        if frame.voiced {
            harmonic_bins(frame.f0_hz, sr, n_bins, &mut marks);
            mark_harmonics(frame.f0_hz, sr, n_bins, 4.0, &mut marks_wide);
            // per-harmonic band energies feed the envelope-entropy stat
            let mut band_energies = Vec::new();
            let nyquist = sr / 2.0;
            let half_width = (BAND_FRACTION * frame.f0_hz).max(2.0 * bin_hz);
            let mut k = 1.0;
            while k * frame.f0_hz <= nyquist {
                let center = k * frame.f0_hz;
                let lo = ((center - half_width) / bin_hz).floor().max(0.0) as usize;
                let hi = (((center + half_width) / bin_hz).ceil() as usize).min(n_bins - 1);
                let e: f64 = power[lo..=hi].iter().sum();
                band_energies.push(e);
                k += 1.0;
            }
            // harmonic energy inside the bands, residual (with its centroid
            // contribution) outside
            let mut harm = 0.0;
            let mut resid = 0.0;
            for (i, (p, &m)) in power.iter().zip(&marks).enumerate() {
                if m {
                    harm += p;
                } else {
                    resid += p;
                    resid_num += i as f64 * bin_hz * p;
                    resid_den += p;
                }
            }
            harm_sum += harm / total;
            harm_frames += 1;
            harm_track.push(10.0 * (harm + 1e-12).log10());
            resid_track.push(10.0 * (resid + 1e-12).log10());

            // noise level: inside the known inharmonic band when given
            // (harmonic bins excluded), otherwise a low percentile of a
            // high-dynamic-range spectrum whose -92 dB sidelobes keep
            // partial leakage out of the floor
            let floor_power =
                frame_spectrum(&audio.samples[start..start + SPEC_WINDOW], &floor_window);
            let floor = percentile(&floor_power, 0.30);
            // a frame whose band bins are all claimed by harmonic exclusion
            // has no measurable noise level and contributes no pair
            let noise_level = match noise_band_hz {
                Some((lo, hi)) => {
                    let lo_bin = (lo / bin_hz).floor().max(0.0) as usize;
                    let hi_bin = ((hi / bin_hz).ceil() as usize).min(n_bins - 1);
                    let mut level = 0.0;
                    let mut count = 0usize;
                    for b in lo_bin..=hi_bin {
                        if !marks_wide[b] {
                            level += floor_power[b];
                            count += 1;
                        }
                    }
                    (count > 0).then(|| level / count as f64)
                }
                None => Some(floor),
            };

            // the volume-correlation track is assembled after the loop
            // from peaks of the clip's median spectrum; store this frame's
            // spectrum and noise level for that pass
            if let Some(level) = noise_level {
                corr_candidates.push((frame.time, frame.f0_hz, level, power.clone()));
            }

            let band_total: f64 = band_energies.iter().sum();
            if band_total > 0.0 && band_energies.len() > 1 {
                let mut h = 0.0;
                for e in &band_energies {
                    let p = e / band_total;
                    if p > 1e-300 {
                        h -= p * p.ln();
                    }
                }
                entropy_sum += h;
                entropy_frames += 1;
            }
        } else {
            // unvoiced active frame: all energy is residual
            for (i, p) in power.iter().enumerate() {
                resid_num += i as f64 * bin_hz * p;
                resid_den += p;
            }
        }
    }

    // Reference partials for the volume correlation come from the clip's
    // median spectrum: a steady partial survives the per-bin time median
    // while noise wobble averages out, and no pitch anchoring is involved
    // (octave flips or a tracker captured by narrowband noise cannot bias
    // the track). Peaks must sit outside the known noise band and pass a
    // tone-likeness concentration test in the median spectrum.
    if corr_candidates.len() >= 10 {
        let n_frames_c = corr_candidates.len();
        let mut median_spec = vec![0.0; n_bins];
        let mut column = vec![0.0; n_frames_c];
        for (b, m) in median_spec.iter_mut().enumerate() {
            for (i, c) in corr_candidates.iter().enumerate() {
                column[i] = c.3[b];
            }
            column.sort_by(|a, b| a.partial_cmp(b).unwrap());
            *m = column[n_frames_c / 2];
        }

        let in_band = |b: usize| {
            noise_band_hz
                .map(|(lo, hi)| {
                    let f = b as f64 * bin_hz;
                    f >= lo / 1.1 && f <= hi * 1.1
                })
                .unwrap_or(false)
        };
        let mut order: Vec<usize> = (12..n_bins - 12).collect();
        order.sort_by(|&a, &b| median_spec[b].partial_cmp(&median_spec[a]).unwrap());
        let mut reference: Vec<usize> = Vec::new();
        for &b in &order {
            if reference.len() >= 3 {
                break;
            }
            if in_band(b) || reference.iter().any(|&r| b.abs_diff(r) < 12) {
                continue;
            }
            let tight: f64 = median_spec[b - 2..=b + 2].iter().sum();
            let wide: f64 = median_spec[b - 8..=b + 8].iter().sum();
            if wide > 0.0 && tight >= 0.5 * wide {
                reference.push(b);
            } else if median_spec[b] > 0.0 && reference.is_empty() && tight < 0.2 * wide {
                // the loudest out-of-band region is broadband: nothing
                // tonal to anchor on, stop early
                break;
            }
        }

        if !reference.is_empty() {
            for (time, _, noise_level, power) in &corr_candidates {
                let mut sum = 0.0;
                for &r in &reference {
                    // re-snap within a couple of bins to ride small vibrato
                    let peak = (r - 2..=r + 2)
                        .max_by(|&a, &b| power[a].partial_cmp(&power[b]).unwrap())
                        .unwrap_or(r);
                    let lo = peak.saturating_sub(2);
                    let hi = (peak + 2).min(n_bins - 1);
                    sum += power[lo..=hi].iter().sum::<f64>();
                }
                if sum > 0.0 {
                    harm_corr_track.push(sum.log10());
                    floor_track.push((noise_level + 1e-16).log10());
                    track_times.push(*time);
                }
            }
        }
    }

    let voiced_count = pitch.iter().filter(|f| f.voiced).count();
    let mut deltas = Vec::new();
    for pair in pitch.windows(2) {
        if pair[0].voiced && pair[1].voiced {
            deltas.push((12.0 * (pair[1].f0_hz / pair[0].f0_hz).log2()).abs());
        }
    }
    deltas.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mean_db = |track: &[f64]| {
        if track.is_empty() {
            None
        } else {
            Some(track.iter().sum::<f64>() / track.len() as f64)
        }
    };

    let analysis = ClipAnalysis {
        median_f0: median_f0(&pitch),
        harmonicity: if harm_frames > 0 {
            Some(harm_sum / harm_frames as f64)
        } else {
            None
        },
        centroid_hz: if centroid_den > 0.0 {
            centroid_num / centroid_den
        } else {
            0.0
        },
        residual_centroid_hz: if resid_den > 0.0 {
            resid_num / resid_den
        } else {
            0.0
        },
        harmonic_entropy: if entropy_frames > 0 {
            Some(entropy_sum / entropy_frames as f64)
        } else {
            None
        },
        harmonic_db: mean_db(&harm_track),
        residual_db: mean_db(&resid_track),
        volume_correlation: correlation_if_estimable(&harm_corr_track, &floor_track),
        semitone_delta: if deltas.is_empty() {
            None
        } else {
            Some(deltas[deltas.len() / 2])
        },
        voiced_fraction: voiced_count as f64 / pitch.len() as f64,
    };
    Ok((
        analysis,
        LevelTracks {
            times: track_times,
            harm: harm_corr_track,
            noise: floor_track,
        },
    ))
}

/// p-th quantile of a power spectrum (0 <= p <= 1).
fn percentile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted[((sorted.len() - 1) as f64 * p).round() as usize]
}

fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Correlation of the two level tracks, or `None` when the estimate cannot
/// mean much: too few frames, or a track too flat to carry a signal. The
/// 0.2 log10-energy gate is 2 dB of movement; near-constant tracks measure
/// estimator noise, not coupling.
fn correlation_if_estimable(harm: &[f64], floor: &[f64]) -> Option<f64> {
    if harm.len() < 30 {
        return None;
    }
    if std_dev(harm) < 0.2 || std_dev(floor) < 0.2 {
        return None;
    }
    Some(pearson(harm, floor))
}

/// The raw per-frame level tracks the volume correlation is computed from;
/// exposed for diagnosis and tests.
pub struct LevelTracks {
    pub times: Vec<f64>,
    pub harm: Vec<f64>,
    pub noise: Vec<f64>,
}

pub fn analyze_clip_tracks(
    audio: &AudioBuffer,
    active: impl Fn(f64) -> bool,
    noise_band_hz: Option<(f64, f64)>,
) -> Result<LevelTracks> {
    let a = analyze_clip_with_band_impl(audio, active, noise_band_hz)?;
    Ok(a.1)
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}
