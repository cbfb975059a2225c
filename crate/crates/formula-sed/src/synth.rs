//! The deterministic DSP core: additive harmonic synthesis, time-variant
//! FIR-filtered noise, reverberation, control-rate to audio-rate
//! interpolation, and voiced-segment gating.
//!
//! Everything here is a pure function of its inputs (plus an explicit rng
//! stream where noise is involved), reentrant, and safe to run concurrently
//! on independent buffers.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fft;

const TAU: f64 = std::f64::consts::TAU;

/// A parameter function sampled on the control grid; `hop` audio samples
/// separate consecutive control frames.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlTrack {
    pub values: Vec<f64>,
    pub hop: usize,
}

impl ControlTrack {
    pub fn new(values: Vec<f64>, hop: usize) -> Result<Self> {
        if hop == 0 {
            return Err(Error::Parameter("control hop must be >= 1".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("control values must be finite".into()));
        }
        Ok(ControlTrack { values, hop })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Per-frame magnitude responses of the time-variant noise filter; bins are
/// linearly spaced over [0, Nyquist].
#[derive(Clone, Debug)]
pub struct NoiseFilterField {
    /// Row-major `n_frames x n_bins`, all entries >= 0.
    pub magnitudes: Vec<f64>,
    pub n_frames: usize,
    pub n_bins: usize,
}

impl NoiseFilterField {
    pub fn new(magnitudes: Vec<f64>, n_frames: usize, n_bins: usize) -> Result<Self> {
        if magnitudes.len() != n_frames * n_bins {
            return Err(Error::Parameter("noise field storage/shape mismatch".into()));
        }
        if magnitudes.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::Parameter("noise magnitudes must be finite and >= 0".into()));
        }
        Ok(NoiseFilterField {
            magnitudes,
            n_frames,
            n_bins,
        })
    }
}

/// Mono audio at a fixed sample rate.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioBuffer {
    pub sample_rate: u32,
    pub samples: Vec<f64>,
}

impl AudioBuffer {
    pub fn new(sample_rate: u32, samples: Vec<f64>) -> Self {
        AudioBuffer {
            sample_rate,
            samples,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    /// Finite everywhere and inside the pre-normalization headroom guard.
    pub fn validate(&self) -> Result<()> {
        for &s in &self.samples {
            if !s.is_finite() {
                return Err(Error::Numerical("audio sample is not finite".into()));
            }
            if s.abs() > 4.0 {
                return Err(Error::Numerical(format!(
                    "audio sample {s} exceeds the 4.0 headroom guard"
                )));
            }
        }
        Ok(())
    }
}

/// Linearly interpolates a control track to `n_samples` audio samples;
/// control frame `i` sits at audio sample `i * hop` and the edges are held
/// constant.
pub fn upsample_control(track: &ControlTrack, n_samples: usize) -> Result<Vec<f64>> {
    if track.is_empty() {
        return Err(Error::Parameter("cannot upsample an empty control track".into()));
    }
    let v = &track.values;
    let hop = track.hop as f64;
    let last = v.len() - 1;
    let mut out = Vec::with_capacity(n_samples);
    for n in 0..n_samples {
        let t = n as f64 / hop;
        let i = t.floor() as usize;
        let val = if i >= last {
            v[last]
        } else {
            let frac = t - i as f64;
            v[i] + (v[i + 1] - v[i]) * frac
        };
        out.push(val);
    }
    Ok(out)
}

/// Accumulated phase of harmonic `k` driven by an instantaneous fundamental:
/// `phi(n) = 2 pi * sum_{s=0..n} k f0(s) / sr + phi0`, wrapped to [0, 2 pi).
/// Wrapping keeps the accumulator small over long clips and changes no sine
/// value.
pub fn phase_accumulate(
    f0: &[f64],
    sample_rate: u32,
    k: usize,
    phi0: f64,
) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::Parameter("harmonic index k must be >= 1".into()));
    }
    if f0.iter().any(|&f| !f.is_finite() || f < 0.0) {
        return Err(Error::Parameter("f0 must be finite and >= 0".into()));
    }
    let step = TAU / sample_rate as f64;
    let kf = k as f64;
    let mut phase = phi0.rem_euclid(TAU);
    let mut out = Vec::with_capacity(f0.len());
    for &f in f0 {
        phase += (step * f) * kf;
        if phase >= TAU {
            phase %= TAU;
        }
        out.push(phase);
    }
    Ok(out)
}

/// Additive harmonic synthesis: `x(n) = A(n) * sum_k c_k(n) sin(phi_k(n))`.
///
/// All inputs are audio rate. Harmonics whose instantaneous frequency
/// `k * f0(n)` exceeds Nyquist contribute zero at that sample (their phase
/// still advances). Samples where `A(n) == 0` skip the oscillator bank
/// entirely, which lets callers pre-gate the amplitude for free.
pub fn additive_harmonic(
    amplitude: &[f64],
    harmonic_gains: &[Vec<f64>],
    f0: &[f64],
    initial_phases: &[f64],
    sample_rate: u32,
) -> Result<AudioBuffer> {
    let n = f0.len();
    let k_count = harmonic_gains.len();
    if k_count == 0 {
        return Err(Error::Parameter("need at least one harmonic".into()));
    }
    if initial_phases.len() != k_count {
        return Err(Error::Parameter("one initial phase per harmonic required".into()));
    }
    if amplitude.len() != n || harmonic_gains.iter().any(|g| g.len() != n) {
        return Err(Error::Parameter("all tracks must have the same length as f0".into()));
    }
    if f0.iter().any(|&f| !f.is_finite() || f < 0.0) {
        return Err(Error::Parameter("f0 must be finite and >= 0".into()));
    }

    let nyquist = sample_rate as f64 / 2.0;
    let step = TAU / sample_rate as f64;
    let mut phases: Vec<f64> = initial_phases.iter().map(|p| p.rem_euclid(TAU)).collect();
    let mut samples = vec![0.0; n];

    for i in 0..n {
        let f = f0[i];
        let base_inc = step * f;
        let a = amplitude[i];
        if a == 0.0 {
            // inaudible sample: advance phases only
            for (k, phase) in phases.iter_mut().enumerate() {
                *phase += base_inc * (k + 1) as f64;
                if *phase >= TAU {
                    *phase %= TAU;
                }
            }
            continue;
        }
        let mut acc = 0.0;
        for (k, phase) in phases.iter_mut().enumerate() {
            let kf = (k + 1) as f64;
            *phase += base_inc * kf;
            if *phase >= TAU {
                *phase %= TAU;
            }
            if kf * f <= nyquist {
                acc += harmonic_gains[k][i] * phase.sin();
            }
        }
        samples[i] = a * acc;
    }
    Ok(AudioBuffer::new(sample_rate, samples))
}

/// Renders the inharmonic component: uniform noise shaped per control frame
/// by a zero-phase FIR built from the sampled magnitude response (inverse
/// DFT, centered, Hann-windowed to `filter_len` taps), overlap-added with
/// 50%-overlapped Hann synthesis windows. Output length is
/// `n_frames * hop`.
///
/// Taps are rescaled to unit energy per frame, so the field controls only
/// the spectral shape; level belongs to the volume tracks. Frames whose
/// magnitudes are all zero stay silent.
pub fn filtered_noise<R: Rng>(
    field: &NoiseFilterField,
    hop: usize,
    filter_len: usize,
    rng: &mut R,
    sample_rate: u32,
) -> Result<AudioBuffer> {
    if filter_len % 2 == 0 {
        return Err(Error::Parameter("filter length must be odd".into()));
    }
    if hop == 0 {
        return Err(Error::Parameter("hop must be >= 1".into()));
    }
    let m = 2 * (field.n_bins - 1);
    if field.n_bins < 2 || filter_len > m + 1 {
        return Err(Error::Parameter(format!(
            "filter length {filter_len} inconsistent with {} bins (window method)",
            field.n_bins
        )));
    }

    let n_total = field.n_frames * hop;
    let noise: Vec<f64> = (0..n_total).map(|_| rng.random_range(-1.0..1.0)).collect();

    let win_len = 2 * hop;
    let synth_win = fft::hann_periodic(win_len);
    let tap_win = fft::hann_symmetric(filter_len);
    let half = (filter_len - 1) / 2;

    // cos lookup for the inverse DFT of the (real, even) magnitude response
    let cos_table: Vec<f64> = (0..m).map(|r| (TAU * r as f64 / m as f64).cos()).collect();

    let mut out = vec![0.0; n_total];
    let mut taps = vec![0.0; filter_len];
    let mut h_raw = vec![0.0; m];

    for frame in 0..field.n_frames {
        let mags = &field.magnitudes[frame * field.n_bins..(frame + 1) * field.n_bins];

        // h_raw[j] = 1/M * sum_b G[b] cos(2 pi b j / M), G mirrored to M bins
        for (j, h) in h_raw.iter_mut().enumerate() {
            let mut acc = mags[0];
            for (b, &g) in mags.iter().enumerate().skip(1) {
                let w = cos_table[(b * j) % m];
                // interior bins appear twice in the mirrored spectrum
                acc += if b == field.n_bins - 1 { g * w } else { 2.0 * g * w };
            }
            *h = acc / m as f64;
        }
        // center around the middle tap and window
        for (t, tap) in taps.iter_mut().enumerate() {
            let j = (t + m - half) % m; // (t - half) mod m, kept non-negative
            *tap = h_raw[j] * tap_win[t];
        }
        let energy: f64 = taps.iter().map(|t| t * t).sum();
        if energy > 1e-300 {
            let norm = energy.sqrt().recip();
            for tap in taps.iter_mut() {
                *tap *= norm;
            }
        }

        // filter this frame's stretch of the shared noise process and
        // overlap-add under the synthesis window
        let start = frame * hop;
        for j in 0..win_len {
            let pos = start + j;
            if pos >= n_total {
                break;
            }
            let mut acc = 0.0;
            for (t, &tap) in taps.iter().enumerate() {
                // zero-phase alignment: tap `half` sits on the current sample
                let g = pos as isize + half as isize - t as isize;
                if g >= 0 && (g as usize) < n_total {
                    acc += tap * noise[g as usize];
                }
            }
            out[pos] += synth_win[j] * acc;
        }
    }
    Ok(AudioBuffer::new(sample_rate, out))
}

/// Tail gain applied at full reverb strength.
const REVERB_TAIL_GAIN: f64 = 0.03;

/// Convolves with a synthetic room response: a unit impulse plus a
/// strength-scaled exponentially decaying white-noise tail whose -60 dB time
/// is `0.1 + 0.9 * strength` seconds. Output is truncated to the input
/// length; strength zero is an exact passthrough.
pub fn apply_reverb<R: Rng>(dry: &AudioBuffer, strength: f64, rng: &mut R) -> Result<AudioBuffer> {
    if !(0.0..=1.0).contains(&strength) {
        return Err(Error::Parameter(format!("reverb strength {strength} outside [0, 1]")));
    }
    if strength == 0.0 || dry.is_empty() {
        return Ok(dry.clone());
    }
    let sr = dry.sample_rate as f64;
    let decay_seconds = 0.1 + 0.9 * strength;
    let tail_len = (decay_seconds * sr).ceil() as usize;
    let mut ir = Vec::with_capacity(tail_len + 1);
    ir.push(1.0);
    for n in 1..=tail_len {
        let env = 10f64.powf(-3.0 * n as f64 / (decay_seconds * sr));
        let z: f64 = rng.sample(StandardNormal);
        ir.push(strength * REVERB_TAIL_GAIN * env * z);
    }
    let wet = fft::convolve(&dry.samples, &ir);
    Ok(AudioBuffer::new(
        dry.sample_rate,
        wet[..dry.len()].to_vec(),
    ))
}

/// Builds the gate for a set of voiced segments: gain 1 inside, 0 outside,
/// linear ramps of `ramp` seconds at the boundaries (clipped to half the
/// segment length).
pub fn gate_segments(
    n_samples: usize,
    segments: &[(f64, f64)],
    ramp: f64,
    sample_rate: u32,
) -> Result<Vec<f64>> {
    let sr = sample_rate as f64;
    let clip_end = n_samples as f64 / sr;
    let mut prev_end = f64::NEG_INFINITY;
    for &(on, off) in segments {
        if !(on.is_finite() && off.is_finite()) || on < 0.0 || off > clip_end + 1e-9 || on >= off {
            return Err(Error::Parameter(format!("bad segment ({on}, {off})")));
        }
        if on < prev_end {
            return Err(Error::Parameter("segments must be sorted and non-overlapping".into()));
        }
        prev_end = off;
    }

    let mut gain = vec![0.0; n_samples];
    for &(on, off) in segments {
        let ramp_w = ramp.max(0.0).min((off - on) / 2.0);
        let on_s = (on * sr).round() as usize;
        let off_s = ((off * sr).round() as usize).min(n_samples);
        let ramp_s = (ramp_w * sr).round() as usize;
        for (n, g) in gain.iter_mut().enumerate().take(off_s).skip(on_s) {
            let v = if ramp_s == 0 {
                1.0
            } else {
                let up = (n - on_s) as f64 / ramp_s as f64;
                let down = (off_s - n) as f64 / ramp_s as f64;
                up.min(down).min(1.0)
            };
            *g = v.clamp(0.0, 1.0);
        }
    }
    Ok(gain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn track(values: Vec<f64>, hop: usize) -> ControlTrack {
        ControlTrack::new(values, hop).unwrap()
    }

    #[test]
    fn upsample_constant_track_is_constant() {
        let out = upsample_control(&track(vec![0.7, 0.7, 0.7], 10), 35).unwrap();
        assert_eq!(out.len(), 35);
        assert!(out.iter().all(|&v| v == 0.7));
    }

    #[test]
    fn upsample_interpolates_linearly_and_extends_edges() {
        let out = upsample_control(&track(vec![0.0, 1.0], 4), 8).unwrap();
        let expected = [0.0, 0.25, 0.5, 0.75, 1.0, 1.0, 1.0, 1.0];
        for (o, e) in out.iter().zip(&expected) {
            assert!((o - e).abs() < 1e-12, "{out:?}");
        }
    }

    #[test]
    fn upsample_stays_within_track_bounds() {
        let t = track(vec![0.3, -1.2, 2.5, 0.0], 7);
        let out = upsample_control(&t, 40).unwrap();
        for v in out {
            assert!((-1.2..=2.5).contains(&v));
        }
    }

    #[test]
    fn zero_f0_keeps_initial_phase() {
        let phases = phase_accumulate(&[0.0; 16], 16_000, 1, 1.25).unwrap();
        assert!(phases.iter().all(|&p| (p - 1.25).abs() < 1e-15));
    }

    #[test]
    fn quarter_sample_rate_cycles_every_four_samples() {
        let f0 = vec![4000.0; 64];
        let phases = phase_accumulate(&f0, 16_000, 1, 0.0).unwrap();
        let sines: Vec<f64> = phases.iter().map(|p| p.sin()).collect();
        for i in 0..60 {
            assert!((sines[i] - sines[i + 4]).abs() < 1e-9);
        }
    }

    #[test]
    fn doubling_k_doubles_the_phase_exactly_before_wrapping() {
        // tiny f0 so no wrap occurs; scaling by 2 then commutes with rounding
        let f0 = vec![1.0; 100];
        let p1 = phase_accumulate(&f0, 16_000, 3, 0.0).unwrap();
        let p2 = phase_accumulate(&f0, 16_000, 6, 0.0).unwrap();
        for (a, b) in p1.iter().zip(&p2) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn wrapped_phase_changes_no_sine_value() {
        let f0: Vec<f64> = (0..4000).map(|i| 200.0 + 0.05 * i as f64).collect();
        let wrapped = phase_accumulate(&f0, 16_000, 5, 0.3).unwrap();
        // unwrapped reference accumulator
        let step = TAU / 16_000.0;
        let mut acc = 0.3;
        for (i, &f) in f0.iter().enumerate() {
            acc += step * f * 5.0;
            assert!((acc.sin() - wrapped[i].sin()).abs() < 1e-9, "sample {i}");
        }
    }

    #[test]
    fn negative_f0_is_rejected() {
        assert!(phase_accumulate(&[-1.0], 16_000, 1, 0.0).is_err());
    }

    #[test]
    fn zero_amplitude_silences_everything() {
        let n = 256;
        let buf = additive_harmonic(
            &vec![0.0; n],
            &[vec![1.0; n]],
            &vec![440.0; n],
            &[0.0],
            16_000,
        )
        .unwrap();
        assert!(buf.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn single_harmonic_peaks_at_its_frequency() {
        let sr = 16_000;
        let nfft = 16_384;
        let n = nfft;
        let buf = additive_harmonic(
            &vec![1.0; n],
            &[vec![1.0; n]],
            &vec![1000.0; n],
            &[0.0],
            sr,
        )
        .unwrap();
        let window = fft::hann_periodic(nfft);
        let frame: Vec<f64> = buf.samples[..nfft].iter().zip(&window).map(|(s, w)| s * w).collect();
        let mags = fft::magnitude_spectrum(&frame, nfft);
        let peak_bin = mags
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let peak_freq = peak_bin as f64 * sr as f64 / nfft as f64;
        assert!((peak_freq - 1000.0).abs() < 2.0, "peak at {peak_freq}");

        let mut sorted = mags.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = sorted[sorted.len() / 2];
        let ratio_db = 20.0 * (mags[peak_bin] / median.max(1e-300)).log10();
        assert!(ratio_db >= 40.0, "peak only {ratio_db:.1} dB above median");
    }

    #[test]
    fn super_nyquist_harmonic_contributes_nothing() {
        let n = 512;
        let f0 = vec![5000.0; n];
        let one = additive_harmonic(&vec![1.0; n], &[vec![1.0; n]], &f0, &[0.4], 16_000).unwrap();
        let two = additive_harmonic(
            &vec![1.0; n],
            &[vec![1.0; n], vec![0.8; n]],
            &f0,
            &[0.4, 1.9],
            16_000,
        )
        .unwrap();
        assert_eq!(one.samples, two.samples);
    }

    #[test]
    fn output_respects_gain_bound() {
        let mut rng = stream(21);
        let n = 2000;
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
        let gains: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..n).map(|_| rng.random_range(0.0..0.5)).collect())
            .collect();
        let f0: Vec<f64> = (0..n).map(|_| rng.random_range(50.0..2000.0)).collect();
        let buf = additive_harmonic(&a, &gains, &f0, &[0.0, 1.0, 2.0, 3.0], 16_000).unwrap();
        let bound = 2.0 * 4.0 * 0.5;
        assert!(buf.samples.iter().all(|&s| s.abs() <= bound));
        buf.validate().unwrap();
    }

    #[test]
    fn time_and_spectral_energy_agree() {
        let sr = 16_000;
        let n = 4096;
        let buf = additive_harmonic(
            &vec![0.5; n],
            &[vec![0.6; n], vec![0.4; n]],
            &vec![500.0; n],
            &[0.0, 0.7],
            sr,
        )
        .unwrap();
        let time_energy: f64 = buf.samples.iter().map(|s| s * s).sum();
        let spec = fft::magnitude_spectrum(&buf.samples, n);
        // Plancherel over the one-sided spectrum
        let mut spec_energy = spec[0] * spec[0] + spec[n / 2] * spec[n / 2];
        for m in &spec[1..n / 2] {
            spec_energy += 2.0 * m * m;
        }
        spec_energy /= n as f64;
        let rel = (time_energy - spec_energy).abs() / time_energy;
        assert!(rel < 1e-6, "relative energy error {rel}");
    }

    fn flat_field(n_frames: usize, n_bins: usize, level: f64) -> NoiseFilterField {
        NoiseFilterField::new(vec![level; n_frames * n_bins], n_frames, n_bins).unwrap()
    }

    #[test]
    fn zero_magnitudes_give_silence() {
        let buf = filtered_noise(&flat_field(20, 65, 0.0), 320, 129, &mut stream(1), 16_000).unwrap();
        assert_eq!(buf.len(), 20 * 320);
        assert!(buf.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn flat_magnitude_noise_is_spectrally_flat() {
        let buf = filtered_noise(&flat_field(100, 65, 1.0), 320, 129, &mut stream(2), 16_000).unwrap();
        let (freqs, psd) = fft::welch_psd(&buf.samples, 16_000.0, 512);
        let band: Vec<f64> = freqs
            .iter()
            .zip(&psd)
            .filter(|(f, _)| (100.0..=7000.0).contains(*f))
            .map(|(_, p)| 10.0 * p.log10())
            .collect();
        let mean = band.iter().sum::<f64>() / band.len() as f64;
        for db in band {
            assert!((db - mean).abs() <= 3.0, "PSD deviates {} dB from mean", db - mean);
        }
    }

    #[test]
    fn band_filter_rejects_out_of_band_energy() {
        // one-decade band: 600..6000 Hz on the 65-bin grid (125 Hz spacing)
        let n_bins = 65;
        let bin_hz = 8000.0 / (n_bins - 1) as f64;
        let (lo, hi) = (600.0, 6000.0);
        let mags: Vec<f64> = (0..n_bins)
            .map(|b| {
                let f = b as f64 * bin_hz;
                if (lo..=hi).contains(&f) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let mut field_data = Vec::new();
        for _ in 0..150 {
            field_data.extend_from_slice(&mags);
        }
        let field = NoiseFilterField::new(field_data, 150, n_bins).unwrap();
        let buf = filtered_noise(&field, 320, 129, &mut stream(3), 16_000).unwrap();

        let (freqs, psd) = fft::welch_psd(&buf.samples, 16_000.0, 512);
        let mut in_band = Vec::new();
        let mut out_band = Vec::new();
        for (f, p) in freqs.iter().zip(&psd) {
            if (lo + bin_hz..=hi - bin_hz).contains(f) {
                in_band.push(*p);
            } else if *f < lo - bin_hz || *f > hi + bin_hz {
                out_band.push(*p);
            }
        }
        let mean_in = in_band.iter().sum::<f64>() / in_band.len() as f64;
        let mean_out = out_band.iter().sum::<f64>() / out_band.len() as f64;
        let rejection_db = 10.0 * (mean_in / mean_out).log10();
        assert!(rejection_db >= 30.0, "rejection only {rejection_db:.1} dB");
    }

    #[test]
    fn even_filter_length_is_rejected() {
        assert!(filtered_noise(&flat_field(4, 65, 1.0), 320, 128, &mut stream(4), 16_000).is_err());
    }

    #[test]
    fn reverb_strength_zero_is_bit_identical() {
        let dry = AudioBuffer::new(16_000, (0..4000).map(|i| (i as f64 * 0.01).sin()).collect());
        let wet = apply_reverb(&dry, 0.0, &mut stream(5)).unwrap();
        assert_eq!(dry, wet);
    }

    #[test]
    fn reverb_preserves_length() {
        let dry = AudioBuffer::new(16_000, vec![0.5; 8000]);
        for strength in [0.2, 0.7, 1.0] {
            let wet = apply_reverb(&dry, strength, &mut stream(6)).unwrap();
            assert_eq!(wet.len(), dry.len());
        }
    }

    #[test]
    fn impulse_response_tail_rings_and_decays() {
        let sr = 16_000usize;
        let mut samples = vec![0.0; sr];
        samples[0] = 1.0;
        let dry = AudioBuffer::new(sr as u32, samples);
        let wet = apply_reverb(&dry, 1.0, &mut stream(7)).unwrap();

        let beyond_50ms: f64 = wet.samples[sr / 20..].iter().map(|s| s * s).sum();
        assert!(beyond_50ms > 0.0);

        // 10 ms RMS windows, then require monotone decay of 50 ms block means
        let win = sr / 100;
        let rms: Vec<f64> = wet.samples[..sr]
            .chunks(win)
            .map(|c| (c.iter().map(|s| s * s).sum::<f64>() / c.len() as f64).sqrt())
            .collect();
        let blocks: Vec<f64> = rms[1..] // skip the window holding the direct impulse
            .chunks(5)
            .filter(|c| c.len() == 5)
            .map(|c| c.iter().sum::<f64>() / 5.0)
            .collect();
        for w in blocks.windows(2) {
            assert!(w[1] < w[0], "tail RMS not decaying: {blocks:?}");
        }
    }

    #[test]
    fn no_segments_mean_all_zero_gain() {
        let g = gate_segments(1000, &[], 0.02, 16_000).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_clip_segment_is_unity_inside_ramps() {
        let sr = 16_000;
        let n = sr as usize;
        let g = gate_segments(n, &[(0.0, 1.0)], 0.02, sr).unwrap();
        let ramp_s = (0.02 * sr as f64) as usize;
        assert!(g[ramp_s..n - ramp_s].iter().all(|&v| v == 1.0));
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn ramp_is_sample_exact() {
        let sr = 16_000;
        let g = gate_segments(sr as usize * 2, &[(0.5, 1.5)], 0.02, sr).unwrap();
        let on_s = 8000;
        let ramp_s = 320;
        assert_eq!(g[on_s + ramp_s], 1.0, "gain must reach 1.0 at onset + ramp");
        for i in 0..ramp_s {
            let expected = i as f64 / ramp_s as f64;
            assert!((g[on_s + i] - expected).abs() < 1e-12);
        }
        assert!(g.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn overlapping_segments_are_rejected() {
        assert!(gate_segments(32_000, &[(0.0, 1.0), (0.5, 1.5)], 0.01, 16_000).is_err());
        assert!(gate_segments(32_000, &[(1.0, 0.5)], 0.01, 16_000).is_err());
    }

    #[test]
    fn fuzzed_inputs_never_produce_nan() {
        let mut rng = stream(99);
        for round in 0..50 {
            let n = 400;
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.5)).collect();
            let k = rng.random_range(1..8usize);
            let gains: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..n).map(|_| rng.random_range(0.0..1.0)).collect())
                .collect();
            let f0: Vec<f64> = (0..n).map(|_| rng.random_range(20.0..4000.0)).collect();
            let phases: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..TAU)).collect();
            let buf = additive_harmonic(&a, &gains, &f0, &phases, 16_000).unwrap();
            buf.validate().unwrap_or_else(|e| panic!("round {round}: {e}"));

            let mags: Vec<f64> = (0..5 * 65).map(|_| rng.random_range(0.0..2.0)).collect();
            let field = NoiseFilterField::new(mags, 5, 65).unwrap();
            let nbuf = filtered_noise(&field, 80, 129, &mut rng, 16_000).unwrap();
            nbuf.validate().unwrap();
        }
    }
}
