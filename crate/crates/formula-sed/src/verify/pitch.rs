//! Fundamental-frequency estimation for the analysis oracles.
//!
//! Autocorrelation-based with cumulative mean normalization of the
//! difference function and parabolic refinement of the chosen lag. The
//! difference function is computed with FFT correlation, which keeps the
//! per-frame cost low enough to analyze thousands of clips.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::synth::AudioBuffer;

/// One analysis frame of the pitch track.
#[derive(Clone, Copy, Debug)]
pub struct PitchFrame {
    /// Center time of the frame, seconds.
    pub time: f64,
    pub f0_hz: f64,
    pub voiced: bool,
    /// 1 minus the normalized-difference minimum, clamped to [0, 1].
    pub confidence: f64,
}

/// Windowing and decision parameters of the estimator.
#[derive(Clone, Copy, Debug)]
pub struct F0Estimator {
    /// Analysis window, samples (46 ms at 16 kHz covers two 50 Hz periods).
    pub window: usize,
    /// Hop between frames, samples (10 ms).
    pub hop: usize,
    pub min_hz: f64,
    pub max_hz: f64,
    /// Frames below this periodicity confidence are reported unvoiced.
    pub confidence_threshold: f64,
    /// RMS below which a frame is silence outright.
    pub silence_rms: f64,
}

impl F0Estimator {
    pub fn for_sample_rate(sample_rate: u32) -> Self {
        let sr = sample_rate as f64;
        F0Estimator {
            window: (0.046 * sr).round() as usize,
            hop: (0.010 * sr).round() as usize,
            min_hz: 50.0,
            max_hz: 4000.0,
            confidence_threshold: 0.5,
            silence_rms: 1e-4,
        }
    }
}

/// Per-frame pitch estimates over the whole buffer.
pub fn estimate_f0(audio: &AudioBuffer, est: &F0Estimator) -> Result<Vec<PitchFrame>> {
    let sr = audio.sample_rate as f64;
    let tau_max = (sr / est.min_hz).floor() as usize;
    let tau_min = ((sr / est.max_hz).floor() as usize).max(2);
    let need = est.window + tau_max;
    if est.window < 2 * tau_max.min(est.window) / 2 || est.window == 0 {
        return Err(Error::Parameter("estimator window too small".into()));
    }
    if audio.len() < need {
        return Ok(Vec::new());
    }

    let w = est.window;
    let fft_len = (w + need).next_power_of_two();
    let mut planner = rustfft::FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(fft_len);
    let ifft = planner.plan_fft_inverse(fft_len);

    let mut frames = Vec::new();
    let mut start = 0usize;
    while start + need <= audio.len() {
        let buf = &audio.samples[start..start + need];
        let time = (start + w / 2) as f64 / sr;

        let energy: f64 = buf[..w].iter().map(|s| s * s).sum();
        let rms = (energy / w as f64).sqrt();
        if rms < est.silence_rms {
            frames.push(PitchFrame {
                time,
                f0_hz: 0.0,
                voiced: false,
                confidence: 0.0,
            });
            start += est.hop;
            continue;
        }

        // r(tau) = sum_j buf[j] * buf[j + tau] for j < w, via FFT correlation
        let mut a: Vec<Complex64> = buf[..w].iter().map(|&x| Complex64::new(x, 0.0)).collect();
        a.resize(fft_len, Complex64::new(0.0, 0.0));
        let mut b: Vec<Complex64> = buf.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        b.resize(fft_len, Complex64::new(0.0, 0.0));
        fft.process(&mut a);
        fft.process(&mut b);
        for (x, y) in a.iter_mut().zip(&b) {
            *x = x.conj() * y;
        }
        ifft.process(&mut a);
        let scale = 1.0 / fft_len as f64;

        // cumulative power for the sliding term
        let mut cum = vec![0.0; need + 1];
        for (i, &x) in buf.iter().enumerate() {
            cum[i + 1] = cum[i] + x * x;
        }

        // difference function and its cumulative-mean normalization
        let mut diff = vec![0.0; tau_max + 1];
        for (tau, d) in diff.iter_mut().enumerate().skip(1) {
            let r = a[tau].re * scale;
            *d = (energy + (cum[w + tau] - cum[tau]) - 2.0 * r).max(0.0);
        }
        let mut norm = vec![1.0; tau_max + 1];
        let mut running = 0.0;
        for tau in 1..=tau_max {
            running += diff[tau];
            norm[tau] = if running > 0.0 {
                diff[tau] * tau as f64 / running
            } else {
                1.0
            };
        }

        // first local minimum under the threshold, else the global minimum
        let d_threshold = 1.0 - est.confidence_threshold;
        let mut chosen = None;
        for tau in tau_min..tau_max {
            if norm[tau] < d_threshold && norm[tau] <= norm[tau + 1] {
                chosen = Some(tau);
                break;
            }
        }
        let tau_star = chosen.unwrap_or_else(|| {
            (tau_min..=tau_max)
                .min_by(|&a, &b| norm[a].partial_cmp(&norm[b]).unwrap())
                .unwrap()
        });

        let confidence = (1.0 - norm[tau_star]).clamp(0.0, 1.0);
        let voiced = confidence >= est.confidence_threshold;

        // parabolic refinement around the chosen lag
        let tau_refined = if tau_star > tau_min && tau_star < tau_max {
            let (d0, d1, d2) = (norm[tau_star - 1], norm[tau_star], norm[tau_star + 1]);
            let denom = d0 - 2.0 * d1 + d2;
            if denom.abs() > 1e-12 {
                tau_star as f64 + 0.5 * (d0 - d2) / denom
            } else {
                tau_star as f64
            }
        } else {
            tau_star as f64
        };

        let f0 = sr / tau_refined;
        let in_range = f0 >= est.min_hz && f0 <= est.max_hz;
        frames.push(PitchFrame {
            time,
            f0_hz: if voiced && in_range { f0 } else { 0.0 },
            voiced: voiced && in_range,
            confidence,
        });
        start += est.hop;
    }
    Ok(frames)
}

/// Median f0 over voiced frames, if any.
pub fn median_f0(frames: &[PitchFrame]) -> Option<f64> {
    let mut voiced: Vec<f64> = frames.iter().filter(|f| f.voiced).map(|f| f.f0_hz).collect();
    if voiced.is_empty() {
        return None;
    }
    voiced.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some(voiced[voiced.len() / 2])
}
