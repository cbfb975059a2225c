//! Thin FFT helpers shared by the synthesizer and the analysis oracles.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan_forward(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

fn plan_inverse(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

pub fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

/// Full linear convolution via FFT; output length `a.len() + b.len() - 1`.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = next_pow2(out_len);
    let fft = plan_forward(n);
    let ifft = plan_inverse(n);

    let mut fa: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fa.resize(n, Complex64::new(0.0, 0.0));
    let mut fb: Vec<Complex64> = b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fb.resize(n, Complex64::new(0.0, 0.0));

    fft.process(&mut fa);
    fft.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    ifft.process(&mut fa);
    let scale = 1.0 / n as f64;
    fa[..out_len].iter().map(|c| c.re * scale).collect()
}

/// Magnitude spectrum of a real frame (no windowing applied here); returns
/// the `n/2 + 1` non-negative-frequency magnitudes.
pub fn magnitude_spectrum(frame: &[f64], nfft: usize) -> Vec<f64> {
    let fft = plan_forward(nfft);
    let mut buf: Vec<Complex64> = frame
        .iter()
        .take(nfft)
        .map(|&x| Complex64::new(x, 0.0))
        .collect();
    buf.resize(nfft, Complex64::new(0.0, 0.0));
    fft.process(&mut buf);
    buf[..nfft / 2 + 1].iter().map(|c| c.norm()).collect()
}

/// Periodic Hann window of the given length.
pub fn hann_periodic(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / len as f64).cos()))
        .collect()
}

/// Symmetric Hann window (endpoints zero) of the given length.
pub fn hann_symmetric(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (len - 1) as f64).cos()))
        .collect()
}

/// Welch power spectral density with Hann windows and 50% overlap.
/// Returns (frequencies, psd) with `nfft / 2 + 1` bins.
pub fn welch_psd(signal: &[f64], sample_rate: f64, nfft: usize) -> (Vec<f64>, Vec<f64>) {
    let hop = nfft / 2;
    let window = hann_periodic(nfft);
    let win_power: f64 = window.iter().map(|w| w * w).sum();
    let fft = plan_forward(nfft);

    let n_bins = nfft / 2 + 1;
    let mut psd = vec![0.0; n_bins];
    let mut n_segments = 0usize;
    let mut start = 0;
    while start + nfft <= signal.len() {
        let mut buf: Vec<Complex64> = signal[start..start + nfft]
            .iter()
            .zip(&window)
            .map(|(&x, &w)| Complex64::new(x * w, 0.0))
            .collect();
        fft.process(&mut buf);
        for (b, c) in psd.iter_mut().zip(&buf[..n_bins]) {
            *b += c.norm_sqr();
        }
        n_segments += 1;
        start += hop;
    }
    if n_segments > 0 {
        let scale = 1.0 / (n_segments as f64 * win_power * sample_rate);
        for (i, b) in psd.iter_mut().enumerate() {
            // one-sided density: double everything except DC and Nyquist
            let one_sided = if i == 0 || i == n_bins - 1 { 1.0 } else { 2.0 };
            *b *= scale * one_sided;
        }
    }
    let freqs = (0..n_bins)
        .map(|i| i as f64 * sample_rate / nfft as f64)
        .collect();
    (freqs, psd)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convolution_matches_direct_computation() {
        let a = [1.0, 2.0, 3.0];
        let b = [0.5, -1.0];
        let got = convolve(&a, &b);
        let expected = [0.5, 0.0, -0.5, -3.0];
        assert_eq!(got.len(), expected.len());
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_convolution_is_identity() {
        let a: Vec<f64> = (0..100).map(|i| (i as f64 * 0.1).sin()).collect();
        let got = convolve(&a, &[1.0]);
        for (g, e) in got.iter().zip(&a) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn welch_psd_of_sine_peaks_at_its_frequency() {
        let sr = 16_000.0;
        let n = 16_000;
        let signal: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / sr).sin())
            .collect();
        let (freqs, psd) = welch_psd(&signal, sr, 1024);
        let peak = psd
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!((freqs[peak] - 1000.0).abs() < 20.0);
    }

    #[test]
    fn hann_windows_have_expected_endpoints() {
        let p = hann_periodic(8);
        assert_eq!(p[0], 0.0);
        assert!(p[4] > 0.99);
        let s = hann_symmetric(9);
        assert_eq!(s[0], 0.0);
        assert!((s[4] - 1.0).abs() < 1e-12);
        assert!(s[8].abs() < 1e-12);
    }
}
