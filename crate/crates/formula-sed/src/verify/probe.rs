//! A small linear learnability probe: can a multinomial linear classifier
//! recover a label group from pooled log-mel statistics? Chance-level
//! accuracy under label permutation is the matched control.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{Dataset, ManifestClip};
use crate::error::{Error, Result};
use crate::fft;
use crate::params::Group;
use crate::rng::stream;
use crate::synth::AudioBuffer;

/// Mel filterbank size; features are per-band mean and std, so 80 dims.
const N_MEL: usize = 40;
const FRAME_LEN: usize = 400;
const FRAME_HOP: usize = 160;
const NFFT: usize = 512;

const LEARNING_RATE: f64 = 0.5;
const EPOCHS: usize = 400;
/// Small ridge penalty; keeps a permuted-label fit from drifting off chance.
const WEIGHT_DECAY: f64 = 1e-3;

#[derive(Clone, Debug, Serialize)]
pub struct ProbeResult {
    pub group: String,
    pub n_classes: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub chance: f64,
    pub permuted_labels: bool,
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filterbank over [0, Nyquist]: `N_MEL x (NFFT/2 + 1)`.
fn mel_filterbank(sample_rate: f64) -> Vec<Vec<f64>> {
    let n_bins = NFFT / 2 + 1;
    let max_mel = hz_to_mel(sample_rate / 2.0);
    let centers: Vec<f64> = (0..N_MEL + 2)
        .map(|i| mel_to_hz(max_mel * i as f64 / (N_MEL + 1) as f64))
        .collect();
    let bin_hz = sample_rate / NFFT as f64;
    (0..N_MEL)
        .map(|m| {
            let (lo, mid, hi) = (centers[m], centers[m + 1], centers[m + 2]);
            (0..n_bins)
                .map(|b| {
                    let f = b as f64 * bin_hz;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect()
}

/// 80-dim pooled log-mel features over the clip's labeled frames.
fn clip_features(audio: &AudioBuffer, segments: &[(f64, f64)], bank: &[Vec<f64>]) -> Vec<f64> {
    let sr = audio.sample_rate as f64;
    let window = fft::hann_periodic(FRAME_LEN);
    let mut per_band: Vec<Vec<f64>> = vec![Vec::new(); N_MEL];
    let mut start = 0usize;
    while start + FRAME_LEN <= audio.len() {
        let center = (start + FRAME_LEN / 2) as f64 / sr;
        let active = segments.iter().any(|&(on, off)| center >= on && center < off);
        if active {
            let frame: Vec<f64> = audio.samples[start..start + FRAME_LEN]
                .iter()
                .zip(&window)
                .map(|(s, w)| s * w)
                .collect();
            let mags = fft::magnitude_spectrum(&frame, NFFT);
            for (m, filter) in bank.iter().enumerate() {
                let e: f64 = mags
                    .iter()
                    .zip(filter)
                    .map(|(mag, w)| mag * mag * w)
                    .sum();
                per_band[m].push((e + 1e-10).ln());
            }
        }
        start += FRAME_HOP;
    }
    let mut features = Vec::with_capacity(2 * N_MEL);
    for band in &per_band {
        if band.is_empty() {
            features.push(0.0);
            features.push(0.0);
            continue;
        }
        let n = band.len() as f64;
        let mean = band.iter().sum::<f64>() / n;
        let var = band.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        features.push(mean);
        features.push(var.sqrt());
    }
    features
}

/// Trains the probe on `n_train` single-source clips and reports held-out
/// accuracy on the next `n_test`. Training is full-batch gradient descent,
/// deterministic in the seed.
pub fn learnability_probe(
    dataset: &Dataset,
    group: Group,
    n_train: usize,
    n_test: usize,
    permute_labels: bool,
    seed: u64,
) -> Result<ProbeResult> {
    let singles: Vec<&ManifestClip> = dataset.clips.iter().filter(|c| c.n_sources == 1).collect();
    if singles.len() < n_train + n_test {
        return Err(Error::Parameter(format!(
            "probe needs {} single-source clips, dataset has {}",
            n_train + n_test,
            singles.len()
        )));
    }
    let n_classes = group.class_count();
    let bank = mel_filterbank(dataset.header.sample_rate as f64);

    let selected = &singles[..n_train + n_test];
    let rows: Result<Vec<(Vec<f64>, usize)>> = selected
        .par_iter()
        .map(|clip| {
            let audio = dataset.audio(clip)?;
            let segments: Vec<(f64, f64)> = clip.sources[0].segments.clone();
            let label = *clip.classes[0]
                .get(group.name())
                .ok_or_else(|| Error::Dataset(format!("missing class for {}", group.name())))?;
            Ok((clip_features(&audio, &segments, &bank), label))
        })
        .collect();
    let rows = rows?;

    let dim = 2 * N_MEL;
    let (train, test) = rows.split_at(n_train);
    let mut train_labels: Vec<usize> = train.iter().map(|(_, y)| *y).collect();
    if permute_labels {
        train_labels.shuffle(&mut stream(seed));
    }

    // z-score features with training statistics
    let mut mean = vec![0.0; dim];
    let mut std = vec![0.0; dim];
    for (x, _) in train {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n_train as f64;
    }
    for (x, _) in train {
        for ((s, m), v) in std.iter_mut().zip(&mean).zip(x) {
            *s += (v - m) * (v - m);
        }
    }
    for s in std.iter_mut() {
        *s = (*s / n_train as f64).sqrt().max(1e-6);
    }
    let normalize = |x: &[f64]| -> Vec<f64> {
        x.iter()
            .zip(&mean)
            .zip(&std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    };
    let xtrain: Vec<Vec<f64>> = train.iter().map(|(x, _)| normalize(x)).collect();
    let xtest: Vec<Vec<f64>> = test.iter().map(|(x, _)| normalize(x)).collect();

    // multinomial logistic regression, full batch
    let mut weights = vec![vec![0.0; dim + 1]; n_classes];
    let inv_n = 1.0 / n_train as f64;
    let mut probs = vec![0.0; n_classes];
    let mut grad = vec![vec![0.0; dim + 1]; n_classes];
    for _ in 0..EPOCHS {
        for g in grad.iter_mut() {
            for v in g.iter_mut() {
                *v = 0.0;
            }
        }
        for (x, &y) in xtrain.iter().zip(&train_labels) {
            softmax_scores(&weights, x, &mut probs);
            for (c, p) in probs.iter().enumerate() {
                let err = p - if c == y { 1.0 } else { 0.0 };
                let g = &mut grad[c];
                for (gv, xv) in g.iter_mut().zip(x) {
                    *gv += err * xv;
                }
                g[dim] += err;
            }
        }
        for (w, g) in weights.iter_mut().zip(&grad) {
            for (wv, gv) in w.iter_mut().zip(g) {
                *wv -= LEARNING_RATE * (inv_n * gv + WEIGHT_DECAY * *wv);
            }
        }
    }

    let mut correct = 0usize;
    for (x, (_, y)) in xtest.iter().zip(test) {
        softmax_scores(&weights, x, &mut probs);
        let pred = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        if pred == *y {
            correct += 1;
        }
    }

    Ok(ProbeResult {
        group: group.name().to_string(),
        n_classes,
        n_train,
        n_test,
        accuracy: correct as f64 / n_test as f64,
        chance: 1.0 / n_classes as f64,
        permuted_labels: permute_labels,
    })
}

fn softmax_scores(weights: &[Vec<f64>], x: &[f64], out: &mut [f64]) {
    let dim = x.len();
    let mut max = f64::NEG_INFINITY;
    for (c, w) in weights.iter().enumerate() {
        let mut z = w[dim];
        for (wv, xv) in w[..dim].iter().zip(x) {
            z += wv * xv;
        }
        out[c] = z;
        max = max.max(z);
    }
    let mut denom = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        denom += *o;
    }
    for o in out.iter_mut() {
        *o /= denom;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filterbank_covers_the_spectrum() {
        let bank = mel_filterbank(16_000.0);
        assert_eq!(bank.len(), N_MEL);
        // every interior bin is touched by at least one filter
        let n_bins = NFFT / 2 + 1;
        for b in 2..n_bins - 2 {
            let total: f64 = bank.iter().map(|f| f[b]).sum();
            assert!(total > 0.0, "bin {b} uncovered");
        }
    }

    #[test]
    fn softmax_is_a_distribution() {
        let w = vec![vec![0.1, -0.2, 0.0], vec![-0.3, 0.4, 0.1]];
        let mut p = vec![0.0; 2];
        softmax_scores(&w, &[1.0, 2.0], &mut p);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| v > 0.0));
    }
}
