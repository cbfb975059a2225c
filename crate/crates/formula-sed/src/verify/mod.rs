//! Analysis-based validation that generated audio actually carries its
//! labels: signal-measurement oracles checked against closed-form inputs,
//! dataset-level statistical censuses, and a linear learnability probe.

pub mod census;
pub mod pitch;
pub mod probe;
pub mod spectral;

use std::path::Path;

use rand::Rng;
use serde::Serialize;

use crate::dataset::{grid_from_strong_rows, Dataset};
use crate::error::{Error, Result};
use crate::params::{Group, LabelCodebook};
use crate::rng::stream;
use crate::synth::AudioBuffer;

pub use census::{census, CensusReport};
pub use pitch::{estimate_f0, median_f0, F0Estimator, PitchFrame};
pub use probe::{learnability_probe, ProbeResult};
pub use spectral::{analyze_clip, harmonicity_ratio, spectral_centroid, ClipAnalysis};

/// One named check with its measured statistic and threshold.
#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub statistic: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, passed: bool, statistic: f64, threshold: f64, detail: String) -> Self {
        CheckResult {
            name: name.to_string(),
            passed,
            statistic,
            threshold,
            detail,
        }
    }
}

/// The full verification report; serializes to the machine-readable file.
#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub dataset: String,
    pub checks: Vec<CheckResult>,
    pub census: Option<CensusReport>,
    pub probes: Vec<ProbeResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("verification of {}\n", self.dataset));
        for c in &self.checks {
            out.push_str(&format!(
                "  [{}] {:42} statistic {:>10.4}  threshold {:>8.4}  {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.statistic,
                c.threshold,
                c.detail
            ));
        }
        if let Some(census) = &self.census {
            out.push_str(&census.to_text());
        }
        for p in &self.probes {
            out.push_str(&format!(
                "  probe {:22} accuracy {:.3} (chance {:.3}, {} train / {} test{})\n",
                p.group,
                p.accuracy,
                p.chance,
                p.n_train,
                p.n_test,
                if p.permuted_labels { ", permuted labels" } else { "" }
            ));
        }
        out.push_str(if self.passed() { "ALL CHECKS PASSED\n" } else { "FAILURES PRESENT\n" });
        out
    }
}

/// Tuning knobs for a verification run.
#[derive(Clone, Debug)]
pub struct VerifyOptions {
    /// Clips inspected by the per-clip contract checks.
    pub max_clips: usize,
    /// Single-source clips fed to the census (0 disables it).
    pub census_clips: usize,
    pub run_probe: bool,
    pub probe_train: usize,
    pub probe_test: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            max_clips: 100,
            census_clips: 1000,
            run_probe: false,
            probe_train: 2000,
            probe_test: 500,
            seed: 0,
        }
    }
}

fn sine(freq: f64, seconds: f64, sr: u32) -> AudioBuffer {
    let n = (seconds * sr as f64) as usize;
    AudioBuffer::new(
        sr,
        (0..n)
            .map(|i| (std::f64::consts::TAU * freq * i as f64 / sr as f64).sin() * 0.5)
            .collect(),
    )
}

fn white_noise(seconds: f64, sr: u32, seed: u64) -> AudioBuffer {
    let mut rng = stream(seed);
    let n = (seconds * sr as f64) as usize;
    AudioBuffer::new(sr, (0..n).map(|_| rng.random_range(-0.5..0.5)).collect())
}

/// Validates every oracle on closed-form synthetic inputs. These run before
/// any generated audio is trusted to the same oracles.
pub fn oracle_self_checks(sr: u32) -> Result<Vec<CheckResult>> {
    let est = F0Estimator::for_sample_rate(sr);
    let mut checks = Vec::new();

    let tone = sine(440.0, 1.0, sr);
    let frames = estimate_f0(&tone, &est)?;
    let med = median_f0(&frames).unwrap_or(0.0);
    checks.push(CheckResult::new(
        "oracle: pitch of 440 Hz sine",
        (439.0..=441.0).contains(&med),
        med,
        440.0,
        "median f0 within 1 Hz".into(),
    ));

    let silent = AudioBuffer::new(sr, vec![0.0; sr as usize]);
    let frames = estimate_f0(&silent, &est)?;
    let unvoiced = frames.iter().filter(|f| !f.voiced).count() as f64;
    let frac = if frames.is_empty() { 1.0 } else { unvoiced / frames.len() as f64 };
    checks.push(CheckResult::new(
        "oracle: silence unvoiced",
        frac == 1.0,
        frac,
        1.0,
        "all frames unvoiced".into(),
    ));

    let noise = white_noise(1.0, sr, 1234);
    let frames = estimate_f0(&noise, &est)?;
    let unvoiced = frames.iter().filter(|f| !f.voiced).count() as f64 / frames.len() as f64;
    checks.push(CheckResult::new(
        "oracle: white noise mostly unvoiced",
        unvoiced >= 0.9,
        unvoiced,
        0.9,
        "unvoiced fraction".into(),
    ));

    let stack = {
        let n = sr as usize;
        AudioBuffer::new(
            sr,
            (0..n)
                .map(|i| {
                    let t = i as f64 / sr as f64;
                    [0.4, 0.25, 0.15]
                        .iter()
                        .enumerate()
                        .map(|(k, g)| g * (std::f64::consts::TAU * 330.0 * (k + 1) as f64 * t).sin())
                        .sum::<f64>()
                })
                .collect(),
        )
    };
    let pitch = estimate_f0(&stack, &est)?;
    let h = harmonicity_ratio(&stack, &pitch)?;
    checks.push(CheckResult::new(
        "oracle: harmonicity of sine stack",
        h >= 0.9,
        h,
        0.9,
        "fraction of energy in harmonic bands".into(),
    ));

    let forced: Vec<PitchFrame> = (0..90)
        .map(|i| PitchFrame {
            time: 0.05 + i as f64 * 0.01,
            f0_hz: 440.0,
            voiced: true,
            confidence: 1.0,
        })
        .collect();
    let h = harmonicity_ratio(&noise, &forced)?;
    checks.push(CheckResult::new(
        "oracle: harmonicity of white noise",
        h <= 0.2,
        h,
        0.2,
        "forced 440 Hz track over noise".into(),
    ));

    let c = spectral_centroid(&sine(1000.0, 1.0, sr))?;
    checks.push(CheckResult::new(
        "oracle: centroid of 1 kHz sine",
        (c - 1000.0).abs() <= 20.0,
        c,
        1000.0,
        "within 20 Hz".into(),
    ));

    let c = spectral_centroid(&noise)?;
    let half_nyquist = sr as f64 / 4.0;
    checks.push(CheckResult::new(
        "oracle: centroid of white noise",
        (c - half_nyquist).abs() <= 0.1 * half_nyquist,
        c,
        half_nyquist,
        "within 10 percent of half Nyquist".into(),
    ));

    Ok(checks)
}

/// Per-clip label-contract checks over up to `max_clips` clips.
fn contract_checks(dataset: &Dataset, max_clips: usize) -> Result<Vec<CheckResult>> {
    let codebook = LabelCodebook::new();
    let spec = dataset.clip_spec();
    let n_frames = spec.n_frames();
    let rate = spec.label_frame_rate as f64;
    let strong = dataset.strong_rows()?;
    let empty = Vec::new();

    let mut popcount_bad = 0usize;
    let mut or_bad = 0usize;
    let mut roundtrip_bad = 0usize;
    let mut alignment_bad = 0usize;
    let mut peak_bad = 0usize;
    let mut silent_bad = 0usize;
    let mut inspected = 0usize;

    for clip in dataset.clips.iter().take(max_clips) {
        inspected += 1;
        let truth = dataset.reconstruct_grid(clip)?;

        // popcount contract on single-source grids
        if clip.n_sources == 1 {
            for bits in &truth.bits {
                let ones = bits.count_ones();
                if ones != 0 && ones != 20 {
                    popcount_bad += 1;
                    break;
                }
            }
        }

        // the mixture grid must equal the OR of per-source patterns
        let mut or_grid = crate::event::FrameLabelGrid::empty(n_frames, rate);
        for source in &clip.sources {
            let pattern = crate::params::encode_labels(&source.params, &codebook);
            for (f, bits) in or_grid.bits.iter_mut().enumerate() {
                let center = (f as f64 + 0.5) / rate;
                if source.segments.iter().any(|&(on, off)| center >= on && center < off) {
                    *bits |= pattern;
                }
            }
        }
        if or_grid.bits != truth.bits {
            or_bad += 1;
        }

        // strong rows must reconstruct the grid exactly
        let rows = strong.get(&clip.wav).unwrap_or(&empty);
        let rebuilt = grid_from_strong_rows(rows, n_frames, rate, &codebook)?;
        if rebuilt.bits != truth.bits {
            roundtrip_bad += 1;
        }

        // audio-side checks
        let audio = dataset.audio(clip)?;
        if audio.peak() > crate::mix::PEAK_LIMIT + 1.0 / 32767.0 {
            peak_bad += 1;
        }
        if audio.peak() == 0.0 {
            silent_bad += 1;
        }
        let hop = spec.hop();
        let mut labeled = Vec::new();
        let mut unlabeled = Vec::new();
        for (f, bits) in truth.bits.iter().enumerate() {
            let lo = f * hop;
            let hi = ((f + 1) * hop).min(audio.len());
            if lo >= hi {
                break;
            }
            let frame = &audio.samples[lo..hi];
            let rms = (frame.iter().map(|s| s * s).sum::<f64>() / frame.len() as f64).sqrt();
            let prev = f.checked_sub(1).map(|g| truth.bits[g]).unwrap_or(0);
            let next = truth.bits.get(f + 1).copied().unwrap_or(0);
            if *bits != 0 {
                labeled.push(rms);
            } else if prev == 0 && next == 0 {
                // one-frame grace for reverb tails
                unlabeled.push(rms);
            }
        }
        if !labeled.is_empty() && !unlabeled.is_empty() {
            let lab = labeled.iter().sum::<f64>() / labeled.len() as f64;
            let unl = unlabeled.iter().sum::<f64>() / unlabeled.len() as f64;
            if lab < unl {
                alignment_bad += 1;
            }
        }
    }

    Ok(vec![
        CheckResult::new(
            "contract: single-source popcount is 20 or 0",
            popcount_bad == 0,
            popcount_bad as f64,
            0.0,
            format!("violations over {inspected} clips"),
        ),
        CheckResult::new(
            "contract: mixture grid equals OR of sources",
            or_bad == 0,
            or_bad as f64,
            0.0,
            format!("violations over {inspected} clips"),
        ),
        CheckResult::new(
            "contract: strong labels round-trip the grid",
            roundtrip_bad == 0,
            roundtrip_bad as f64,
            0.0,
            format!("violations over {inspected} clips"),
        ),
        CheckResult::new(
            "contract: labeled frames at least as loud",
            alignment_bad == 0,
            alignment_bad as f64,
            0.0,
            format!("violations over {inspected} clips"),
        ),
        CheckResult::new(
            "contract: peak limit respected",
            peak_bad == 0,
            peak_bad as f64,
            0.0,
            format!("violations over {inspected} clips"),
        ),
        CheckResult::new(
            "contract: no all-zero clips",
            silent_bad == 0,
            silent_bad as f64,
            0.0,
            format!("violations over {inspected} clips"),
        ),
    ])
}

fn census_checks(report: &CensusReport) -> Vec<CheckResult> {
    let mut checks = Vec::new();
    for g in &report.groups {
        checks.push(CheckResult::new(
            &format!("census: {} orders {}", g.group, g.statistic),
            g.monotone,
            if g.monotone { 1.0 } else { 0.0 },
            1.0,
            format!(
                "class means [{}]",
                g.class_means
                    .iter()
                    .map(|m| format!("{m:.3}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        ));
    }
    checks.push(CheckResult::new(
        "census: correlation-sign classes separated",
        report.corr_separation >= 0.4,
        report.corr_separation,
        0.4,
        format!(
            "mean corr {:+.3} vs {:+.3}",
            report.corr_mean_positive, report.corr_mean_negative
        ),
    ));
    checks
}

/// Runs the full verification suite against a dataset directory and writes
/// `verify_report.json` next to the manifest.
pub fn verify_dataset(root: impl AsRef<Path>, options: &VerifyOptions) -> Result<VerifyReport> {
    let root = root.as_ref();
    let dataset = Dataset::open(root)?;

    let mut checks = oracle_self_checks(dataset.header.sample_rate)?;
    checks.extend(contract_checks(&dataset, options.max_clips)?);

    let n_singles = dataset.clips.iter().filter(|c| c.n_sources == 1).count();
    let census_report = if options.census_clips > 0 && n_singles >= 50 {
        let report = census(&dataset, options.census_clips)?;
        checks.extend(census_checks(&report));
        Some(report)
    } else {
        None
    };

    let mut probes = Vec::new();
    if options.run_probe {
        for group in [Group::F0Bias, Group::NoiseMode] {
            let result = learnability_probe(
                &dataset,
                group,
                options.probe_train,
                options.probe_test,
                false,
                options.seed,
            )?;
            checks.push(CheckResult::new(
                &format!("probe: {} beats 1.5x chance", group.name()),
                result.accuracy >= 1.5 * result.chance,
                result.accuracy,
                1.5 * result.chance,
                format!("{} classes", result.n_classes),
            ));
            probes.push(result);
        }
        let permuted = learnability_probe(
            &dataset,
            Group::F0Bias,
            options.probe_train,
            options.probe_test,
            true,
            options.seed,
        )?;
        checks.push(CheckResult::new(
            "probe: permuted labels collapse to chance",
            (permuted.accuracy - permuted.chance).abs() <= 0.05,
            permuted.accuracy,
            permuted.chance,
            "destroyed-signal control".into(),
        ));
        probes.push(permuted);
    }

    let report = VerifyReport {
        dataset: root.display().to_string(),
        checks,
        census: census_report,
        probes,
    };

    let json_path = root.join("verify_report.json");
    std::fs::write(
        &json_path,
        serde_json::to_string_pretty(&report)
            .map_err(|e| Error::Dataset(format!("report serialization: {e}")))?,
    )
    .map_err(|e| Error::io(&json_path, e))?;

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_self_checks_all_pass() {
        let checks = oracle_self_checks(16_000).unwrap();
        for c in &checks {
            assert!(c.passed, "{}: statistic {}", c.name, c.statistic);
        }
        assert_eq!(checks.len(), 7);
    }

    #[test]
    fn verify_runs_on_a_small_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let config = crate::dataset::DatasetConfig {
            count: 6,
            master_seed: 11,
            clip_seconds: 2.0,
            max_sources: 3,
            out_dir: dir.path().to_path_buf(),
            workers: 2,
            emit_frame_grids: true,
            ..Default::default()
        };
        crate::dataset::run_generation(&config).unwrap();
        let report = verify_dataset(dir.path(), &VerifyOptions {
            max_clips: 6,
            census_clips: 0,
            run_probe: false,
            ..Default::default()
        })
        .unwrap();
        assert!(report.passed(), "{}", report.to_text());
        assert!(dir.path().join("verify_report.json").exists());
    }
}
