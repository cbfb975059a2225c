//! Mixing source events into clips.
//!
//! A clip is 1..max_sources events summed with per-source gains, peak-
//! normalized only when the mixture would clip, with the label grids
//! unioned frame-wise: a class is active in the mixture wherever any source
//! carrying it is active.

use rand::Rng;

use crate::error::{Error, Result};
use crate::event::{synthesize_event, ClipSpec, FrameLabelGrid, SourceSignal};
use crate::params::{class_indices, sample_event_hyperparams, EventParams};
use crate::rng::{clip_seed, derive, source_seed, stream, tag};
use crate::synth::AudioBuffer;

/// Mixtures are renormalized to this peak when they would otherwise exceed it.
pub const PEAK_LIMIT: f64 = 0.99;

/// Per-source mixing gain range, dB.
pub const SOURCE_GAIN_DB: (f64, f64) = (-6.0, 0.0);

/// How often a source may resample its hyperparameters after an event
/// failure before the whole clip is retried under a bumped salt.
const PARAM_RESAMPLE_LIMIT: u64 = 5;
const CLIP_SALT_LIMIT: u64 = 3;

/// Provenance of one source inside a clip.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct SourceInfo {
    pub seed: u64,
    /// Mixing gain applied to this source, dB.
    pub gain_db: f64,
    pub segments: Vec<(f64, f64)>,
    pub params: EventParams,
}

/// One finished clip: mixed audio, union label grid, and full provenance.
#[derive(Clone, Debug)]
pub struct ClipRecord {
    pub clip_id: u64,
    pub audio: AudioBuffer,
    pub labels: FrameLabelGrid,
    pub sources: Vec<SourceInfo>,
    /// Scale factor applied by peak normalization (1.0 when none was needed).
    pub peak_gain_applied: f64,
}

impl ClipRecord {
    /// The 20 (group, class) pairs of each source, by codebook group name.
    pub fn source_classes(&self) -> Vec<std::collections::BTreeMap<&'static str, usize>> {
        self.sources
            .iter()
            .map(|s| {
                class_indices(&s.params)
                    .iter()
                    .map(|(g, c)| (g.name(), *c))
                    .collect()
            })
            .collect()
    }
}

/// Sums sources with random per-source gains and unions their label grids.
/// Peak normalization kicks in only when the mixture exceeds [`PEAK_LIMIT`];
/// the applied scale is recorded so the volume labels stay interpretable.
pub fn mix_sources<R: Rng>(
    sources: &[SourceSignal],
    clip_id: u64,
    rng: &mut R,
) -> Result<ClipRecord> {
    if sources.is_empty() {
        return Err(Error::Parameter("a clip needs at least one source".into()));
    }
    let n = sources[0].audio.len();
    let sr = sources[0].audio.sample_rate;
    if sources
        .iter()
        .any(|s| s.audio.len() != n || s.audio.sample_rate != sr)
    {
        return Err(Error::Parameter("sources must share length and sample rate".into()));
    }

    let gains_db: Vec<f64> = sources
        .iter()
        .map(|_| rng.random_range(SOURCE_GAIN_DB.0..SOURCE_GAIN_DB.1))
        .collect();

    let mut samples = vec![0.0; n];
    for (src, &gain_db) in sources.iter().zip(&gains_db) {
        let g = 10f64.powf(gain_db / 20.0);
        for (acc, &s) in samples.iter_mut().zip(&src.audio.samples) {
            *acc += g * s;
        }
    }

    let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let peak_gain_applied = if peak > PEAK_LIMIT {
        let scale = PEAK_LIMIT / peak;
        for s in samples.iter_mut() {
            *s *= scale;
        }
        scale
    } else {
        1.0
    };

    let mut labels = sources[0].labels.clone();
    for src in &sources[1..] {
        labels.union_with(&src.labels)?;
    }

    let infos = sources
        .iter()
        .zip(&gains_db)
        .map(|(s, &gain_db)| SourceInfo {
            seed: s.seed,
            gain_db,
            segments: s.segments.clone(),
            params: s.params.clone(),
        })
        .collect();

    Ok(ClipRecord {
        clip_id,
        audio: AudioBuffer::new(sr, samples),
        labels,
        sources: infos,
        peak_gain_applied,
    })
}

/// Generates one clip, fully determined by `(master_seed, clip_id)`.
///
/// The clip draws its source count, synthesizes each source under a derived
/// seed (resampling hyperparameters up to five times if an event fails), and
/// mixes. If a source still cannot be built the whole clip is regenerated
/// under a bumped salt; a handful of salts later it is a hard error.
pub fn generate_clip(
    master_seed: u64,
    clip_id: u64,
    clip: &ClipSpec,
    max_sources: usize,
) -> Result<ClipRecord> {
    clip.validate()?;
    if !(1..=8).contains(&max_sources) {
        return Err(Error::Parameter("max_sources must be in 1..=8".into()));
    }

    let mut last_err = String::new();
    for salt in 0..CLIP_SALT_LIMIT {
        let cseed = clip_seed(master_seed, clip_id, salt);
        match try_generate(cseed, clip_id, clip, max_sources) {
            Ok(record) => {
                if salt > 0 {
                    eprintln!("clip {clip_id}: recovered under salt {salt}");
                }
                return Ok(record);
            }
            Err(e) => last_err = e.to_string(),
        }
    }
    Err(Error::Clip {
        clip_id,
        reason: last_err,
    })
}

fn try_generate(
    cseed: u64,
    clip_id: u64,
    clip: &ClipSpec,
    max_sources: usize,
) -> Result<ClipRecord> {
    let mut main_rng = stream(derive(cseed, tag::CLIP_MAIN));
    let n_sources = main_rng.random_range(1..=max_sources);

    let mut signals = Vec::with_capacity(n_sources);
    for idx in 0..n_sources {
        let sseed = source_seed(cseed, idx as u64);
        signals.push(synthesize_source(sseed, clip)?);
    }

    let mut mix_rng = stream(derive(cseed, tag::CLIP_MIX));
    mix_sources(&signals, clip_id, &mut mix_rng)
}

fn synthesize_source(sseed: u64, clip: &ClipSpec) -> Result<SourceSignal> {
    let mut last = None;
    for attempt in 0..PARAM_RESAMPLE_LIMIT {
        let event_seed = derive(sseed, attempt);
        let params = sample_event_hyperparams(&mut stream(derive(event_seed, tag::PARAMS)));
        match synthesize_event(&params, clip, event_seed) {
            Ok(sig) => return Ok(sig),
            Err(e) => last = Some(e),
        }
    }
    Err(Error::Event(format!(
        "exhausted {PARAM_RESAMPLE_LIMIT} hyperparameter resamples: {}",
        last.map(|e| e.to_string()).unwrap_or_default()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn short_clip() -> ClipSpec {
        ClipSpec {
            clip_seconds: 2.0,
            ..ClipSpec::default()
        }
    }

    fn make_source(seed: u64, clip: &ClipSpec) -> SourceSignal {
        let params = sample_event_hyperparams(&mut stream(seed));
        synthesize_event(&params, clip, seed).unwrap()
    }

    #[test]
    fn single_quiet_source_passes_through_its_gain() {
        let c = short_clip();
        let src = make_source(3, &c);
        let rec = mix_sources(std::slice::from_ref(&src), 0, &mut stream(10)).unwrap();
        assert_eq!(rec.peak_gain_applied, 1.0);
        assert_eq!(rec.labels, src.labels);
        let g = 10f64.powf(rec.sources[0].gain_db / 20.0);
        for (m, s) in rec.audio.samples.iter().zip(&src.audio.samples) {
            assert!((m - g * s).abs() < 1e-15);
        }
    }

    #[test]
    fn mixture_peak_stays_under_the_limit() {
        let c = short_clip();
        let sources: Vec<SourceSignal> = (0..4).map(|s| make_source(100 + s, &c)).collect();
        let rec = mix_sources(&sources, 1, &mut stream(11)).unwrap();
        assert!(rec.audio.peak() <= PEAK_LIMIT + 1e-12);
    }

    #[test]
    fn union_grid_is_the_or_of_source_grids() {
        let c = short_clip();
        let sources: Vec<SourceSignal> = (0..3).map(|s| make_source(200 + s, &c)).collect();
        let rec = mix_sources(&sources, 2, &mut stream(12)).unwrap();
        for f in 0..rec.labels.n_frames {
            let expected = sources.iter().fold(0u128, |m, s| m | s.labels.bits[f]);
            assert_eq!(rec.labels.bits[f], expected, "frame {f}");
        }
        // popcount of active frames lies in [20, 20 * n_sources]
        for bits in rec.labels.bits.iter().filter(|b| **b != 0) {
            let ones = bits.count_ones() as usize;
            assert!((20..=20 * sources.len()).contains(&ones));
        }
    }

    #[test]
    fn adding_a_source_never_clears_a_label() {
        let c = short_clip();
        let a = make_source(300, &c);
        let b = make_source(301, &c);
        let one = mix_sources(std::slice::from_ref(&a), 0, &mut stream(13)).unwrap();
        let two = mix_sources(&[a, b], 0, &mut stream(13)).unwrap();
        for (m1, m2) in one.labels.bits.iter().zip(&two.labels.bits) {
            assert_eq!(m1 & !m2, 0, "a bit disappeared when mixing in a source");
        }
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let a = make_source(400, &short_clip());
        let b = make_source(
            401,
            &ClipSpec {
                clip_seconds: 1.0,
                ..ClipSpec::default()
            },
        );
        assert!(mix_sources(&[a, b], 0, &mut stream(14)).is_err());
    }

    #[test]
    fn clips_are_deterministic_in_their_id() {
        let c = short_clip();
        let a = generate_clip(42, 7, &c, 4).unwrap();
        let b = generate_clip(42, 7, &c, 4).unwrap();
        assert_eq!(a.audio.samples, b.audio.samples);
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.peak_gain_applied, b.peak_gain_applied);
        let other = generate_clip(42, 8, &c, 4).unwrap();
        assert_ne!(a.audio.samples, other.audio.samples);
    }

    #[test]
    fn clip_length_is_exact() {
        let c = ClipSpec {
            clip_seconds: 1.25,
            ..ClipSpec::default()
        };
        let rec = generate_clip(1, 0, &c, 2).unwrap();
        assert_eq!(rec.audio.len(), (1.25 * 16_000.0) as usize);
    }

    #[test]
    fn source_count_is_uniform() {
        // distribution over {1..4} within a couple percent
        let c = ClipSpec {
            clip_seconds: 0.5,
            ..ClipSpec::default()
        };
        let mut counts = [0usize; 4];
        let n = 2000;
        for id in 0..n {
            let rec = generate_clip(9, id, &c, 4).unwrap();
            counts[rec.sources.len() - 1] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            let freq = c as f64 / n as f64;
            assert!(
                (freq - 0.25).abs() < 0.035,
                "n_sources = {} frequency {freq}",
                i + 1
            );
        }
    }
}
