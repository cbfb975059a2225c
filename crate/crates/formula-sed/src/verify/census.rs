//! Dataset-level statistical census: does each labeled class order the
//! signal statistic it is supposed to encode?
//!
//! Class ordering, not absolute values, is the pass criterion: the absolute
//! statistics depend on declared sampling ranges, while the ordering is what
//! the labels must carry for a downstream learner.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{Dataset, ManifestClip};
use crate::error::{Error, Result};
use crate::params::{CorrSign, Group};

use super::spectral::{analyze_clip_with_band, ClipAnalysis};

/// Census verdict for one labeled group.
#[derive(Clone, Debug, Serialize)]
pub struct GroupCensus {
    pub group: String,
    pub statistic: String,
    /// `class index -> mean statistic` over single-source clips.
    pub class_means: Vec<f64>,
    pub class_counts: Vec<usize>,
    /// Expected direction: +1 increasing with class index, -1 decreasing.
    pub direction: i8,
    pub monotone: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CensusReport {
    pub n_clips: usize,
    pub groups: Vec<GroupCensus>,
    /// Mean harmonic/noise volume correlation per correlation-sign class.
    pub corr_mean_positive: f64,
    pub corr_mean_negative: f64,
    pub corr_separation: f64,
}

struct ClipStats {
    classes: BTreeMap<String, usize>,
    analysis: ClipAnalysis,
}

/// Frames this close to a segment boundary are excluded from the census:
/// the gate ramps swing every component together there and would leak a
/// common-mode correlation into the statistics.
const BOUNDARY_MARGIN_SECONDS: f64 = 0.06;

fn analyze(dataset: &Dataset, clip: &ManifestClip) -> Result<ClipStats> {
    let audio = dataset.audio(clip)?;
    let segments: Vec<(f64, f64)> = clip
        .sources
        .iter()
        .flat_map(|s| s.segments.iter().copied())
        .collect();
    // single-source clips: the mode band is part of the clip's provenance
    let center = crate::params::noise_band_center(
        *clip.classes[0].get(Group::NoiseMode.name()).unwrap_or(&0),
    );
    let band = (center / 1.6, center * 1.6);
    let analysis = analyze_clip_with_band(
        &audio,
        move |t| {
            segments
                .iter()
                .any(|&(on, off)| t >= on + BOUNDARY_MARGIN_SECONDS && t < off - BOUNDARY_MARGIN_SECONDS)
        },
        Some(band),
    )?;
    Ok(ClipStats {
        classes: clip.classes[0].clone(),
        analysis,
    })
}

fn class_census(
    stats: &[ClipStats],
    group: Group,
    statistic: &str,
    direction: i8,
    value: impl Fn(&ClipAnalysis) -> Option<f64>,
) -> GroupCensus {
    let n = group.class_count();
    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];
    for s in stats {
        let Some(&class) = s.classes.get(group.name()) else { continue };
        if let Some(v) = value(&s.analysis) {
            sums[class] += v;
            counts[class] += 1;
        }
    }
    let class_means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { f64::NAN })
        .collect();
    let monotone = counts.iter().all(|&c| c > 0)
        && class_means.windows(2).all(|w| {
            if direction > 0 {
                w[1] > w[0]
            } else {
                w[1] < w[0]
            }
        });
    GroupCensus {
        group: group.name().to_string(),
        statistic: statistic.to_string(),
        class_means,
        class_counts: counts,
        direction,
        monotone,
    }
}

/// Runs the census over up to `n_clips` single-source clips.
pub fn census(dataset: &Dataset, n_clips: usize) -> Result<CensusReport> {
    let singles: Vec<&ManifestClip> = dataset
        .clips
        .iter()
        .filter(|c| c.n_sources == 1)
        .take(n_clips)
        .collect();
    if singles.is_empty() {
        return Err(Error::Parameter(
            "census needs single-source clips; generate with --max-sources 1".into(),
        ));
    }

    let stats: Result<Vec<ClipStats>> =
        singles.par_iter().map(|clip| analyze(dataset, clip)).collect();
    let stats = stats?;

    let groups = vec![
        class_census(&stats, Group::F0Bias, "log2 median f0", 1, |a| {
            a.median_f0.map(|f| f.log2())
        }),
        class_census(&stats, Group::NoiseMode, "log2 residual centroid", 1, |a| {
            (a.residual_centroid_hz > 0.0).then(|| a.residual_centroid_hz.log2())
        }),
        class_census(&stats, Group::EnvSharpness, "harmonic band entropy", -1, |a| {
            a.harmonic_entropy
        }),
        class_census(&stats, Group::LocalF0Variance, "semitone delta", 1, |a| {
            a.semitone_delta
        }),
        class_census(&stats, Group::HarmonicVolume, "harmonic band dB", 1, |a| {
            a.harmonic_db
        }),
        class_census(&stats, Group::NoiseVolume, "residual band dB", 1, |a| {
            a.residual_db
        }),
    ];

    let mut corr = [(0.0f64, 0usize); 2];
    for s in &stats {
        let Some(&class) = s.classes.get(Group::LocalVolCorrSign.name()) else { continue };
        if let Some(c) = s.analysis.volume_correlation {
            corr[class].0 += c;
            corr[class].1 += 1;
        }
    }
    let mean = |slot: (f64, usize)| {
        if slot.1 > 0 {
            slot.0 / slot.1 as f64
        } else {
            f64::NAN
        }
    };
    let positive = mean(corr[CorrSign::Positive as usize]);
    let negative = mean(corr[CorrSign::Negative as usize]);

    Ok(CensusReport {
        n_clips: stats.len(),
        groups,
        corr_mean_positive: positive,
        corr_mean_negative: negative,
        corr_separation: positive - negative,
    })
}

impl CensusReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("census over {} single-source clips\n", self.n_clips));
        for g in &self.groups {
            let means: Vec<String> = g.class_means.iter().map(|m| format!("{m:.3}")).collect();
            out.push_str(&format!(
                "  {:22} {:24} [{}] {} ({})\n",
                g.group,
                g.statistic,
                means.join(", "),
                if g.monotone { "monotone" } else { "NOT MONOTONE" },
                if g.direction > 0 { "increasing" } else { "decreasing" },
            ));
        }
        out.push_str(&format!(
            "  {:22} mean corr +{:.3} / {:.3}, separation {:.3}\n",
            "local_vol_corr_sign", self.corr_mean_positive, self.corr_mean_negative, self.corr_separation
        ));
        out
    }
}
