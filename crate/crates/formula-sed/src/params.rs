//! The event hyperparameter space: sampling ranges, class thresholds, and
//! the multi-hot label codebook.
//!
//! Twenty labeled parameter groups plus one unlabeled reverb knob define a
//! source event. Every labeled group carries a fixed class count and a fixed
//! set of half-open threshold intervals; together they span 94 label
//! positions. The numbers here are the normative label contract of the
//! dataset format — `LabelCodebook::to_tsv` is the machine-readable dump.

use rand::Rng;

use crate::error::{Error, Result};
use crate::kernels::{KernelKind, KERNEL_KINDS};

/// Codebook format version, echoed in dataset files.
pub const CODEBOOK_VERSION: &str = "fsed-codebook-v1";

/// Total number of multi-hot label positions.
pub const LABEL_DIM: usize = 94;

/// Number of labeled parameter groups (one active class each).
pub const N_GROUPS: usize = 20;

/// Class thresholds are deliberately non-uniform: perceptual register edges
/// for pitch, decade edges for variances, octave-ish edges elsewhere.
pub mod ranges {
    /// Voiced segment duration, seconds, log-uniform.
    pub const VOICED_DURATION: (f64, f64) = (0.2, 8.0);
    pub const VOICED_DURATION_EDGES: [f64; 2] = [0.8, 2.5];

    /// Mean volumes, dB log-gain, uniform.
    pub const VOLUME_DB: (f64, f64) = (-40.0, 0.0);
    pub const VOLUME_EDGES: [f64; 2] = [-26.0, -13.0];

    /// GP variances (semitones^2 for pitch, dB^2 for volume, logit^2 for
    /// envelopes), log-uniform over four decades with classes at decade
    /// boundaries.
    pub const VARIANCE: (f64, f64) = (0.01, 100.0);
    pub const VARIANCE_EDGES: [f64; 3] = [0.1, 1.0, 10.0];

    /// F0 bias, Hz, log-uniform over C1..B6.
    pub const F0_BIAS: (f64, f64) = (32.7, 1975.0);
    pub const F0_BIAS_EDGES: [f64; 3] = [110.0, 330.0, 990.0];

    /// Harmonic count, uniform integer.
    pub const N_HARMONICS: (u32, u32) = (1, 60);
    pub const N_HARMONICS_EDGES: [f64; 2] = [5.0, 15.0];

    /// GP length scales, control frames (or harmonic indices for the
    /// envelope axis), log-uniform.
    pub const LENGTH_SCALE: (f64, f64) = (2.0, 200.0);
    pub const LENGTH_SCALE_EDGES: [f64; 3] = [8.0, 32.0, 96.0];

    /// Softmax inverse temperatures, log-uniform.
    pub const SHARPNESS: (f64, f64) = (0.5, 8.0);
    pub const SHARPNESS_EDGES: [f64; 3] = [1.0, 2.0, 4.0];

    /// Unlabeled kernel extras.
    pub const KERNEL_PERIOD_FRAMES: (f64, f64) = (4.0, 100.0);
    pub const KERNEL_PERIOD_UNITS: (f64, f64) = (2.0, 30.0);
    pub const KERNEL_ALPHA: (f64, f64) = (0.5, 4.0);
    /// Unlabeled frequency-axis length scale of the noise field, bins.
    pub const NOISE_FREQ_LENGTH_SCALE: (f64, f64) = (2.0, 32.0);

    /// Number of noise bands and their log-spaced center span, Hz. The
    /// floor sits at two filter-grid bins so every band is resolvable on
    /// the 65-bin magnitude grid.
    pub const NOISE_BANDS: usize = 10;
    pub const NOISE_BAND_SPAN: (f64, f64) = (250.0, 7500.0);
}

/// Center frequency (Hz) of one of the ten noise bands.
pub fn noise_band_center(mode: usize) -> f64 {
    let (lo, hi) = ranges::NOISE_BAND_SPAN;
    let t = mode as f64 / (ranges::NOISE_BANDS - 1) as f64;
    lo * (hi / lo).powf(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PitchMode {
    Discrete,
    Continuous,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrSign {
    Positive,
    Negative,
}

impl CorrSign {
    pub fn factor(self) -> f64 {
        match self {
            CorrSign::Positive => 1.0,
            CorrSign::Negative => -1.0,
        }
    }
}

/// A continuous hyperparameter together with the class index of the
/// threshold interval it fell into.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Sampled {
    pub value: f64,
    pub class: usize,
}

/// Unlabeled extras for one kernel group; always drawn so that the stream
/// layout does not depend on the kind that was selected.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KernelAux {
    pub period: f64,
    pub alpha: f64,
}

/// Everything that defines one source event, sampled once per event.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EventParams {
    pub voiced_duration: Sampled,
    pub harmonic_volume: Sampled,
    pub noise_volume: Sampled,
    pub f0_variance: Sampled,
    pub f0_bias: Sampled,
    pub n_harmonics: Sampled,
    pub env_variance: Sampled,
    pub env_length_scale: Sampled,
    pub env_sharpness: Sampled,
    pub env_kernel: KernelKind,
    pub env_kernel_aux: KernelAux,
    pub noise_sharpness: Sampled,
    pub noise_mode: usize,
    pub noise_kernel: KernelKind,
    pub noise_kernel_aux: KernelAux,
    /// Unlabeled: frequency-axis length scale of the noise field, bins.
    pub noise_freq_length_scale: f64,
    pub pitch_mode: PitchMode,
    /// Unlabeled: only used for acoustic synthesis, never encoded.
    pub reverb_strength: f64,
    pub local_vol_corr_sign: CorrSign,
    pub local_vol_variance: Sampled,
    pub local_vol_kernel: KernelKind,
    pub local_vol_kernel_aux: KernelAux,
    /// Unlabeled: time-axis length scale of the volume tracks, frames.
    pub local_vol_length_scale: f64,
    pub local_f0_variance: Sampled,
    pub local_f0_length_scale: Sampled,
    pub local_f0_kernel: KernelKind,
    pub local_f0_kernel_aux: KernelAux,
}

/// Identifier for a labeled parameter group, in codebook order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Group {
    VoicedDuration,
    HarmonicVolume,
    NoiseVolume,
    F0Variance,
    F0Bias,
    NHarmonics,
    EnvVariance,
    EnvLengthScale,
    EnvSharpness,
    EnvKernel,
    NoiseSharpness,
    NoiseMode,
    NoiseKernel,
    PitchMode,
    LocalVolCorrSign,
    LocalVolVariance,
    LocalVolKernel,
    LocalF0Variance,
    LocalF0LengthScale,
    LocalF0Kernel,
}

pub const GROUPS: [Group; N_GROUPS] = [
    Group::VoicedDuration,
    Group::HarmonicVolume,
    Group::NoiseVolume,
    Group::F0Variance,
    Group::F0Bias,
    Group::NHarmonics,
    Group::EnvVariance,
    Group::EnvLengthScale,
    Group::EnvSharpness,
    Group::EnvKernel,
    Group::NoiseSharpness,
    Group::NoiseMode,
    Group::NoiseKernel,
    Group::PitchMode,
    Group::LocalVolCorrSign,
    Group::LocalVolVariance,
    Group::LocalVolKernel,
    Group::LocalF0Variance,
    Group::LocalF0LengthScale,
    Group::LocalF0Kernel,
];

impl Group {
    pub fn name(self) -> &'static str {
        match self {
            Group::VoicedDuration => "voiced_duration",
            Group::HarmonicVolume => "harmonic_volume",
            Group::NoiseVolume => "noise_volume",
            Group::F0Variance => "f0_variance",
            Group::F0Bias => "f0_bias",
            Group::NHarmonics => "n_harmonics",
            Group::EnvVariance => "env_variance",
            Group::EnvLengthScale => "env_length_scale",
            Group::EnvSharpness => "env_sharpness",
            Group::EnvKernel => "env_kernel",
            Group::NoiseSharpness => "noise_sharpness",
            Group::NoiseMode => "noise_mode",
            Group::NoiseKernel => "noise_kernel",
            Group::PitchMode => "pitch_mode",
            Group::LocalVolCorrSign => "local_vol_corr_sign",
            Group::LocalVolVariance => "local_vol_variance",
            Group::LocalVolKernel => "local_vol_kernel",
            Group::LocalF0Variance => "local_f0_variance",
            Group::LocalF0LengthScale => "local_f0_length_scale",
            Group::LocalF0Kernel => "local_f0_kernel",
        }
    }

    pub fn class_count(self) -> usize {
        match self {
            Group::VoicedDuration | Group::HarmonicVolume | Group::NoiseVolume | Group::NHarmonics => 3,
            Group::F0Variance
            | Group::F0Bias
            | Group::EnvVariance
            | Group::EnvLengthScale
            | Group::EnvSharpness
            | Group::NoiseSharpness
            | Group::LocalVolVariance
            | Group::LocalF0Variance
            | Group::LocalF0LengthScale => 4,
            Group::EnvKernel | Group::NoiseKernel | Group::LocalVolKernel | Group::LocalF0Kernel => 8,
            Group::NoiseMode => 10,
            Group::PitchMode | Group::LocalVolCorrSign => 2,
        }
    }

    /// Sampling range and interior thresholds for groups discretized from a
    /// continuous value; `None` for categorical groups.
    pub fn thresholds(self) -> Option<(f64, f64, &'static [f64])> {
        use ranges::*;
        match self {
            Group::VoicedDuration => Some((VOICED_DURATION.0, VOICED_DURATION.1, &VOICED_DURATION_EDGES)),
            Group::HarmonicVolume | Group::NoiseVolume => Some((VOLUME_DB.0, VOLUME_DB.1, &VOLUME_EDGES)),
            Group::F0Variance | Group::EnvVariance | Group::LocalVolVariance | Group::LocalF0Variance => {
                Some((VARIANCE.0, VARIANCE.1, &VARIANCE_EDGES))
            }
            Group::F0Bias => Some((F0_BIAS.0, F0_BIAS.1, &F0_BIAS_EDGES)),
            Group::NHarmonics => Some((
                N_HARMONICS.0 as f64,
                N_HARMONICS.1 as f64 + 1.0,
                &N_HARMONICS_EDGES,
            )),
            Group::EnvLengthScale | Group::LocalF0LengthScale => {
                Some((LENGTH_SCALE.0, LENGTH_SCALE.1, &LENGTH_SCALE_EDGES))
            }
            Group::EnvSharpness | Group::NoiseSharpness => Some((SHARPNESS.0, SHARPNESS.1, &SHARPNESS_EDGES)),
            _ => None,
        }
    }

    /// Human-readable meaning of one class of a categorical group.
    pub fn category_label(self, class: usize) -> Option<String> {
        match self {
            Group::EnvKernel | Group::NoiseKernel | Group::LocalVolKernel | Group::LocalF0Kernel => {
                Some(KERNEL_KINDS[class].name().to_string())
            }
            Group::NoiseMode => Some(format!("{:.0}Hz", noise_band_center(class))),
            Group::PitchMode => Some(if class == 0 { "discrete" } else { "continuous" }.to_string()),
            Group::LocalVolCorrSign => Some(if class == 0 { "+" } else { "-" }.to_string()),
            _ => None,
        }
    }
}

/// Maps a continuous value to the class index of the half-open threshold
/// interval containing it; values exactly on a threshold go to the upper
/// interval. Errors if the value lies outside the group's sampling range.
pub fn discretize_value(group: Group, value: f64) -> Result<usize> {
    let (lo, hi, edges) = group.thresholds().ok_or_else(|| {
        Error::Parameter(format!("group {} is categorical, not thresholded", group.name()))
    })?;
    if !value.is_finite() || value < lo || value > hi {
        return Err(Error::Range(format!(
            "{} value {value} outside [{lo}, {hi}]",
            group.name()
        )));
    }
    Ok(edges.iter().take_while(|&&e| value >= e).count())
}

/// Fixed mapping from (group, class) to a multi-hot bit position.
#[derive(Clone, Debug)]
pub struct LabelCodebook {
    offsets: [usize; N_GROUPS],
}

impl Default for LabelCodebook {
    fn default() -> Self {
        Self::new()
    }
}

impl LabelCodebook {
    pub fn new() -> Self {
        let mut offsets = [0usize; N_GROUPS];
        let mut acc = 0;
        for (i, g) in GROUPS.iter().enumerate() {
            offsets[i] = acc;
            acc += g.class_count();
        }
        debug_assert_eq!(acc, LABEL_DIM);
        LabelCodebook { offsets }
    }

    pub fn total_dim(&self) -> usize {
        LABEL_DIM
    }

    pub fn offset(&self, group: Group) -> usize {
        self.offsets[GROUPS.iter().position(|&g| g == group).unwrap()]
    }

    pub fn bit_index(&self, group: Group, class: usize) -> Result<usize> {
        if class >= group.class_count() {
            return Err(Error::Range(format!(
                "class {class} out of range for {} ({} classes)",
                group.name(),
                group.class_count()
            )));
        }
        Ok(self.offset(group) + class)
    }

    /// `"group_class"` name of one bit position, the vocabulary used in
    /// strong label files.
    pub fn class_name(&self, bit: usize) -> Result<String> {
        let (group, class) = self.bit_to_group(bit)?;
        Ok(format!("{}_{}", group.name(), class))
    }

    pub fn bit_to_group(&self, bit: usize) -> Result<(Group, usize)> {
        if bit >= LABEL_DIM {
            return Err(Error::Range(format!("bit index {bit} out of 0..{LABEL_DIM}")));
        }
        for (i, g) in GROUPS.iter().enumerate() {
            let lo = self.offsets[i];
            if bit < lo + g.class_count() {
                return Ok((*g, bit - lo));
            }
        }
        unreachable!()
    }

    /// Inverse of [`class_name`](Self::class_name).
    pub fn parse_class_name(&self, name: &str) -> Result<usize> {
        let (group_name, class) = name
            .rsplit_once('_')
            .ok_or_else(|| Error::Dataset(format!("malformed class name {name:?}")))?;
        let class: usize = class
            .parse()
            .map_err(|_| Error::Dataset(format!("malformed class index in {name:?}")))?;
        let group = GROUPS
            .iter()
            .copied()
            .find(|g| g.name() == group_name)
            .ok_or_else(|| Error::Dataset(format!("unknown group in {name:?}")))?;
        self.bit_index(group, class)
    }

    /// The normative machine-readable dump: one row per bit position.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# {CODEBOOK_VERSION}\n"));
        out.push_str("# pitch groups operate in semitone space; variances are per-axis GP output scales\n");
        out.push_str("group\tclass\tbit\tinterval\tname\n");
        for (i, g) in GROUPS.iter().enumerate() {
            for c in 0..g.class_count() {
                let interval = match g.thresholds() {
                    Some((lo, hi, edges)) => {
                        let left = if c == 0 { lo } else { edges[c - 1] };
                        let right = if c == edges.len() { hi } else { edges[c] };
                        format!("[{left}, {right})")
                    }
                    None => g.category_label(c).unwrap_or_default(),
                };
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}_{}\n",
                    g.name(),
                    c,
                    self.offsets[i] + c,
                    interval,
                    g.name(),
                    c
                ));
            }
        }
        out
    }
}

/// 94-bit multi-hot label vector.
pub type LabelMask = u128;

/// Encodes an event's class indices as a multi-hot vector: exactly one bit
/// per labeled group, 20 bits total. Reverb strength contributes nothing.
pub fn encode_labels(params: &EventParams, codebook: &LabelCodebook) -> LabelMask {
    let mut mask: LabelMask = 0;
    for (group, class) in class_indices(params) {
        let bit = codebook.bit_index(group, class).expect("valid class index");
        mask |= 1 << bit;
    }
    mask
}

/// The 20 (group, class) pairs of an event, in codebook order.
pub fn class_indices(params: &EventParams) -> [(Group, usize); N_GROUPS] {
    let p = params;
    [
        (Group::VoicedDuration, p.voiced_duration.class),
        (Group::HarmonicVolume, p.harmonic_volume.class),
        (Group::NoiseVolume, p.noise_volume.class),
        (Group::F0Variance, p.f0_variance.class),
        (Group::F0Bias, p.f0_bias.class),
        (Group::NHarmonics, p.n_harmonics.class),
        (Group::EnvVariance, p.env_variance.class),
        (Group::EnvLengthScale, p.env_length_scale.class),
        (Group::EnvSharpness, p.env_sharpness.class),
        (Group::EnvKernel, p.env_kernel.index()),
        (Group::NoiseSharpness, p.noise_sharpness.class),
        (Group::NoiseMode, p.noise_mode),
        (Group::NoiseKernel, p.noise_kernel.index()),
        (
            Group::PitchMode,
            match p.pitch_mode {
                PitchMode::Discrete => 0,
                PitchMode::Continuous => 1,
            },
        ),
        (
            Group::LocalVolCorrSign,
            match p.local_vol_corr_sign {
                CorrSign::Positive => 0,
                CorrSign::Negative => 1,
            },
        ),
        (Group::LocalVolVariance, p.local_vol_variance.class),
        (Group::LocalVolKernel, p.local_vol_kernel.index()),
        (Group::LocalF0Variance, p.local_f0_variance.class),
        (Group::LocalF0LengthScale, p.local_f0_length_scale.class),
        (Group::LocalF0Kernel, p.local_f0_kernel.index()),
    ]
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp().clamp(lo, hi)
}

fn sample_thresholded<R: Rng>(rng: &mut R, group: Group, log_scale: bool) -> Sampled {
    let (lo, hi, _) = group.thresholds().expect("thresholded group");
    let value = if log_scale {
        log_uniform(rng, lo, hi)
    } else {
        rng.random_range(lo..hi)
    };
    let class = discretize_value(group, value).expect("value inside sampling range");
    Sampled { value, class }
}

fn sample_kernel_aux<R: Rng>(rng: &mut R, period_range: (f64, f64)) -> KernelAux {
    KernelAux {
        period: log_uniform(rng, period_range.0, period_range.1),
        alpha: log_uniform(rng, ranges::KERNEL_ALPHA.0, ranges::KERNEL_ALPHA.1),
    }
}

fn sample_kernel_kind<R: Rng>(rng: &mut R) -> KernelKind {
    KERNEL_KINDS[rng.random_range(0..KERNEL_KINDS.len())]
}

/// Draws a full event hyperparameter set. Draw order is fixed (struct field
/// order); auxiliary kernel values are always consumed even when the drawn
/// kind ignores them, so the stream layout is identical for every event.
pub fn sample_event_hyperparams<R: Rng>(rng: &mut R) -> EventParams {
    let voiced_duration = sample_thresholded(rng, Group::VoicedDuration, true);
    let harmonic_volume = sample_thresholded(rng, Group::HarmonicVolume, false);
    let noise_volume = sample_thresholded(rng, Group::NoiseVolume, false);
    let f0_variance = sample_thresholded(rng, Group::F0Variance, true);
    let f0_bias = sample_thresholded(rng, Group::F0Bias, true);

    let k = rng.random_range(ranges::N_HARMONICS.0..=ranges::N_HARMONICS.1);
    let n_harmonics = Sampled {
        value: k as f64,
        class: discretize_value(Group::NHarmonics, k as f64).unwrap(),
    };

    let env_variance = sample_thresholded(rng, Group::EnvVariance, true);
    let env_length_scale = sample_thresholded(rng, Group::EnvLengthScale, true);
    let env_sharpness = sample_thresholded(rng, Group::EnvSharpness, true);
    let env_kernel = sample_kernel_kind(rng);
    let env_kernel_aux = sample_kernel_aux(rng, ranges::KERNEL_PERIOD_UNITS);

    let noise_sharpness = sample_thresholded(rng, Group::NoiseSharpness, true);
    let noise_mode = rng.random_range(0..ranges::NOISE_BANDS);
    let noise_kernel = sample_kernel_kind(rng);
    let noise_kernel_aux = sample_kernel_aux(rng, ranges::KERNEL_PERIOD_UNITS);
    let noise_freq_length_scale = log_uniform(
        rng,
        ranges::NOISE_FREQ_LENGTH_SCALE.0,
        ranges::NOISE_FREQ_LENGTH_SCALE.1,
    );

    let pitch_mode = if rng.random_range(0..2u32) == 0 {
        PitchMode::Discrete
    } else {
        PitchMode::Continuous
    };
    let reverb_strength = rng.random_range(0.0..1.0f64);

    let local_vol_corr_sign = if rng.random_range(0..2u32) == 0 {
        CorrSign::Positive
    } else {
        CorrSign::Negative
    };
    let local_vol_variance = sample_thresholded(rng, Group::LocalVolVariance, true);
    let local_vol_kernel = sample_kernel_kind(rng);
    let local_vol_kernel_aux = sample_kernel_aux(rng, ranges::KERNEL_PERIOD_FRAMES);
    let local_vol_length_scale = log_uniform(rng, ranges::LENGTH_SCALE.0, ranges::LENGTH_SCALE.1);

    let local_f0_variance = sample_thresholded(rng, Group::LocalF0Variance, true);
    let local_f0_length_scale = sample_thresholded(rng, Group::LocalF0LengthScale, true);
    let local_f0_kernel = sample_kernel_kind(rng);
    let local_f0_kernel_aux = sample_kernel_aux(rng, ranges::KERNEL_PERIOD_FRAMES);

    EventParams {
        voiced_duration,
        harmonic_volume,
        noise_volume,
        f0_variance,
        f0_bias,
        n_harmonics,
        env_variance,
        env_length_scale,
        env_sharpness,
        env_kernel,
        env_kernel_aux,
        noise_sharpness,
        noise_mode,
        noise_kernel,
        noise_kernel_aux,
        noise_freq_length_scale,
        pitch_mode,
        reverb_strength,
        local_vol_corr_sign,
        local_vol_variance,
        local_vol_kernel,
        local_vol_kernel_aux,
        local_vol_length_scale,
        local_f0_variance,
        local_f0_length_scale,
        local_f0_kernel,
        local_f0_kernel_aux,
    }
}

impl EventParams {
    pub fn validate(&self) -> Result<()> {
        for (group, class) in class_indices(self) {
            if class >= group.class_count() {
                return Err(Error::Range(format!(
                    "{} class {class} out of range",
                    group.name()
                )));
            }
        }
        if self.n_harmonics.value < 1.0 {
            return Err(Error::Parameter("n_harmonics must be >= 1".into()));
        }
        if self.f0_bias.value <= 0.0 {
            return Err(Error::Parameter("f0_bias must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.reverb_strength) {
            return Err(Error::Parameter("reverb_strength must be in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn harmonic_count(&self) -> usize {
        self.n_harmonics.value as usize
    }
}
