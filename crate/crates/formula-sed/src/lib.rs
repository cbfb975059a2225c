//! Deterministic generator of synthetic sound-event datasets.
//!
//! Sound events are synthesized from first principles: hyperparameters are
//! drawn from documented ranges, time-varying parameter functions (pitch,
//! volume, spectral envelope, noise color) are sampled from Gaussian-process
//! priors, and audio is rendered with a harmonic-plus-noise synthesizer.
//! Because every label is a generation parameter, each clip ships with
//! frame-accurate multi-hot strong labels that are correct by construction.
//!
//! The crate is organized around the generation pipeline:
//!
//! - [`kernels`] / [`gp`] — covariance kernels and GP samplers, including
//!   correlated two-output draws and separable time-frequency fields;
//! - [`params`] — the hyperparameter space, class thresholds, and the
//!   94-position label codebook;
//! - [`synth`] — the DSP core: additive harmonics, time-variant FIR noise,
//!   reverb, segment gating;
//! - [`event`] — one labeled source event end to end;
//! - [`mix`] / [`dataset`] — mixing 1..4 sources per clip, WAV + strong
//!   label + manifest output, and the parallel generation driver;
//! - [`verify`] — analysis oracles (pitch, harmonicity, centroid), dataset
//!   censuses, and a linear learnability probe.
//!
//! Generation is reproducible bit for bit: every random decision comes from
//! a stream derived in [`rng`] from `(master seed, clip id, source index,
//! stage)`, so outputs do not depend on worker count or scheduling.
//!
//! ```no_run
//! use formula_sed::dataset::{run_generation, DatasetConfig};
//!
//! let config = DatasetConfig {
//!     count: 100,
//!     master_seed: 42,
//!     out_dir: "out/demo".into(),
//!     ..DatasetConfig::default()
//! };
//! let summary = run_generation(&config).unwrap();
//! println!("content hash {}", summary.content_hash);
//! ```

pub mod dataset;
pub mod error;
pub mod event;
pub mod fft;
pub mod gp;
pub mod kernels;
pub mod mix;
pub mod params;
pub mod rng;
pub mod synth;
pub mod verify;

pub use error::{Error, Result};
