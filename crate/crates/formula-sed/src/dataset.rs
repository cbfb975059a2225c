//! Dataset output: WAV files, strong labels, frame grids, the provenance
//! manifest, and the deterministic parallel generation driver.
//!
//! Layout under the output directory:
//!
//! ```text
//! out/
//!   manifest.jsonl          header, one line per clip, footer with hash
//!   codebook.tsv            the normative label contract
//!   audio/clip_00000000.wav 16-bit PCM mono
//!   labels/strong.tsv       filename <tab> onset <tab> offset <tab> class
//!   frames/clip_00000000.tsv  optional per-frame grids
//! ```
//!
//! The dataset content hash covers PCM bytes, strong-label rows, and frame
//! grids in clip order; it is a pure function of the configuration, so runs
//! with different worker counts must produce the same hash.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{ClipSpec, FrameLabelGrid};
use crate::mix::{generate_clip, ClipRecord};
use crate::params::{LabelCodebook, LABEL_DIM, CODEBOOK_VERSION};
use crate::synth::AudioBuffer;

pub const MANIFEST_SCHEMA: &str = "fsed-manifest-v1";

/// Environment variable that overrides the configured worker count.
pub const WORKERS_ENV: &str = "FORMULA_SED_WORKERS";

/// Marker dropped in the output directory while a run is in flight; a
/// leftover marker means the dataset is incomplete.
pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

/// Everything a generation run needs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub count: u64,
    pub master_seed: u64,
    pub sample_rate: u32,
    pub clip_seconds: f64,
    pub max_sources: usize,
    pub label_frame_rate: u32,
    pub out_dir: PathBuf,
    /// 0 means one worker per available core.
    pub workers: usize,
    pub emit_frame_grids: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            count: 0,
            master_seed: 0,
            sample_rate: 16_000,
            clip_seconds: 10.0,
            max_sources: 4,
            label_frame_rate: 50,
            out_dir: PathBuf::from("out"),
            workers: 0,
            emit_frame_grids: false,
        }
    }
}

impl DatasetConfig {
    pub fn clip_spec(&self) -> ClipSpec {
        ClipSpec {
            sample_rate: self.sample_rate,
            clip_seconds: self.clip_seconds,
            label_frame_rate: self.label_frame_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=8).contains(&self.max_sources) {
            return Err(Error::Parameter("max_sources must be in 1..=8".into()));
        }
        self.clip_spec().validate()
    }

    /// The worker count actually used: environment override, then the
    /// configured value, then one per core.
    pub fn resolved_workers(&self) -> usize {
        if let Ok(v) = std::env::var(WORKERS_ENV) {
            if let Ok(n) = v.parse::<usize>() {
                if n > 0 {
                    return n;
                }
            }
        }
        if self.workers > 0 {
            return self.workers;
        }
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    }
}

pub fn clip_file_name(clip_id: u64) -> String {
    format!("clip_{clip_id:08}.wav")
}

pub fn clip_wav_rel(clip_id: u64) -> String {
    format!("audio/{}", clip_file_name(clip_id))
}

// --- manifest schema ------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub schema: String,
    pub codebook: String,
    pub count: u64,
    pub master_seed: u64,
    pub sample_rate: u32,
    pub clip_seconds: f64,
    pub max_sources: usize,
    pub label_frame_rate: u32,
    pub workers: usize,
    pub emit_frame_grids: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestClip {
    pub clip_id: u64,
    pub wav: String,
    pub n_sources: usize,
    pub peak_gain: f64,
    pub sources: Vec<crate::mix::SourceInfo>,
    /// (group name -> class index) per source, for downstream consumers that
    /// do not want to re-derive classes from raw values.
    pub classes: Vec<BTreeMap<String, usize>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestFooter {
    pub clips: u64,
    pub content_hash: String,
}

// --- content hashing ------------------------------------------------------

/// 64-bit FNV-1a; tiny, stable, and good enough to fingerprint a dataset.
#[derive(Clone, Copy, Debug)]
pub struct Fnv64(u64);

impl Default for Fnv64 {
    fn default() -> Self {
        Fnv64(0xCBF2_9CE4_8422_2325)
    }
}

impl Fnv64 {
    pub fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01B3);
        }
    }

    pub fn finish(self) -> u64 {
        self.0
    }
}

// --- per-clip serialization -----------------------------------------------

/// Everything one worker hands to the ordered sink for one clip.
#[derive(Debug)]
pub struct ClipArtifacts {
    pub clip_id: u64,
    pub strong_rows: Vec<String>,
    pub manifest_line: String,
    /// FNV over PCM bytes, strong rows, and the frame grid of this clip.
    pub content_piece: u64,
}

fn pcm16_bytes(audio: &AudioBuffer) -> Vec<u8> {
    let mut out = Vec::with_capacity(audio.len() * 2);
    for &s in &audio.samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn write_wav(path: &Path, audio: &AudioBuffer) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer =
        hound::WavWriter::create(path, spec).map_err(|e| wav_err(path, e))?;
    for &s in &audio.samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(v).map_err(|e| wav_err(path, e))?;
    }
    writer.finalize().map_err(|e| wav_err(path, e))
}

fn wav_err(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Dataset(format!("wav error at {}: {other}", path.display())),
    }
}

/// Reads a 16-bit mono WAV back into normalized f64 samples.
pub fn read_wav(path: &Path) -> Result<AudioBuffer> {
    let mut reader = hound::WavReader::open(path).map_err(|e| wav_err(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 {
        return Err(Error::Dataset(format!(
            "{} is not 16-bit mono PCM",
            path.display()
        )));
    }
    let samples: std::result::Result<Vec<i16>, _> = reader.samples::<i16>().collect();
    let samples = samples.map_err(|e| wav_err(path, e))?;
    Ok(AudioBuffer::new(
        spec.sample_rate,
        samples.into_iter().map(|s| s as f64 / 32767.0).collect(),
    ))
}

/// Strong-label rows for one clip: one row per contiguous run of each active
/// class, `filename onset offset class_name`, three-decimal seconds. Onset
/// is the first active frame's start, offset the last active frame's end.
pub fn strong_rows_for(grid: &FrameLabelGrid, wav_rel: &str, codebook: &LabelCodebook) -> Vec<String> {
    let rate = grid.frame_rate;
    let mut rows = Vec::new();
    for bit in grid.active_bits() {
        let name = codebook.class_name(bit).expect("bit inside codebook");
        for (start, end) in grid.runs(bit) {
            rows.push(format!(
                "{wav_rel}\t{:.3}\t{:.3}\t{name}",
                start as f64 / rate,
                end as f64 / rate,
            ));
        }
    }
    rows
}

/// Per-frame grid dump: `frame time bits` with the mask as a 94-character
/// 0/1 string, bit 0 leftmost.
pub fn frame_grid_text(grid: &FrameLabelGrid) -> String {
    let mut out = String::with_capacity(grid.n_frames * (LABEL_DIM + 16));
    out.push_str("# frame\ttime\tbits\n");
    for (f, mask) in grid.bits.iter().enumerate() {
        let mut bits = String::with_capacity(LABEL_DIM);
        for b in 0..LABEL_DIM {
            bits.push(if mask >> b & 1 == 1 { '1' } else { '0' });
        }
        out.push_str(&format!("{f}\t{:.3}\t{bits}\n", f as f64 / grid.frame_rate));
    }
    out
}

/// Parses a frame-grid dump back into masks.
pub fn parse_frame_grid(text: &str, frame_rate: f64) -> Result<FrameLabelGrid> {
    let mut bits = Vec::new();
    for line in text.lines() {
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        let mask_str = line
            .rsplit('\t')
            .next()
            .ok_or_else(|| Error::Dataset("malformed frame grid line".into()))?;
        let mut mask: u128 = 0;
        for (b, ch) in mask_str.chars().enumerate() {
            if ch == '1' {
                mask |= 1 << b;
            }
        }
        bits.push(mask);
    }
    Ok(FrameLabelGrid {
        n_frames: bits.len(),
        frame_rate,
        bits,
    })
}

/// Rebuilds a clip's frame grid from its strong-label rows.
pub fn grid_from_strong_rows(
    rows: &[StrongRow],
    n_frames: usize,
    frame_rate: f64,
    codebook: &LabelCodebook,
) -> Result<FrameLabelGrid> {
    let mut grid = FrameLabelGrid::empty(n_frames, frame_rate);
    for row in rows {
        let bit = codebook.parse_class_name(&row.class_name)?;
        let start = (row.onset * frame_rate).round() as usize;
        let end = ((row.offset * frame_rate).round() as usize).min(n_frames);
        for f in start..end {
            grid.bits[f] |= 1 << bit;
        }
    }
    Ok(grid)
}

/// Writes one clip's files and prepares its sink artifacts. The WAV (and
/// optional frame grid) go straight to disk from the worker; strong rows and
/// the manifest line are returned for ordered appending.
pub fn write_clip(record: &ClipRecord, config: &DatasetConfig) -> Result<ClipArtifacts> {
    let codebook = LabelCodebook::new();
    let wav_rel = clip_wav_rel(record.clip_id);
    let wav_path = config.out_dir.join(&wav_rel);
    write_wav(&wav_path, &record.audio)?;

    let strong_rows = strong_rows_for(&record.labels, &wav_rel, &codebook);

    let mut hasher = Fnv64::default();
    hasher.update(&record.clip_id.to_le_bytes());
    hasher.update(&pcm16_bytes(&record.audio));
    for row in &strong_rows {
        hasher.update(row.as_bytes());
    }

    if config.emit_frame_grids {
        let text = frame_grid_text(&record.labels);
        hasher.update(text.as_bytes());
        let grid_path = config
            .out_dir
            .join("frames")
            .join(format!("clip_{:08}.tsv", record.clip_id));
        fs::write(&grid_path, text).map_err(|e| Error::io(&grid_path, e))?;
    }

    let classes = record
        .source_classes()
        .into_iter()
        .map(|m| m.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
        .collect();
    let line = ManifestClip {
        clip_id: record.clip_id,
        wav: wav_rel,
        n_sources: record.sources.len(),
        peak_gain: record.peak_gain_applied,
        sources: record.sources.clone(),
        classes,
    };
    let manifest_line = serde_json::to_string(&line)
        .map_err(|e| Error::Dataset(format!("manifest serialization: {e}")))?;

    Ok(ClipArtifacts {
        clip_id: record.clip_id,
        strong_rows,
        manifest_line,
        content_piece: hasher.finish(),
    })
}

/// Summary of one generation run.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub clips: u64,
    pub content_hash: String,
    pub clips_per_second: f64,
    pub workers: usize,
}

/// Generates clips `0..count` across a worker pool and writes the dataset.
///
/// Workers own their clips end to end (WAV and frame-grid files are distinct
/// per clip); strong labels and manifest lines flow through a single sink
/// that buffers out-of-order completions and flushes strictly in clip order,
/// folding the content hash as it goes.
pub fn run_generation(config: &DatasetConfig) -> Result<RunSummary> {
    config.validate()?;
    let workers = config.resolved_workers();
    let out = &config.out_dir;
    fs::create_dir_all(out.join("audio")).map_err(|e| Error::io(out.join("audio"), e))?;
    fs::create_dir_all(out.join("labels")).map_err(|e| Error::io(out.join("labels"), e))?;
    if config.emit_frame_grids {
        fs::create_dir_all(out.join("frames")).map_err(|e| Error::io(out.join("frames"), e))?;
    }
    let marker = out.join(INCOMPLETE_MARKER);
    fs::write(&marker, "generation in flight\n").map_err(|e| Error::io(&marker, e))?;

    let codebook_path = out.join("codebook.tsv");
    fs::write(&codebook_path, LabelCodebook::new().to_tsv())
        .map_err(|e| Error::io(&codebook_path, e))?;

    let manifest_path = out.join("manifest.jsonl");
    let manifest_file =
        fs::File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let mut manifest = BufWriter::new(manifest_file);
    let header = ManifestHeader {
        schema: MANIFEST_SCHEMA.into(),
        codebook: CODEBOOK_VERSION.into(),
        count: config.count,
        master_seed: config.master_seed,
        sample_rate: config.sample_rate,
        clip_seconds: config.clip_seconds,
        max_sources: config.max_sources,
        label_frame_rate: config.label_frame_rate,
        workers,
        emit_frame_grids: config.emit_frame_grids,
    };
    writeln!(manifest, "{}", serde_json::to_string(&header).unwrap())
        .map_err(|e| Error::io(&manifest_path, e))?;

    let strong_path = out.join("labels/strong.tsv");
    let strong_file = fs::File::create(&strong_path).map_err(|e| Error::io(&strong_path, e))?;
    let mut strong = BufWriter::new(strong_file);

    let clip = config.clip_spec();
    let started = Instant::now();
    let (tx, rx) = mpsc::sync_channel::<Result<ClipArtifacts>>(workers * 4);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Parameter(format!("worker pool: {e}")))?;

    let mut hash = Fnv64::default();
    let result: Result<()> = std::thread::scope(|scope| {
        let config_ref = &config;
        let clip_ref = &clip;
        scope.spawn(move || {
            pool.install(|| {
                use rayon::prelude::*;
                (0..config_ref.count).into_par_iter().for_each_with(
                    tx,
                    |tx, clip_id| {
                        let artifacts = generate_clip(
                            config_ref.master_seed,
                            clip_id,
                            clip_ref,
                            config_ref.max_sources,
                        )
                        .and_then(|record| write_clip(&record, config_ref));
                        // receiver gone means an earlier error aborted the run
                        let _ = tx.send(artifacts);
                    },
                );
            });
        });

        let mut pending: BTreeMap<u64, ClipArtifacts> = BTreeMap::new();
        let mut next = 0u64;
        let mut received = 0u64;
        while received < config.count {
            let artifacts = rx
                .recv()
                .map_err(|_| Error::Dataset("workers stopped early".into()))??;
            received += 1;
            pending.insert(artifacts.clip_id, artifacts);
            while let Some(art) = pending.remove(&next) {
                hash.update(&art.content_piece.to_le_bytes());
                for row in &art.strong_rows {
                    writeln!(strong, "{row}").map_err(|e| Error::io(&strong_path, e))?;
                }
                writeln!(manifest, "{}", art.manifest_line)
                    .map_err(|e| Error::io(&manifest_path, e))?;
                next += 1;
            }
        }
        Ok(())
    });
    result?;

    let content_hash = format!("{:016x}", hash.finish());
    let footer = ManifestFooter {
        clips: config.count,
        content_hash: content_hash.clone(),
    };
    writeln!(manifest, "{}", serde_json::to_string(&footer).unwrap())
        .map_err(|e| Error::io(&manifest_path, e))?;
    manifest.flush().map_err(|e| Error::io(&manifest_path, e))?;
    strong.flush().map_err(|e| Error::io(&strong_path, e))?;

    fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;

    let elapsed = started.elapsed().as_secs_f64();
    let clips_per_second = if elapsed > 0.0 {
        config.count as f64 / elapsed
    } else {
        f64::INFINITY
    };
    println!(
        "generated {} clips in {elapsed:.1}s ({clips_per_second:.1} clips/s, {workers} workers), content hash {content_hash}",
        config.count
    );
    Ok(RunSummary {
        clips: config.count,
        content_hash,
        clips_per_second,
        workers,
    })
}

// --- reading a dataset back -----------------------------------------------

#[derive(Clone, Debug)]
pub struct StrongRow {
    pub file: String,
    pub onset: f64,
    pub offset: f64,
    pub class_name: String,
}

/// A dataset opened for analysis.
#[derive(Debug)]
pub struct Dataset {
    pub root: PathBuf,
    pub header: ManifestHeader,
    pub clips: Vec<ManifestClip>,
    pub footer: Option<ManifestFooter>,
}

impl Dataset {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        if root.join(INCOMPLETE_MARKER).exists() {
            return Err(Error::Dataset(format!(
                "{} holds an incomplete run (marker present)",
                root.display()
            )));
        }
        let manifest_path = root.join("manifest.jsonl");
        let file = fs::File::open(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let mut header = None;
        let mut footer = None;
        let mut clips = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(&manifest_path, e))?;
            if line.is_empty() {
                continue;
            }
            if header.is_none() {
                header = Some(
                    serde_json::from_str::<ManifestHeader>(&line)
                        .map_err(|e| Error::Dataset(format!("manifest header: {e}")))?,
                );
            } else if let Ok(clip) = serde_json::from_str::<ManifestClip>(&line) {
                clips.push(clip);
            } else if let Ok(f) = serde_json::from_str::<ManifestFooter>(&line) {
                footer = Some(f);
            } else {
                return Err(Error::Dataset("unrecognized manifest line".into()));
            }
        }
        Ok(Dataset {
            root,
            header: header.ok_or_else(|| Error::Dataset("manifest has no header".into()))?,
            clips,
            footer,
        })
    }

    pub fn clip_spec(&self) -> ClipSpec {
        ClipSpec {
            sample_rate: self.header.sample_rate,
            clip_seconds: self.header.clip_seconds,
            label_frame_rate: self.header.label_frame_rate,
        }
    }

    pub fn audio(&self, clip: &ManifestClip) -> Result<AudioBuffer> {
        read_wav(&self.root.join(&clip.wav))
    }

    /// All strong-label rows, grouped by file name.
    pub fn strong_rows(&self) -> Result<BTreeMap<String, Vec<StrongRow>>> {
        let path = self.root.join("labels/strong.tsv");
        let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut out: BTreeMap<String, Vec<StrongRow>> = BTreeMap::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(&path, e))?;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let (file_name, onset, offset, class_name) = (
                parts.next().ok_or_else(|| Error::Dataset("short strong row".into()))?,
                parts.next().ok_or_else(|| Error::Dataset("short strong row".into()))?,
                parts.next().ok_or_else(|| Error::Dataset("short strong row".into()))?,
                parts.next().ok_or_else(|| Error::Dataset("short strong row".into()))?,
            );
            let row = StrongRow {
                file: file_name.to_string(),
                onset: onset.parse().map_err(|_| Error::Dataset("bad onset".into()))?,
                offset: offset.parse().map_err(|_| Error::Dataset("bad offset".into()))?,
                class_name: class_name.to_string(),
            };
            out.entry(row.file.clone()).or_default().push(row);
        }
        Ok(out)
    }

    pub fn frame_grid(&self, clip: &ManifestClip) -> Result<FrameLabelGrid> {
        let path = self
            .root
            .join("frames")
            .join(format!("clip_{:08}.tsv", clip.clip_id));
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        parse_frame_grid(&text, self.header.label_frame_rate as f64)
    }

    /// Reconstructs a clip's label grid from the manifest provenance alone
    /// (segment activation plus each source's class pattern).
    pub fn reconstruct_grid(&self, clip: &ManifestClip) -> Result<FrameLabelGrid> {
        let spec = self.clip_spec();
        let codebook = LabelCodebook::new();
        let mut grid = FrameLabelGrid::empty(spec.n_frames(), spec.label_frame_rate as f64);
        for source in &clip.sources {
            let pattern = crate::params::encode_labels(&source.params, &codebook);
            let rate = spec.label_frame_rate as f64;
            for (f, bits) in grid.bits.iter_mut().enumerate() {
                let center = (f as f64 + 0.5) / rate;
                if source
                    .segments
                    .iter()
                    .any(|&(on, off)| center >= on && center < off)
                {
                    *bits |= pattern;
                }
            }
        }
        Ok(grid)
    }
}
