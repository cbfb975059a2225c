use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use formula_sed::dataset::{run_generation, Dataset, DatasetConfig};
use formula_sed::params::LabelCodebook;
use formula_sed::verify::{verify_dataset, VerifyOptions};

#[derive(Parser)]
#[command(name = "formula-sed", version, about = "Synthetic sound-event dataset generator with frame-accurate strong labels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset of labeled clips.
    Gen(GenArgs),
    /// Check that a generated dataset's audio carries its labels.
    Verify(VerifyArgs),
    /// Print per-frame labels and parameter provenance of one clip.
    Inspect(InspectArgs),
    /// Dump the label codebook (the normative label contract).
    Codebook(CodebookArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Number of clips to generate.
    #[arg(long)]
    count: u64,
    /// Master seed; the dataset is a pure function of the configuration.
    #[arg(long)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 16_000)]
    sample_rate: u32,
    #[arg(long, default_value_t = 10.0)]
    clip_seconds: f64,
    /// Sources are drawn uniformly from 1..=max_sources per clip.
    #[arg(long, default_value_t = 4)]
    max_sources: usize,
    #[arg(long, default_value_t = 50)]
    label_frame_rate: u32,
    /// Worker threads; 0 means one per core. FORMULA_SED_WORKERS overrides.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Also write per-frame label grids under frames/.
    #[arg(long)]
    frame_grids: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Dataset directory (as written by `gen`).
    #[arg(long)]
    dataset: PathBuf,
    /// Clips inspected by the per-clip contract checks.
    #[arg(long, default_value_t = 100)]
    clips: usize,
    /// Single-source clips fed to the statistical census (0 disables).
    #[arg(long, default_value_t = 1000)]
    census_clips: usize,
    /// Run the linear learnability probe (needs enough single-source clips).
    #[arg(long)]
    probe: bool,
    #[arg(long, default_value_t = 2000)]
    probe_train: usize,
    #[arg(long, default_value_t = 500)]
    probe_test: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct InspectArgs {
    /// Path to a clip WAV inside a dataset (out/audio/clip_XXXXXXXX.wav).
    #[arg(long)]
    clip: PathBuf,
    /// Print every frame instead of summarized active runs.
    #[arg(long)]
    frames: bool,
}

#[derive(Args)]
struct CodebookArgs {
    /// Write to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> formula_sed::Result<ExitCode> {
    match cli.command {
        Command::Gen(args) => {
            let config = DatasetConfig {
                count: args.count,
                master_seed: args.seed,
                sample_rate: args.sample_rate,
                clip_seconds: args.clip_seconds,
                max_sources: args.max_sources,
                label_frame_rate: args.label_frame_rate,
                out_dir: args.out,
                workers: args.workers,
                emit_frame_grids: args.frame_grids,
            };
            run_generation(&config)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify(args) => {
            let options = VerifyOptions {
                max_clips: args.clips,
                census_clips: args.census_clips,
                run_probe: args.probe,
                probe_train: args.probe_train,
                probe_test: args.probe_test,
                seed: args.seed,
            };
            let report = verify_dataset(&args.dataset, &options)?;
            print!("{}", report.to_text());
            println!("report written to {}", args.dataset.join("verify_report.json").display());
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Inspect(args) => {
            inspect(&args)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Codebook(args) => {
            let tsv = LabelCodebook::new().to_tsv();
            match args.out {
                Some(path) => std::fs::write(&path, tsv)
                    .map_err(|e| formula_sed::Error::io(&path, e))?,
                None => print!("{tsv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn inspect(args: &InspectArgs) -> formula_sed::Result<()> {
    let wav = &args.clip;
    let root = wav
        .parent()
        .and_then(|audio_dir| audio_dir.parent())
        .ok_or_else(|| formula_sed::Error::Dataset("clip path has no dataset root".into()))?;
    let dataset = Dataset::open(root)?;
    let file_name = wav
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| formula_sed::Error::Dataset("bad clip file name".into()))?;
    let clip = dataset
        .clips
        .iter()
        .find(|c| c.wav.ends_with(file_name))
        .ok_or_else(|| formula_sed::Error::Dataset(format!("{file_name} not in manifest")))?;

    println!("clip {} ({})", clip.clip_id, clip.wav);
    println!(
        "  {} source(s), peak normalization gain {:.4}",
        clip.n_sources, clip.peak_gain
    );
    for (i, (source, classes)) in clip.sources.iter().zip(&clip.classes).enumerate() {
        println!("  source {i}: seed {:#018x}, mix gain {:.2} dB", source.seed, source.gain_db);
        let segs: Vec<String> = source
            .segments
            .iter()
            .map(|(a, b)| format!("{a:.3}..{b:.3}"))
            .collect();
        println!("    segments: {}", segs.join(", "));
        println!("    reverb strength: {:.3} (unlabeled)", source.params.reverb_strength);
        for group in formula_sed::params::GROUPS {
            let class = classes.get(group.name()).copied().unwrap_or(usize::MAX);
            println!("    {:24} class {}", group.name(), class);
        }
    }

    let grid = dataset.reconstruct_grid(clip)?;
    let codebook = LabelCodebook::new();
    println!("  active label intervals:");
    for bit in grid.active_bits() {
        let name = codebook.class_name(bit)?;
        for (start, end) in grid.runs(bit) {
            println!(
                "    {:.3}\t{:.3}\t{name}",
                start as f64 / grid.frame_rate,
                end as f64 / grid.frame_rate
            );
        }
    }
    if args.frames {
        println!("  per-frame labels:");
        for (f, bits) in grid.bits.iter().enumerate() {
            if *bits == 0 {
                continue;
            }
            let names: Vec<String> = (0..formula_sed::params::LABEL_DIM)
                .filter(|b| bits >> b & 1 == 1)
                .map(|b| codebook.class_name(b).unwrap())
                .collect();
            println!("    frame {f:4} t={:7.3}  {}", f as f64 / grid.frame_rate, names.join(" "));
        }
    }
    Ok(())
}
