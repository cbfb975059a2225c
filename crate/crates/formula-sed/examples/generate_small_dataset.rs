//! Generates a small dataset end to end: WAV clips, strong labels, frame
//! grids, codebook, and the provenance manifest.
//!
//! ```bash
//! cargo run --release --example generate_small_dataset [out_dir]
//! ```

use formula_sed::dataset::{run_generation, Dataset, DatasetConfig};

fn main() {
    let out_dir = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("fsed_small_dataset"));

    let config = DatasetConfig {
        count: 20,
        master_seed: 42,
        clip_seconds: 10.0,
        max_sources: 4,
        out_dir: out_dir.clone(),
        emit_frame_grids: true,
        ..DatasetConfig::default()
    };
    let summary = run_generation(&config).expect("generation");
    println!("content hash: {}", summary.content_hash);

    let dataset = Dataset::open(&out_dir).expect("open dataset");
    println!("\nmanifest holds {} clips:", dataset.clips.len());
    for clip in dataset.clips.iter().take(5) {
        println!(
            "  {} sources={} peak_gain={:.3}",
            clip.wav, clip.n_sources, clip.peak_gain
        );
    }
    println!("  ...");
    println!("\nfiles live under {}", out_dir.display());
}
