//! Generates a small dataset and runs the verification suite on it: oracle
//! self-checks, per-clip label-contract checks, and (if the dataset is large
//! enough) the statistical census.
//!
//! ```bash
//! cargo run --release --example verify_dataset
//! ```

use formula_sed::dataset::{run_generation, DatasetConfig};
use formula_sed::verify::{verify_dataset, VerifyOptions};

fn main() {
    let out_dir = std::env::temp_dir().join("fsed_verify_demo");
    let config = DatasetConfig {
        count: 24,
        master_seed: 5,
        clip_seconds: 4.0,
        max_sources: 3,
        out_dir: out_dir.clone(),
        emit_frame_grids: true,
        ..DatasetConfig::default()
    };
    run_generation(&config).expect("generation");

    let options = VerifyOptions {
        max_clips: 24,
        census_clips: 0, // the full census needs hundreds of single-source clips
        run_probe: false,
        ..Default::default()
    };
    let report = verify_dataset(&out_dir, &options).expect("verification");
    print!("{}", report.to_text());
    std::process::exit(if report.passed() { 0 } else { 1 });
}
