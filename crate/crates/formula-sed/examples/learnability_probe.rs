//! Trains the linear learnability probe on a freshly generated single-source
//! dataset: if the labels are carried by the audio, even a linear model on
//! pooled log-mel statistics beats chance.
//!
//! Uses a small dataset to stay quick; accuracies are rough at this size.
//!
//! ```bash
//! cargo run --release --example learnability_probe
//! ```

use formula_sed::dataset::{run_generation, Dataset, DatasetConfig};
use formula_sed::params::Group;
use formula_sed::verify::learnability_probe;

fn main() {
    let out_dir = std::env::temp_dir().join("fsed_probe_demo");
    let config = DatasetConfig {
        count: 300,
        master_seed: 99,
        clip_seconds: 3.0,
        max_sources: 1,
        out_dir: out_dir.clone(),
        ..DatasetConfig::default()
    };
    run_generation(&config).expect("generation");
    let dataset = Dataset::open(&out_dir).expect("open");

    for (group, permute) in [
        (Group::F0Bias, false),
        (Group::F0Bias, true),
        (Group::NoiseMode, false),
    ] {
        let result = learnability_probe(&dataset, group, 240, 60, permute, 1).expect("probe");
        println!(
            "{:12} accuracy {:.3} (chance {:.3}{})",
            result.group,
            result.accuracy,
            result.chance,
            if permute { ", permuted labels" } else { "" }
        );
    }
}
