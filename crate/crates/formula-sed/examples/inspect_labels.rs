//! Walks the label machinery: the 94-position codebook, how one event's
//! hyperparameters become a 20-bit pattern, and how mixtures union patterns.
//!
//! ```bash
//! cargo run --example inspect_labels
//! ```

use formula_sed::event::ClipSpec;
use formula_sed::mix::generate_clip;
use formula_sed::params::{
    class_indices, encode_labels, sample_event_hyperparams, LabelCodebook, GROUPS, LABEL_DIM,
};
use formula_sed::rng::stream;

fn main() {
    let codebook = LabelCodebook::new();
    println!("codebook: {} groups, {} label positions", GROUPS.len(), LABEL_DIM);
    for group in GROUPS.iter().take(6) {
        println!(
            "  {:24} {} classes at offset {}",
            group.name(),
            group.class_count(),
            codebook.offset(*group)
        );
    }
    println!("  ... (`formula-sed codebook` dumps the full table)\n");

    let params = sample_event_hyperparams(&mut stream(3));
    let mask = encode_labels(&params, &codebook);
    println!("one event encodes to {} active bits:", mask.count_ones());
    for (group, class) in class_indices(&params) {
        let bit = codebook.bit_index(group, class).unwrap();
        println!("  bit {bit:2}  {}", codebook.class_name(bit).unwrap());
    }

    let clip = ClipSpec {
        clip_seconds: 2.0,
        ..ClipSpec::default()
    };
    let record = generate_clip(11, 0, &clip, 3).unwrap();
    println!(
        "\na generated clip with {} source(s): union grid activates {} distinct bits",
        record.sources.len(),
        record.labels.active_bits().len()
    );
    let active_frames = record.labels.bits.iter().filter(|b| **b != 0).count();
    println!(
        "{} of {} frames active; per-frame popcount range {}..{}",
        active_frames,
        record.labels.n_frames,
        record
            .labels
            .bits
            .iter()
            .filter(|b| **b != 0)
            .map(|b| b.count_ones())
            .min()
            .unwrap_or(0),
        record
            .labels
            .bits
            .iter()
            .map(|b| b.count_ones())
            .max()
            .unwrap_or(0),
    );
}
