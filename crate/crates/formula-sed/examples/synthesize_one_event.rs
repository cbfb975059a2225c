//! Renders one labeled source event to a WAV file and prints its strong
//! labels: the audio and the label grid come from the same parameters, so
//! the labels are correct by construction.
//!
//! ```bash
//! cargo run --example synthesize_one_event [seed]
//! ```

use formula_sed::dataset::strong_rows_for;
use formula_sed::event::{synthesize_event, ClipSpec};
use formula_sed::params::{class_indices, sample_event_hyperparams, LabelCodebook};
use formula_sed::rng::{derive, stream, tag};

fn main() {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(7);
    let clip = ClipSpec::default();
    let params = sample_event_hyperparams(&mut stream(derive(seed, tag::PARAMS)));
    let event = synthesize_event(&params, &clip, seed).expect("event synthesis");

    println!("event seed {seed}: {} voiced segment(s)", event.segments.len());
    for (on, off) in &event.segments {
        println!("  {on:.3} .. {off:.3} s");
    }
    println!("\nsampled classes:");
    for (group, class) in class_indices(&params) {
        println!("  {:24} {}", group.name(), class);
    }

    let codebook = LabelCodebook::new();
    println!("\nstrong labels (first 6 rows):");
    for row in strong_rows_for(&event.labels, "event.wav", &codebook).iter().take(6) {
        println!("  {row}");
    }

    let out = std::env::temp_dir().join(format!("fsed_event_{seed}.wav"));
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(&out, spec).expect("create wav");
    for &s in &event.audio.samples {
        writer
            .write_sample((s.clamp(-1.0, 1.0) * 32767.0).round() as i16)
            .unwrap();
    }
    writer.finalize().unwrap();
    println!("\naudio written to {}", out.display());
}
