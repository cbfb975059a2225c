//! Builds time-varying noise-filter fields at the two extreme mode bands and
//! renders them, showing how the mode class steers the noise color.
//!
//! ```bash
//! cargo run --release --example noise_color_field
//! ```

use formula_sed::event::{build_noise_field, ClipSpec, NOISE_BINS, NOISE_FILTER_TAPS};
use formula_sed::params::{noise_band_center, sample_event_hyperparams};
use formula_sed::rng::stream;
use formula_sed::synth::filtered_noise;
use formula_sed::verify::spectral_centroid;

fn main() {
    let clip = ClipSpec {
        clip_seconds: 2.0,
        ..ClipSpec::default()
    };
    println!("rendering band-limited noise at the extreme mode classes:\n");
    for mode in [0usize, 4, 9] {
        let mut params = sample_event_hyperparams(&mut stream(20));
        params.noise_mode = mode;
        let field = build_noise_field(&params, &clip, NOISE_BINS, &mut stream(21)).unwrap();
        let audio = filtered_noise(&field, clip.hop(), NOISE_FILTER_TAPS, &mut stream(22), clip.sample_rate)
            .unwrap();
        let centroid = spectral_centroid(&audio).unwrap();
        println!(
            "  mode {mode}: band center {:7.0} Hz -> rendered centroid {:7.0} Hz",
            noise_band_center(mode),
            centroid
        );
    }
}
