//! Property tests for the numerical invariants that hold across the whole
//! parameter space, not just at hand-picked points.

use proptest::prelude::*;

use formula_sed::event::FrameLabelGrid;
use formula_sed::gp::cholesky_with_jitter;
use formula_sed::kernels::{eval_kernel, KernelKind, KernelSpec, KERNEL_KINDS};
use formula_sed::params::{discretize_value, Group, LabelCodebook, GROUPS};
use formula_sed::synth::{gate_segments, upsample_control, ControlTrack};

fn arb_kernel() -> impl Strategy<Value = KernelSpec> {
    (
        0..KERNEL_KINDS.len(),
        0.01f64..50.0,
        0.5f64..100.0,
        1.0f64..50.0,
        0.3f64..5.0,
    )
        .prop_map(|(kind, variance, ell, period, alpha)| {
            KernelSpec::new(KERNEL_KINDS[kind], variance, ell)
                .with_period(period)
                .with_alpha(alpha)
        })
}

fn arb_points() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::btree_set(0u32..2000, 2..16)
        .prop_map(|set| set.into_iter().map(|v| v as f64 * 0.25).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Every kernel matrix plus a whisker of diagonal jitter is positive
    // definite on distinct points.
    #[test]
    fn kernel_matrices_factorize_with_base_jitter(spec in arb_kernel(), pts in arb_points()) {
        let n = pts.len();
        let mut k = eval_kernel(&spec, &pts, &pts).unwrap();
        let bump = 1e-6 * spec.variance.max(1.0);
        for i in 0..n {
            k[i * n + i] += bump;
        }
        let factor = cholesky_with_jitter(&k, n).unwrap();
        prop_assert_eq!(factor.jitter, 0.0);
    }

    // Discretization is total on the sampling range, monotone, and stays
    // below the class count.
    #[test]
    fn discretization_is_monotone_and_bounded(t in 0.0f64..1.0, u in 0.0f64..1.0) {
        for group in GROUPS {
            let Some((lo, hi, _)) = group.thresholds() else { continue };
            let a = lo + (hi - lo) * t.min(u);
            let b = lo + (hi - lo) * t.max(u);
            let ca = discretize_value(group, a).unwrap();
            let cb = discretize_value(group, b).unwrap();
            prop_assert!(ca <= cb);
            prop_assert!(cb < group.class_count());
        }
    }

    #[test]
    fn gate_gain_is_always_a_gain(
        onset in 0.0f64..4.0,
        len in 0.05f64..3.0,
        ramp in 0.0f64..0.2,
    ) {
        let sr = 16_000;
        let n = 8 * sr as usize;
        let gain = gate_segments(n, &[(onset, onset + len)], ramp, sr).unwrap();
        prop_assert!(gain.iter().all(|g| (0.0..=1.0).contains(g)));
    }

    #[test]
    fn upsampling_respects_track_bounds(values in prop::collection::vec(-10.0f64..10.0, 1..40)) {
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let track = ControlTrack::new(values, 32).unwrap();
        let out = upsample_control(&track, 2000).unwrap();
        prop_assert!(out.iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
    }

    // Strong rows are a lossless encoding of any label grid whose runs sit
    // on frame boundaries.
    #[test]
    fn strong_rows_encode_grids_losslessly(
        seed_bits in prop::collection::vec(0u8..2, 40),
        bit in 0usize..94,
    ) {
        let codebook = LabelCodebook::new();
        let mut grid = FrameLabelGrid::empty(40, 50.0);
        for (f, &b) in seed_bits.iter().enumerate() {
            if b == 1 {
                grid.bits[f] |= 1 << bit;
            }
        }
        let rows_text = formula_sed::dataset::strong_rows_for(&grid, "audio/x.wav", &codebook);
        let rows: Vec<formula_sed::dataset::StrongRow> = rows_text
            .iter()
            .map(|r| {
                let mut parts = r.split('\t');
                formula_sed::dataset::StrongRow {
                    file: parts.next().unwrap().to_string(),
                    onset: parts.next().unwrap().parse().unwrap(),
                    offset: parts.next().unwrap().parse().unwrap(),
                    class_name: parts.next().unwrap().to_string(),
                }
            })
            .collect();
        let rebuilt =
            formula_sed::dataset::grid_from_strong_rows(&rows, 40, 50.0, &codebook).unwrap();
        prop_assert_eq!(rebuilt.bits, grid.bits);
    }

    // Pitch quantization lands on the equal-temperament grid and moves
    // every frame by at most half a semitone.
    #[test]
    fn discrete_pitch_snaps_within_half_semitone(freqs in prop::collection::vec(30.0f64..3900.0, 1..50)) {
        let track = ControlTrack::new(freqs.clone(), 320).unwrap();
        let snapped =
            formula_sed::event::quantize_pitch(&track, formula_sed::params::PitchMode::Discrete)
                .unwrap();
        for (orig, snap) in freqs.iter().zip(&snapped.values) {
            let semis = 12.0 * (snap / 440.0).log2();
            prop_assert!((semis - semis.round()).abs() < 1e-9);
            prop_assert!((12.0 * (snap / orig).log2()).abs() <= 0.5 + 1e-9);
        }
    }
}

#[test]
fn every_kernel_kind_is_reachable_from_its_index() {
    for (i, kind) in KERNEL_KINDS.iter().enumerate() {
        assert_eq!(KernelKind::from_index(i).unwrap(), *kind);
        assert_eq!(kind.index(), i);
    }
    assert!(KernelKind::from_index(8).is_err());
}

#[test]
fn group_listing_matches_label_dim() {
    let total: usize = GROUPS.iter().map(|g| g.class_count()).sum();
    assert_eq!(total, formula_sed::params::LABEL_DIM);
    assert_eq!(GROUPS.len(), 20);
    assert!(GROUPS.contains(&Group::NoiseMode));
}
