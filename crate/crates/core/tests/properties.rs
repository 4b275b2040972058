use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use arraylab::beamforming::{
    composite_pattern, composite_response_at, steering_response, subarray_pattern, ScanGrid,
};
use arraylab::geometry::{compute_coarray, validate_coprime, ArraySpec, Subarray};
use arraylab::simulation::{generate_snapshots, snapshot_outputs, SourceScene};
use proptest::prelude::*;

fn coprime_pair() -> impl Strategy<Value = (u32, u32)> {
    (1u32..=7, 1u32..=7).prop_filter("coprime, distinct", |&(m, n)| m != n && validate_coprime(m, n))
}

fn sca() -> impl Strategy<Value = ArraySpec> {
    (coprime_pair(), 2u32..=5, 2u32..=5).prop_map(|((m, n), p, q)| ArraySpec::Sca { m, n, p, q })
}

fn any_array() -> impl Strategy<Value = ArraySpec> {
    prop_oneof![
        (1u32..=40).prop_map(|k| ArraySpec::Ula { k }),
        sca(),
        coprime_pair()
            .prop_filter("basic CSA needs M, N >= 2", |&(m, n)| m >= 2 && n >= 2)
            .prop_map(|(m, n)| ArraySpec::BasicCsa { m, n }),
        (2u32..=6).prop_map(ArraySpec::ecsa),
        (2u32..=8).prop_map(|m| ArraySpec::Mcsa { m }),
        (2u32..=8, 1u32..=8).prop_map(|(m, n)| ArraySpec::Nsa { m, n }),
        Just(ArraySpec::bundled_mra()),
    ]
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300) || (a - b).abs() <= 1e-15
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn steering_shift(count in 1u32..=24, spacing in 1u32..=9, u in -1.0f64..1.0, u0 in -1.0f64..1.0, d in -0.5f64..0.5) {
        let sub = Subarray::new(count, spacing).unwrap();
        let a = steering_response(&sub, u + d, u0 + d);
        let b = steering_response(&sub, u, u0);
        prop_assert!((a - b).norm() <= 1e-12);
    }

    #[test]
    fn even_symmetry_at_broadside(spec in any_array(), u in 0.0f64..1.0) {
        let g = spec.build().unwrap();
        let a = composite_response_at(&g, u, 0.0);
        let b = composite_response_at(&g, -u, 0.0);
        prop_assert!(rel_close(a, b, 1e-12), "{} vs {}", a, b);
    }

    #[test]
    fn unit_peak_at_steer(spec in any_array(), u0 in -1.0f64..1.0) {
        let g = spec.build().unwrap();
        let peak = composite_response_at(&g, u0, u0);
        prop_assert!((peak - 1.0).abs() <= 1e-12);
        for u in [-0.9, -0.33, 0.05, 0.71] {
            prop_assert!(composite_response_at(&g, u, u0) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn min_dominance_pattern(spec in sca(), u0 in -0.5f64..0.5) {
        let g = spec.build().unwrap();
        let grid = Arc::new(ScanGrid::new(257).unwrap());
        let composite = composite_pattern(&g, &grid, u0).unwrap();
        for sub in g.subarrays() {
            let single = subarray_pattern(sub, &grid, u0).magnitudes();
            for (c, s) in composite.magnitude.iter().zip(&single) {
                prop_assert!(*c <= s + 1e-15);
            }
        }
    }

    #[test]
    fn min_dominance_snapshots(spec in sca(), seed in any::<u64>(), u in -1.0f64..1.0) {
        let g = spec.build().unwrap();
        let scene = SourceScene::uniform(3, 0.8).unwrap();
        let snaps = generate_snapshots(&g, &scene, 4, 0.0, seed).unwrap();
        let out = snapshot_outputs(&g, &snaps, u).unwrap();
        for (t, c) in out.combined.iter().enumerate() {
            for sub in &out.subarrays {
                prop_assert!(*c <= sub[t].norm() + 1e-12);
            }
        }
    }

    #[test]
    fn dirichlet_closed_form(k in 1u32..=64, u in -1.0f64..1.0, u0 in -1.0f64..1.0) {
        let g = ArraySpec::Ula { k }.build().unwrap();
        let x = FRAC_PI_2 * (u - u0);
        prop_assume!(x.sin().abs() > 1e-6);
        let want = ((k as f64 * x).sin() / (k as f64 * x.sin())).abs();
        let got = composite_response_at(&g, u, u0);
        prop_assert!((got - want).abs() <= 1e-9, "{} vs {}", got, want);
    }

    #[test]
    fn coarray_multiplicity_sum(spec in any_array()) {
        let g = spec.build().unwrap();
        let l = g.num_sensors() as u64;
        let c = compute_coarray(&g);
        prop_assert_eq!(c.multiplicities.iter().sum::<u64>(), l * l);
        prop_assert_eq!(c.multiplicity(0), l);
    }

    #[test]
    fn snapshots_deterministic(spec in sca(), seed in any::<u64>()) {
        let g = spec.build().unwrap();
        let scene = SourceScene::uniform(2, 0.5).unwrap();
        let a = generate_snapshots(&g, &scene, 3, 5.0, seed).unwrap();
        let b = generate_snapshots(&g, &scene, 3, 5.0, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn positions_start_at_zero_and_are_unique(spec in any_array()) {
        let g = spec.build().unwrap();
        let p = g.positions();
        prop_assert_eq!(p[0], 0);
        prop_assert!(p.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn noise_power_scales_with_snr() {
    let g = ArraySpec::Ula { k: 16 }.build().unwrap();
    let empty = SourceScene::new(Vec::new(), 1.0).unwrap();
    let power = |snr_db: f64| {
        let s = generate_snapshots(&g, &empty, 4000, snr_db, 7).unwrap();
        s.data.iter().map(|v| v.norm_sqr()).sum::<f64>() / s.data.len() as f64
    };
    let (p0, p10) = (power(0.0), power(10.0));
    assert!((p0 - 1.0).abs() < 0.03, "{p0}");
    assert!((p10 - 0.1).abs() < 0.003, "{p10}");
}

#[test]
fn noiseless_single_source_peaks_at_source() {
    use arraylab::simulation::{detect_peaks, doa_spectrum};
    let grid = Arc::new(ScanGrid::new(2001).unwrap());
    for spec in [
        ArraySpec::Sca { m: 3, n: 4, p: 2, q: 2 },
        ArraySpec::BasicCsa { m: 4, n: 5 },
        ArraySpec::Ula { k: 10 },
    ] {
        let g = spec.build().unwrap();
        let scene = SourceScene::new(vec![0.3], 1.0).unwrap();
        let snaps = generate_snapshots(&g, &scene, 20, f64::INFINITY, 1).unwrap();
        let spectrum = doa_spectrum(&g, &snaps, &grid).unwrap();
        let peaks = detect_peaks(&spectrum, 1).unwrap();
        assert!((peaks.peaks[0].u - 0.3).abs() <= grid.step(), "{spec}: {:?}", peaks.peaks[0]);
    }
}
