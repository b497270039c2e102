//! Property tests for the spec-level invariants that hold for every
//! feasible input, plus a long-haul drift check on the incremental
//! correlation cache.

use proptest::prelude::*;
use webest_core::correlation::{cross_correlation, CorrelationSet};
use webest_core::entry::{entry_update, EntryRegime};
use webest_core::init::random_mpsk_init;
use webest_core::metrics::{islr_db, islr_lower_bound_db, lp_objective, psl};
use webest_core::waveform::{PhaseConstraint, WaveformSet, WeightVector};

fn arb_set() -> impl Strategy<Value = WaveformSet> {
    (1usize..=4, 2usize..=24, any::<u64>(), prop::bool::ANY).prop_map(|(m, n, seed, discrete)| {
        let constraint = if discrete {
            PhaseConstraint::Discrete(8)
        } else {
            PhaseConstraint::Continuous
        };
        random_mpsk_init(m, n, constraint, seed).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conjugate_lag_symmetry_always_holds(x in arb_set()) {
        let corr = CorrelationSet::compute(&x);
        prop_assert!(corr.max_symmetry_error() < 1e-10);
    }

    #[test]
    fn fft_correlation_matches_direct(x in arb_set()) {
        let n = x.len() as isize;
        let (a, b) = (x.row(0), x.row(x.transmitters() - 1));
        let fast = cross_correlation(&a, &b).unwrap();
        let mut scale = 1e-30f64;
        let mut direct = Vec::new();
        for k in -(n - 1)..=(n - 1) {
            let mut acc = num_complex::Complex64::default();
            for i in 0..n {
                if (0..n).contains(&(i + k)) {
                    acc += a[i as usize] * b[(i + k) as usize].conj();
                }
            }
            scale = scale.max(acc.norm());
            direct.push(acc);
        }
        for (f, s) in fast.iter().zip(direct.iter()) {
            prop_assert!((f - s).norm() <= 1e-10 * scale);
        }
    }

    #[test]
    fn lag_zero_is_sequence_energy(x in arb_set()) {
        let corr = CorrelationSet::compute(&x);
        let n = x.len() as f64;
        for t in 0..x.transmitters() {
            let r0 = corr.get(t, t, 0);
            prop_assert!((r0.re - n).abs() <= 1e-9 * n && r0.im.abs() <= 1e-9 * n);
        }
    }

    #[test]
    fn objective_is_phase_wrap_invariant(x in arb_set(), shift in -3i32..=3) {
        let w = WeightVector::all_ones(x.len());
        let f0 = lp_objective(&x, &w, 2.0, false).unwrap();
        let shifted: Vec<f64> = x
            .phases()
            .iter()
            .map(|&p| p + 2.0 * std::f64::consts::PI * shift as f64)
            .collect();
        let y = WaveformSet::from_phases(x.transmitters(), x.len(), shifted).unwrap();
        let f1 = lp_objective(&y, &w, 2.0, false).unwrap();
        prop_assert!((f0 - f1).abs() <= 1e-9 * f0.max(1.0));
    }

    #[test]
    fn end_lag_keeps_psl_at_least_one(x in arb_set()) {
        let w = WeightVector::all_ones(x.len());
        // |r_{m,m}(N-1)| = 1 exactly for unimodular rows
        prop_assert!(psl(&x, &w).unwrap() >= 1.0 - 1e-12);
    }

    #[test]
    fn islr_never_beats_its_lower_bound(seed in any::<u64>(), m in 2usize..=5) {
        let x = random_mpsk_init(m, 16, PhaseConstraint::Continuous, seed).unwrap();
        let w = WeightVector::all_ones(16);
        let islr = islr_db(&x, &w).unwrap();
        prop_assert!(islr - islr_lower_bound_db(m).unwrap() >= -1e-6);
    }
}

#[test]
fn incremental_cache_drift_stays_below_budget_over_1e4_updates() {
    // ten thousand entry updates without any re-sync
    let mut x = random_mpsk_init(3, 16, PhaseConstraint::Continuous, 99).unwrap();
    let mut corr = CorrelationSet::compute(&x);
    let w = WeightVector::all_ones(16);
    let mut updates = 0usize;
    'outer: loop {
        for t in 0..3 {
            for d in 0..16 {
                entry_update(&mut x, &mut corr, &w, t, d, EntryRegime::Pge2 { p: 2.0 }).unwrap();
                updates += 1;
                if updates >= 10_000 {
                    break 'outer;
                }
            }
        }
    }
    let fresh = CorrelationSet::compute(&x);
    let mut worst = 0.0f64;
    for a in 0..3 {
        for b in 0..3 {
            for (got, want) in corr.pair(a, b).iter().zip(fresh.pair(a, b)) {
                worst = worst.max((got - want).norm());
            }
        }
    }
    assert!(worst <= 1e-8, "cache drifted by {worst} after {updates} updates");
}
