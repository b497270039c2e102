//! Seeded random initialization.

use crate::error::Result;
use crate::waveform::{PhaseConstraint, WaveformSet};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Random feasible starting point: uniform MPSK indices under a discrete
/// constraint, uniform phases on `(-pi, pi]` under the continuous one.
/// Reproducible for a fixed seed on every platform.
pub fn random_mpsk_init(
    m: usize,
    n: usize,
    constraint: PhaseConstraint,
    seed: u64,
) -> Result<WaveformSet> {
    constraint.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phases: Vec<f64> = match constraint {
        PhaseConstraint::Discrete(l) => (0..m * n)
            .map(|_| {
                let idx: u32 = rng.gen_range(1..=l);
                PhaseConstraint::alphabet_phase(l, idx)
            })
            .collect(),
        PhaseConstraint::Continuous => (0..m * n).map(|_| -rng.gen_range(-PI..PI)).collect(),
    };
    WaveformSet::from_phases(m, n, phases)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bpsk_uses_only_two_phases() {
        let x = random_mpsk_init(3, 32, PhaseConstraint::Discrete(2), 9).unwrap();
        for &p in x.phases() {
            assert!(p.abs() < 1e-15 || (p - PI).abs() < 1e-12, "phase {p}");
        }
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let a = random_mpsk_init(4, 64, PhaseConstraint::Discrete(8), 1234).unwrap();
        let b = random_mpsk_init(4, 64, PhaseConstraint::Discrete(8), 1234).unwrap();
        assert_eq!(a, b);
        let c = random_mpsk_init(4, 64, PhaseConstraint::Discrete(8), 1235).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn mpsk_histogram_roughly_uniform() {
        let l = 8u32;
        let x = random_mpsk_init(4, 64, PhaseConstraint::Discrete(l), 77).unwrap();
        let mut counts = vec![0usize; l as usize];
        let step = 2.0 * PI / l as f64;
        for &p in x.phases() {
            let idx = (p.rem_euclid(2.0 * PI) / step).round() as usize % l as usize;
            counts[idx] += 1;
        }
        let expected = (4.0 * 64.0) / l as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // df = 7; chi2 above 30 would be a ~1e-4 tail event
        assert!(chi2 < 30.0, "chi2 = {chi2}, counts {counts:?}");
    }

    #[test]
    fn continuous_init_fills_principal_interval() {
        let x = random_mpsk_init(2, 256, PhaseConstraint::Continuous, 5).unwrap();
        assert!(x.phases().iter().all(|&p| p > -PI && p <= PI));
        let spread = x.phases().iter().fold(0.0f64, |a, &p| a.max(p.abs()));
        assert!(spread > 2.0, "phases should cover most of the circle");
    }

    #[test]
    fn rejects_degenerate_alphabet() {
        assert!(random_mpsk_init(2, 8, PhaseConstraint::Discrete(1), 0).is_err());
    }
}
