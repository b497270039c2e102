//! Objective and reporting metrics: weighted lp-norm of the sidelobes, PSL,
//! ISLR, correlation sparsity, and the corresponding lower bounds.

use crate::correlation::CorrelationSet;
use crate::error::{Error, Result};
use crate::waveform::{sidelobe_indices, WaveformSet, WeightVector};

/// `|x|^p` with an integer-exponent fast path.
#[inline]
pub(crate) fn powp(x: f64, p: f64) -> f64 {
    let x = x.abs();
    if p == 2.0 {
        x * x
    } else if p.fract() == 0.0 && p.abs() <= 512.0 {
        x.powi(p as i32)
    } else {
        x.powf(p)
    }
}

fn check_weights(x: &WaveformSet, w: &WeightVector) -> Result<()> {
    if w.seq_len() != x.len() {
        return Err(Error::arg(format!(
            "weight vector is for N={}, waveform set has N={}",
            w.seq_len(),
            x.len()
        )));
    }
    Ok(())
}

/// Weighted lp objective `sum |w_k r_{m,l}(k)|^p` over the sidelobe index
/// set; the `M` auto-correlation mainlobes (`k = 0`) are added only when
/// `include_mainlobes` is set.
pub fn lp_objective(
    x: &WaveformSet,
    w: &WeightVector,
    p: f64,
    include_mainlobes: bool,
) -> Result<f64> {
    check_weights(x, w)?;
    let corr = CorrelationSet::compute(x);
    lp_objective_from(&corr, w, p, include_mainlobes)
}

/// Same as [`lp_objective`] on a precomputed correlation table.
pub fn lp_objective_from(
    corr: &CorrelationSet,
    w: &WeightVector,
    p: f64,
    include_mainlobes: bool,
) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::arg(format!("lp objective requires p > 0, got {p}")));
    }
    let (m, n) = (corr.transmitters(), corr.seq_len());
    let mut acc = 0.0;
    for (a, b, k) in sidelobe_indices(m, n) {
        acc += powp(w.weight(k) * corr.get(a, b, k).norm(), p);
    }
    if include_mainlobes {
        for t in 0..m {
            acc += powp(w.weight(0) * corr.get(t, t, 0).norm(), p);
        }
    }
    Ok(acc)
}

/// Peak weighted sidelobe level, `max |w_k r_{m,l}(k)|` over the sidelobes.
pub fn psl(x: &WaveformSet, w: &WeightVector) -> Result<f64> {
    check_weights(x, w)?;
    Ok(psl_from(&CorrelationSet::compute(x), w))
}

pub fn psl_from(corr: &CorrelationSet, w: &WeightVector) -> f64 {
    let (m, n) = (corr.transmitters(), corr.seq_len());
    sidelobe_indices(m, n)
        .map(|(a, b, k)| w.weight(k) * corr.get(a, b, k).norm())
        .fold(0.0, f64::max)
}

/// Integrated sidelobe level ratio in dB: `10 log10(ISL / N^2)` with
/// `ISL = sum |w_k r|^2` over the sidelobes. An all-zero sidelobe set yields
/// the `-inf` sentinel.
pub fn islr_db(x: &WaveformSet, w: &WeightVector) -> Result<f64> {
    check_weights(x, w)?;
    Ok(islr_db_from(&CorrelationSet::compute(x), w))
}

pub fn islr_db_from(corr: &CorrelationSet, w: &WeightVector) -> f64 {
    let isl = lp_objective_from(corr, w, 2.0, false).expect("p = 2");
    let n = corr.seq_len() as f64;
    10.0 * (isl / (n * n)).log10()
}

/// Fraction of all `M^2 (2N-1)` correlation lags (mainlobes included in the
/// denominator) whose unweighted magnitude falls below `threshold`.
pub fn sparsity(x: &WaveformSet, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0) {
        return Err(Error::arg("sparsity threshold must be > 0"));
    }
    Ok(sparsity_from(&CorrelationSet::compute(x), threshold))
}

pub fn sparsity_from(corr: &CorrelationSet, threshold: f64) -> f64 {
    let (m, n) = (corr.transmitters(), corr.seq_len());
    let mut below = 0usize;
    for a in 0..m {
        for b in 0..m {
            below += corr.pair(a, b).iter().filter(|v| v.norm() < threshold).count();
        }
    }
    below as f64 / (m * m * (2 * n - 1)) as f64
}

/// Smooth-approximation objective `sum g_h^eps(|w_k r_{m,l}(k)|)` over the
/// sidelobe index set; the low-p counterpart of [`lp_objective`].
pub fn smooth_objective(
    x: &WaveformSet,
    w: &WeightVector,
    kind: crate::surrogate::SmoothKind,
    eps: f64,
    p: f64,
) -> Result<f64> {
    check_weights(x, w)?;
    smooth_objective_from(&CorrelationSet::compute(x), w, kind, eps, p)
}

pub fn smooth_objective_from(
    corr: &CorrelationSet,
    w: &WeightVector,
    kind: crate::surrogate::SmoothKind,
    eps: f64,
    p: f64,
) -> Result<f64> {
    let (m, n) = (corr.transmitters(), corr.seq_len());
    let mut acc = 0.0;
    for (a, b, k) in sidelobe_indices(m, n) {
        acc += crate::surrogate::smooth_g(kind, eps, p, w.weight(k) * corr.get(a, b, k).norm())?;
    }
    Ok(acc)
}

/// Welch lower bound on the achievable PSL of a unimodular set, in
/// correlation-normalized-by-N units: `sqrt((M-1) / (2MN - M - 1))`.
/// Multiply by `N` to compare against absolute correlation levels.
pub fn welch_psl_bound(m: usize, n: usize) -> Result<f64> {
    if m < 1 || n < 2 {
        return Err(Error::arg(format!(
            "Welch bound requires M >= 1 and N >= 2, got M={m}, N={n}"
        )));
    }
    let (mf, nf) = (m as f64, n as f64);
    let denom = 2.0 * mf * nf - mf - 1.0;
    if denom <= 0.0 {
        return Err(Error::arg("Welch bound denominator not positive"));
    }
    Ok(((mf - 1.0) / denom).sqrt())
}

/// ISLR lower bound for a unimodular set: `10 log10(M (M - 1))` dB.
pub fn islr_lower_bound_db(m: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::arg("ISLR lower bound requires M >= 2"));
    }
    Ok(10.0 * ((m * (m - 1)) as f64).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::random_mpsk_init;
    use crate::waveform::PhaseConstraint;
    use num_complex::Complex64;

    fn brute_lp(x: &WaveformSet, w: &WeightVector, p: f64, mainlobes: bool) -> f64 {
        let m = x.transmitters();
        let n = x.len() as isize;
        let mut acc = 0.0;
        for a in 0..m {
            for b in 0..m {
                for k in -(n - 1)..=(n - 1) {
                    if a == b && k == 0 && !mainlobes {
                        continue;
                    }
                    let mut r = Complex64::default();
                    for i in 0..n {
                        if (0..n).contains(&(i + k)) {
                            r += x.entry(a, i as usize) * x.entry(b, (i + k) as usize).conj();
                        }
                    }
                    acc += (w.weight(k) * r.norm()).powf(p);
                }
            }
        }
        acc
    }

    #[test]
    fn two_sample_constant_sequence() {
        let x = WaveformSet::from_phases(1, 2, vec![0.0, 0.0]).unwrap();
        let w = WeightVector::all_ones(2);
        assert!((lp_objective(&x, &w, 2.0, false).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_weights_annihilate_objective() {
        let x = random_mpsk_init(2, 8, PhaseConstraint::Continuous, 1).unwrap();
        let w = WeightVector::new(8, vec![0.0; 15]).unwrap();
        assert_eq!(lp_objective(&x, &w, 3.0, false).unwrap(), 0.0);
    }

    #[test]
    fn lp_matches_brute_force_oracle() {
        let x = random_mpsk_init(2, 8, PhaseConstraint::Continuous, 23).unwrap();
        let w = WeightVector::all_ones(8);
        for p in [2.0, 3.0] {
            let got = lp_objective(&x, &w, p, false).unwrap();
            let want = brute_lp(&x, &w, p, false);
            assert!((got - want).abs() < 1e-9 * want.max(1.0), "p={p}");
        }
        let got = lp_objective(&x, &w, 2.0, true).unwrap();
        let want = brute_lp(&x, &w, 2.0, true);
        assert!((got - want).abs() < 1e-9 * want);
    }

    #[test]
    fn rejects_nonpositive_p() {
        let x = random_mpsk_init(1, 4, PhaseConstraint::Continuous, 0).unwrap();
        let w = WeightVector::all_ones(4);
        assert!(lp_objective(&x, &w, 0.0, false).is_err());
        assert!(lp_objective(&x, &w, -1.0, false).is_err());
    }

    #[test]
    fn psl_of_all_ones_is_triangle_peak() {
        let x = WaveformSet::from_phases(1, 4, vec![0.0; 4]).unwrap();
        let w = WeightVector::all_ones(4);
        assert!((psl(&x, &w).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn psl_with_end_lag_only_mask_is_one() {
        let x = random_mpsk_init(1, 16, PhaseConstraint::Continuous, 2).unwrap();
        let mut mask = vec![0.0; 31];
        mask[30] = 1.0; // k = N-1 only
        let w = WeightVector::new(16, mask).unwrap();
        assert!((psl(&x, &w).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psl_matches_brute_force_table() {
        let x = random_mpsk_init(4, 64, PhaseConstraint::Discrete(8), 31).unwrap();
        let w = WeightVector::all_ones(64);
        let corr = CorrelationSet::compute(&x);
        let mut want = 0.0f64;
        for (a, b, k) in sidelobe_indices(4, 64) {
            want = want.max(w.weight(k) * corr.get(a, b, k).norm());
        }
        assert!((psl(&x, &w).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn islr_examples_and_oracle() {
        // all-ones M=1 N=4: sidelobe energy 2*(1+4+9) = 28
        let x = WaveformSet::from_phases(1, 4, vec![0.0; 4]).unwrap();
        let w = WeightVector::all_ones(4);
        let want = 10.0 * (28.0f64 / 16.0).log10();
        assert!((islr_db(&x, &w).unwrap() - want).abs() < 1e-12);

        let x = random_mpsk_init(4, 64, PhaseConstraint::Discrete(8), 4).unwrap();
        let w = WeightVector::all_ones(64);
        let isl = brute_lp(&x, &w, 2.0, false);
        let want = 10.0 * (isl / (64.0 * 64.0)).log10();
        assert!((islr_db(&x, &w).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn islr_all_zero_sidelobes_sentinel() {
        let x = random_mpsk_init(1, 4, PhaseConstraint::Continuous, 0).unwrap();
        let w = WeightVector::new(4, vec![0.0; 7]).unwrap();
        assert_eq!(islr_db(&x, &w).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn islr_never_beats_lower_bound() {
        let w = WeightVector::all_ones(64);
        for m in [2, 4, 7] {
            for seed in 0..5 {
                let x = random_mpsk_init(m, 64, PhaseConstraint::Continuous, seed).unwrap();
                let islr = islr_db(&x, &w).unwrap();
                let bound = islr_lower_bound_db(m).unwrap();
                assert!(islr - bound >= -1e-6, "M={m} seed={seed}: {islr} < {bound}");
            }
        }
    }

    #[test]
    fn islr_bound_values() {
        assert!((islr_lower_bound_db(2).unwrap() - 3.0103).abs() < 5e-5);
        assert!((islr_lower_bound_db(4).unwrap() - 10.7918).abs() < 5e-5);
        assert!((islr_lower_bound_db(10).unwrap() - 19.5424).abs() < 5e-5);
        assert!(islr_lower_bound_db(1).is_err());
    }

    #[test]
    fn welch_bound_values() {
        assert_eq!(welch_psl_bound(1, 64).unwrap(), 0.0);
        assert!((welch_psl_bound(4, 64).unwrap() - (3.0f64 / 507.0).sqrt()).abs() < 1e-12);
        assert!((welch_psl_bound(4, 64).unwrap() - 0.076923).abs() < 1e-5);
        assert!((welch_psl_bound(2, 128).unwrap() - 0.044324).abs() < 1e-5);
        assert!(welch_psl_bound(0, 64).is_err());
        assert!(welch_psl_bound(4, 1).is_err());
    }

    #[test]
    fn sparsity_bounds_and_oracle() {
        let x = random_mpsk_init(4, 64, PhaseConstraint::Discrete(8), 17).unwrap();
        let m = 4usize;
        let n = 64usize;
        // mainlobes can never fall below threshold 1
        let s = sparsity(&x, 1.0).unwrap();
        assert!(s <= 1.0 - m as f64 / (m * m * (2 * n - 1)) as f64);
        // huge threshold passes every lag
        assert_eq!(sparsity(&x, 1e9).unwrap(), 1.0);
        assert!(sparsity(&x, 0.0).is_err());

        let corr = CorrelationSet::compute(&x);
        let mut count = 0usize;
        for a in 0..m {
            for b in 0..m {
                for v in corr.pair(a, b) {
                    if v.norm() < 1.0 {
                        count += 1;
                    }
                }
            }
        }
        let want = count as f64 / (m * m * (2 * n - 1)) as f64;
        assert_eq!(s, want);
    }
}
