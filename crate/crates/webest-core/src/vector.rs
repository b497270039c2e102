//! One BSUM block update for a whole transmitter row: a gradient step on the
//! row's phase vector with backtracking line search.
//!
//! The gradient of both the lp objective (`p >= 2`) and the smooth low-p
//! approximation has the same structure: a quadratic form
//! `sum_k rho_k |r(k)|^2` differentiated through the correlations, which
//! collapses into correlation-of-correlation fast convolutions. Only the
//! per-lag curvature `rho_k` differs between the two paths.

use crate::correlation::{cross_correlation, CorrelationSet};
use crate::error::{Error, Result};
use crate::fft::conv_full;
use crate::metrics::powp;
use crate::surrogate::{gamma_coeff, gradient_coeffs, SmoothKind, GRADIENT_EPS_GUARD};
use crate::waveform::{WaveformSet, WeightVector};
use num_complex::Complex64;

/// Backtracking (Armijo) line-search parameters. The shrink factor and
/// sufficient-decrease constant are standard safe defaults; every field is
/// configurable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchParams {
    /// Sufficient-decrease factor, in `(0, 0.5]`.
    pub alpha: f64,
    /// Step shrink factor, in `(0, 1)`.
    pub beta: f64,
    /// First step length tried.
    pub initial_step: f64,
    /// Trials before giving up and skipping the update.
    pub max_trials: usize,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        LineSearchParams { alpha: 0.3, beta: 0.5, initial_step: 1.0, max_trials: 50 }
    }
}

impl LineSearchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return Err(Error::arg("line search alpha must be in (0, 0.5]"));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::arg("line search beta must be in (0, 1)"));
        }
        if !(self.initial_step > 0.0) {
            return Err(Error::arg("line search initial step must be > 0"));
        }
        if self.max_trials == 0 {
            return Err(Error::arg("line search needs at least one trial"));
        }
        Ok(())
    }
}

/// Objective family for the vector path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VectorRegime {
    /// True lp objective, `p >= 2`.
    Lp { p: f64 },
    /// Smooth approximation `g_h^eps`, `0 < p <= 1` (h = 1) or `p > 0`.
    Smooth { p: f64, kind: SmoothKind, eps: f64 },
}

/// Per-pair curvature vectors for the gradient quadratic form, with the
/// auto-pair `k = 0` entry forced to zero (mainlobe exclusion). For the lp
/// path the magnitudes are pre-divided by `scale` so large `p` stays finite;
/// the resulting gradient is that of the objective scaled by `scale^-p`.
#[derive(Debug, Clone)]
pub struct GradientWorkspace {
    /// `rho[l]` for ordered pair `(t, l)`, lag-indexed.
    pub rho_fwd: Vec<Vec<f64>>,
    /// `rho[l]` for ordered pair `(l, t)`, lag-indexed.
    pub rho_rev: Vec<Vec<f64>>,
    pub scale: f64,
}

fn curvatures(
    corr: &CorrelationSet,
    w: &WeightVector,
    t: usize,
    regime: VectorRegime,
) -> Result<GradientWorkspace> {
    let m = corr.transmitters();
    let n = corr.seq_len();
    let lags = 2 * n - 1;
    let k0 = n - 1;

    // peak weighted magnitude over every row-t-dependent sidelobe
    let mut scale = 1.0;
    if let VectorRegime::Lp { .. } = regime {
        let mut peak = 0.0f64;
        for l in 0..m {
            for (pair_m, pair_l) in [(t, l), (l, t)] {
                for (i, v) in corr.pair(pair_m, pair_l).iter().enumerate() {
                    if pair_m == pair_l && i == k0 {
                        continue;
                    }
                    peak = peak.max(w.as_slice()[i] * v.norm());
                }
            }
        }
        if peak <= 1e-100 {
            // dependent sidelobes all vanish: flag the degenerate subproblem
            return Ok(GradientWorkspace {
                rho_fwd: vec![vec![0.0; lags]; m],
                rho_rev: vec![vec![0.0; lags]; m],
                scale: 0.0,
            });
        }
        scale = peak;
    }

    // On the lp path the curvatures are those of the scale-normalized
    // objective sum (|w r| / scale)^p, so the assembled quadratic-form
    // gradient is exactly grad(f) / scale^p.
    let rho_of = |abs_wr: f64| -> Result<f64> {
        match regime {
            VectorRegime::Lp { p } => {
                Ok(gradient_coeffs(abs_wr / scale, p, GRADIENT_EPS_GUARD).0 / (scale * scale))
            }
            VectorRegime::Smooth { p, kind, eps } => gamma_coeff(kind, eps, p, abs_wr),
        }
    };

    let build = |pair_m: usize, pair_l: usize| -> Result<Vec<f64>> {
        let mut rho = Vec::with_capacity(lags);
        for (i, v) in corr.pair(pair_m, pair_l).iter().enumerate() {
            let wk = w.as_slice()[i];
            if pair_m == pair_l && i == k0 {
                rho.push(0.0);
            } else {
                rho.push(wk * wk * rho_of(wk * v.norm())?);
            }
        }
        Ok(rho)
    };

    let mut rho_fwd = Vec::with_capacity(m);
    let mut rho_rev = Vec::with_capacity(m);
    for l in 0..m {
        rho_fwd.push(build(t, l)?);
        rho_rev.push(if l == t { rho_fwd[l].clone() } else { build(l, t)? });
    }
    Ok(GradientWorkspace { rho_fwd, rho_rev, scale })
}

/// Gradient of the quadratic form `sum_{pairs,k} rho_k |r(k)|^2` with respect
/// to the phases of row `t`, via fast convolution.
fn gradient_quadratic(
    x: &WaveformSet,
    corr: &CorrelationSet,
    t: usize,
    ws: &GradientWorkspace,
) -> Vec<f64> {
    let m = x.transmitters();
    let n = x.len();
    let lags = 2 * n - 1;
    let mut total = vec![Complex64::default(); n];
    for l in 0..m {
        let row_l = x.row(l);
        // forward pair (t, l): sum_k rho_k r_{t,l}(k) x_l[d+k]
        let u: Vec<Complex64> = corr
            .pair(t, l)
            .iter()
            .zip(ws.rho_fwd[l].iter())
            .map(|(r, &rho)| rho * r)
            .collect();
        let rev_xl: Vec<Complex64> = row_l.iter().rev().copied().collect();
        let conv = conv_full(&u, &rev_xl);
        for (d, acc) in total.iter_mut().enumerate() {
            *acc += conv[lags - 1 - d];
        }
        // reversed pair (l, t): sum_k rho_k conj(r_{l,t}(k)) x_l[d-k]
        let v: Vec<Complex64> = corr
            .pair(l, t)
            .iter()
            .zip(ws.rho_rev[l].iter())
            .map(|(r, &rho)| rho * r.conj())
            .collect();
        let conv = conv_full(&v, &row_l);
        for (d, acc) in total.iter_mut().enumerate() {
            *acc += conv[d + n - 1];
        }
    }
    (0..n)
        .map(|d| 2.0 * (x.entry(t, d).conj() * total[d]).im)
        .collect()
}

/// Gradient of the lp objective with respect to the phase vector of row `t`.
/// Requires `p >= 2`.
pub fn gradient_f(
    x: &WaveformSet,
    corr: &CorrelationSet,
    t: usize,
    w: &WeightVector,
    p: f64,
) -> Result<Vec<f64>> {
    if !(p >= 2.0) {
        return Err(Error::arg(format!("gradient_f requires p >= 2, got {p}")));
    }
    let ws = curvatures(corr, w, t, VectorRegime::Lp { p })?;
    if ws.scale == 0.0 {
        return Ok(vec![0.0; x.len()]);
    }
    let mut g = gradient_quadratic(x, corr, t, &ws);
    let back = powp(ws.scale, p);
    for v in g.iter_mut() {
        *v *= back;
    }
    Ok(g)
}

/// Gradient of the smooth approximation `g_h^eps` for row `t`.
pub fn gradient_g(
    x: &WaveformSet,
    corr: &CorrelationSet,
    t: usize,
    w: &WeightVector,
    p: f64,
    eps: f64,
    kind: SmoothKind,
) -> Result<Vec<f64>> {
    let ws = curvatures(corr, w, t, VectorRegime::Smooth { p, kind, eps })?;
    Ok(gradient_quadratic(x, corr, t, &ws))
}

/// Row-dependent part of the stage objective for candidate phases of row
/// `t`, with magnitudes scaled by `1 / scale` on the lp path.
fn row_objective(
    x: &WaveformSet,
    t: usize,
    cand_phases: &[f64],
    w: &WeightVector,
    regime: VectorRegime,
    scale: f64,
) -> Result<f64> {
    let m = x.transmitters();
    let n = x.len();
    let cand: Vec<Complex64> = cand_phases
        .iter()
        .map(|&p| Complex64::from_polar(1.0, p))
        .collect();
    let h = |abs_wr: f64| -> Result<f64> {
        match regime {
            VectorRegime::Lp { p } => Ok(powp(abs_wr / scale, p)),
            VectorRegime::Smooth { p, kind, eps } => crate::surrogate::smooth_g(kind, eps, p, abs_wr),
        }
    };
    let mut acc = 0.0;
    for l in 0..m {
        let other = if l == t { cand.clone() } else { x.row(l) };
        let r = cross_correlation(&cand, &other)?;
        let ni = n as isize;
        for k in -(ni - 1)..=(ni - 1) {
            let idx = (k + ni - 1) as usize;
            let wk = w.weight(k);
            if l == t {
                if k != 0 {
                    acc += h(wk * r[idx].norm())?;
                }
            } else {
                // pair (t, l) at lag k, plus pair (l, t) via r_{l,t}(k) = conj(r_{t,l}(-k))
                acc += h(wk * r[idx].norm())?;
                acc += h(wk * r[(-k + ni - 1) as usize].norm())?;
            }
        }
    }
    Ok(acc)
}

/// Backtracking line search along `direction` from `row_phases`: returns the
/// largest tried `delta = initial_step * beta^k` satisfying the sufficient
/// decrease `objective(phi + delta d) <= objective(phi) - alpha delta |d|^2`,
/// or 0 when every trial fails (the caller skips the update).
pub fn backtracking_line_search<F>(
    row_phases: &[f64],
    direction: &[f64],
    objective: F,
    params: &LineSearchParams,
) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    params.validate()?;
    if row_phases.len() != direction.len() {
        return Err(Error::arg("direction length mismatch"));
    }
    let f0 = objective(row_phases)?;
    let dir_norm2: f64 = direction.iter().map(|v| v * v).sum();
    let mut delta = params.initial_step;
    let mut cand = vec![0.0; row_phases.len()];
    for _ in 0..params.max_trials {
        for (c, (&p, &d)) in cand.iter_mut().zip(row_phases.iter().zip(direction.iter())) {
            *c = p + delta * d;
        }
        let f = objective(&cand)?;
        if f <= f0 - params.alpha * delta * dir_norm2 {
            return Ok(delta);
        }
        delta *= params.beta;
    }
    Ok(0.0)
}

/// One gradient step with line search on row `t`; phases are re-wrapped and
/// the cached correlations refreshed. Returns the accepted step length
/// (0 when the search failed and the row was left unchanged).
pub fn vector_update(
    x: &mut WaveformSet,
    corr: &mut CorrelationSet,
    w: &WeightVector,
    t: usize,
    regime: VectorRegime,
    params: &LineSearchParams,
) -> Result<f64> {
    match regime {
        VectorRegime::Lp { p } if !(p >= 2.0) => {
            return Err(Error::arg(format!("vector lp path requires p >= 2, got {p}")));
        }
        _ => {}
    }
    let ws = curvatures(corr, w, t, regime)?;
    if ws.scale == 0.0 {
        // every dependent sidelobe is already zero
        return Ok(0.0);
    }
    let grad = gradient_quadratic(x, corr, t, &ws);
    let direction: Vec<f64> = grad.iter().map(|g| -g).collect();
    let phases = x.row_phases(t).to_vec();
    let delta = backtracking_line_search(
        &phases,
        &direction,
        |cand| row_objective(x, t, cand, w, regime, ws.scale),
        params,
    )?;
    if delta > 0.0 && direction.iter().any(|&d| d != 0.0) {
        for d in 0..x.len() {
            x.set_phase(t, d, phases[d] + delta * direction[d]);
        }
        corr.refresh_row(x, t);
    }
    Ok(delta)
}

/// One full sweep of row updates, `t = 0 .. M-1`.
pub fn vector_sweep(
    x: &mut WaveformSet,
    corr: &mut CorrelationSet,
    w: &WeightVector,
    regime: VectorRegime,
    params: &LineSearchParams,
) -> Result<()> {
    for t in 0..x.transmitters() {
        vector_update(x, corr, w, t, regime, params)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::random_mpsk_init;
    use crate::metrics::{lp_objective, smooth_objective};
    use crate::waveform::PhaseConstraint;

    fn fd_gradient<F: Fn(&WaveformSet) -> f64>(
        x: &WaveformSet,
        t: usize,
        f: F,
        h: f64,
    ) -> Vec<f64> {
        let mut g = Vec::with_capacity(x.len());
        for d in 0..x.len() {
            let phi = x.phase(t, d);
            let mut xp = x.clone();
            xp.set_phase(t, d, phi + h);
            let mut xm = x.clone();
            xm.set_phase(t, d, phi - h);
            g.push((f(&xp) - f(&xm)) / (2.0 * h));
        }
        g
    }

    fn assert_close_rel(got: &[f64], want: &[f64], tol: f64, ctx: &str) {
        let scale = want.iter().fold(1e-12f64, |a, &b| a.max(b.abs()));
        for (i, (g, w)) in got.iter().zip(want.iter()).enumerate() {
            assert!(
                (g - w).abs() <= tol * scale,
                "{ctx}: component {i}: got {g}, want {w} (scale {scale})"
            );
        }
    }

    #[test]
    fn gradient_f_matches_finite_differences() {
        let w = WeightVector::all_ones(32);
        for (p, seed) in [(2.0, 1u64), (3.0, 2), (4.0, 3), (8.0, 4)] {
            let x = random_mpsk_init(3, 32, PhaseConstraint::Continuous, seed).unwrap();
            let corr = CorrelationSet::compute(&x);
            for t in 0..3 {
                let got = gradient_f(&x, &corr, t, &w, p).unwrap();
                let want = fd_gradient(&x, t, |y| lp_objective(y, &w, p, false).unwrap(), 1e-6);
                assert_close_rel(&got, &want, 1e-5, &format!("p={p} t={t}"));
            }
        }
    }

    #[test]
    fn gradient_f_respects_weight_masks() {
        let mut mask = vec![0.0; 63];
        for (i, v) in mask.iter_mut().enumerate() {
            let k = i as isize - 31;
            if k.abs() <= 9 {
                *v = 1.0;
            } else if k.abs() <= 12 {
                *v = 0.5; // asymmetric values exercised below
            }
        }
        mask[0] = 0.25; // w_{-31} != w_{31}
        let w = WeightVector::new(32, mask).unwrap();
        let x = random_mpsk_init(2, 32, PhaseConstraint::Continuous, 6).unwrap();
        let corr = CorrelationSet::compute(&x);
        let got = gradient_f(&x, &corr, 0, &w, 2.0).unwrap();
        let want = fd_gradient(&x, 0, |y| lp_objective(y, &w, 2.0, false).unwrap(), 1e-6);
        assert_close_rel(&got, &want, 1e-5, "masked p=2");
    }

    #[test]
    fn gradient_g_matches_finite_differences() {
        let w = WeightVector::all_ones(32);
        let x = random_mpsk_init(2, 32, PhaseConstraint::Continuous, 9).unwrap();
        let corr = CorrelationSet::compute(&x);
        for kind in [SmoothKind::Power, SmoothKind::Log, SmoothKind::Exponential] {
            for t in 0..2 {
                let got = gradient_g(&x, &corr, t, &w, 0.75, 0.05, kind).unwrap();
                let want = fd_gradient(
                    &x,
                    t,
                    |y| smooth_objective(y, &w, kind, 0.05, 0.75).unwrap(),
                    1e-6,
                );
                assert_close_rel(&got, &want, 1e-5, &format!("{kind:?} t={t}"));
            }
        }
    }

    #[test]
    fn gradient_vanishes_when_objective_constant() {
        // every unimodular N=2 sequence has |r(1)| = 1: the objective is flat
        let x = WaveformSet::from_phases(1, 2, vec![0.3, -1.1]).unwrap();
        let corr = CorrelationSet::compute(&x);
        let w = WeightVector::all_ones(2);
        let g = gradient_f(&x, &corr, 0, &w, 2.0).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-10), "{g:?}");
    }

    #[test]
    fn gradient_g_inside_guard_is_scaled_isl_gradient() {
        // eps above every |r| makes gamma constant for h = 1, so the smooth
        // gradient is exactly (p/2) eps^{p-2} times the p=2 gradient
        let x = random_mpsk_init(2, 16, PhaseConstraint::Continuous, 12).unwrap();
        let corr = CorrelationSet::compute(&x);
        let w = WeightVector::all_ones(16);
        let (p, eps) = (0.75, 40.0);
        let g_smooth = gradient_g(&x, &corr, 0, &w, p, eps, SmoothKind::Power).unwrap();
        let g_isl = gradient_f(&x, &corr, 0, &w, 2.0).unwrap();
        let c = 0.5 * p * eps.powf(p - 2.0);
        let want: Vec<f64> = g_isl.iter().map(|v| c * v).collect();
        assert_close_rel(&g_smooth, &want, 1e-9, "constant-gamma collapse");
    }

    #[test]
    fn line_search_zero_direction_accepts_immediately() {
        let phases = [0.1, 0.2, 0.3];
        let dir = [0.0; 3];
        let delta = backtracking_line_search(
            &phases,
            &dir,
            |_| Ok(5.0),
            &LineSearchParams::default(),
        )
        .unwrap();
        assert_eq!(delta, 1.0);
    }

    #[test]
    fn line_search_satisfies_armijo_on_quadratic() {
        // f(v) = sum c_i v_i^2 with distinct curvatures
        let c = [4.0, 0.5];
        let phases = [1.0, -2.0];
        let f = |v: &[f64]| Ok(c[0] * v[0] * v[0] + c[1] * v[1] * v[1]);
        let grad = [2.0 * c[0] * phases[0], 2.0 * c[1] * phases[1]];
        let dir = [-grad[0], -grad[1]];
        let params = LineSearchParams::default();
        let delta = backtracking_line_search(&phases, &dir, f, &params).unwrap();
        assert!(delta > 0.0);
        let f0 = f(&phases).unwrap();
        let cand = [phases[0] + delta * dir[0], phases[1] + delta * dir[1]];
        let fd = f(&cand).unwrap();
        let dir2: f64 = dir.iter().map(|v| v * v).sum();
        assert!(fd <= f0 - params.alpha * delta * dir2 + 1e-12);
        // a double step must violate the backtracking exit (delta is maximal)
        let delta2 = delta / params.beta;
        if delta2 <= params.initial_step {
            let cand2 = [phases[0] + delta2 * dir[0], phases[1] + delta2 * dir[1]];
            assert!(f(&cand2).unwrap() > f0 - params.alpha * delta2 * dir2);
        }
    }

    #[test]
    fn line_search_validates_params() {
        let bad = LineSearchParams { alpha: 0.9, ..Default::default() };
        assert!(backtracking_line_search(&[0.0], &[0.0], |_| Ok(0.0), &bad).is_err());
    }

    #[test]
    fn vector_update_decreases_objective() {
        let w = WeightVector::all_ones(64);
        for seed in 0..20 {
            let mut x = random_mpsk_init(4, 64, PhaseConstraint::Discrete(8), seed).unwrap();
            let mut corr = CorrelationSet::compute(&x);
            let before = lp_objective(&x, &w, 2.0, false).unwrap();
            vector_sweep(&mut x, &mut corr, &w, VectorRegime::Lp { p: 2.0 }, &Default::default())
                .unwrap();
            let after = lp_objective(&x, &w, 2.0, false).unwrap();
            assert!(after < before, "seed {seed}: {after} !< {before}");
        }
    }

    #[test]
    fn vector_update_fixed_at_stationary_point() {
        // flat objective: any N=2 single row is stationary
        let mut x = WaveformSet::from_phases(1, 2, vec![0.4, 2.0]).unwrap();
        let mut corr = CorrelationSet::compute(&x);
        let w = WeightVector::all_ones(2);
        let before = x.row_phases(0).to_vec();
        vector_update(&mut x, &mut corr, &w, 0, VectorRegime::Lp { p: 2.0 }, &Default::default())
            .unwrap();
        for (a, b) in before.iter().zip(x.row_phases(0)) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn objective_trace_monotone_over_sweeps() {
        let w = WeightVector::all_ones(16);
        let mut x = random_mpsk_init(2, 16, PhaseConstraint::Continuous, 3).unwrap();
        let mut corr = CorrelationSet::compute(&x);
        let mut prev = lp_objective(&x, &w, 2.0, false).unwrap();
        for sweep in 0..100 {
            vector_sweep(&mut x, &mut corr, &w, VectorRegime::Lp { p: 2.0 }, &Default::default())
                .unwrap();
            let now = lp_objective(&x, &w, 2.0, false).unwrap();
            assert!(now <= prev * (1.0 + 1e-9), "sweep {sweep}: {now} > {prev}");
            prev = now;
        }
    }

    #[test]
    fn smooth_path_monotone_in_its_own_objective() {
        let w = WeightVector::all_ones(16);
        let regime = VectorRegime::Smooth { p: 0.75, kind: SmoothKind::Power, eps: 0.05 };
        let mut x = random_mpsk_init(2, 16, PhaseConstraint::Continuous, 14).unwrap();
        let mut corr = CorrelationSet::compute(&x);
        let mut prev = smooth_objective(&x, &w, SmoothKind::Power, 0.05, 0.75).unwrap();
        for sweep in 0..50 {
            vector_sweep(&mut x, &mut corr, &w, regime, &Default::default()).unwrap();
            let now = smooth_objective(&x, &w, SmoothKind::Power, 0.05, 0.75).unwrap();
            assert!(now <= prev * (1.0 + 1e-9), "sweep {sweep}");
            prev = now;
        }
    }

    #[test]
    fn phase_wrap_invariance() {
        let x = random_mpsk_init(2, 16, PhaseConstraint::Continuous, 8).unwrap();
        let w = WeightVector::all_ones(16);
        let f0 = lp_objective(&x, &w, 2.0, false).unwrap();
        let shifted: Vec<f64> = x
            .phases()
            .iter()
            .enumerate()
            .map(|(i, &p)| p + 2.0 * std::f64::consts::PI * ((i % 3) as f64 - 1.0))
            .collect();
        let y = WaveformSet::from_phases(2, 16, shifted).unwrap();
        let f1 = lp_objective(&y, &w, 2.0, false).unwrap();
        assert!((f0 - f1).abs() <= 1e-9 * f0);
    }
}
