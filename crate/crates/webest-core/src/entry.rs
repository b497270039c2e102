//! One BSUM block update for a single code entry.
//!
//! For the selected entry `x_{t,d}`, every weighted correlation lag that
//! depends on it is an affine function of `x = e^{j phi}`:
//!
//! - auto pair `(t,t)`:       `w_k r_{t,t}(k) = c + a x + b conj(x)`
//! - cross pair `(t,l)`:      `w_k r_{t,l}(k) = c + a x`
//! - reversed pair `(l,t)`:   `w_k r_{l,t}(k) = c' + b' conj(x)`, stored here
//!   conjugated as an equivalent `c + a x` channel with the same modulus.
//!
//! Substituting `x = e^{j phi}` turns the per-entry surrogate into a degree-2
//! trigonometric polynomial whose critical phases are the real roots of a
//! degree-4 real polynomial in `z = tan(phi / 2)`. Under a discrete alphabet
//! the candidate objective values are the L-point DFT bins of the per-lag
//! coefficient sequences, which also covers the `L = 2` alias fold.

use crate::correlation::CorrelationSet;
use crate::error::{Error, Result};
use crate::metrics::powp;
use crate::surrogate::{
    gamma_coeff, majorizer_coeffs_pge2, tau, SmoothKind,
};
use crate::waveform::{PhaseConstraint, WaveformSet, WeightVector};
use nalgebra::{Complex as NaComplex, Matrix3, Matrix4};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Relative imaginary-part tolerance when classifying polynomial roots as
/// real. Spurious candidates are harmless since every candidate is scored.
pub const ROOT_IMAG_TOL: f64 = 1e-8;

/// Fast complex magnitude; the correlation values here are far from the
/// overflow range that `hypot` protects against.
#[inline]
fn cnorm(z: Complex64) -> f64 {
    (z.re * z.re + z.im * z.im).sqrt()
}

/// One affine channel `c + a x (+ b conj(x))` of the entry subproblem, all
/// lags of one ordered pair, weights folded in. `abs_wr` snapshots
/// `|w_k r^{(i)}(k)|` at the expansion point.
///
/// The entry only participates in a contiguous lag-index window
/// `[win_lo, win_hi]`; outside it `a = b = 0` and the lag value is the
/// constant `c`.
#[derive(Debug, Clone)]
pub struct Channel {
    pub a: Vec<Complex64>,
    /// Only the auto channel carries a `conj(x)` coefficient.
    pub b: Vec<Complex64>,
    pub c: Vec<Complex64>,
    pub abs_wr: Vec<f64>,
    pub win_lo: usize,
    pub win_hi: usize,
}

impl Channel {
    fn with_lags(lags: usize, has_b: bool) -> Self {
        Channel {
            a: vec![Complex64::default(); lags],
            b: if has_b { vec![Complex64::default(); lags] } else { Vec::new() },
            c: vec![Complex64::default(); lags],
            abs_wr: vec![0.0; lags],
            win_lo: 0,
            win_hi: lags - 1,
        }
    }

    #[inline]
    fn b_at(&self, idx: usize) -> Complex64 {
        if self.b.is_empty() { Complex64::default() } else { self.b[idx] }
    }

    /// `c + a x + b conj(x)` at lag index `idx`.
    #[inline]
    pub fn reconstruct(&self, idx: usize, x: Complex64) -> Complex64 {
        self.c[idx] + self.a[idx] * x + self.b_at(idx) * x.conj()
    }
}

/// All per-lag decomposition coefficients of one entry `(t, d)`.
///
/// The auto channel excludes the `k = 0` mainlobe (its slot is zeroed): that
/// term is constant for unimodular entries and its `a`/`b` split would count
/// the `n = d` product twice. Cross channels keep `k = 0`.
#[derive(Debug, Clone)]
pub struct EntryCoeffs {
    pub t: usize,
    pub d: usize,
    pub n: usize,
    pub auto: Channel,
    /// For each `l != t`, the `(t, l)` channel followed by the conjugated
    /// `(l, t)` channel, in row order.
    pub cross: Vec<Channel>,
}

impl EntryCoeffs {
    /// Assemble from cached correlations: the `c` terms are the full weighted
    /// correlations minus the current entry's own contribution.
    pub fn compute(
        x: &WaveformSet,
        corr: &CorrelationSet,
        w: &WeightVector,
        t: usize,
        d: usize,
    ) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = (0..x.transmitters()).map(|l| x.row(l)).collect();
        Self::compute_from_rows(&rows, x.len(), corr, w, t, d)
    }

    /// [`EntryCoeffs::compute`] on pre-materialized complex rows.
    pub fn compute_from_rows(
        rows: &[Vec<Complex64>],
        n: usize,
        corr: &CorrelationSet,
        w: &WeightVector,
        t: usize,
        d: usize,
    ) -> Result<Self> {
        let m = rows.len();
        if t >= m || d >= n {
            return Err(Error::arg(format!(
                "entry index ({t}, {d}) out of range for a {m}x{n} set"
            )));
        }
        if w.seq_len() != n {
            return Err(Error::arg("weight vector length mismatch"));
        }
        let lags = 2 * n - 1;
        let xd = rows[t][d];
        let di = d as isize;
        let k0 = n - 1; // lag-0 index
        let ws = w.as_slice();

        // lag-index windows: `a` participates for d+k in [0, N), i.e. the
        // index band [N-1-d, 2N-2-d]; the conjugated role for d-k in [0, N),
        // i.e. [d, N-1+d]
        let a_win = (n - 1 - d, 2 * n - 2 - d);
        let b_win = (d, n - 1 + d);

        let prefill = |ch: &mut Channel, pair: &[Complex64], conjugate: bool| {
            for idx in 0..lags {
                let wr = ws[idx] * pair[idx];
                ch.c[idx] = if conjugate { wr.conj() } else { wr };
                ch.abs_wr[idx] = cnorm(wr);
            }
        };

        let mut auto = Channel::with_lags(lags, true);
        let row_t = &rows[t];
        prefill(&mut auto, corr.pair(t, t), false);
        for idx in a_win.0..=a_win.1 {
            if idx == k0 {
                continue;
            }
            let a = ws[idx] * row_t[(di + idx as isize - k0 as isize) as usize].conj();
            auto.a[idx] = a;
            auto.c[idx] -= a * xd;
        }
        for idx in b_win.0..=b_win.1 {
            if idx == k0 {
                continue;
            }
            let b = ws[idx] * row_t[(di - (idx as isize - k0 as isize)) as usize];
            auto.b[idx] = b;
            auto.c[idx] -= b * xd.conj();
        }
        // the k = 0 mainlobe is constant for unimodular entries and its a/b
        // split double-counts the n = d product: excluded entirely
        auto.c[k0] = Complex64::default();
        auto.abs_wr[k0] = 0.0;
        auto.win_lo = a_win.0.min(b_win.0);
        auto.win_hi = a_win.1.max(b_win.1);

        let mut cross = Vec::with_capacity(2 * (m - 1));
        for l in (0..m).filter(|&l| l != t) {
            let row_l = &rows[l];
            // (t, l): entry appears unconjugated at n = d
            let mut fwd = Channel::with_lags(lags, false);
            prefill(&mut fwd, corr.pair(t, l), false);
            for idx in a_win.0..=a_win.1 {
                let a = ws[idx] * row_l[(di + idx as isize - k0 as isize) as usize].conj();
                fwd.a[idx] = a;
                fwd.c[idx] -= a * xd;
            }
            fwd.win_lo = a_win.0;
            fwd.win_hi = a_win.1;
            // (l, t): entry appears conjugated at n + k = d; folding the
            // whole term through conj() gives an `a`-type channel with the
            // same modulus
            let mut rev = Channel::with_lags(lags, false);
            prefill(&mut rev, corr.pair(l, t), true);
            for idx in b_win.0..=b_win.1 {
                let a = (ws[idx] * row_l[(di - (idx as isize - k0 as isize)) as usize]).conj();
                rev.a[idx] = a;
                rev.c[idx] -= a * xd;
            }
            rev.win_lo = b_win.0;
            rev.win_hi = b_win.1;
            cross.push(fwd);
            cross.push(rev);
        }

        Ok(EntryCoeffs { t, d, n, auto, cross })
    }

    fn channels(&self) -> impl Iterator<Item = &Channel> {
        std::iter::once(&self.auto).chain(self.cross.iter())
    }

    /// Largest `|w r|` the entry subproblem sees at the expansion point.
    fn peak_abs_wr(&self) -> f64 {
        self.channels()
            .flat_map(|ch| ch.abs_wr.iter())
            .fold(0.0f64, |acc, &v| acc.max(v))
    }

    /// The entry-local part of `sum |w r(phi)|^p`, on magnitudes scaled by
    /// `inv_scale` so that large `p` stays in range.
    fn local_lp(&self, phi: f64, p: f64, inv_scale: f64) -> f64 {
        let x = Complex64::from_polar(1.0, phi);
        let mut acc = 0.0;
        for ch in self.channels() {
            for idx in 0..ch.c.len() {
                acc += powp(cnorm(ch.reconstruct(idx, x)) * inv_scale, p);
            }
        }
        acc
    }

    /// `local_lp(phi_new) - local_lp(phi_old)`: only the lags the entry
    /// participates in can differ.
    fn local_lp_delta(&self, phi_new: f64, phi_old: f64, p: f64, inv_scale: f64) -> f64 {
        let xn = Complex64::from_polar(1.0, phi_new);
        let xo = Complex64::from_polar(1.0, phi_old);
        let mut acc = 0.0;
        for ch in self.channels() {
            for idx in ch.win_lo..=ch.win_hi {
                acc += powp(cnorm(ch.reconstruct(idx, xn)) * inv_scale, p)
                    - powp(cnorm(ch.reconstruct(idx, xo)) * inv_scale, p);
            }
        }
        acc
    }
}

/// Degree-2 trigonometric polynomial `value(phi) = Re{ sum_n c_n e^{j n phi} }`,
/// `n in [-2, 2]`. Conjugate-symmetric coefficients make the sum itself real.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigPoly {
    /// Coefficient of `e^{j n phi}` at index `n + 2`.
    pub coeffs: [Complex64; 5],
}

impl TrigPoly {
    pub fn value(&self, phi: f64) -> f64 {
        let e1 = Complex64::from_polar(1.0, phi);
        let e2 = e1 * e1;
        (self.coeffs[0] * e2.conj()
            + self.coeffs[1] * e1.conj()
            + self.coeffs[2]
            + self.coeffs[3] * e1
            + self.coeffs[4] * e2)
            .re
    }

    pub fn derivative(&self, phi: f64) -> f64 {
        let e1 = Complex64::from_polar(1.0, phi);
        let e2 = e1 * e1;
        let j = Complex64::new(0.0, 1.0);
        (j * (-2.0 * self.coeffs[0] * e2.conj() - self.coeffs[1] * e1.conj()
            + self.coeffs[3] * e1
            + 2.0 * self.coeffs[4] * e2))
            .re
    }
}

/// Real quartic `sum_k q[k] z^k` in `z = tan(phi / 2)` whose real roots are
/// the critical phases of a [`TrigPoly`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticPoly {
    pub q: [f64; 5],
}

/// Map a trig polynomial's derivative through `z = tan(phi / 2)`.
pub fn quartic_from_trig(tp: &TrigPoly) -> QuarticPoly {
    let um2 = tp.coeffs[0];
    let um1 = tp.coeffs[1];
    let up1 = tp.coeffs[3];
    let up2 = tp.coeffs[4];
    let xi0 = 2.0 * (um2.im - up2.im);
    let xi1 = 2.0 * (up2.im - um2.im);
    let xi2 = -4.0 * (up2.re + um2.re);
    let xi3 = um1.im - up1.im;
    let xi4 = -(um1.re + up1.re);
    QuarticPoly {
        q: [
            xi0 + xi3,
            2.0 * (xi2 + xi4),
            2.0 * (2.0 * xi1 - xi0),
            2.0 * (xi4 - xi2),
            xi0 - xi3,
        ],
    }
}

fn eval_quartic(q: &[f64; 5], z: f64) -> f64 {
    (((q[4] * z + q[3]) * z + q[2]) * z + q[1]) * z + q[0]
}

fn eval_quartic_deriv(q: &[f64; 5], z: f64) -> f64 {
    ((4.0 * q[4] * z + 3.0 * q[3]) * z + 2.0 * q[2]) * z + q[1]
}

/// All real roots of a quartic (or degree-degenerate) polynomial, by
/// companion-matrix eigenvalues plus two Newton polish steps. Roots whose
/// relative imaginary part exceeds `imag_tol` are discarded.
pub fn real_roots_quartic(poly: &QuarticPoly, imag_tol: f64) -> Result<Vec<f64>> {
    let q = &poly.q;
    let qmax = q.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if qmax == 0.0 {
        return Err(Error::arg("zero polynomial has every z as a root"));
    }
    // leading coefficients below the noise floor reduce the degree
    let lead_tol = 1e-13 * qmax;
    let mut deg = 4;
    while deg > 0 && q[deg].abs() <= lead_tol {
        deg -= 1;
    }

    let mut roots: Vec<f64> = Vec::with_capacity(4);
    match deg {
        0 => {}
        1 => roots.push(-q[0] / q[1]),
        2 => {
            let (a, b, c) = (q[2], q[1], q[0]);
            let disc = b * b - 4.0 * a * c;
            let near = 1e-12 * (b * b + (4.0 * a * c).abs());
            if disc >= 0.0 {
                // Citardauq-style stable split
                let sq = disc.sqrt();
                let qq = -0.5 * (b + b.signum() * sq);
                if qq != 0.0 {
                    roots.push(qq / a);
                    roots.push(c / qq);
                } else {
                    roots.push(0.0);
                }
            } else if -disc <= near {
                roots.push(-b / (2.0 * a));
            }
        }
        3 => {
            let inv = 1.0 / q[3];
            let companion = Matrix3::new(
                0.0, 0.0, -q[0] * inv,
                1.0, 0.0, -q[1] * inv,
                0.0, 1.0, -q[2] * inv,
            );
            collect_real(companion.complex_eigenvalues().as_slice(), imag_tol, &mut roots);
        }
        _ => {
            let inv = 1.0 / q[4];
            let companion = Matrix4::new(
                0.0, 0.0, 0.0, -q[0] * inv,
                1.0, 0.0, 0.0, -q[1] * inv,
                0.0, 1.0, 0.0, -q[2] * inv,
                0.0, 0.0, 1.0, -q[3] * inv,
            );
            collect_real(companion.complex_eigenvalues().as_slice(), imag_tol, &mut roots);
        }
    }

    for z in roots.iter_mut() {
        for _ in 0..2 {
            let dp = eval_quartic_deriv(q, *z);
            if dp.abs() < 1e-300 {
                break;
            }
            let step = eval_quartic(q, *z) / dp;
            if !step.is_finite() {
                break;
            }
            *z -= step;
        }
    }
    Ok(roots)
}

fn collect_real(eigs: &[NaComplex<f64>], imag_tol: f64, out: &mut Vec<f64>) {
    for e in eigs {
        if e.im.abs() <= imag_tol * (1.0 + e.re.abs()) {
            out.push(e.re);
        }
    }
}

/// Minimize a trig polynomial over the closed circle: candidates are the
/// mapped real roots of the derivative quartic, the boundary `phi = pi` that
/// the half-angle substitution cannot represent, and the current phase.
/// Ties keep the current phase, so the value never worsens.
pub fn best_phase_continuous(tp: &TrigPoly, phi_current: f64) -> f64 {
    let quartic = quartic_from_trig(tp);
    let mut best_phi = phi_current;
    let mut best_val = tp.value(phi_current);
    let roots = match real_roots_quartic(&quartic, ROOT_IMAG_TOL) {
        Ok(r) => r,
        Err(_) => return phi_current, // derivative identically zero
    };
    for phi in roots
        .into_iter()
        .map(|z| 2.0 * z.atan())
        .chain(std::iter::once(PI))
    {
        let v = tp.value(phi);
        if v < best_val {
            best_val = v;
            best_phi = phi;
        }
    }
    best_phi
}

/// Per-lag majorizer data for the `p >= 2` path, computed on correlation
/// magnitudes divided by `scale` so that every power stays representable.
/// Minimizing the scaled surrogate minimizes the original one.
#[derive(Debug, Clone)]
pub struct Pge2Surrogate {
    pub p: f64,
    /// Peak `|w r|` at the expansion point; zero means the subproblem is
    /// already identically zero and any phase is optimal.
    pub scale: f64,
    /// Per channel, in [`EntryCoeffs`] channel order: per-lag `eta` and
    /// `psi' = psi / |w r|` plus the channel's summed `nu`.
    pub channels: Vec<ChannelMajorizer>,
}

#[derive(Debug, Clone)]
pub struct ChannelMajorizer {
    /// Only the entry's participation window is populated.
    pub eta: Vec<f64>,
    pub psi_prime: Vec<f64>,
    pub nu_sum: f64,
    /// Surrogate value of the lags outside the window: there the lag is the
    /// constant `|w r|` and the majorizer sits at its touch value `|w r|^p`.
    pub const_sum: f64,
}

pub fn pge2_surrogate(coeffs: &EntryCoeffs, p: f64) -> Result<Pge2Surrogate> {
    if !(p >= 2.0) {
        return Err(Error::arg(format!("entry majorizer path requires p >= 2, got {p}")));
    }
    let scale = coeffs.peak_abs_wr();
    let mut channels = Vec::with_capacity(1 + coeffs.cross.len());
    if scale <= 1e-300 {
        return Ok(Pge2Surrogate { p, scale: 0.0, channels });
    }
    let inv = 1.0 / scale;
    let mut scaled: Vec<f64> = Vec::new();
    for ch in coeffs.channels() {
        scaled.clear();
        scaled.extend(ch.abs_wr.iter().map(|&v| v * inv));
        let t = tau(&scaled, p);
        let mut eta = vec![0.0; scaled.len()];
        let mut psi_prime = vec![0.0; scaled.len()];
        let mut nu_sum = 0.0;
        let mut const_sum = 0.0;
        for (idx, &rho) in scaled.iter().enumerate() {
            if (ch.win_lo..=ch.win_hi).contains(&idx) {
                let m = majorizer_coeffs_pge2(rho.min(t), t, p)?;
                eta[idx] = m.eta;
                psi_prime[idx] = m.psi / rho.max(1e-12);
                nu_sum += m.nu;
            } else {
                const_sum += powp(rho, p);
            }
        }
        channels.push(ChannelMajorizer { eta, psi_prime, nu_sum, const_sum });
    }
    Ok(Pge2Surrogate { p, scale, channels })
}

/// Assemble the `p >= 2` surrogate as a trig polynomial around expansion
/// phase `phi_i`. Its value is the surrogate of the scaled subproblem; the
/// argmin is that of the unscaled one.
pub fn trig_poly_pge2(coeffs: &EntryCoeffs, maj: &Pge2Surrogate, phi_i: f64) -> TrigPoly {
    let mut u = [Complex64::default(); 5];
    if maj.scale == 0.0 {
        return TrigPoly { coeffs: u };
    }
    let inv = 1.0 / maj.scale;
    let xi = Complex64::from_polar(1.0, phi_i);
    for (ch, cm) in coeffs.channels().zip(maj.channels.iter()) {
        let has_b = !ch.b.is_empty();
        for idx in ch.win_lo..=ch.win_hi {
            let a = ch.a[idx] * inv;
            let c = ch.c[idx] * inv;
            let eta = cm.eta[idx];
            let psi_p = cm.psi_prime[idx];
            if has_b {
                let b = ch.b[idx] * inv;
                u[0] += eta * a.conj() * b;
                u[1] += eta * (a.conj() * c + c.conj() * b);
                u[3] += eta * (a * c.conj() + c * b.conj());
                u[4] += eta * a * b.conj();
                u[2] += eta * (a.norm_sqr() + b.norm_sqr() + c.norm_sqr());
                if psi_p != 0.0 {
                    u[2] += psi_p * (c.norm_sqr() + c.conj() * a * xi + c.conj() * b * xi.conj());
                    u[1] += psi_p * (a.conj() * c + a.norm_sqr() * xi + a.conj() * b * xi.conj());
                    u[3] += psi_p * (b.conj() * c + a * b.conj() * xi + b.norm_sqr() * xi.conj());
                }
            } else {
                u[1] += eta * a.conj() * c;
                u[3] += eta * a * c.conj();
                u[2] += eta * (a.norm_sqr() + c.norm_sqr());
                if psi_p != 0.0 {
                    u[2] += psi_p * (c.norm_sqr() + c.conj() * a * xi);
                    u[1] += psi_p * (a.conj() * c + a.norm_sqr() * xi);
                }
            }
        }
        u[2] += cm.nu_sum + cm.const_sum;
    }
    TrigPoly { coeffs: u }
}

/// Per-lag majorizer curvatures for the `0 < p <= 1` path.
#[derive(Debug, Clone)]
pub struct LowPGammas {
    /// Per channel, in [`EntryCoeffs`] channel order; only the window entries
    /// feed the trig polynomial.
    pub gammas: Vec<Vec<f64>>,
    /// Per channel, `sum gamma |w r|^2` over the out-of-window (constant)
    /// lags, so surrogate values stay absolute.
    pub const_sums: Vec<f64>,
}

pub fn lowp_gammas(
    coeffs: &EntryCoeffs,
    kind: SmoothKind,
    eps: f64,
    p: f64,
) -> Result<LowPGammas> {
    let mut gammas = Vec::with_capacity(1 + coeffs.cross.len());
    let mut const_sums = Vec::with_capacity(1 + coeffs.cross.len());
    let auto_k0 = coeffs.n - 1;
    for (ci, ch) in coeffs.channels().enumerate() {
        let mut g = Vec::with_capacity(ch.abs_wr.len());
        let mut const_sum = 0.0;
        for (idx, &r) in ch.abs_wr.iter().enumerate() {
            if ci == 0 && idx == auto_k0 {
                g.push(0.0); // excluded mainlobe
                continue;
            }
            let gamma = gamma_coeff(kind, eps, p, r)?;
            g.push(gamma);
            if !(ch.win_lo..=ch.win_hi).contains(&idx) {
                const_sum += gamma * r * r;
            }
        }
        gammas.push(g);
        const_sums.push(const_sum);
    }
    Ok(LowPGammas { gammas, const_sums })
}

/// Assemble the low-p quadratic surrogate as a conjugate-symmetric trig
/// polynomial. The additive `mu` constants are omitted; they cancel in the
/// argmin and in value differences.
pub fn trig_poly_lowp(coeffs: &EntryCoeffs, gammas: &LowPGammas) -> TrigPoly {
    let mut v = [Complex64::default(); 5];
    for ((ch, g), &const_sum) in coeffs
        .channels()
        .zip(gammas.gammas.iter())
        .zip(gammas.const_sums.iter())
    {
        let has_b = !ch.b.is_empty();
        for idx in ch.win_lo..=ch.win_hi {
            let gamma = g[idx];
            if gamma == 0.0 {
                continue;
            }
            let a = ch.a[idx];
            let c = ch.c[idx];
            if has_b {
                let b = ch.b[idx];
                v[0] += gamma * a.conj() * b;
                v[1] += gamma * (a.conj() * c + c.conj() * b);
                v[2] += gamma * (a.norm_sqr() + b.norm_sqr() + c.norm_sqr());
            } else {
                v[1] += gamma * a.conj() * c;
                v[2] += gamma * (a.norm_sqr() + c.norm_sqr());
            }
        }
        v[2] += const_sum;
    }
    v[3] = v[1].conj();
    v[4] = v[0].conj();
    TrigPoly { coeffs: v }
}

/// Discrete-alphabet search: evaluate the entry-local objective at every
/// alphabet phase through the L-point DFT bins of the per-lag coefficient
/// sequences (`{a, c}` cross, `{a, c, b}` auto, indices folded mod L so the
/// `L = 2` alias lands on `{a + b, c}`), and return the 1-based minimizer.
/// Ties prefer `current_l`, then the lowest index.
pub fn best_phase_discrete(
    coeffs: &EntryCoeffs,
    l_size: u32,
    p: f64,
    current_l: u32,
) -> Result<u32> {
    Ok(discrete_search(coeffs, l_size, p, current_l)?.0)
}

/// Returns `(best_l, objective delta)`; the delta is the entry-local change
/// of `sum |w r|^p` from `current_l` to `best_l` (always <= 0).
fn discrete_search(
    coeffs: &EntryCoeffs,
    l_size: u32,
    p: f64,
    current_l: u32,
) -> Result<(u32, f64)> {
    if l_size < 2 {
        return Err(Error::arg(format!("alphabet size must be >= 2, got {l_size}")));
    }
    if !(p > 0.0) {
        return Err(Error::arg(format!("discrete search requires p > 0, got {p}")));
    }
    if current_l < 1 || current_l > l_size {
        return Err(Error::arg("current alphabet index out of range"));
    }
    let l = l_size as usize;
    // omega_i = e^{-j 2 pi (i) / L}: DFT kernel at bin i = l' - 1
    let omega: Vec<Complex64> = (0..l)
        .map(|i| Complex64::from_polar(1.0, -2.0 * PI * i as f64 / l as f64))
        .collect();

    // the out-of-window lags are candidate-independent constants; only the
    // participation window separates the alphabet points
    // pass 1: peak bin magnitude for scale-safe powers
    let mut peak = 0.0f64;
    let mut acc: Vec<f64> = vec![0.0; l];
    for ch in coeffs.channels() {
        let has_b = !ch.b.is_empty();
        for idx in ch.win_lo..=ch.win_hi {
            let a = ch.a[idx];
            let c = ch.c[idx];
            let b = ch.b_at(idx);
            if a.norm_sqr() == 0.0 && c.norm_sqr() == 0.0 && (!has_b || b.norm_sqr() == 0.0) {
                continue;
            }
            for &om in omega.iter() {
                let bin = a + c * om + if has_b { b * om * om } else { Complex64::default() };
                peak = peak.max(cnorm(bin));
            }
        }
    }
    if peak == 0.0 {
        return Ok((current_l, 0.0));
    }
    let inv = 1.0 / peak;
    // pass 2: accumulate scaled p-powers per candidate
    for ch in coeffs.channels() {
        let has_b = !ch.b.is_empty();
        for idx in ch.win_lo..=ch.win_hi {
            let a = ch.a[idx];
            let c = ch.c[idx];
            let b = ch.b_at(idx);
            if a.norm_sqr() == 0.0 && c.norm_sqr() == 0.0 && (!has_b || b.norm_sqr() == 0.0) {
                continue;
            }
            for (i, &om) in omega.iter().enumerate() {
                let bin = a + c * om + if has_b { b * om * om } else { Complex64::default() };
                acc[i] += powp(cnorm(bin) * inv, p);
            }
        }
    }

    let cur_idx = (current_l - 1) as usize;
    let mut best_idx = cur_idx;
    let mut best_val = acc[cur_idx];
    for (i, &v) in acc.iter().enumerate() {
        if v < best_val {
            best_val = v;
            best_idx = i;
        }
    }
    let delta = (best_val - acc[cur_idx]) * powp(peak, p);
    Ok((best_idx as u32 + 1, delta))
}

/// Which per-entry optimizer a stage runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntryRegime {
    /// Continuous phase, `p >= 2`, quadratic majorizer through [`trig_poly_pge2`].
    Pge2 { p: f64 },
    /// Continuous phase, `0 < p <= 1`, smooth-approximation majorizer.
    LowP { p: f64, kind: SmoothKind, eps: f64 },
    /// Discrete alphabet of size `l`, exact per-entry search, any `p > 0`.
    Discrete { l: u32, p: f64 },
}

/// Update entry `(t, d)` in place, returning the entry-local objective delta
/// (the true lp delta for the `p >= 2` and discrete regimes, the surrogate
/// delta for the low-p regime; never positive). The cached correlations are
/// folded forward so subsequent entries see the new value.
pub fn entry_update(
    x: &mut WaveformSet,
    corr: &mut CorrelationSet,
    w: &WeightVector,
    t: usize,
    d: usize,
    regime: EntryRegime,
) -> Result<f64> {
    let mut rows: Vec<Vec<Complex64>> = (0..x.transmitters()).map(|l| x.row(l)).collect();
    entry_update_cached(x, &mut rows, corr, w, t, d, regime)
}

/// [`entry_update`] on a live complex-row cache kept in sync with `x`.
fn entry_update_cached(
    x: &mut WaveformSet,
    rows: &mut [Vec<Complex64>],
    corr: &mut CorrelationSet,
    w: &WeightVector,
    t: usize,
    d: usize,
    regime: EntryRegime,
) -> Result<f64> {
    let coeffs = EntryCoeffs::compute_from_rows(rows, x.len(), corr, w, t, d)?;
    let phi_i = x.phase(t, d);
    let (phi_star, delta) = match regime {
        EntryRegime::Pge2 { p } => {
            let maj = pge2_surrogate(&coeffs, p)?;
            if maj.scale == 0.0 {
                (phi_i, 0.0)
            } else {
                let tp = trig_poly_pge2(&coeffs, &maj, phi_i);
                let phi_star = best_phase_continuous(&tp, phi_i);
                if p == 2.0 {
                    // the surrogate is the objective itself; its delta is exact
                    let d_scaled = tp.value(phi_star) - tp.value(phi_i);
                    (phi_star, d_scaled * maj.scale * maj.scale)
                } else {
                    // beyond p = 2 a large move can leave the majorizer's
                    // validity interval; accept only true improvements
                    let d_scaled = coeffs.local_lp_delta(phi_star, phi_i, p, 1.0 / maj.scale);
                    if d_scaled <= 0.0 {
                        (phi_star, d_scaled * powp(maj.scale, p))
                    } else {
                        (phi_i, 0.0)
                    }
                }
            }
        }
        EntryRegime::LowP { p, kind, eps } => {
            let gammas = lowp_gammas(&coeffs, kind, eps, p)?;
            let tp = trig_poly_lowp(&coeffs, &gammas);
            let phi_star = best_phase_continuous(&tp, phi_i);
            (phi_star, tp.value(phi_star) - tp.value(phi_i))
        }
        EntryRegime::Discrete { l, p } => {
            let step = 2.0 * PI / l as f64;
            let cur = (x.phase(t, d).rem_euclid(2.0 * PI) / step).round() as i64;
            let cur_l = (cur.rem_euclid(l as i64)) as u32 + 1;
            let (best_l, delta) = discrete_search(&coeffs, l, p, cur_l)?;
            (PhaseConstraint::alphabet_phase(l, best_l), delta)
        }
    };
    if phi_star != phi_i {
        let old = x.entry(t, d);
        x.set_phase(t, d, phi_star);
        rows[t][d] = x.entry(t, d);
        corr.update_entry_from_rows(rows, t, d, old);
    }
    Ok(delta)
}

/// One full cyclic sweep over every entry, row-major.
pub fn entry_sweep(
    x: &mut WaveformSet,
    corr: &mut CorrelationSet,
    w: &WeightVector,
    regime: EntryRegime,
) -> Result<()> {
    let mut rows: Vec<Vec<Complex64>> = (0..x.transmitters()).map(|l| x.row(l)).collect();
    for t in 0..x.transmitters() {
        for d in 0..x.len() {
            entry_update_cached(x, &mut rows, corr, w, t, d, regime)?;
        }
    }
    Ok(())
}
