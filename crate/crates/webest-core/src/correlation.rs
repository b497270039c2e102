//! Aperiodic cross-correlation of sequence pairs and the full M x M
//! correlation table, with incremental single-entry updates.
//!
//! The lag-`k` cross-correlation of rows `x_m` and `x_l` is
//! `r_{m,l}(k) = sum_n x_m[n] * conj(x_l[n+k])` over every `n` for which both
//! indices are valid, `k in [-N+1, N-1]`. Negative lags satisfy the
//! conjugate-lag identity `r_{m,l}(-k) = conj(r_{l,m}(k))`.

use crate::error::{Error, Result};
use crate::fft::conv_full;
use crate::waveform::WaveformSet;
use num_complex::Complex64;

/// Aperiodic cross-correlation of two equal-length sequences, all `2N-1`
/// lags, `out[k + N - 1] = r(k)`. Computed by zero-padded fast convolution.
pub fn cross_correlation(x: &[Complex64], y: &[Complex64]) -> Result<Vec<Complex64>> {
    if x.len() != y.len() {
        return Err(Error::arg(format!(
            "cross_correlation length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::arg("cross_correlation requires length >= 2"));
    }
    let n = x.len();
    // r(k) = conv(x, conj(rev(y)))[N-1-k]
    let y_rev_conj: Vec<Complex64> = y.iter().rev().map(|v| v.conj()).collect();
    let conv = conv_full(x, &y_rev_conj);
    Ok((0..2 * n - 1).map(|i| conv[2 * n - 2 - i]).collect())
}

/// All `M^2` pair correlations of a waveform set, indexed `(m, l, k)`.
#[derive(Debug, Clone)]
pub struct CorrelationSet {
    m: usize,
    n: usize,
    r: Vec<Complex64>, // [(m * M + l) * (2N-1) + (k + N - 1)]
}

impl CorrelationSet {
    pub fn compute(x: &WaveformSet) -> Self {
        let m = x.transmitters();
        let n = x.len();
        let rows: Vec<Vec<Complex64>> = (0..m).map(|t| x.row(t)).collect();
        let mut r = Vec::with_capacity(m * m * (2 * n - 1));
        for a in 0..m {
            for b in 0..m {
                r.extend(cross_correlation(&rows[a], &rows[b]).expect("equal lengths"));
            }
        }
        Self { m, n, r }
    }

    pub fn transmitters(&self) -> usize {
        self.m
    }

    pub fn seq_len(&self) -> usize {
        self.n
    }

    #[inline]
    fn pair_base(&self, m: usize, l: usize) -> usize {
        (m * self.m + l) * (2 * self.n - 1)
    }

    /// `r_{m,l}(k)` for signed lag `k`.
    #[inline]
    pub fn get(&self, m: usize, l: usize, k: isize) -> Complex64 {
        let idx = (k + self.n as isize - 1) as usize;
        self.r[self.pair_base(m, l) + idx]
    }

    /// All lags of pair `(m, l)` in order `k = -N+1 ..= N-1`.
    #[inline]
    pub fn pair(&self, m: usize, l: usize) -> &[Complex64] {
        let base = self.pair_base(m, l);
        &self.r[base..base + 2 * self.n - 1]
    }

    /// Incrementally fold in a single-entry change. `x` must already hold the
    /// new value at `(t, d)`; `old` is the previous complex entry.
    ///
    /// Only the pairs involving row `t` change. The auto pair keeps
    /// `r_{t,t}(0) = N` untouched.
    pub fn update_entry(&mut self, x: &WaveformSet, t: usize, d: usize, old: Complex64) {
        let rows: Vec<Vec<Complex64>> = (0..self.m).map(|l| x.row(l)).collect();
        self.update_entry_from_rows(&rows, t, d, old);
    }

    /// [`CorrelationSet::update_entry`] on pre-materialized complex rows
    /// (already holding the new value); the sweep hot path keeps these cached.
    pub fn update_entry_from_rows(
        &mut self,
        rows: &[Vec<Complex64>],
        t: usize,
        d: usize,
        old: Complex64,
    ) {
        let n = self.n as isize;
        let d = d as isize;
        let delta = rows[t][d as usize] - old;
        if delta.norm_sqr() == 0.0 {
            return;
        }
        let m = self.m;
        for l in 0..m {
            let other: &[Complex64] = &rows[l];
            if l != t {
                // pair (t, l): term n = d exists for d + k in [0, N)
                let base = self.pair_base(t, l);
                for k in (-d).max(-(n - 1))..=(n - 1 - d).min(n - 1) {
                    let idx = (k + n - 1) as usize;
                    self.r[base + idx] += delta * other[(d + k) as usize].conj();
                }
                // pair (l, t): conjugated role, n + k = d for d - k in [0, N)
                let base = self.pair_base(l, t);
                for k in (d - (n - 1)).max(-(n - 1))..=d.min(n - 1) {
                    let idx = (k + n - 1) as usize;
                    self.r[base + idx] += other[(d - k) as usize] * delta.conj();
                }
            } else {
                let base = self.pair_base(t, t);
                for k in -(n - 1)..=(n - 1) {
                    if k == 0 {
                        continue;
                    }
                    let idx = (k + n - 1) as usize;
                    let mut dr = Complex64::default();
                    if (0..n).contains(&(d + k)) {
                        dr += delta * other[(d + k) as usize].conj();
                    }
                    if (0..n).contains(&(d - k)) {
                        dr += other[(d - k) as usize] * delta.conj();
                    }
                    self.r[base + idx] += dr;
                }
            }
        }
    }

    /// Recompute every pair involving row `t` from scratch (used after a
    /// whole-row update and for periodic cache re-synchronization).
    pub fn refresh_row(&mut self, x: &WaveformSet, t: usize) {
        let n = self.n;
        let row_t = x.row(t);
        for l in 0..self.m {
            let other = if l == t { row_t.clone() } else { x.row(l) };
            let r = cross_correlation(&row_t, &other).expect("equal lengths");
            let base_fwd = self.pair_base(t, l);
            self.r[base_fwd..base_fwd + 2 * n - 1].copy_from_slice(&r);
            if l != t {
                // r_{l,t}(k) = conj(r_{t,l}(-k))
                let base_rev = self.pair_base(l, t);
                for i in 0..2 * n - 1 {
                    self.r[base_rev + i] = r[2 * n - 2 - i].conj();
                }
            }
        }
    }

    /// Largest violation of the conjugate-lag identity, for diagnostics.
    pub fn max_symmetry_error(&self) -> f64 {
        let n = self.n as isize;
        let mut worst = 0.0f64;
        for a in 0..self.m {
            for b in 0..self.m {
                for k in -(n - 1)..=(n - 1) {
                    let err = (self.get(a, b, -k) - self.get(b, a, k).conj()).norm();
                    worst = worst.max(err);
                }
            }
        }
        worst
    }
}
