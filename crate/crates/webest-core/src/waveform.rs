//! Domain types: waveform sets, phase constraints, lag weights and the
//! sidelobe index set.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Alphabet membership tolerance for discrete sets, in radians.
pub const DISCRETE_PHASE_TOL: f64 = 1e-12;

/// Wrap a phase to the principal interval `(-pi, pi]`.
pub fn wrap_phase(phi: f64) -> f64 {
    if phi > -PI && phi <= PI {
        return phi;
    }
    // rem_euclid maps to [0, 2pi); shift the upper half down.
    let r = phi.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else if r == 0.0 && phi > 0.0 {
        // phi was a positive multiple of 2pi; keep 0, not -0
        0.0
    } else {
        r
    }
}

/// Phase constraint set: the whole unit circle, or an `L`-point MPSK alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseConstraint {
    Continuous,
    Discrete(u32),
}

impl PhaseConstraint {
    pub fn validate(&self) -> Result<()> {
        match self {
            PhaseConstraint::Continuous => Ok(()),
            PhaseConstraint::Discrete(l) if *l >= 2 => Ok(()),
            PhaseConstraint::Discrete(l) => Err(Error::arg(format!(
                "discrete alphabet size must be >= 2, got {l}"
            ))),
        }
    }

    /// Alphabet phase of 1-based index `l_idx`, wrapped to `(-pi, pi]`.
    pub fn alphabet_phase(l: u32, l_idx: u32) -> f64 {
        wrap_phase(2.0 * PI * (l_idx as f64 - 1.0) / l as f64)
    }
}

/// A set of `M` unit-modulus sequences of length `N`, stored as phases in
/// radians. Entry `(t, d)` of the complex matrix is `exp(j * phase(t, d))`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSet {
    m: usize,
    n: usize,
    phases: Vec<f64>, // row-major M x N
}

impl WaveformSet {
    /// Build from a row-major phase matrix. Phases are wrapped to `(-pi, pi]`.
    pub fn from_phases(m: usize, n: usize, phases: Vec<f64>) -> Result<Self> {
        if m < 1 || n < 2 {
            return Err(Error::arg(format!(
                "waveform set requires M >= 1 and N >= 2, got M={m}, N={n}"
            )));
        }
        if phases.len() != m * n {
            return Err(Error::arg(format!(
                "expected {} phases for a {m}x{n} set, got {}",
                m * n,
                phases.len()
            )));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::arg("phases must be finite"));
        }
        let phases = phases.into_iter().map(wrap_phase).collect();
        Ok(Self { m, n, phases })
    }

    pub fn transmitters(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false // N >= 2 by construction
    }

    pub fn phase(&self, t: usize, d: usize) -> f64 {
        self.phases[t * self.n + d]
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn row_phases(&self, t: usize) -> &[f64] {
        &self.phases[t * self.n..(t + 1) * self.n]
    }

    pub fn set_phase(&mut self, t: usize, d: usize, phi: f64) {
        self.phases[t * self.n + d] = wrap_phase(phi);
    }

    pub fn entry(&self, t: usize, d: usize) -> Complex64 {
        Complex64::from_polar(1.0, self.phase(t, d))
    }

    /// Complex samples of row `t`.
    pub fn row(&self, t: usize) -> Vec<Complex64> {
        self.row_phases(t)
            .iter()
            .map(|&p| Complex64::from_polar(1.0, p))
            .collect()
    }

    /// Frobenius norm of the complex difference between two sets.
    pub fn frobenius_distance(&self, other: &WaveformSet) -> f64 {
        assert_eq!(self.m, other.m);
        assert_eq!(self.n, other.n);
        let mut acc = 0.0;
        for (a, b) in self.phases.iter().zip(other.phases.iter()) {
            // |e^{ja} - e^{jb}|^2 = 2 - 2cos(a - b)
            acc += (2.0 - 2.0 * (a - b).cos()).max(0.0);
        }
        acc.sqrt()
    }

    /// Check membership in the given constraint set.
    pub fn check_feasible(&self, constraint: PhaseConstraint) -> Result<()> {
        constraint.validate()?;
        if let PhaseConstraint::Discrete(l) = constraint {
            let step = 2.0 * PI / l as f64;
            for (i, &p) in self.phases.iter().enumerate() {
                let q = p / step;
                let dist = (q - q.round()).abs() * step;
                if dist > DISCRETE_PHASE_TOL {
                    return Err(Error::Infeasible(format!(
                        "entry ({}, {}) phase {p} is off the {l}-point alphabet by {dist:.3e} rad",
                        i / self.n,
                        i % self.n
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Per-lag weights `w_k in [0, 1]` for lags `k in [-N+1, N-1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    n: usize,
    w: Vec<f64>, // index k + N - 1
}

impl WeightVector {
    pub fn new(n: usize, w: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::arg("weight vector requires N >= 2"));
        }
        if w.len() != 2 * n - 1 {
            return Err(Error::arg(format!(
                "weight vector must have length 2N-1 = {}, got {}",
                2 * n - 1,
                w.len()
            )));
        }
        if w.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::arg("weights must lie in [0, 1]"));
        }
        Ok(Self { n, w })
    }

    pub fn all_ones(n: usize) -> Self {
        Self::new(n, vec![1.0; 2 * n - 1]).expect("N >= 2")
    }

    pub fn seq_len(&self) -> usize {
        self.n
    }

    /// Weight at signed lag `k`; `weight(-k)` is always retrievable.
    pub fn weight(&self, k: isize) -> f64 {
        let idx = k + self.n as isize - 1;
        self.w[idx as usize]
    }

    /// Weights in lag order `-N+1 ..= N-1`.
    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }
}

/// Iterator over the sidelobe triples `(m, l, k)`: every lag of every cross
/// pair, plus every nonzero lag of every auto pair. Cardinality is
/// `M^2 (2N-1) - M`.
pub fn sidelobe_indices(
    m: usize,
    n: usize,
) -> impl Iterator<Item = (usize, usize, isize)> {
    let lags = -(n as isize - 1)..=(n as isize - 1);
    (0..m).flat_map(move |row| {
        let lags = lags.clone();
        (0..m).flat_map(move |col| {
            lags.clone()
                .filter(move |&k| row != col || k != 0)
                .map(move |k| (row, col, k))
        })
    })
}
