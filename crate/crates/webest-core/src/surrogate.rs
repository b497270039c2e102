//! Local-approximation coefficients for the block solvers: the quadratic
//! majorizer of `|w r|^p` for `p >= 2`, the epsilon-guarded smooth
//! approximations of `|w r|^p` for `0 < p <= 1` together with their quadratic
//! majorizer curvatures, and the gradient-path curvature used by the vector
//! solver.

use crate::error::{Error, Result};
use crate::metrics::powp;

/// Default guard width for the smooth low-p approximations.
pub const DEFAULT_EPSILON: f64 = 0.05;
/// Guard for `|r|^{ p-2 }` style expressions evaluated at tiny `|r|`.
pub const GRADIENT_EPS_GUARD: f64 = 1e-8;

/// Smooth approximation family for the `0 < p <= 1` regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothKind {
    /// Guarded power `|x|^p` itself.
    Power,
    /// Logarithmic family `ln(1 + |x|/p) / ln(1 + 1/p)` flavored.
    Log,
    /// Exponential family `1 - exp(-|x|/p)` flavored.
    Exponential,
}

impl SmoothKind {
    pub fn from_index(h: u8) -> Result<Self> {
        match h {
            1 => Ok(SmoothKind::Power),
            2 => Ok(SmoothKind::Log),
            3 => Ok(SmoothKind::Exponential),
            _ => Err(Error::arg(format!("smooth family index must be 1, 2 or 3, got {h}"))),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            SmoothKind::Power => 1,
            SmoothKind::Log => 2,
            SmoothKind::Exponential => 3,
        }
    }
}

fn check_smooth_args(kind: SmoothKind, eps: f64, p: f64) -> Result<()> {
    if !(eps > 0.0) {
        return Err(Error::arg("epsilon must be > 0"));
    }
    match kind {
        SmoothKind::Power if !(p > 0.0 && p <= 1.0) => Err(Error::arg(format!(
            "power smooth family requires p in (0, 1], got {p}"
        ))),
        _ if !(p > 0.0) => Err(Error::arg(format!("smooth family requires p > 0, got {p}"))),
        _ => Ok(()),
    }
}

/// Guarded smooth stand-in for `|x|^p`: quadratic cap inside `|x| <= eps`,
/// original branch outside, continuous at the seam.
pub fn smooth_g(kind: SmoothKind, eps: f64, p: f64, abs_r: f64) -> Result<f64> {
    check_smooth_args(kind, eps, p)?;
    let r = abs_r.abs();
    Ok(match kind {
        SmoothKind::Power => {
            if r <= eps {
                0.5 * p * powp(eps, p - 2.0) * r * r
            } else {
                // continuity at r = eps fixes the offset to (1 - p/2) eps^p
                powp(r, p) - (1.0 - 0.5 * p) * powp(eps, p)
            }
        }
        SmoothKind::Log => {
            let lam = ((p + 1.0) / p).ln();
            if r <= eps {
                r * r / (2.0 * eps * (p + eps) * lam)
            } else {
                (((p + r) / p).ln() - ((p + eps) / p).ln() + eps / (2.0 * (p + eps))) / lam
            }
        }
        SmoothKind::Exponential => {
            if r <= eps {
                (-eps / p).exp() / (2.0 * p * eps) * r * r
            } else {
                -(-r / p).exp() + (1.0 + eps / (2.0 * p)) * (-eps / p).exp()
            }
        }
    })
}

/// Curvature `gamma` of the quadratic majorizer `gamma |x|^2 + mu` of
/// [`smooth_g`] expanded at `abs_r`. Strictly positive and finite for every
/// guarded input, including zero.
pub fn gamma_coeff(kind: SmoothKind, eps: f64, p: f64, abs_r: f64) -> Result<f64> {
    check_smooth_args(kind, eps, p)?;
    let r = abs_r.abs();
    // the exponential family underflows at huge |r|; keep gamma strictly positive
    Ok(f64::MIN_POSITIVE.max(match kind {
        SmoothKind::Power => {
            if r <= eps {
                0.5 * p * powp(eps, p - 2.0)
            } else {
                0.5 * p * powp(r, p - 2.0)
            }
        }
        SmoothKind::Log => {
            let lam = ((p + 1.0) / p).ln();
            if r <= eps {
                0.5 / (eps * (p + eps) * lam)
            } else {
                0.5 / (lam * r * (r + p))
            }
        }
        SmoothKind::Exponential => {
            if r <= eps {
                (-eps / p).exp() / (2.0 * p * eps)
            } else {
                (-r / p).exp() / (2.0 * p * r)
            }
        }
    }))
}

/// Constant term of the quadratic majorizer, `mu = g - gamma |x|^2` at the
/// expansion point. Only needed for surrogate-value diagnostics; it cancels
/// in every argmin.
pub fn mu_coeff(kind: SmoothKind, eps: f64, p: f64, abs_r: f64) -> Result<f64> {
    let g = smooth_g(kind, eps, p, abs_r)?;
    let gamma = gamma_coeff(kind, eps, p, abs_r)?;
    Ok(g - gamma * abs_r * abs_r)
}

/// `tau`: the p-norm of the weighted correlation magnitudes of one pair.
/// Scale-guarded so that large `p` does not overflow.
pub fn tau(abs_weighted_corr: &[f64], p: f64) -> f64 {
    debug_assert!(p >= 1.0);
    let peak = abs_weighted_corr.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if peak == 0.0 {
        return 0.0;
    }
    let sum: f64 = abs_weighted_corr
        .iter()
        .map(|&v| powp(v / peak, p))
        .sum();
    peak * sum.powf(1.0 / p)
}

/// Quadratic majorizer coefficients of `|w r|^p` for `p >= 2`:
/// `eta |w r|^2 + psi |w r| + nu` touches the power at the expansion point
/// and at `tau`, and dominates it on `[0, tau]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MajorizerCoeffs {
    pub eta: f64,
    pub psi: f64,
    pub nu: f64,
}

/// Relative width of the `|r| -> tau` singularity guard.
const TAU_SINGULARITY_REL: f64 = 1e-12;

pub fn majorizer_coeffs_pge2(abs_r: f64, tau: f64, p: f64) -> Result<MajorizerCoeffs> {
    if !(p >= 2.0) {
        return Err(Error::arg(format!("majorizer requires p >= 2, got {p}")));
    }
    if abs_r < 0.0 || abs_r > tau * (1.0 + 1e-9) + 1e-300 {
        return Err(Error::arg(format!(
            "majorizer expansion point {abs_r} outside [0, tau = {tau}]"
        )));
    }
    if tau == 0.0 {
        // all-zero pair: the objective term is constant
        return Ok(MajorizerCoeffs { eta: 0.0, psi: 0.0, nu: 0.0 });
    }
    if p == 2.0 {
        // (tau - r)^2 cancels exactly; the quadratic is its own majorizer
        return Ok(MajorizerCoeffs { eta: 1.0, psi: 0.0, nu: 0.0 });
    }
    let r = abs_r.min(tau);
    let eta = if tau - r < TAU_SINGULARITY_REL * tau {
        // 0/0 at r = tau; second-order Taylor limit keeps tangency
        0.5 * p * (p - 1.0) * powp(r, p - 2.0)
    } else {
        (powp(tau, p) + (p - 1.0) * powp(r, p) - p * tau * powp(r, p - 1.0))
            / ((tau - r) * (tau - r))
    };
    let psi = p * powp(r, p - 1.0) - 2.0 * eta * r;
    let nu = eta * r * r - (p - 1.0) * powp(r, p);
    Ok(MajorizerCoeffs { eta, psi, nu })
}

/// Gradient-path curvature and constant: `nu_bar = (p/2) |w r|^(p-2)`
/// (guarded near zero) and the constant `sigma` that makes
/// `nu_bar |w r|^2 + sigma` touch `|w r|^p` at the expansion point.
pub fn gradient_coeffs(abs_r: f64, p: f64, eps_guard: f64) -> (f64, f64) {
    let r = abs_r.abs();
    let nu_bar = 0.5 * p * powp(r.max(eps_guard), p - 2.0);
    let sigma = (1.0 - 0.5 * p) * powp(r, p);
    (nu_bar, sigma)
}
