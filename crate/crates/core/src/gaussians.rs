//! Scalar and bivariate Gaussian machinery: the standard normal CDF and its
//! inverse, the bivariate density, the generalized arcsine map `psi` (the
//! integral of the density over the correlation) with its bisection inverse,
//! the arcsine law, and the predominance law linking a variance ratio to
//! `Pr(|Z1| >= |Z2|)`.

use crate::error::{Error, Result};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal quantile for `p` in the open interval (0, 1).
///
/// Rational initial guess (Acklam) refined by two Newton steps against the
/// erfc-based CDF; the upper tail goes through the lower one by symmetry so
/// both tails keep full precision.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("quantile needs 0 < p < 1, got {p}")));
    }
    if p > 0.5 {
        return Ok(-quantile_lower_half(1.0 - p));
    }
    Ok(quantile_lower_half(p))
}

fn quantile_lower_half(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p <= 0.5);
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    let mut x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    for _ in 0..2 {
        let density = std_normal_pdf(x);
        if density < 1e-300 {
            break;
        }
        x -= (std_normal_cdf(x) - p) / density;
    }
    x
}

/// Density of the standard bivariate normal with correlation `rho` at
/// `(eta1, eta2)`.
pub fn bivariate_pdf(eta1: f64, eta2: f64, rho: f64) -> Result<f64> {
    if !(rho.abs() < 1.0) {
        return Err(Error::Domain(format!("bivariate density needs |rho| < 1, got {rho}")));
    }
    Ok(bivariate_pdf_unchecked(eta1, eta2, rho))
}

fn bivariate_pdf_unchecked(eta1: f64, eta2: f64, rho: f64) -> f64 {
    let one_minus = 1.0 - rho * rho;
    let quad = eta1 * eta1 - 2.0 * rho * eta1 * eta2 + eta2 * eta2;
    (-quad / (2.0 * one_minus)).exp() / (2.0 * PI * one_minus.sqrt())
}

const GL5_NODES: [f64; 5] = [
    -0.906179845938664,
    -0.5384693101056831,
    0.0,
    0.5384693101056831,
    0.906179845938664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.23692688505618909,
    0.47862867049936647,
    0.5688888888888889,
    0.47862867049936647,
    0.23692688505618909,
];
const PSI_PANELS: usize = 8;
// beyond this the quadrature switches to the tail substitution anchored at +-1
const PSI_SPLIT: f64 = 0.9;

fn gl5_composite(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let step = (b - a) / PSI_PANELS as f64;
    let mut total = 0.0;
    for k in 0..PSI_PANELS {
        let lo = a + k as f64 * step;
        let half = 0.5 * step;
        let mid = lo + half;
        let mut panel = 0.0;
        for (x, w) in GL5_NODES.iter().zip(GL5_WEIGHTS.iter()) {
            panel += w * f(mid + half * x);
        }
        total += panel * half;
    }
    total
}

fn psi_mid(eta1: f64, eta2: f64, a: f64, b: f64) -> f64 {
    gl5_composite(a, b, |x| bivariate_pdf_unchecked(eta1, eta2, x))
}

// Integral of the density over [x0, 1], substituting x = 1 - u^2 so the
// inverse square root singularity at 1 becomes a smooth integrand.
fn psi_upper_tail(eta1: f64, eta2: f64, x0: f64) -> f64 {
    let u_max = (1.0 - x0).max(0.0).sqrt();
    if u_max == 0.0 {
        return 0.0;
    }
    let diff_sq = (eta1 - eta2) * (eta1 - eta2);
    let cross = 2.0 * eta1 * eta2;
    gl5_composite(0.0, u_max, |u| {
        let u2 = u * u;
        let rest = 2.0 - u2;
        (-(diff_sq / u2 + cross) / (2.0 * rest)).exp() / (PI * rest.sqrt())
    })
}

// Integral over [-1, x0], substituting x = -1 + u^2.
fn psi_lower_tail(eta1: f64, eta2: f64, x0: f64) -> f64 {
    let u_max = (1.0 + x0).max(0.0).sqrt();
    if u_max == 0.0 {
        return 0.0;
    }
    let sum_sq = (eta1 + eta2) * (eta1 + eta2);
    let cross = 2.0 * eta1 * eta2;
    gl5_composite(0.0, u_max, |u| {
        let u2 = u * u;
        let rest = 2.0 - u2;
        (-(sum_sq / u2 - cross) / (2.0 * rest)).exp() / (PI * rest.sqrt())
    })
}

/// Generalized arcsine map: the integral of the bivariate density over the
/// correlation from 0 to `rho`, at fixed thresholds. Strictly increasing in
/// `rho`, zero at zero. Composite 5-point Gauss-Legendre panels are combined
/// with square-root substitutions anchored at +1 and -1 so the endpoints stay
/// well behaved.
pub fn psi(eta1: f64, eta2: f64, rho: f64) -> f64 {
    debug_assert!((-1.0..=1.0).contains(&rho), "psi needs rho in [-1, 1]");
    if rho > PSI_SPLIT {
        psi_mid(eta1, eta2, 0.0, PSI_SPLIT) + psi_upper_tail(eta1, eta2, PSI_SPLIT)
            - psi_upper_tail(eta1, eta2, rho)
    } else if rho < -PSI_SPLIT {
        psi_mid(eta1, eta2, 0.0, -PSI_SPLIT)
            - (psi_lower_tail(eta1, eta2, -PSI_SPLIT) - psi_lower_tail(eta1, eta2, rho))
    } else {
        psi_mid(eta1, eta2, 0.0, rho)
    }
}

/// Result of inverting `psi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiInverse {
    pub rho: f64,
    /// Set when the requested value fell outside the achievable range and the
    /// result was pinned to the matching endpoint.
    pub clamped: bool,
}

const PSI_RHO_BOUND: f64 = 1.0 - 1e-12;

/// Inverts `psi` in `rho` by bisection on [-1 + 1e-12, 1 - 1e-12].
/// Out-of-range values are clamped to the nearest endpoint and flagged;
/// finite-sample binary covariances routinely step outside the feasible
/// range and the estimators must keep going.
pub fn psi_inverse(eta1: f64, eta2: f64, value: f64) -> PsiInverse {
    let mut lo = -PSI_RHO_BOUND;
    let mut hi = PSI_RHO_BOUND;
    if value <= psi(eta1, eta2, lo) {
        return PsiInverse { rho: lo, clamped: true };
    }
    if value >= psi(eta1, eta2, hi) {
        return PsiInverse { rho: hi, clamped: true };
    }
    for _ in 0..90 {
        let mid = 0.5 * (lo + hi);
        if psi(eta1, eta2, mid) < value {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 {
            break;
        }
    }
    PsiInverse { rho: 0.5 * (lo + hi), clamped: false }
}

/// Arcsine law map from a sign-agreement probability to a correlation:
/// `rho = sin(pi (lambda - 1/2))`.
pub fn arcsine_correlation(lambda: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&lambda));
    (PI * (lambda - 0.5)).sin()
}

/// `Pr(|Z1| >= |Z2|)` for centered jointly Gaussian variables with standard
/// deviation ratio `r = sigma1/sigma2` and correlation `rho`.
pub fn predominance_probability(r: f64, rho: f64) -> Result<f64> {
    if r <= 0.0 {
        return Err(Error::Domain(format!("ratio must be positive, got {r}")));
    }
    if !(rho.abs() < 1.0) {
        return Err(Error::Domain(format!("predominance needs |rho| < 1, got {rho}")));
    }
    let w = ((1.0 - rho) * (1.0 + rho)).sqrt();
    Ok((((r - rho) / w).atan() + ((r + rho) / w).atan()) / PI)
}

/// Inverse of the predominance law: recovers `sigma1/sigma2` from
/// `p = Pr(|Z1| >= |Z2|)` and the correlation.
///
/// Evaluated as `r = sqrt(s^2 + 1) - s` with `s = -sqrt(1 - rho^2) tan(pi (p - 1/2))`,
/// which keeps the branch selection automatic (`p > 1/2` makes `s` negative and
/// `r > 1`) and gives exactly 1 at `p = 1/2`. For `s > 0` the algebraically
/// equal form `1 / (sqrt(s^2 + 1) + s)` avoids cancellation.
pub fn predominance_inverse(p: f64, rho: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("predominance inverse needs 0 < p < 1, got {p}")));
    }
    if !(rho.abs() < 1.0) {
        return Err(Error::Domain(format!("predominance inverse needs |rho| < 1, got {rho}")));
    }
    let w = ((1.0 - rho) * (1.0 + rho)).sqrt();
    let s = -w * (PI * (p - 0.5)).tan();
    let root = (s * s + 1.0).sqrt();
    Ok(if s > 0.0 { 1.0 / (root + s) } else { root - s })
}
