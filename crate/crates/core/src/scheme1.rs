//! Thresholded estimation: recover standard thresholds from bit frequencies,
//! binary cross-moments, correlations through the inverse arcsine map, then
//! the Yule-Walker solve and rescaling. Degenerate bit frequencies are
//! reported as flags, never exceptions, so an experiment harness can count
//! failures.

use crate::error::{Error, Result};
use crate::gaussians::{psi_inverse, std_normal_quantile};
use crate::matrix::Matrix;
use crate::quantize::BinaryRecord;
use crate::yule_walker::{rescale_with_sigmas, solve_correlation_system, UnscaledEstimate, VarEstimate};

/// Why a series makes the record unusable for model estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesFlag {
    /// Every bit is 0: the threshold estimate is +infinity.
    AllZero,
    /// Every bit is 1: the threshold estimate is -infinity.
    AllOne,
    /// The empirical mean is exactly one half, so the threshold estimate is 0
    /// and the rescaling step divides by it.
    ExactHalf,
}

/// Standard-threshold estimates `eta_i = -quantile(mean of x_i)` with the
/// per-series degeneracy flags.
#[derive(Debug, Clone)]
pub struct ThresholdEstimate {
    pub x_bar: Vec<f64>,
    pub eta_hat: Vec<f64>,
    pub flags: Vec<Option<SeriesFlag>>,
}

impl ThresholdEstimate {
    pub fn failed(&self) -> bool {
        self.flags.iter().any(|f| f.is_some())
    }
}

/// Step 1: thresholds from the bit frequencies.
pub fn estimate_thresholds(rec: &BinaryRecord) -> Result<ThresholdEstimate> {
    if rec.thresholds().is_none() {
        return Err(Error::Domain("record carries no thresholds (sign-quantized?)".into()));
    }
    let d = rec.d();
    let mut x_bar = Vec::with_capacity(d);
    let mut eta_hat = Vec::with_capacity(d);
    let mut flags = Vec::with_capacity(d);
    for i in 0..d {
        let mean = rec.x_mean(i);
        x_bar.push(mean);
        if mean == 0.0 {
            eta_hat.push(f64::INFINITY);
            flags.push(Some(SeriesFlag::AllZero));
        } else if mean == 1.0 {
            eta_hat.push(f64::NEG_INFINITY);
            flags.push(Some(SeriesFlag::AllOne));
        } else if mean == 0.5 {
            eta_hat.push(0.0);
            flags.push(Some(SeriesFlag::ExactHalf));
        } else {
            eta_hat.push(-std_normal_quantile(mean).expect("mean strictly inside (0,1)"));
            flags.push(None);
        }
    }
    Ok(ThresholdEstimate { x_bar, eta_hat, flags })
}

/// Step 2: the combined 0s-and-1s binary cross-moment
/// `gamma_x(tau) + gamma_(1-x)(tau)`, estimated as the match frequency minus
/// the products of the marginal frequencies.
pub fn binary_cross_moment(rec: &BinaryRecord, i: usize, j: usize, tau: usize) -> f64 {
    let t_len = rec.t_len();
    assert!(tau < t_len);
    let xi = rec.x(i);
    let xj = rec.x(j);
    let mut matches = 0usize;
    for t in tau..t_len {
        if xi[t] == xj[t - tau] {
            matches += 1;
        }
    }
    let xb_i = rec.x_mean(i);
    let xb_j = rec.x_mean(j);
    matches as f64 / (t_len - tau) as f64 - xb_i * xb_j - (1.0 - xb_i) * (1.0 - xb_j)
}

/// Correlation stack with the entries where the inverse map had to clamp.
#[derive(Debug, Clone)]
pub struct CorrelationEstimate {
    pub corr: Vec<Matrix>,
    /// `(tau, i, j)` triples that fell outside the achievable range.
    pub clamped: Vec<(usize, usize, usize)>,
}

// keeps the correlation system finitely conditioned after clamping
const CORR_CLAMP: f64 = 1e-7;

/// Step 3: correlations for lags `0..=max_lag` by inverting the arcsine map
/// at the estimated threshold pair. Lag-0 diagonal entries are forced to 1.
pub fn estimate_correlations(
    rec: &BinaryRecord,
    thr: &ThresholdEstimate,
    max_lag: usize,
) -> CorrelationEstimate {
    let d = rec.d();
    let bound = 1.0 - CORR_CLAMP;
    let mut corr = Vec::with_capacity(max_lag + 1);
    let mut clamped = Vec::new();
    for tau in 0..=max_lag {
        let mut r = Matrix::zeros(d, d);
        for i in 0..d {
            let j_start = if tau == 0 { i } else { 0 };
            for j in j_start..d {
                if tau == 0 && i == j {
                    r[(i, i)] = 1.0;
                    continue;
                }
                let v = 0.5 * binary_cross_moment(rec, i, j, tau);
                let inv = psi_inverse(thr.eta_hat[i], thr.eta_hat[j], v);
                let mut rho = inv.rho;
                let mut was_clamped = inv.clamped;
                if rho.abs() > bound {
                    rho = rho.clamp(-bound, bound);
                    was_clamped = true;
                }
                if was_clamped {
                    clamped.push((tau, i, j));
                }
                r[(i, j)] = rho;
                if tau == 0 {
                    r[(j, i)] = rho;
                }
            }
        }
        corr.push(r);
    }
    CorrelationEstimate { corr, clamped }
}

/// Full thresholded-scheme output. `model_hat` is absent whenever any series
/// flag fired; the scheme treats failure as global.
#[derive(Debug, Clone)]
pub struct Scheme1Result {
    pub thresholds: ThresholdEstimate,
    /// `sigma_i = c_i / eta_i`; empty on failure.
    pub sigma_hat: Vec<f64>,
    pub corr_hat: Option<CorrelationEstimate>,
    pub unscaled: Option<UnscaledEstimate>,
    pub model_hat: Option<VarEstimate>,
}

impl Scheme1Result {
    pub fn failed(&self) -> bool {
        self.model_hat.is_none()
    }
}

/// Runs the whole pipeline on a thresholded record for a model of order `p`.
///
/// The rescaling uses the estimated scales on both the coefficients and the
/// noise, so the noise covariance comes back in absolute units.
pub fn estimate_model(rec: &BinaryRecord, p: usize) -> Result<Scheme1Result> {
    let thresholds = estimate_thresholds(rec)?;
    if thresholds.failed() {
        return Ok(Scheme1Result {
            thresholds,
            sigma_hat: Vec::new(),
            corr_hat: None,
            unscaled: None,
            model_hat: None,
        });
    }
    let c = rec.thresholds().expect("checked in estimate_thresholds");
    let sigma_hat: Vec<f64> = c.iter().zip(&thresholds.eta_hat).map(|(ci, eta)| ci / eta).collect();
    let corr_hat = estimate_correlations(rec, &thresholds, p);
    let unscaled = solve_correlation_system(&corr_hat.corr)?;
    let model_hat = rescale_with_sigmas(&unscaled, &sigma_hat);
    Ok(Scheme1Result {
        thresholds,
        sigma_hat,
        corr_hat: Some(corr_hat),
        unscaled: Some(unscaled),
        model_hat: Some(model_hat),
    })
}

/// Lower bound on the failure probability when the largest standard threshold
/// is `eta_max`: `1 - T exp(-eta_max^2 / 2) / (eta_max sqrt(2 pi))`. Often
/// negative (uninformative) for moderate thresholds.
pub fn failure_lower_bound(eta_max: f64, t_len: usize) -> f64 {
    debug_assert!(eta_max > 0.0);
    1.0 - t_len as f64 * (-0.5 * eta_max * eta_max).exp()
        / (eta_max * (2.0 * std::f64::consts::PI).sqrt())
}
