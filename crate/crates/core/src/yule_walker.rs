//! Yule-Walker block systems: recover `(A_1..A_p, Sigma_E)` from lagged
//! covariances, the unscaled analogue from correlations, ratio-based
//! rescaling, and the least-squares baseline on continuous data.
//!
//! The equations for lags `0..=p` stack into `X G = M` where
//! `X = (A_1 .. A_p Sigma_E)`, `M = (Gamma(1) .. Gamma(p) Gamma(0))` and `G`
//! carries the Toeplitz-like blocks `Gamma(c - r)` (transposed below the
//! diagonal), the lag-0 column `Gamma(r + 1)'`, and an identity corner.
//! Replacing covariances by correlations yields the similarity-transformed
//! coefficients and the doubly normalized noise matrix.

use crate::error::{Error, Result};
use crate::matrix::{Matrix, TOL};
use crate::model::MomentSet;

/// Coefficients recovered from covariances (or rescaled back to natural units).
#[derive(Debug, Clone)]
pub struct VarEstimate {
    pub coeff: Vec<Matrix>,
    pub noise_cov: Matrix,
}

/// What correlations alone identify: `A~_s = D^-1/2 A_s D^1/2` and
/// `Sigma~_E = D^-1/2 Sigma_E D^-1/2`. Off-diagonal entries need variance
/// ratios before they mean anything in natural units.
#[derive(Debug, Clone)]
pub struct UnscaledEstimate {
    pub a_tilde: Vec<Matrix>,
    pub sigma_tilde: Matrix,
}

/// Positive ratio matrix `r[i][j] ~ sigma_i / sigma_j` with unit diagonal.
#[derive(Debug, Clone)]
pub struct RatioMatrix {
    r: Matrix,
}

impl RatioMatrix {
    pub fn from_matrix(r: Matrix) -> Result<Self> {
        assert!(r.is_square());
        for i in 0..r.rows() {
            if (r[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::Domain(format!("ratio diagonal must be 1, got {}", r[(i, i)])));
            }
            for j in 0..r.cols() {
                if !(r[(i, j)] > 0.0) {
                    return Err(Error::Domain(format!("ratio ({i},{j}) must be positive, got {}", r[(i, j)])));
                }
            }
        }
        Ok(RatioMatrix { r })
    }

    pub fn from_sigmas(sigmas: &[f64]) -> Result<Self> {
        if let Some(s) = sigmas.iter().find(|s| !(**s > 0.0)) {
            return Err(Error::Domain(format!("scale must be positive, got {s}")));
        }
        let d = sigmas.len();
        Ok(RatioMatrix { r: Matrix::from_fn(d, d, |i, j| sigmas[i] / sigmas[j]) })
    }

    pub fn all_ones(d: usize) -> Self {
        RatioMatrix { r: Matrix::from_fn(d, d, |_, _| 1.0) }
    }

    pub fn d(&self) -> usize {
        self.r.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.r[(i, j)]
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.r
    }

    /// Largest deviation of `r[i][j] * r[j][i]` from 1.
    pub fn max_reciprocal_deviation(&self) -> f64 {
        let d = self.d();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                worst = worst.max((self.r[(i, j)] * self.r[(j, i)] - 1.0).abs());
            }
        }
        worst
    }
}

fn assemble_and_solve(mats: &[Matrix]) -> Result<(Vec<Matrix>, Matrix)> {
    let p = mats.len() - 1;
    assert!(p >= 1, "need moments up to at least lag 1");
    let d = mats[0].rows();
    let n = d * (p + 1);
    let mut big = Matrix::zeros(n, n);
    for r in 0..p {
        for c in 0..p {
            let block = if c >= r { mats[c - r].clone() } else { mats[r - c].transpose() };
            big.set_block(r * d, c * d, &block);
        }
        big.set_block(r * d, p * d, &mats[r + 1].transpose());
    }
    big.set_block(p * d, p * d, &Matrix::identity(d));
    let cond = big.condition_inf();
    if !cond.is_finite() || cond > TOL.condition_limit {
        return Err(Error::SingularSystem(cond));
    }
    let mut rhs = Matrix::zeros(d, n);
    for c in 0..p {
        rhs.set_block(0, c * d, &mats[c + 1]);
    }
    rhs.set_block(0, p * d, &mats[0]);
    // X big = rhs  <=>  big' X' = rhs'
    let xt = big.transpose().solve(&rhs.transpose()).map_err(|e| match e {
        Error::SingularMatrix { .. } => Error::SingularSystem(cond),
        other => other,
    })?;
    let x = xt.transpose();
    let coeff = (0..p).map(|s| x.block(0, s * d, d, d)).collect();
    Ok((coeff, x.block(0, p * d, d, d)))
}

/// Solves the covariance system for the model order implied by the moments
/// (lags `0..=p` present means order `p`).
pub fn solve_covariance_system(moments: &MomentSet) -> Result<VarEstimate> {
    let (coeff, noise_cov) = assemble_and_solve(moments.gamma())?;
    Ok(VarEstimate { coeff, noise_cov })
}

/// Same block assembly on correlation matrices `R(0..=p)`.
pub fn solve_correlation_system(corr: &[Matrix]) -> Result<UnscaledEstimate> {
    let (a_tilde, sigma_tilde) = assemble_and_solve(corr)?;
    Ok(UnscaledEstimate { a_tilde, sigma_tilde })
}

/// Rescales unscaled coefficients entrywise, `a[i][j] = r[i][j] * a~[i][j]`,
/// and the noise through the first column, `s[i][j] = r[i][0] r[j][0] s~[i][j]`
/// (which recovers `Sigma_E / sigma_1^2`).
pub fn rescale(u: &UnscaledEstimate, ratios: &RatioMatrix) -> VarEstimate {
    let d = u.sigma_tilde.rows();
    let coeff = u
        .a_tilde
        .iter()
        .map(|a| Matrix::from_fn(d, d, |i, j| ratios.get(i, j) * a[(i, j)]))
        .collect();
    let noise_cov =
        Matrix::from_fn(d, d, |i, j| ratios.get(i, 0) * ratios.get(j, 0) * u.sigma_tilde[(i, j)]);
    VarEstimate { coeff, noise_cov }
}

/// Rescale against absolute scales, `a[i][j] = (sigma_i / sigma_j) a~[i][j]`
/// and `s[i][j] = sigma_i sigma_j s~[i][j]`. Scales may be negative here: the
/// thresholded scheme can produce sign-flipped scale estimates in bad samples
/// and they must flow through rather than abort.
pub fn rescale_with_sigmas(u: &UnscaledEstimate, sigmas: &[f64]) -> VarEstimate {
    let d = u.sigma_tilde.rows();
    assert_eq!(sigmas.len(), d);
    let coeff = u
        .a_tilde
        .iter()
        .map(|a| Matrix::from_fn(d, d, |i, j| sigmas[i] / sigmas[j] * a[(i, j)]))
        .collect();
    let noise_cov = Matrix::from_fn(d, d, |i, j| sigmas[i] * sigmas[j] * u.sigma_tilde[(i, j)]);
    VarEstimate { coeff, noise_cov }
}

/// Empirical lagged covariances `(1/(T-tau)) sum z(t) z(t-tau)'` for
/// `tau = 0..=max_lag` (the process is zero-mean by assumption).
pub fn empirical_moments(traj: &Matrix, max_lag: usize) -> Result<MomentSet> {
    let d = traj.rows();
    let t_len = traj.cols();
    assert!(t_len > max_lag, "trajectory shorter than requested lag");
    let mut gammas = Vec::with_capacity(max_lag + 1);
    for tau in 0..=max_lag {
        let mut g = Matrix::zeros(d, d);
        for t in tau..t_len {
            for i in 0..d {
                let zi = traj[(i, t)];
                for j in 0..d {
                    g[(i, j)] += zi * traj[(j, t - tau)];
                }
            }
        }
        gammas.push(g.scale(1.0 / (t_len - tau) as f64));
    }
    MomentSet::from_gammas(gammas)
}

/// Least-squares baseline on the raw (unquantized) data: empirical moments
/// fed straight into the covariance system.
pub fn mlse_continuous(traj: &Matrix, p: usize) -> Result<VarEstimate> {
    let d = traj.rows();
    if traj.cols() <= d * (p + 1) {
        return Err(Error::Domain(format!(
            "need more than d(p+1) = {} samples, got {}",
            d * (p + 1),
            traj.cols()
        )));
    }
    let moments = empirical_moments(traj, p).map_err(|_| Error::SingularSystem(f64::INFINITY))?;
    solve_covariance_system(&moments)
}
