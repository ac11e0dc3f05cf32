//! VAR(d, p) models: validation, companion-form reduction, exact moments via
//! the discrete Lyapunov equation, trajectory simulation, and random model
//! generation by acceptance-rejection on the spectral radius.

use crate::error::{Error, Result};
use crate::matrix::{stationary_covariance, Matrix, TOL};
use crate::rng::Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A Gaussian vector autoregression `Z(t) = sum A_s Z(t-s) + E(t)` with
/// innovation covariance `Sigma_E`. The mean is fixed at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct VarModel {
    d: usize,
    p: usize,
    coeff: Vec<Matrix>,
    noise_cov: Matrix,
    spectral_radius: f64,
}

impl VarModel {
    pub fn new(coeff: Vec<Matrix>, noise_cov: Matrix) -> Result<Self> {
        if coeff.is_empty() {
            return Err(Error::InvalidModel("order must be at least 1".into()));
        }
        let d = noise_cov.rows();
        if !noise_cov.is_square() {
            return Err(Error::InvalidModel("noise covariance must be square".into()));
        }
        for (s, a) in coeff.iter().enumerate() {
            if a.rows() != d || a.cols() != d {
                return Err(Error::InvalidModel(format!("coefficient {} is not {d}x{d}", s + 1)));
            }
            if a.data().iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidModel("coefficients must be finite".into()));
            }
        }
        let asym = noise_cov.max_asymmetry();
        if asym > TOL.symmetry_abs {
            return Err(Error::NotSymmetric(asym));
        }
        let (eigs, _) = noise_cov.sym_eig()?;
        if eigs[0] < -1e-8 {
            return Err(Error::InvalidModel(format!(
                "noise covariance is not positive semi-definite (min eigenvalue {:.3e})",
                eigs[0]
            )));
        }
        let radius = companion_of(&coeff).spectral_radius();
        Ok(VarModel { d, p: coeff.len(), coeff, noise_cov, spectral_radius: radius })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn coeff(&self) -> &[Matrix] {
        &self.coeff
    }

    pub fn noise_cov(&self) -> &Matrix {
        &self.noise_cov
    }

    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    pub fn is_stationary(&self) -> bool {
        self.spectral_radius < 1.0 - TOL.stationarity_margin
    }

    /// Reduces the model to first order: the `pd x pd` companion matrix with
    /// `A_1..A_p` across the first block row and identity sub-diagonal blocks,
    /// paired with the extended noise covariance (`Sigma_E` in the top-left
    /// block, zeros elsewhere).
    pub fn companion_form(&self) -> (Matrix, Matrix) {
        let n = self.d * self.p;
        let mut noise = Matrix::zeros(n, n);
        noise.set_block(0, 0, &self.noise_cov);
        (companion_of(&self.coeff), noise)
    }

    /// Exact lagged covariance and correlation matrices for lags `0..=max_lag`.
    ///
    /// `Gamma(0..p-1)` come out of the stationary covariance of the companion
    /// system; higher lags follow the Yule-Walker recurrence
    /// `Gamma(tau) = sum_s A_s Gamma(tau - s)`.
    pub fn true_moments(&self, max_lag: usize) -> Result<MomentSet> {
        if !self.is_stationary() {
            return Err(Error::NotStationary(self.spectral_radius));
        }
        let (companion, ext_noise) = self.companion_form();
        let big = stationary_covariance(&companion, &ext_noise)?;
        let mut gamma: Vec<Matrix> = (0..self.p.min(max_lag + 1))
            .map(|k| big.block(0, k * self.d, self.d, self.d))
            .collect();
        gamma[0] = gamma[0].symmetrized();
        for tau in gamma.len()..=max_lag {
            let mut g = Matrix::zeros(self.d, self.d);
            for (s, a) in self.coeff.iter().enumerate() {
                g = g.add(&a.mul(&gamma[tau - s - 1]));
            }
            gamma.push(g);
        }
        MomentSet::from_gammas(gamma)
    }

    /// Simulates `t_len` observations after discarding `burn_in` steps from a
    /// zero initial state. Output is a `d x t_len` matrix, one series per row.
    pub fn simulate(&self, t_len: usize, burn_in: usize, seed: u64) -> Result<Matrix> {
        if !self.is_stationary() {
            return Err(Error::NotStationary(self.spectral_radius));
        }
        assert!(t_len >= 1);
        let chol = self.noise_cov.cholesky()?;
        let mut rng = Rng::new(seed);
        let mut history: Vec<Vec<f64>> = vec![vec![0.0; self.d]; self.p];
        let mut out = Matrix::zeros(self.d, t_len);
        let mut gauss = vec![0.0; self.d];
        for t in 0..burn_in + t_len {
            for g in gauss.iter_mut() {
                *g = rng.standard_normal();
            }
            let mut z = vec![0.0; self.d];
            for i in 0..self.d {
                // noise = L g
                let mut acc = 0.0;
                for k in 0..=i {
                    acc += chol[(i, k)] * gauss[k];
                }
                z[i] = acc;
            }
            for (s, a) in self.coeff.iter().enumerate() {
                let past = &history[s];
                for i in 0..self.d {
                    let mut acc = 0.0;
                    for j in 0..self.d {
                        acc += a[(i, j)] * past[j];
                    }
                    z[i] += acc;
                }
            }
            history.rotate_right(1);
            history[0].copy_from_slice(&z);
            if t >= burn_in {
                for i in 0..self.d {
                    out[(i, t - burn_in)] = z[i];
                }
            }
        }
        Ok(out)
    }

    /// Burn-in long enough for the transient to die out: `10 p / (1 - radius)`
    /// rounded up, at least 500.
    pub fn default_burn_in(&self) -> usize {
        let mixing = 10.0 * self.p as f64 / (1.0 - self.spectral_radius).max(1e-3);
        (mixing.ceil() as usize).max(500)
    }
}

fn companion_of(coeff: &[Matrix]) -> Matrix {
    let d = coeff[0].rows();
    let p = coeff.len();
    if p == 1 {
        return coeff[0].clone();
    }
    let n = d * p;
    let mut f = Matrix::zeros(n, n);
    for (s, a) in coeff.iter().enumerate() {
        f.set_block(0, s * d, a);
    }
    for b in 1..p {
        f.set_block(b * d, (b - 1) * d, &Matrix::identity(d));
    }
    f
}

/// Draws a random stationary VAR(d, 1): i.i.d. standard normal entries scaled
/// by `1/sqrt(d)`, resampled until the spectral radius lands inside `band`,
/// with identity noise covariance.
pub fn random_model(d: usize, seed: u64, band: (f64, f64)) -> Result<VarModel> {
    random_model_tries(d, seed, band).map(|(m, _)| m)
}

pub(crate) fn random_model_tries(d: usize, seed: u64, band: (f64, f64)) -> Result<(VarModel, usize)> {
    let (lo, hi) = band;
    if !(0.0 < lo && lo < hi && hi < 1.0) {
        return Err(Error::Domain(format!("spectral band must satisfy 0 < lo < hi < 1, got ({lo}, {hi})")));
    }
    const MAX_TRIES: usize = 100_000;
    let mut rng = Rng::new(seed);
    let scale = 1.0 / (d as f64).sqrt();
    for tries in 1..=MAX_TRIES {
        let mut a = Matrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                a[(i, j)] = scale * rng.standard_normal();
            }
        }
        let radius = a.spectral_radius();
        if radius >= lo && radius <= hi {
            let model = VarModel::new(vec![a], Matrix::identity(d))?;
            return Ok((model, tries));
        }
    }
    Err(Error::GenerationTimeout(MAX_TRIES))
}

/// Equivalence class of models sharing coefficients, with the noise
/// covariance normalized to trace `d`. The threshold-free scheme can only
/// identify models up to this normalization.
#[derive(Debug, Clone)]
pub struct ModelClass {
    pub coeff: Vec<Matrix>,
    pub noise_cov_normalized: Matrix,
}

impl ModelClass {
    pub fn new(coeff: Vec<Matrix>, noise_cov: Matrix) -> Result<Self> {
        let d = noise_cov.rows() as f64;
        let tr = noise_cov.trace();
        if !(tr > 0.0) {
            return Err(Error::Domain(format!("noise covariance trace must be positive, got {tr}")));
        }
        Ok(ModelClass { coeff, noise_cov_normalized: noise_cov.scale(d / tr) })
    }

    pub fn of_model(model: &VarModel) -> Self {
        ModelClass::new(model.coeff().to_vec(), model.noise_cov().clone())
            .expect("valid model has positive noise trace")
    }
}

/// Lagged covariance matrices `Gamma(0..=max_lag)` with the derived
/// correlations `R(tau) = D^-1/2 Gamma(tau) D^-1/2` and standard deviations.
#[derive(Debug, Clone)]
pub struct MomentSet {
    gamma: Vec<Matrix>,
    corr: Vec<Matrix>,
    sigmas: Vec<f64>,
}

impl MomentSet {
    pub fn from_gammas(gamma: Vec<Matrix>) -> Result<Self> {
        assert!(!gamma.is_empty());
        let d = gamma[0].rows();
        let mut sigmas = Vec::with_capacity(d);
        for i in 0..d {
            let v = gamma[0][(i, i)];
            if !(v > 0.0) {
                return Err(Error::Domain(format!("variance of series {i} is not positive ({v})")));
            }
            sigmas.push(v.sqrt());
        }
        let corr = gamma
            .iter()
            .map(|g| Matrix::from_fn(d, d, |i, j| g[(i, j)] / (sigmas[i] * sigmas[j])))
            .collect();
        Ok(MomentSet { gamma, corr, sigmas })
    }

    pub fn d(&self) -> usize {
        self.gamma[0].rows()
    }

    pub fn max_lag(&self) -> usize {
        self.gamma.len() - 1
    }

    pub fn gamma(&self) -> &[Matrix] {
        &self.gamma
    }

    pub fn corr(&self) -> &[Matrix] {
        &self.corr
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    /// True ratio matrix `r[i][j] = sigma_i / sigma_j`.
    pub fn ratio_matrix(&self) -> Matrix {
        let d = self.d();
        Matrix::from_fn(d, d, |i, j| self.sigmas[i] / self.sigmas[j])
    }

    /// Max residual of `Gamma(tau) = sum_s A_s Gamma(tau-s) + [tau=0] Sigma`
    /// over the stored lags, using `Gamma(-tau) = Gamma(tau)'`.
    pub fn yule_walker_residual(&self, coeff: &[Matrix], noise_cov: &Matrix) -> f64 {
        let mut worst = 0.0f64;
        for tau in 0..=self.max_lag() {
            let mut rhs = if tau == 0 { noise_cov.clone() } else { Matrix::zeros(self.d(), self.d()) };
            for (s, a) in coeff.iter().enumerate() {
                let lag = tau as isize - (s as isize + 1);
                let g = if lag >= 0 {
                    self.gamma[lag as usize].clone()
                } else {
                    self.gamma[(-lag) as usize].transpose()
                };
                rhs = rhs.add(&a.mul(&g));
            }
            worst = worst.max(self.gamma[tau].sub(&rhs).max_abs());
        }
        worst
    }
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    d: usize,
    p: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "Sigma_E")]
    sigma_e: Vec<Vec<f64>>,
}

impl Serialize for VarModel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ModelJson {
            d: self.d,
            p: self.p,
            a: self.coeff.iter().map(Matrix::to_nested).collect(),
            sigma_e: self.noise_cov.to_nested(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for VarModel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = ModelJson::deserialize(deserializer)?;
        if raw.a.len() != raw.p {
            return Err(D::Error::custom(format!("expected {} coefficient matrices, got {}", raw.p, raw.a.len())));
        }
        let coeff: Vec<Matrix> = raw.a.iter().map(|m| Matrix::from_rows(m)).collect();
        let noise = Matrix::from_rows(&raw.sigma_e);
        if noise.rows() != raw.d {
            return Err(D::Error::custom("Sigma_E dimension disagrees with d"));
        }
        VarModel::new(coeff, noise).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_model_1() -> VarModel {
        VarModel::new(
            vec![Matrix::from_rows(&[vec![0.25, 1.0], vec![0.0, -0.2]])],
            Matrix::identity(2),
        )
        .unwrap()
    }

    #[test]
    fn companion_is_identity_transform_for_p1() {
        let m = table_model_1();
        let (f, q) = m.companion_form();
        assert_eq!(&f, &m.coeff()[0]);
        assert_eq!(&q, m.noise_cov());
    }

    #[test]
    fn scalar_ar2_companion_layout() {
        let m = VarModel::new(
            vec![
                Matrix::from_rows(&[vec![0.3]]),
                Matrix::from_rows(&[vec![0.2]]),
            ],
            Matrix::identity(1),
        )
        .unwrap();
        let (f, q) = m.companion_form();
        let expect = Matrix::from_rows(&[vec![0.3, 0.2], vec![1.0, 0.0]]);
        assert_eq!(f, expect);
        assert_eq!(q[(0, 0)], 1.0);
        assert_eq!(q[(1, 1)], 0.0);
    }

    #[test]
    fn companion_char_poly_matches_lag_polynomial() {
        // det(I - F z) and det(I - A1 z - A2 z^2) agree as polynomials, which
        // pins the companion eigenvalues to the inverted lag-polynomial roots.
        let a1 = Matrix::from_rows(&[vec![0.4, 0.1], vec![-0.2, 0.3]]);
        let a2 = Matrix::from_rows(&[vec![0.1, 0.05], vec![0.0, -0.15]]);
        let m = VarModel::new(vec![a1.clone(), a2.clone()], Matrix::identity(2)).unwrap();
        let (f, _) = m.companion_form();
        for &z in &[0.3, -0.7, 1.1, 2.0, -1.6, 0.05] {
            let lhs = Matrix::identity(4).sub(&f.scale(z)).det();
            let rhs = Matrix::identity(2).sub(&a1.scale(z)).sub(&a2.scale(z * z)).det();
            assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()), "z = {z}");
        }
    }

    #[test]
    fn moments_of_white_noise() {
        let m = VarModel::new(vec![Matrix::zeros(2, 2)], Matrix::identity(2)).unwrap();
        let mom = m.true_moments(3).unwrap();
        assert!(mom.gamma()[0].sub(&Matrix::identity(2)).max_abs() < 1e-12);
        for tau in 1..=3 {
            assert!(mom.gamma()[tau].max_abs() < 1e-12);
        }
    }

    #[test]
    fn scalar_ar1_closed_form() {
        let m = VarModel::new(vec![Matrix::from_rows(&[vec![0.5]])], Matrix::identity(1)).unwrap();
        let mom = m.true_moments(4).unwrap();
        for tau in 0..=4 {
            let expect = 0.5f64.powi(tau as i32) * 4.0 / 3.0;
            assert!((mom.gamma()[tau][(0, 0)] - expect).abs() < 1e-10, "tau = {tau}");
        }
    }

    #[test]
    fn moments_satisfy_recurrence() {
        let m = table_model_1();
        let mom = m.true_moments(5).unwrap();
        assert!(mom.yule_walker_residual(m.coeff(), m.noise_cov()) <= 1e-8);
        let m2 = VarModel::new(
            vec![
                Matrix::from_rows(&[vec![0.4, 0.1], vec![-0.2, 0.3]]),
                Matrix::from_rows(&[vec![0.1, 0.05], vec![0.0, -0.15]]),
            ],
            Matrix::from_rows(&[vec![1.0, 0.3], vec![0.3, 2.0]]),
        )
        .unwrap();
        let mom2 = m2.true_moments(6).unwrap();
        assert!(mom2.yule_walker_residual(m2.coeff(), m2.noise_cov()) <= 1e-8);
    }

    #[test]
    fn simulate_is_deterministic_and_scales() {
        let m = table_model_1();
        let a = m.simulate(100, 50, 9).unwrap();
        let b = m.simulate(100, 50, 9).unwrap();
        assert_eq!(a, b);
        // A = 0, Sigma = eps I gives samples on the sqrt(eps) scale
        let eps = 1e-6;
        let tiny = VarModel::new(vec![Matrix::zeros(2, 2)], Matrix::identity(2).scale(eps)).unwrap();
        let traj = tiny.simulate(1000, 0, 1).unwrap();
        let max = traj.max_abs();
        assert!(max < 10.0 * eps.sqrt() && max > 0.0);
    }

    #[test]
    fn simulated_covariance_approaches_truth() {
        let m = table_model_1();
        let t = 1_000_000;
        let traj = m.simulate(t, m.default_burn_in(), 4).unwrap();
        let mom = m.true_moments(0).unwrap();
        let mut emp = Matrix::zeros(2, 2);
        for idx in 0..t {
            for i in 0..2 {
                for j in 0..2 {
                    emp[(i, j)] += traj[(i, idx)] * traj[(j, idx)];
                }
            }
        }
        emp = emp.scale(1.0 / t as f64);
        for i in 0..2 {
            for j in 0..2 {
                let truth = mom.gamma()[0][(i, j)];
                assert!((emp[(i, j)] - truth).abs() < 0.01 * truth.abs().max(1.0), "({i},{j})");
            }
        }
    }

    #[test]
    fn random_models_live_in_the_band() {
        for d in 1..=8 {
            let (m, tries) = random_model_tries(d, 1000 + d as u64, (0.5, 0.85)).unwrap();
            assert!(m.spectral_radius() >= 0.5 && m.spectral_radius() <= 0.85, "d = {d}");
            assert!(tries <= 10_000, "d = {d} took {tries} draws");
            assert_eq!(m.p(), 1);
            assert_eq!(m.noise_cov(), &Matrix::identity(d));
        }
    }

    #[test]
    fn random_model_rejects_bad_band() {
        assert!(random_model(2, 1, (0.9, 0.5)).is_err());
        assert!(random_model(2, 1, (0.0, 0.5)).is_err());
    }

    #[test]
    fn model_class_normalizes_trace() {
        let m = VarModel::new(
            vec![Matrix::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.5]])],
            Matrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 6.0]]),
        )
        .unwrap();
        let class = ModelClass::of_model(&m);
        assert!((class.noise_cov_normalized.trace() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = table_model_1();
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains("\"A\""));
        assert!(text.contains("\"Sigma_E\""));
        let back: VarModel = serde_json::from_str(&text).unwrap();
        assert_eq!(m, back);
        // a non-decimal value survives exactly too
        let m2 = VarModel::new(
            vec![Matrix::from_rows(&[vec![1.0 / 3.0]])],
            Matrix::identity(1),
        )
        .unwrap();
        let back2: VarModel = serde_json::from_str(&serde_json::to_string(&m2).unwrap()).unwrap();
        assert_eq!(m2.coeff()[0][(0, 0)], back2.coeff()[0][(0, 0)]);
    }

    #[test]
    fn constructor_rejects_bad_noise() {
        let asym = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]);
        assert!(VarModel::new(vec![Matrix::zeros(2, 2)], asym).is_err());
        let indef = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(VarModel::new(vec![Matrix::zeros(2, 2)], indef).is_err());
    }
}
