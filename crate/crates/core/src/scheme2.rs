//! Threshold-free estimation from sign and predominance bits: transition
//! probabilities, arcsine correlations, variance-ratio recovery in three
//! flavors (per-pair, eigenvector-optimized, star-chained), the model-class
//! assembly, and the variance predictors used to audit the estimator.

use crate::error::{Error, Result};
use crate::gaussians::{arcsine_correlation, predominance_inverse};
use crate::matrix::Matrix;
use crate::model::ModelClass;
use crate::quantize::BinaryRecord;
use crate::yule_walker::{rescale, solve_correlation_system, RatioMatrix, UnscaledEstimate};

/// How the variance ratios are computed from the predominance measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioVariant {
    /// Each ratio from its own pairwise measurement.
    Simple,
    /// Pooled over all pairs through the smallest eigenvector of the
    /// quadratic ratio loss.
    Optimized,
    /// Chained through sensor 0 only, needing just `d - 1` measurements.
    Efficient,
    /// Log-domain least squares; kept for comparison, not a default.
    LogLeastSquares,
}

impl RatioVariant {
    pub fn name(self) -> &'static str {
        match self {
            RatioVariant::Simple => "simple",
            RatioVariant::Optimized => "optimized",
            RatioVariant::Efficient => "efficient",
            RatioVariant::LogLeastSquares => "log-ls",
        }
    }
}

/// Transition probability estimate: the fraction of steps where the sign of
/// series `i` at time `t` matches the sign of series `j` at `t - tau`. Both
/// 0 and 1 events count, which is what makes this the full-likelihood form.
pub fn transition_mle(rec: &BinaryRecord, i: usize, j: usize, tau: usize) -> f64 {
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
    matches as f64 / (t_len - tau) as f64
}

/// Correlation matrices `R(0..=max_lag)` via the arcsine law,
/// `rho = sin(pi (lambda - 1/2))`. Lag-0 diagonal forced to 1.
pub fn estimate_correlations(rec: &BinaryRecord, max_lag: usize) -> Vec<Matrix> {
    let d = rec.d();
    let mut out = Vec::with_capacity(max_lag + 1);
    for tau in 0..=max_lag {
        let mut r = Matrix::zeros(d, d);
        for i in 0..d {
            let j_start = if tau == 0 { i } else { 0 };
            for j in j_start..d {
                if tau == 0 && i == j {
                    r[(i, i)] = 1.0;
                    continue;
                }
                let rho = arcsine_correlation(transition_mle(rec, i, j, tau));
                r[(i, j)] = rho;
                if tau == 0 {
                    r[(j, i)] = rho;
                }
            }
        }
        out.push(r);
    }
    out
}

/// Ratio estimates plus the pairs whose empirical predominance frequency had
/// to be clamped away from 0 or 1.
#[derive(Debug, Clone)]
pub struct RatioEstimate {
    pub ratios: RatioMatrix,
    pub clamped_pairs: Vec<(usize, usize)>,
}

// the inverse predominance map is singular at frequencies 0 and 1; a
// T-sample frequency resolves nothing finer than 1/(2T)
fn clamp_frequency(q: f64, t_len: usize) -> (f64, bool) {
    let lo = 1.0 / (2.0 * t_len as f64);
    let hi = 1.0 - lo;
    if q < lo {
        (lo, true)
    } else if q > hi {
        (hi, true)
    } else {
        (q, false)
    }
}

fn pair_ratio(rec: &BinaryRecord, corr0: &Matrix, i: usize, j: usize) -> Result<(f64, bool)> {
    let edge = rec
        .edge_index(i, j)
        .ok_or(Error::MissingEdge(i.min(j), i.max(j)))?;
    let (q_bar, mut clamped) = clamp_frequency(rec.q_mean(edge), rec.t_len());
    // the stored direction is (min, max); flip the frequency when asked for
    // the reverse ratio
    let q_dir = if i < j { q_bar } else { 1.0 - q_bar };
    let mut rho = corr0[(i, j)];
    if rho.abs() >= 1.0 {
        rho = rho.clamp(-(1.0 - 1e-12), 1.0 - 1e-12);
        clamped = true;
    }
    Ok((predominance_inverse(q_dir, rho)?, clamped))
}

/// Per-pair ratios: invert the predominance law for every measured pair
/// `(i, j)`, `i < j`, and define the reverse direction as the reciprocal.
/// Needs every pair in the record's graph.
pub fn estimate_ratios_simple(rec: &BinaryRecord, corr0: &Matrix) -> Result<RatioEstimate> {
    let d = rec.d();
    let mut r = Matrix::from_fn(d, d, |_, _| 1.0);
    let mut clamped_pairs = Vec::new();
    for i in 0..d {
        for j in (i + 1)..d {
            let (rij, clamped) = pair_ratio(rec, corr0, i, j)?;
            if clamped {
                clamped_pairs.push((i, j));
            }
            r[(i, j)] = rij;
            r[(j, i)] = 1.0 / rij;
        }
    }
    Ok(RatioEstimate { ratios: RatioMatrix::from_matrix(r)?, clamped_pairs })
}

/// The quadratic-form matrix of the ratio loss
/// `l(s) = sum_(i,j) (s_i - r[i][j] s_j)^2`:
/// diagonal `(d - 2) + sum_k r[k][i]^2`, off-diagonal `-(r[i][j] + r[j][i])`.
pub fn ratio_loss_matrix(ratios: &RatioMatrix) -> Matrix {
    let d = ratios.d();
    Matrix::from_fn(d, d, |i, j| {
        if i == j {
            (d as f64 - 2.0) + (0..d).map(|k| ratios.get(k, i).powi(2)).sum::<f64>()
        } else {
            -(ratios.get(i, j) + ratios.get(j, i))
        }
    })
}

/// Direct evaluation of the ratio loss, used to validate the quadratic form.
pub fn ratio_loss(ratios: &RatioMatrix, sigmas: &[f64]) -> f64 {
    let d = ratios.d();
    let mut total = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                let e = sigmas[i] - ratios.get(i, j) * sigmas[j];
                total += e * e;
            }
        }
    }
    total
}

/// Pooled ratios: the scales minimizing the ratio loss on the unit sphere are
/// the eigenvector of the smallest eigenvalue of the loss matrix; its
/// components all share one sign and none vanish, so the ratios are well
/// defined after flipping the vector positive.
pub fn estimate_ratios_optimized(simple: &RatioMatrix) -> Result<RatioMatrix> {
    let d = simple.d();
    if d < 2 {
        return Ok(simple.clone());
    }
    let loss = ratio_loss_matrix(simple);
    let (_, vectors) = loss.sym_eig()?;
    let mut sigma: Vec<f64> = (0..d).map(|i| vectors[(i, 0)]).collect();
    let largest = sigma
        .iter()
        .cloned()
        .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
    if largest < 0.0 {
        for s in sigma.iter_mut() {
            *s = -*s;
        }
    }
    if sigma.iter().any(|&s| s <= 1e-12) {
        return Err(Error::Domain("degenerate scale eigenvector".into()));
    }
    RatioMatrix::from_sigmas(&sigma)
}

/// Data-efficient ratios: only the comparisons against sensor 0 are used and
/// everything else is chained, `r[i][j] = r[i][0] / r[j][0]`. Consistent by
/// construction; needs the star edges `(0, j)`.
pub fn estimate_ratios_efficient(rec: &BinaryRecord, corr0: &Matrix) -> Result<RatioEstimate> {
    let d = rec.d();
    let mut base = vec![1.0; d];
    let mut clamped_pairs = Vec::new();
    for j in 1..d {
        let (r0j, clamped) = pair_ratio(rec, corr0, 0, j)?;
        if clamped {
            clamped_pairs.push((0, j));
        }
        base[j] = 1.0 / r0j; // sigma_j relative to sigma_0
    }
    let r = Matrix::from_fn(d, d, |i, j| base[i] / base[j]);
    Ok(RatioEstimate { ratios: RatioMatrix::from_matrix(r)?, clamped_pairs })
}

/// Log-domain pooled ratios: minimizing
/// `sum (theta_i - theta_j - log r[i][j])^2` under `sum theta = 0` has the
/// closed form `theta_k = (1/2d) sum_j (log r[k][j] - log r[j][k])`.
pub fn estimate_ratios_log_ls(simple: &RatioMatrix) -> Result<RatioMatrix> {
    let d = simple.d();
    let mut theta = vec![0.0; d];
    for (k, th) in theta.iter_mut().enumerate() {
        let mut acc = 0.0;
        for j in 0..d {
            if j != k {
                acc += simple.get(k, j).ln() - simple.get(j, k).ln();
            }
        }
        *th = acc / (2.0 * d as f64);
    }
    let sigmas: Vec<f64> = theta.iter().map(|t| t.exp()).collect();
    RatioMatrix::from_sigmas(&sigmas)
}

/// Threshold-free estimate: correlations, ratios, unscaled coefficients, and
/// the identified model class (noise normalized to trace `d`).
#[derive(Debug, Clone)]
pub struct Scheme2Result {
    pub corr_hat: Vec<Matrix>,
    pub ratios: RatioMatrix,
    pub unscaled: UnscaledEstimate,
    pub class_hat: ModelClass,
    pub variant: RatioVariant,
    pub clamped_pairs: Vec<(usize, usize)>,
}

/// Runs the whole threshold-free pipeline on a sign-and-predominance record.
pub fn estimate_model(rec: &BinaryRecord, p: usize, variant: RatioVariant) -> Result<Scheme2Result> {
    let corr_hat = estimate_correlations(rec, p);
    let unscaled = solve_correlation_system(&corr_hat)?;
    let (ratios, clamped_pairs) = match variant {
        RatioVariant::Simple => {
            let est = estimate_ratios_simple(rec, &corr_hat[0])?;
            (est.ratios, est.clamped_pairs)
        }
        RatioVariant::Optimized => {
            let est = estimate_ratios_simple(rec, &corr_hat[0])?;
            (estimate_ratios_optimized(&est.ratios)?, est.clamped_pairs)
        }
        RatioVariant::Efficient => {
            let est = estimate_ratios_efficient(rec, &corr_hat[0])?;
            (est.ratios, est.clamped_pairs)
        }
        RatioVariant::LogLeastSquares => {
            let est = estimate_ratios_simple(rec, &corr_hat[0])?;
            (estimate_ratios_log_ls(&est.ratios)?, est.clamped_pairs)
        }
    };
    let est = rescale(&unscaled, &ratios);
    let class_hat = ModelClass::new(est.coeff, est.noise_cov)?;
    Ok(Scheme2Result { corr_hat, ratios, unscaled, class_hat, variant, clamped_pairs })
}

/// Variance of a rescaled coefficient when the unscaled coefficient and the
/// ratio estimate are treated as independent:
/// `Var(a) = Var(a~) Var(r) + Var(a~) E(r)^2 + Var(r) a~^2`.
pub fn independent_variance(tilde_a: f64, var_tilde: f64, var_r: f64, mean_r: f64) -> f64 {
    debug_assert!(var_tilde >= 0.0 && var_r >= 0.0);
    var_tilde * var_r + var_tilde * mean_r * mean_r + var_r * tilde_a * tilde_a
}

/// Variance of a ratio chained along a path, assuming each hop has variance
/// `sigma_r2` and the hops are independent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainVariance {
    /// First order in `sigma_r2`: `sigma_r2 r^2 sum_l (1 / r_l^2)` where `r`
    /// is the chained ratio.
    pub first_order: f64,
    /// Exact product form `prod (sigma_r2 + r_l^2) - prod r_l^2`.
    pub exact: f64,
}

/// `path_ratios[l]` is the hop ratio `r` between consecutive path vertices.
pub fn ratio_variance_chain(path_ratios: &[f64], sigma_r2: f64) -> ChainVariance {
    debug_assert!(path_ratios.iter().all(|&r| r > 0.0));
    let prod_sq: f64 = path_ratios.iter().map(|r| r * r).product();
    let exact: f64 = path_ratios.iter().map(|r| sigma_r2 + r * r).product::<f64>() - prod_sq;
    let inv_sum: f64 = path_ratios.iter().map(|r| 1.0 / (r * r)).sum();
    ChainVariance { first_order: sigma_r2 * prod_sq * inv_sum, exact }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussians::predominance_probability;
    use crate::matrix::Matrix;
    use crate::quantize::{sign_and_predominance, SensorGraph};
    use crate::rng::Rng;

    fn sign_record(rows: Vec<Vec<f64>>) -> BinaryRecord {
        let traj = Matrix::from_rows(&rows);
        sign_and_predominance(&traj, &SensorGraph::complete(rows.len()))
    }

    #[test]
    fn transition_mle_fixtures() {
        let rec = sign_record(vec![vec![1.0, -1.0, 1.0, -1.0], vec![1.0, -1.0, 1.0, -1.0]]);
        assert_eq!(transition_mle(&rec, 0, 1, 0), 1.0);
        let rec = sign_record(vec![vec![1.0, -1.0, 1.0], vec![-1.0, 1.0, -1.0]]);
        assert_eq!(transition_mle(&rec, 0, 1, 0), 0.0);
    }

    #[test]
    fn transition_mle_matches_kedem_form() {
        let mut rng = Rng::new(12);
        let t = 400;
        let traj = Matrix::from_fn(2, t, |_, _| rng.standard_normal());
        let rec = sign_and_predominance(&traj, &SensorGraph::complete(2));
        for tau in 0..4usize {
            let r_sum: f64 = (tau..t)
                .map(|k| (rec.x(0)[k] as u8 as f64) * (rec.x(1)[k - tau] as u8 as f64))
                .sum();
            let s0: f64 = rec.x(0).iter().map(|&b| b as u8 as f64).sum();
            let s1: f64 = rec.x(1).iter().map(|&b| b as u8 as f64).sum();
            let kedem = (2.0 * r_sum - (s0 + s1) + t as f64) / (t - tau) as f64;
            let ours = transition_mle(&rec, 0, 1, tau);
            if tau == 0 {
                assert!((ours - kedem).abs() < 1e-12);
            } else {
                assert!((ours - kedem).abs() <= 2.0 * tau as f64 / (t - tau) as f64, "tau = {tau}");
            }
        }
    }

    #[test]
    fn correlations_from_identical_and_independent_series() {
        let rec = sign_record(vec![vec![1.0, -2.0, 3.0, -4.0], vec![2.0, -1.0, 4.0, -3.0]]);
        let corr = estimate_correlations(&rec, 0);
        assert_eq!(corr[0][(0, 1)], 1.0); // lambda = 1 maps to rho = 1
        assert_eq!(corr[0][(0, 0)], 1.0);

        let mut rng = Rng::new(44);
        let t = 100_000;
        let traj = Matrix::from_fn(2, t, |_, _| rng.standard_normal());
        let rec = sign_and_predominance(&traj, &SensorGraph::complete(2));
        let corr = estimate_correlations(&rec, 1);
        let bound = 3.0 * std::f64::consts::PI / (2.0 * (t as f64).sqrt());
        assert!(corr[0][(0, 1)].abs() < bound);
        assert!(corr[1][(0, 1)].abs() < bound);
    }

    #[test]
    fn simple_ratios_from_exact_inputs() {
        // forward-map exact predominance probabilities into bits is overkill;
        // instead check the pure inversion path on a synthetic record
        let mut rng = Rng::new(7);
        let t = 200_000;
        let r_true = 1.7;
        let rho = 0.35;
        let w = (1.0 - rho * rho as f64).sqrt();
        let traj = Matrix::from_fn(2, t, |i, _| {
            // column-major generation would correlate entries; build manually
            let _ = i;
            0.0
        });
        let _ = traj;
        let mut z = Matrix::zeros(2, t);
        for k in 0..t {
            let g1 = rng.standard_normal();
            let g2 = rng.standard_normal();
            z[(0, k)] = r_true * g1;
            z[(1, k)] = rho * g1 + w * g2;
        }
        let rec = sign_and_predominance(&z, &SensorGraph::complete(2));
        let corr = estimate_correlations(&rec, 0);
        let est = estimate_ratios_simple(&rec, &corr[0]).unwrap();
        let se = 3.0 * (0.25f64 / t as f64).sqrt() * 10.0;
        assert!((est.ratios.get(0, 1) - r_true).abs() < se.max(0.02), "{}", est.ratios.get(0, 1));
        assert!((est.ratios.get(0, 1) * est.ratios.get(1, 0) - 1.0).abs() < 1e-12);
        // and the exact algebraic round trip
        let p = predominance_probability(r_true, rho).unwrap();
        assert!((predominance_inverse(p, rho).unwrap() - r_true).abs() < 1e-10);
    }

    #[test]
    fn optimized_ratios_on_consistent_input() {
        let sigmas = [1.0, 2.5, 0.4, 1.3];
        let simple = RatioMatrix::from_sigmas(&sigmas).unwrap();
        let opt = estimate_ratios_optimized(&simple).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((opt.get(i, j) - sigmas[i] / sigmas[j]).abs() < 1e-8);
            }
        }
        // loss matrix has a zero eigenvalue on consistent input
        let loss = ratio_loss_matrix(&simple);
        let (vals, _) = loss.sym_eig().unwrap();
        assert!(vals[0].abs() < 1e-9);
    }

    #[test]
    fn all_ones_ratios_give_uniform_eigenvector() {
        let simple = RatioMatrix::all_ones(5);
        let loss = ratio_loss_matrix(&simple);
        let (vals, vecs) = loss.sym_eig().unwrap();
        assert!(vals[0].abs() < 1e-10);
        let expect = 1.0 / 5f64.sqrt();
        for i in 0..5 {
            assert!((vecs[(i, 0)].abs() - expect).abs() < 1e-8);
        }
        let opt = estimate_ratios_optimized(&simple).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert!((opt.get(i, j) - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn loss_matrix_matches_direct_sum() {
        let mut rng = Rng::new(15);
        for _ in 0..20 {
            let d = 2 + (rng.next_u64() % 5) as usize;
            let r = Matrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { (rng.standard_normal() * 0.3).exp() });
            let ratios = RatioMatrix::from_matrix(r).unwrap();
            let a = ratio_loss_matrix(&ratios);
            let sig: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
            let s = Matrix::from_fn(d, 1, |i, _| sig[i]);
            let quad = s.transpose().mul(&a).mul(&s)[(0, 0)];
            let direct = ratio_loss(&ratios, &sig);
            assert!((quad - direct).abs() < 1e-10 * (1.0 + direct.abs()), "d = {d}");
        }
    }

    #[test]
    fn efficient_ratios_chain_exactly() {
        let mut rng = Rng::new(50);
        let t = 5_000;
        let d = 4;
        let traj = Matrix::from_fn(d, t, |_, _| rng.standard_normal());
        let rec = sign_and_predominance(&traj, &SensorGraph::star(d));
        let corr = estimate_correlations(&rec, 0);
        let est = estimate_ratios_efficient(&rec, &corr[0]).unwrap();
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let lhs = est.ratios.get(i, j) * est.ratios.get(j, k);
                    assert!((lhs - est.ratios.get(i, k)).abs() < 1e-12 * (1.0 + lhs.abs()));
                }
            }
        }
        // simple on a star graph cannot fill non-hub pairs
        assert!(matches!(
            estimate_ratios_simple(&rec, &corr[0]),
            Err(Error::MissingEdge(1, 2))
        ));
    }

    #[test]
    fn log_ls_recovers_consistent_scales() {
        let sigmas = [0.5, 2.0, 1.25];
        let simple = RatioMatrix::from_sigmas(&sigmas).unwrap();
        let log_est = estimate_ratios_log_ls(&simple).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((log_est.get(i, j) - sigmas[i] / sigmas[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn d2_variants_coincide() {
        let mut rng = Rng::new(23);
        let t = 2_000;
        let traj = Matrix::from_fn(2, t, |i, k| rng.standard_normal() * if i == 0 { 2.0 } else { 1.0 } + k as f64 * 0.0);
        let rec = sign_and_predominance(&traj, &SensorGraph::complete(2));
        let simple = estimate_model(&rec, 1, RatioVariant::Simple).unwrap();
        let opt = estimate_model(&rec, 1, RatioVariant::Optimized).unwrap();
        let eff = estimate_model(&rec, 1, RatioVariant::Efficient).unwrap();
        for (a, b) in [(&simple, &opt), (&simple, &eff)] {
            let diff = a.class_hat.coeff[0].sub(&b.class_hat.coeff[0]).max_abs();
            assert!(diff < 1e-12, "variants disagree by {diff}");
        }
    }

    #[test]
    fn class_noise_trace_is_d() {
        let mut rng = Rng::new(77);
        let t = 3_000;
        let traj = Matrix::from_fn(3, t, |_, _| rng.standard_normal());
        let rec = sign_and_predominance(&traj, &SensorGraph::complete(3));
        let res = estimate_model(&rec, 1, RatioVariant::Simple).unwrap();
        assert!((res.class_hat.noise_cov_normalized.trace() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn independent_variance_degenerate_cases() {
        assert_eq!(independent_variance(0.7, 2e-3, 0.0, 1.4), 2e-3 * 1.4 * 1.4);
        assert_eq!(independent_variance(0.7, 0.0, 3e-3, 1.4), 3e-3 * 0.49);
    }

    #[test]
    fn chain_variance_reference_points() {
        let zero = ratio_variance_chain(&[], 1e-2);
        assert_eq!(zero.exact, 0.0);
        assert_eq!(zero.first_order, 0.0);
        let one = ratio_variance_chain(&[1.7], 1e-2);
        assert!((one.exact - 1e-2).abs() < 1e-15);
        assert!((one.first_order - 1e-2).abs() < 1e-15);
        // all ratios 1, length L
        for l in 1..=5usize {
            let s2 = 1e-3;
            let cv = ratio_variance_chain(&vec![1.0; l], s2);
            let exact_expect = (1.0 + s2).powi(l as i32) - 1.0;
            assert!((cv.exact - exact_expect).abs() < 1e-15);
            assert!((cv.first_order - l as f64 * s2).abs() < 1e-15);
            assert!((cv.exact - cv.first_order).abs() < 20.0 * s2 * s2);
        }
    }

    #[test]
    fn chain_variance_fourth_order_scaling() {
        let path = [0.8, 1.5, 1.1];
        let d_big = {
            let cv = ratio_variance_chain(&path, 1e-2);
            (cv.exact - cv.first_order).abs()
        };
        let d_small = {
            let cv = ratio_variance_chain(&path, 1e-3);
            (cv.exact - cv.first_order).abs()
        };
        // halving sigma_r by 10 shrinks the gap by ~10^4
        assert!(d_small < d_big * 1.2e-4 + 1e-18);
    }
}
