//! Brute-force reference computations used to cross-check the analytic
//! machinery: fine-grid Simpson integration of the bivariate density and
//! plain Monte-Carlo probability estimates. Deliberately simple and slow;
//! these never share code with the quadrature or closed forms they check.

use crate::rng::Rng;
use std::f64::consts::PI;

fn density(eta1: f64, eta2: f64, x: f64) -> f64 {
    let om = 1.0 - x * x;
    (-(eta1 * eta1 - 2.0 * x * eta1 * eta2 + eta2 * eta2) / (2.0 * om)).exp()
        / (2.0 * PI * om.sqrt())
}

/// Composite Simpson integration of the bivariate density over [0, rho].
/// `steps` must be even; a few tens of thousands are plenty below |rho| = 0.99.
pub fn psi_simpson(eta1: f64, eta2: f64, rho: f64, steps: usize) -> f64 {
    assert!(steps >= 2 && steps % 2 == 0, "steps must be even");
    assert!(rho.abs() < 1.0, "simpson oracle needs |rho| < 1");
    if rho == 0.0 {
        return 0.0;
    }
    let h = rho / steps as f64;
    let mut sum = density(eta1, eta2, 0.0) + density(eta1, eta2, rho);
    for k in 1..steps {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * density(eta1, eta2, k as f64 * h);
    }
    sum * h / 3.0
}

/// Monte-Carlo estimate of `Pr(Z1 >= eta1, Z2 >= eta2)` for a standard
/// bivariate pair with correlation `rho`.
pub fn mc_orthant_probability(eta1: f64, eta2: f64, rho: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let w = (1.0 - rho * rho).sqrt();
    let mut hits = 0u64;
    for _ in 0..samples {
        let g1 = rng.standard_normal();
        let g2 = rho * g1 + w * rng.standard_normal();
        if g1 >= eta1 && g2 >= eta2 {
            hits += 1;
        }
    }
    hits as f64 / samples as f64
}

/// Monte-Carlo estimate of `Pr(|Z1| >= |Z2|)` where `sigma1/sigma2 = r` and
/// the correlation is `rho`.
pub fn mc_predominance(r: f64, rho: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let w = (1.0 - rho * rho).sqrt();
    let mut hits = 0u64;
    for _ in 0..samples {
        let g1 = rng.standard_normal();
        let z2 = rho * g1 + w * rng.standard_normal();
        if (r * g1).abs() >= z2.abs() {
            hits += 1;
        }
    }
    hits as f64 / samples as f64
}

/// Standard error of a binomial frequency estimate.
pub fn binomial_std_err(p_hat: f64, samples: usize) -> f64 {
    (p_hat * (1.0 - p_hat) / samples as f64).sqrt().max(1.0 / samples as f64)
}
