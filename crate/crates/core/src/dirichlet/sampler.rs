//! Exact Dirichlet sampling through normalized Gamma variates.
//!
//! Gamma draws use the Marsaglia–Tsang squeeze/rejection method, computed in
//! log space. Shapes below one are boosted with `G(a) = G(a + 1) · U^(1/a)`,
//! which keeps tiny concentrations from underflowing before normalization.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{DirichletParams, SimplexPoint};

/// ln of one Gamma(shape, 1) variate, `shape > 0`.
pub fn sample_ln_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    debug_assert!(shape > 0.0);
    if shape < 1.0 {
        let u: f64 = 1.0 - rng.random::<f64>();
        return sample_ln_gamma(shape + 1.0, rng) + u.ln() / shape;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u: f64 = 1.0 - rng.random::<f64>();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return (d * v).ln();
        }
    }
}

/// One draw ρ ~ Dir(α).
pub fn sample_dirichlet<R: Rng + ?Sized>(params: &DirichletParams, rng: &mut R) -> SimplexPoint {
    let logs: Vec<f64> = params
        .alpha()
        .iter()
        .map(|&a| sample_ln_gamma(a, rng))
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut rho: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = rho.iter().sum();
    rho.iter_mut().for_each(|r| *r /= total);
    SimplexPoint::from_normalized(rho)
}
