//! Dirichlet distribution primitives.

mod sampler;
pub mod special;

pub use sampler::{sample_dirichlet, sample_ln_gamma};
pub use special::{digamma, log_gamma, trigamma};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the simplex sum constraint.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Concentration vector α of a Dirichlet over the C-simplex, C >= 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DirichletParams {
    alpha: Vec<f64>,
    alpha0: f64,
}

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(Error::InvalidParams(format!(
                "need at least 2 classes, got {}",
                alpha.len()
            )));
        }
        if let Some((i, a)) = alpha
            .iter()
            .enumerate()
            .find(|(_, a)| !(**a > 0.0 && a.is_finite()))
        {
            return Err(Error::InvalidParams(format!(
                "alpha[{i}] = {a} must be positive and finite"
            )));
        }
        let alpha0 = alpha.iter().sum();
        Ok(Self { alpha, alpha0 })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Precision α₀ = Σ α_c.
    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn num_classes(&self) -> usize {
        self.alpha.len()
    }

    /// Evidence e = α − 1, floored at zero for components below one.
    pub fn evidence(&self) -> Vec<f64> {
        self.alpha.iter().map(|a| (a - 1.0).max(0.0)).collect()
    }

    /// Mean of the distribution, ρ̄_c = α_c / α₀.
    pub fn expected_probs(&self) -> SimplexPoint {
        SimplexPoint {
            rho: self.alpha.iter().map(|a| a / self.alpha0).collect(),
        }
    }

    /// Componentwise variance α_c(α₀ − α_c) / (α₀²(α₀ + 1)).
    pub fn variances(&self) -> Vec<f64> {
        let a0 = self.alpha0;
        let denom = a0 * a0 * (a0 + 1.0);
        self.alpha.iter().map(|a| a * (a0 - a) / denom).collect()
    }

    /// ln Dir(ρ | α).
    ///
    /// The density is only evaluated on the open simplex. Any point with a
    /// zero component returns `f64::NEG_INFINITY` as a sentinel regardless of
    /// α, so callers can treat boundary points uniformly as "off support".
    pub fn log_pdf(&self, rho: &SimplexPoint) -> Result<f64> {
        if rho.len() != self.num_classes() {
            return Err(Error::Dimension {
                expected: self.num_classes(),
                got: rho.len(),
                context: "dirichlet log_pdf",
            });
        }
        if rho.rho.iter().any(|&r| r <= 0.0) {
            return Ok(f64::NEG_INFINITY);
        }
        let norm = special::ln_gamma_pos(self.alpha0)
            - self
                .alpha
                .iter()
                .map(|&a| special::ln_gamma_pos(a))
                .sum::<f64>();
        let kernel: f64 = self
            .alpha
            .iter()
            .zip(&rho.rho)
            .map(|(a, r)| (a - 1.0) * r.ln())
            .sum();
        Ok(norm + kernel)
    }
}

impl TryFrom<Vec<f64>> for DirichletParams {
    type Error = Error;
    fn try_from(alpha: Vec<f64>) -> Result<Self> {
        Self::new(alpha)
    }
}

impl From<DirichletParams> for Vec<f64> {
    fn from(p: DirichletParams) -> Self {
        p.alpha
    }
}

/// Free-function form of [`DirichletParams::expected_probs`].
pub fn expected_probs(params: &DirichletParams) -> SimplexPoint {
    params.expected_probs()
}

/// A point ρ on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexPoint {
    rho: Vec<f64>,
}

impl SimplexPoint {
    pub fn new(rho: Vec<f64>) -> Result<Self> {
        if rho.is_empty() {
            return Err(Error::Input("empty simplex point".into()));
        }
        if let Some(r) = rho.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::Input(format!("simplex component {r} outside [0, 1]")));
        }
        let sum: f64 = rho.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Input(format!("simplex components sum to {sum}")));
        }
        Ok(Self { rho })
    }

    /// Wraps a vector already known to lie on the simplex.
    pub(crate) fn from_normalized(rho: Vec<f64>) -> Self {
        debug_assert!((rho.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL);
        Self { rho }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.rho
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// Index of the largest component; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.rho)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.rho
    }
}

/// Lowest index among the maximal entries.
pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
