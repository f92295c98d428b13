//! Evidence map from logits to Dirichlet parameters, and the split of
//! predictive entropy into distribution and data uncertainty.

use serde::{Deserialize, Serialize};

use crate::dirichlet::special::digamma_pos;
use crate::dirichlet::{DirichletParams, SimplexPoint};
use crate::error::{Error, Result};

pub const DEFAULT_LOGIT_CLAMP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceMap {
    #[default]
    Exponential,
}

/// How logits become concentrations: α_c = g(clamp(z_c, ±logit_clamp)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvidenceMapConfig {
    #[serde(default)]
    pub map_kind: EvidenceMap,
    #[serde(default = "default_clamp")]
    pub logit_clamp: f64,
}

fn default_clamp() -> f64 {
    DEFAULT_LOGIT_CLAMP
}

impl Default for EvidenceMapConfig {
    fn default() -> Self {
        Self {
            map_kind: EvidenceMap::Exponential,
            logit_clamp: DEFAULT_LOGIT_CLAMP,
        }
    }
}

impl EvidenceMapConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.logit_clamp > 0.0 && self.logit_clamp.is_finite()) {
            return Err(Error::config(
                "logit_clamp",
                format!("must be positive and finite, got {}", self.logit_clamp),
            ));
        }
        Ok(())
    }

    /// α for a single logit.
    #[inline]
    pub fn alpha_of(&self, logit: f64) -> f64 {
        match self.map_kind {
            EvidenceMap::Exponential => logit.clamp(-self.logit_clamp, self.logit_clamp).exp(),
        }
    }

    /// dα/dz, zero where the clamp is active.
    #[inline]
    pub fn dalpha_dlogit(&self, logit: f64) -> f64 {
        match self.map_kind {
            EvidenceMap::Exponential => {
                if logit.abs() < self.logit_clamp {
                    logit.exp()
                } else {
                    0.0
                }
            }
        }
    }
}

pub fn logits_to_alpha(logits: &[f64], cfg: &EvidenceMapConfig) -> Result<DirichletParams> {
    if let Some(z) = logits.iter().find(|z| !z.is_finite()) {
        return Err(Error::Input(format!("non-finite logit {z}")));
    }
    DirichletParams::new(logits.iter().map(|&z| cfg.alpha_of(z)).collect())
}

/// Per-sample uncertainty decomposition, all values in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyReport {
    pub u_dis: f64,
    pub u_data: f64,
    pub entropy: f64,
    pub probs: SimplexPoint,
}

/// Mutual information between label and class-probability vector.
pub fn distribution_uncertainty(params: &DirichletParams) -> f64 {
    decompose_with(params, digamma_pos).0
}

/// Expected entropy of the categorical prediction under Dir(α).
pub fn data_uncertainty(params: &DirichletParams) -> f64 {
    decompose_with(params, digamma_pos).1
}

/// Entropy of the expected prediction ρ̄, with 0·ln 0 = 0.
pub fn total_entropy(params: &DirichletParams) -> f64 {
    let a0 = params.alpha0();
    entropy_of(params.alpha().iter().map(|a| a / a0))
}

pub fn uncertainty_report(params: &DirichletParams) -> UncertaintyReport {
    uncertainty_report_with(params, digamma_pos)
}

/// [`uncertainty_report`] with a caller-supplied digamma. Used by the
/// verification harness for fault injection.
#[doc(hidden)]
pub fn uncertainty_report_with(
    params: &DirichletParams,
    digamma: impl Fn(f64) -> f64,
) -> UncertaintyReport {
    let (u_dis, u_data, entropy) = decompose_with(params, digamma);
    UncertaintyReport {
        u_dis,
        u_data,
        entropy,
        probs: params.expected_probs(),
    }
}

/// Expected opinion ρ̄ and its argmax (lowest index on ties).
pub fn predict(params: &DirichletParams) -> (SimplexPoint, usize) {
    let probs = params.expected_probs();
    let class = probs.argmax();
    (probs, class)
}

pub(crate) fn entropy_of(probs: impl IntoIterator<Item = f64>) -> f64 {
    -probs
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

/// (U_dis, U_data, H[ρ̄]).
fn decompose_with(params: &DirichletParams, digamma: impl Fn(f64) -> f64) -> (f64, f64, f64) {
    let a0 = params.alpha0();
    let psi0 = digamma(a0 + 1.0);
    let mut expected_log = 0.0; // Σ ρ̄_c (ψ(α_c + 1) − ψ(α₀ + 1))
    let mut entropy = 0.0;
    for &a in params.alpha() {
        let p = a / a0;
        expected_log += p * (digamma(a + 1.0) - psi0);
        if p > 0.0 {
            entropy -= p * p.ln();
        }
    }
    let u_data = (-expected_log).max(0.0);
    let u_dis = (expected_log + entropy).max(0.0);
    (u_dis, u_data, entropy)
}
