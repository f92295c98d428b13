//! Evidential training objective and its analytic logit gradients.
//!
//! Per labeled sample: `ln α₀ − ln α_y + KL[Dir(α̃) ‖ Dir(1)] / C`, where α̃
//! is α with the ground-truth component replaced by one. Per unlabeled
//! sample: `β U_dis + λ U_data`. Each pool is averaged over its batch and
//! the labeled-target term is dropped when that pool is empty.
//!
//! Batch sums are accumulated sequentially in batch order, so results are
//! bitwise reproducible for a fixed batch.

use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1};
use serde::{Deserialize, Serialize};

use crate::dirichlet::special::{digamma_pos, ln_gamma_pos, trigamma_pos};
use crate::dirichlet::DirichletParams;
use crate::error::{Error, Result};
use crate::evidential::{
    data_uncertainty, distribution_uncertainty, entropy_of, EvidenceMapConfig,
};

/// One-hot label Υ stored as its class index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OneHotLabel {
    class: usize,
    num_classes: usize,
}

impl OneHotLabel {
    pub fn new(class: usize, num_classes: usize) -> Result<Self> {
        if num_classes < 2 || class >= num_classes {
            return Err(Error::Input(format!(
                "label {class} invalid for {num_classes} classes"
            )));
        }
        Ok(Self { class, num_classes })
    }

    pub fn class(&self) -> usize {
        self.class
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn upsilon(&self) -> Vec<f64> {
        (0..self.num_classes)
            .map(|c| if c == self.class { 1.0 } else { 0.0 })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    /// Weight on mean U_dis of unlabeled target samples.
    pub beta: f64,
    /// Weight on mean U_data of unlabeled target samples.
    pub lambda: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            beta: 1.0,
            lambda: 0.05,
        }
    }
}

impl LossWeights {
    pub const ZERO: LossWeights = LossWeights {
        beta: 0.0,
        lambda: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (key, v) in [("beta", self.beta), ("lambda", self.lambda)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

fn check_label(params: &DirichletParams, label: &OneHotLabel) {
    assert_eq!(
        params.num_classes(),
        label.num_classes(),
        "label and parameters disagree on class count"
    );
}

/// Negative log marginal likelihood, `ln α₀ − ln α_y`.
pub fn nll_loss(params: &DirichletParams, label: &OneHotLabel) -> f64 {
    check_label(params, label);
    params.alpha0().ln() - params.alpha()[label.class()].ln()
}

/// KL[Dir(α) ‖ Dir(1, …, 1)].
pub fn kl_to_uniform(params: &DirichletParams) -> f64 {
    kl_to_uniform_raw(params.alpha())
}

fn kl_to_uniform_raw(alpha: &[f64]) -> f64 {
    let c = alpha.len() as f64;
    let a0: f64 = alpha.iter().sum();
    let psi0 = digamma_pos(a0);
    let mut kl = ln_gamma_pos(a0) - ln_gamma_pos(c);
    for &a in alpha {
        kl += (a - 1.0) * (digamma_pos(a) - psi0) - ln_gamma_pos(a);
    }
    kl.max(0.0)
}

/// α̃ = Υ + (1 − Υ) ⊙ α.
pub fn strip_true_evidence(params: &DirichletParams, label: &OneHotLabel) -> DirichletParams {
    check_label(params, label);
    let mut alpha = params.alpha().to_vec();
    alpha[label.class()] = 1.0;
    DirichletParams::new(alpha).expect("stripping keeps alpha valid")
}

/// KL of the misleading-evidence Dirichlet from uniform, divided by C.
pub fn kl_loss(params: &DirichletParams, label: &OneHotLabel) -> f64 {
    kl_to_uniform(&strip_true_evidence(params, label)) / params.num_classes() as f64
}

/// β·mean(U_dis) + λ·mean(U_data); zero for an empty batch.
pub fn uncertainty_loss(batch: &[DirichletParams], w: &LossWeights) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    let n = batch.len() as f64;
    let (dis, data) = batch.iter().fold((0.0, 0.0), |(d, u), p| {
        (d + distribution_uncertainty(p), u + data_uncertainty(p))
    });
    w.beta * dis / n + w.lambda * data / n
}

/// Pool-averaged loss terms. `nll` and `kl` each already include the
/// labeled-target mean when that pool is non-empty.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub nll: f64,
    pub kl: f64,
    pub u_dis: f64,
    pub u_data: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn finish(mut self, w: &LossWeights) -> Self {
        self.total = self.nll + self.kl + w.beta * self.u_dis + w.lambda * self.u_data;
        self
    }
}

/// L_total = L_nll + L_kl + β L_U_dis + λ L_U_data over Dirichlet batches.
pub fn total_loss(
    source: &[(DirichletParams, OneHotLabel)],
    labeled_target: &[(DirichletParams, OneHotLabel)],
    unlabeled_target: &[DirichletParams],
    w: &LossWeights,
) -> Result<LossBreakdown> {
    if source.is_empty() {
        return Err(Error::Input("source batch is empty".into()));
    }
    let mut out = LossBreakdown::default();
    for pool in [source, labeled_target] {
        if pool.is_empty() {
            continue;
        }
        let n = pool.len() as f64;
        out.nll += pool.iter().map(|(p, y)| nll_loss(p, y)).sum::<f64>() / n;
        out.kl += pool.iter().map(|(p, y)| kl_loss(p, y)).sum::<f64>() / n;
    }
    if !unlabeled_target.is_empty() {
        let n = unlabeled_target.len() as f64;
        out.u_dis = unlabeled_target.iter().map(distribution_uncertainty).sum::<f64>() / n;
        out.u_data = unlabeled_target.iter().map(data_uncertainty).sum::<f64>() / n;
    }
    Ok(out.finish(w))
}

/// Logits and labels for one labeled pool.
#[derive(Debug, Clone, Copy)]
pub struct LabeledLogits<'a> {
    pub logits: ArrayView2<'a, f64>,
    pub labels: &'a [usize],
}

/// Logits for a single training step, one block per pool.
#[derive(Debug, Clone, Copy)]
pub struct LogitBatch<'a> {
    pub source: LabeledLogits<'a>,
    pub labeled: LabeledLogits<'a>,
    pub unlabeled: ArrayView2<'a, f64>,
}

/// ∂L_total/∂z for each pool block, same shapes as the inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitGradients {
    pub source: Array2<f64>,
    pub labeled: Array2<f64>,
    pub unlabeled: Array2<f64>,
}

fn validate_batch(batch: &LogitBatch<'_>) -> Result<usize> {
    let c = batch.source.logits.ncols();
    if batch.source.logits.nrows() == 0 {
        return Err(Error::Input("source batch is empty".into()));
    }
    if c < 2 {
        return Err(Error::Input(format!("need at least 2 classes, got {c}")));
    }
    for (name, pool) in [("source", &batch.source), ("labeled target", &batch.labeled)] {
        if pool.logits.nrows() != pool.labels.len() {
            return Err(Error::Dimension {
                expected: pool.logits.nrows(),
                got: pool.labels.len(),
                context: "labels per logit row",
            });
        }
        if pool.logits.nrows() > 0 && pool.logits.ncols() != c {
            return Err(Error::Dimension {
                expected: c,
                got: pool.logits.ncols(),
                context: "class count across pools",
            });
        }
        if let Some(&y) = pool.labels.iter().find(|&&y| y >= c) {
            return Err(Error::Input(format!("{name} label {y} >= {c} classes")));
        }
    }
    if batch.unlabeled.nrows() > 0 && batch.unlabeled.ncols() != c {
        return Err(Error::Dimension {
            expected: c,
            got: batch.unlabeled.ncols(),
            context: "class count across pools",
        });
    }
    let all_finite = batch.source.logits.iter().all(|z| z.is_finite())
        && batch.labeled.logits.iter().all(|z| z.is_finite())
        && batch.unlabeled.iter().all(|z| z.is_finite());
    if !all_finite {
        return Err(Error::Input("non-finite logit".into()));
    }
    Ok(c)
}

/// Loss value only; same definition as [`loss_gradients`].
pub fn evidential_objective(
    batch: &LogitBatch<'_>,
    w: &LossWeights,
    cfg: &EvidenceMapConfig,
) -> Result<LossBreakdown> {
    loss_impl(batch, w, cfg, false).map(|(l, _)| l)
}

/// Loss and analytic gradient of L_total with respect to every logit.
pub fn loss_gradients(
    batch: &LogitBatch<'_>,
    w: &LossWeights,
    cfg: &EvidenceMapConfig,
) -> Result<(LossBreakdown, LogitGradients)> {
    loss_impl(batch, w, cfg, true).map(|(l, g)| (l, g.expect("gradients requested")))
}

fn loss_impl(
    batch: &LogitBatch<'_>,
    w: &LossWeights,
    cfg: &EvidenceMapConfig,
    want_grad: bool,
) -> Result<(LossBreakdown, Option<LogitGradients>)> {
    let c = validate_batch(batch)?;
    let mut out = LossBreakdown::default();
    let mut grads = want_grad.then(|| LogitGradients {
        source: Array2::zeros(batch.source.logits.raw_dim()),
        labeled: Array2::zeros(batch.labeled.logits.raw_dim()),
        unlabeled: Array2::zeros(batch.unlabeled.raw_dim()),
    });
    let mut alpha = vec![0.0; c];
    let mut z = vec![0.0; c];

    for (pool, which) in [(&batch.source, 0), (&batch.labeled, 1)] {
        let n = pool.logits.nrows();
        if n == 0 {
            continue;
        }
        let scale = 1.0 / n as f64;
        let (mut nll_sum, mut kl_sum) = (0.0, 0.0);
        for (i, (row, &y)) in pool.logits.outer_iter().zip(pool.labels).enumerate() {
            load_row(row, &mut z, &mut alpha, cfg);
            let g = grads.as_mut().map(|g| {
                if which == 0 {
                    g.source.row_mut(i)
                } else {
                    g.labeled.row_mut(i)
                }
            });
            let (nll, kl) = labeled_term(&alpha, &z, y, cfg, scale, g);
            nll_sum += nll;
            kl_sum += kl;
        }
        out.nll += nll_sum * scale;
        out.kl += kl_sum * scale;
    }

    let n = batch.unlabeled.nrows();
    if n > 0 {
        let scale = 1.0 / n as f64;
        let (mut dis_sum, mut data_sum) = (0.0, 0.0);
        for (i, row) in batch.unlabeled.outer_iter().enumerate() {
            load_row(row, &mut z, &mut alpha, cfg);
            let g = grads.as_mut().map(|g| g.unlabeled.row_mut(i));
            let (dis, data) = unlabeled_term(&alpha, &z, w, cfg, scale, g);
            dis_sum += dis;
            data_sum += data;
        }
        out.u_dis = dis_sum * scale;
        out.u_data = data_sum * scale;
    }
    Ok((out.finish(w), grads))
}

fn load_row(row: ArrayView1<'_, f64>, z: &mut [f64], alpha: &mut [f64], cfg: &EvidenceMapConfig) {
    for ((zk, ak), &v) in z.iter_mut().zip(alpha.iter_mut()).zip(row.iter()) {
        *zk = v;
        *ak = cfg.alpha_of(v);
    }
}

/// Returns (nll, kl/C) for one labeled sample and writes `scale · ∂/∂z`.
fn labeled_term(
    alpha: &[f64],
    z: &[f64],
    y: usize,
    cfg: &EvidenceMapConfig,
    scale: f64,
    grad: Option<ArrayViewMut1<'_, f64>>,
) -> (f64, f64) {
    let c = alpha.len();
    let cf = c as f64;
    let a0: f64 = alpha.iter().sum();
    let nll = a0.ln() - alpha[y].ln();

    // α̃: ground-truth component set to one
    let t0 = a0 - alpha[y] + 1.0;
    let psi_t0 = digamma_pos(t0);
    let mut kl = ln_gamma_pos(t0) - ln_gamma_pos(cf);
    for (k, &a) in alpha.iter().enumerate() {
        if k != y {
            kl += (a - 1.0) * (digamma_pos(a) - psi_t0) - ln_gamma_pos(a);
        }
    }
    let kl = kl.max(0.0) / cf;

    if let Some(mut g) = grad {
        let tri_t0 = trigamma_pos(t0) * (t0 - cf);
        for k in 0..c {
            let mut d = 1.0 / a0;
            if k == y {
                d -= 1.0 / alpha[k];
            } else {
                d += ((alpha[k] - 1.0) * trigamma_pos(alpha[k]) - tri_t0) / cf;
            }
            g[k] = scale * d * cfg.dalpha_dlogit(z[k]);
        }
    }
    (nll, kl)
}

/// Returns (U_dis, U_data) for one unlabeled sample and writes the scaled
/// gradient of β U_dis + λ U_data.
fn unlabeled_term(
    alpha: &[f64],
    z: &[f64],
    w: &LossWeights,
    cfg: &EvidenceMapConfig,
    scale: f64,
    grad: Option<ArrayViewMut1<'_, f64>>,
) -> (f64, f64) {
    let a0: f64 = alpha.iter().sum();
    let psi0 = digamma_pos(a0 + 1.0);
    let mut weighted_psi = 0.0; // Σ ρ̄_c ψ(α_c + 1)
    for &a in alpha {
        weighted_psi += a / a0 * digamma_pos(a + 1.0);
    }
    let entropy = entropy_of(alpha.iter().map(|a| a / a0));
    let u_data = (psi0 - weighted_psi).max(0.0);
    let u_dis = (entropy - (psi0 - weighted_psi)).max(0.0);

    if let Some(mut g) = grad {
        // β U_dis + λ U_data = β H + (λ − β) U_data
        let tri0 = trigamma_pos(a0 + 1.0);
        for (k, &a) in alpha.iter().enumerate() {
            let p = a / a0;
            let d_h = if p > 0.0 { (-p.ln() - entropy) / a0 } else { 0.0 };
            let d_data = tri0 - digamma_pos(a + 1.0) / a0 - p * trigamma_pos(a + 1.0)
                + weighted_psi / a0;
            let d = w.beta * d_h + (w.lambda - w.beta) * d_data;
            g[k] = scale * d * cfg.dalpha_dlogit(z[k]);
        }
    }
    (u_dis, u_data)
}

/// Mean softmax cross-entropy and its logit gradient. The point-estimate
/// comparator for calibration experiments; no clamp is applied.
pub fn softmax_cross_entropy(
    logits: ArrayView2<'_, f64>,
    labels: &[usize],
) -> Result<(f64, Array2<f64>)> {
    let (n, c) = logits.dim();
    if n == 0 {
        return Err(Error::Input("empty batch".into()));
    }
    if labels.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: labels.len(),
            context: "labels per logit row",
        });
    }
    let mut grad = Array2::zeros((n, c));
    let mut loss = 0.0;
    let scale = 1.0 / n as f64;
    for (i, (row, &y)) in logits.outer_iter().zip(labels).enumerate() {
        if y >= c {
            return Err(Error::Input(format!("label {y} >= {c} classes")));
        }
        let probs = crate::network::softmax_row(row);
        loss -= probs[y].max(f64::MIN_POSITIVE).ln();
        for k in 0..c {
            let t = if k == y { 1.0 } else { 0.0 };
            grad[[i, k]] = scale * (probs[k] - t);
        }
    }
    Ok((loss * scale, grad))
}
