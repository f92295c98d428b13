use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{backward_and_step, Activation, NetworkParams, SgdMomentum};
use crate::dirichlet::DirichletParams;
use crate::error::{Error, Result};
use crate::evidential::EvidenceMapConfig;
use crate::losses::{
    loss_gradients, softmax_cross_entropy, LabeledLogits, LogitBatch, LossBreakdown, LossWeights,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum LrSchedule {
    #[default]
    Constant,
    /// `lr₀ · (1 + gamma · t)^(−power)` over optimizer steps t.
    Inverse { gamma: f64, power: f64 },
}

impl LrSchedule {
    pub fn rate(&self, base: f64, step: u64) -> f64 {
        match *self {
            LrSchedule::Constant => base,
            LrSchedule::Inverse { gamma, power } => base * (1.0 + gamma * step as f64).powf(-power),
        }
    }
}

/// Which loss drives training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// L_nll + L_kl + β L_U_dis + λ L_U_data.
    #[default]
    Evidential,
    /// Softmax cross-entropy on labeled pools only.
    SoftmaxCrossEntropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub weights: LossWeights,
    /// First-round shortlist multiplier for two-round selection.
    pub kappa: usize,
    pub seed: u64,
    pub evidence: EvidenceMapConfig,
    pub lr_schedule: LrSchedule,
    pub weight_decay: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub objective: Objective,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.004,
            momentum: 0.9,
            batch_size: 32,
            epochs: 30,
            weights: LossWeights::default(),
            kappa: 10,
            seed: 0,
            evidence: EvidenceMapConfig::default(),
            lr_schedule: LrSchedule::Constant,
            weight_decay: 0.0,
            hidden: vec![64],
            activation: Activation::Relu,
            objective: Objective::Evidential,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be finite and >= 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum", "must lie in [0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs", "must be positive"));
        }
        if self.kappa == 0 {
            return Err(Error::config("kappa", "must be >= 1"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::config("weight_decay", "must be finite and >= 0"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden", "layer widths must be positive"));
        }
        if let LrSchedule::Inverse { gamma, power } = self.lr_schedule {
            if !(gamma >= 0.0 && power >= 0.0) {
                return Err(Error::config("lr_schedule", "gamma and power must be >= 0"));
            }
        }
        self.weights.validate()?;
        self.evidence.validate()
    }

    pub fn layer_sizes(&self, input_dim: usize, num_classes: usize) -> Vec<usize> {
        let mut s = vec![input_dim];
        s.extend(&self.hidden);
        s.push(num_classes);
        s
    }
}

/// Feature/label views of the three training pools.
#[derive(Debug, Clone, Copy)]
pub struct TrainPools<'a> {
    pub source_x: ArrayView2<'a, f64>,
    pub source_y: &'a [usize],
    pub labeled_x: ArrayView2<'a, f64>,
    pub labeled_y: &'a [usize],
    pub unlabeled_x: ArrayView2<'a, f64>,
}

impl<'a> TrainPools<'a> {
    pub fn source_only(x: ArrayView2<'a, f64>, y: &'a [usize]) -> Self {
        let empty = x.slice_move(s![0..0, ..]);
        Self {
            source_x: x,
            source_y: y,
            labeled_x: empty,
            labeled_y: &[],
            unlabeled_x: empty,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub steps: usize,
    /// Mean of the per-step loss breakdowns.
    pub mean: LossBreakdown,
    pub step_totals: Vec<f64>,
}

struct Cycler {
    order: Vec<usize>,
    pos: usize,
}

impl Cycler {
    fn new<R: Rng>(n: usize, rng: &mut R) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        Self { order, pos: 0 }
    }

    fn take(&mut self, k: usize) -> Vec<usize> {
        let k = k.min(self.order.len());
        (0..k)
            .map(|_| {
                let v = self.order[self.pos];
                self.pos = (self.pos + 1) % self.order.len();
                v
            })
            .collect()
    }
}

/// One pass of mini-batch updates over the source pool. Each step adds one
/// batch from every non-empty target pool, cycling pools shorter than the
/// number of steps.
pub fn fit_epoch<R: Rng>(
    params: &mut NetworkParams,
    opt: &mut SgdMomentum,
    pools: &TrainPools<'_>,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<EpochStats> {
    let n_s = pools.source_x.nrows();
    if n_s == 0 {
        return Err(Error::Input("source pool is empty".into()));
    }
    if pools.source_y.len() != n_s || pools.labeled_y.len() != pools.labeled_x.nrows() {
        return Err(Error::Dimension {
            expected: n_s,
            got: pools.source_y.len(),
            context: "labels per pool row",
        });
    }
    let bs = cfg.batch_size;
    let mut source_order: Vec<usize> = (0..n_s).collect();
    source_order.shuffle(rng);
    let mut labeled = Cycler::new(pools.labeled_x.nrows(), rng);
    let mut unlabeled = Cycler::new(pools.unlabeled_x.nrows(), rng);
    let use_unlabeled = cfg.objective == Objective::Evidential;

    let mut stats = EpochStats {
        steps: 0,
        mean: LossBreakdown::default(),
        step_totals: Vec::new(),
    };
    for chunk in source_order.chunks(bs) {
        let li = labeled.take(bs);
        let ui = if use_unlabeled { unlabeled.take(bs) } else { Vec::new() };
        let xs = pools.source_x.select(Axis(0), chunk);
        let xl = pools.labeled_x.select(Axis(0), &li);
        let xu = pools.unlabeled_x.select(Axis(0), &ui);
        let ys: Vec<usize> = chunk.iter().map(|&i| pools.source_y[i]).collect();
        let yl: Vec<usize> = li.iter().map(|&i| pools.labeled_y[i]).collect();
        let x = concatenate![Axis(0), xs, xl, xu];

        let (logits, cache) = params.forward(x.view())?;
        let (ns, nl) = (chunk.len(), li.len());
        let (loss, grad) = match cfg.objective {
            Objective::Evidential => {
                let batch = LogitBatch {
                    source: LabeledLogits {
                        logits: logits.slice(s![..ns, ..]),
                        labels: &ys,
                    },
                    labeled: LabeledLogits {
                        logits: logits.slice(s![ns..ns + nl, ..]),
                        labels: &yl,
                    },
                    unlabeled: logits.slice(s![ns + nl.., ..]),
                };
                let (loss, g) = loss_gradients(&batch, &cfg.weights, &cfg.evidence)?;
                (loss, concatenate![Axis(0), g.source, g.labeled, g.unlabeled])
            }
            Objective::SoftmaxCrossEntropy => {
                let (ls, gs) = softmax_cross_entropy(logits.slice(s![..ns, ..]), &ys)?;
                let mut total = ls;
                let mut grad = gs;
                if nl > 0 {
                    let (ll, gl) = softmax_cross_entropy(logits.slice(s![ns.., ..]), &yl)?;
                    total += ll;
                    grad = concatenate![Axis(0), grad, gl];
                }
                let loss = LossBreakdown {
                    nll: total,
                    total,
                    ..Default::default()
                };
                (loss, grad)
            }
        };
        backward_and_step(params, &cache, grad.view(), opt, cfg)?;
        if !loss.total.is_finite() {
            return Err(Error::Input(format!("non-finite loss at step {}", stats.steps)));
        }
        stats.steps += 1;
        stats.step_totals.push(loss.total);
        stats.mean.nll += loss.nll;
        stats.mean.kl += loss.kl;
        stats.mean.u_dis += loss.u_dis;
        stats.mean.u_data += loss.u_data;
        stats.mean.total += loss.total;
    }
    let k = stats.steps as f64;
    stats.mean.nll /= k;
    stats.mean.kl /= k;
    stats.mean.u_dis /= k;
    stats.mean.u_data /= k;
    stats.mean.total /= k;
    Ok(stats)
}

/// Network, optimizer state and RNG for one training run.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub params: NetworkParams,
    pub opt: SgdMomentum,
    pub cfg: TrainConfig,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(input_dim: usize, num_classes: usize, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut params = NetworkParams::init(
            &cfg.layer_sizes(input_dim, num_classes),
            cfg.activation,
            &mut rng,
        )?;
        // Start from zero logits, i.e. α = 1 with no evidence for any class.
        // A fan-in scaled output layer on unnormalized features can start
        // with logits beyond the clamp, where the gradient vanishes.
        if let Some(out) = params.layers.last_mut() {
            out.weights.fill(0.0);
        }
        let opt = SgdMomentum::new(&params);
        Ok(Self {
            params,
            opt,
            cfg,
            rng,
        })
    }

    pub fn fit_epoch(&mut self, pools: &TrainPools<'_>) -> Result<EpochStats> {
        fit_epoch(&mut self.params, &mut self.opt, pools, &self.cfg, &mut self.rng)
    }

    /// Dirichlet parameters for every row of `x`.
    pub fn alphas(&self, x: ArrayView2<'_, f64>) -> Result<Vec<DirichletParams>> {
        predict_alphas(&self.params, x, &self.cfg.evidence)
    }

    /// Softmax probabilities for every row of `x`.
    pub fn softmax(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let z = self.params.logits(x)?;
        let mut out = Array2::zeros(z.raw_dim());
        for (mut o, r) in out.outer_iter_mut().zip(z.outer_iter()) {
            o.assign(&ndarray::Array1::from(super::softmax_row(r)));
        }
        Ok(out)
    }
}

pub(crate) fn predict_alphas(
    params: &NetworkParams,
    x: ArrayView2<'_, f64>,
    cfg: &EvidenceMapConfig,
) -> Result<Vec<DirichletParams>> {
    let z = params.logits(x)?;
    z.outer_iter()
        .map(|r| DirichletParams::new(r.iter().map(|&v| cfg.alpha_of(v)).collect()))
        .collect()
}
