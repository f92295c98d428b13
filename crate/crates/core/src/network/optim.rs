use ndarray::ArrayView2;

use super::{Dense, ForwardCache, Gradients, NetworkParams, TrainConfig};
use crate::error::{Error, Result};

/// Heavy-ball SGD state: `v ← m·v + g`, `θ ← θ − lr·v`.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdMomentum {
    velocity: Vec<Dense>,
    steps: u64,
}

impl SgdMomentum {
    pub fn new(params: &NetworkParams) -> Self {
        let velocity = params
            .layers
            .iter()
            .map(|l| Dense {
                weights: ndarray::Array2::zeros(l.weights.raw_dim()),
                bias: ndarray::Array1::zeros(l.bias.raw_dim()),
            })
            .collect();
        Self { velocity, steps: 0 }
    }

    /// Number of updates applied so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update with weight decay folded into the gradient.
    pub fn step(
        &mut self,
        params: &mut NetworkParams,
        grads: &Gradients,
        lr: f64,
        momentum: f64,
        weight_decay: f64,
    ) -> Result<()> {
        if grads.layers.len() != params.layers.len() || self.velocity.len() != params.layers.len()
        {
            return Err(Error::Dimension {
                expected: params.layers.len(),
                got: grads.layers.len(),
                context: "layer count in optimizer step",
            });
        }
        for ((p, g), v) in params
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.velocity)
        {
            if p.weights.dim() != g.weights.dim() || p.bias.dim() != g.bias.dim() {
                return Err(Error::Dimension {
                    expected: p.weights.len(),
                    got: g.weights.len(),
                    context: "layer shape in optimizer step",
                });
            }
            update(
                p.weights.iter_mut(),
                g.weights.iter(),
                v.weights.iter_mut(),
                lr,
                momentum,
                weight_decay,
            );
            update(
                p.bias.iter_mut(),
                g.bias.iter(),
                v.bias.iter_mut(),
                lr,
                momentum,
                weight_decay,
            );
        }
        self.steps += 1;
        Ok(())
    }
}

fn update<'a>(
    params: impl Iterator<Item = &'a mut f64>,
    grads: impl Iterator<Item = &'a f64>,
    velocity: impl Iterator<Item = &'a mut f64>,
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) {
    for ((p, g), v) in params.zip(grads).zip(velocity) {
        let g = g + weight_decay * *p;
        *v = momentum * *v + g;
        *p -= lr * *v;
    }
}

/// Backward pass followed by one optimizer step at the scheduled rate.
pub fn backward_and_step(
    params: &mut NetworkParams,
    cache: &ForwardCache,
    logit_grad: ArrayView2<'_, f64>,
    opt: &mut SgdMomentum,
    cfg: &TrainConfig,
) -> Result<Gradients> {
    let grads = params.backward(cache, logit_grad)?;
    let lr = cfg.lr_schedule.rate(cfg.learning_rate, opt.steps());
    opt.step(params, &grads, lr, cfg.momentum, cfg.weight_decay)?;
    Ok(grads)
}
