//! Feedforward classifier f(x, θ) with hand-written forward and backward
//! passes.

mod checkpoint;
mod optim;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use optim::{backward_and_step, SgdMomentum};
pub use train::{
    fit_epoch, EpochStats, LrSchedule, Objective, TrainConfig, TrainPools, Trainer,
};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation.
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
        }
    }
}

/// One affine layer, `y = x W + b` with `W` of shape (fan_in, fan_out).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// MLP weights for shape `[d_in, h₁, …, C]`; hidden layers use
/// `activation`, the output layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub layers: Vec<Dense>,
    pub activation: Activation,
}

/// Layer inputs and pre-activations recorded by [`NetworkParams::forward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

/// Parameter gradients, one `Dense` per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl NetworkParams {
    /// Uniform fan-in initialization, `U(−s, s)` with `s = √(6 / fan_in)`
    /// for ReLU and `√(3 / fan_in)` for tanh. Biases start at zero.
    pub fn init<R: Rng + ?Sized>(
        sizes: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        check_sizes(sizes)?;
        let gain = match activation {
            Activation::Relu => 6.0,
            Activation::Tanh => 3.0,
        };
        let layers = sizes
            .windows(2)
            .map(|w| {
                let s = (gain / w[0] as f64).sqrt();
                Dense {
                    weights: Array2::from_shape_simple_fn((w[0], w[1]), || {
                        rng.random_range(-s..s)
                    }),
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        Ok(Self { layers, activation })
    }

    pub fn zeros(sizes: &[usize], activation: Activation) -> Result<Self> {
        check_sizes(sizes)?;
        let layers = sizes
            .windows(2)
            .map(|w| Dense {
                weights: Array2::zeros((w[0], w[1])),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        Ok(Self { layers, activation })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().expect("at least one layer").weights.ncols()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.weights.ncols()));
        s
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Logits for a batch (rows are samples) together with the backward cache.
    pub fn forward(&self, features: ArrayView2<'_, f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(features)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = features.to_owned();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let z = x.dot(&layer.weights) + &layer.bias;
            inputs.push(x);
            if i == last {
                pre.push(Array2::zeros((0, 0)));
                return Ok((z, ForwardCache { inputs, pre }));
            }
            x = z.mapv(|v| self.activation.apply(v));
            pre.push(z);
        }
        unreachable!("loop returns at the output layer")
    }

    /// Logits only.
    pub fn logits(&self, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(features)?;
        let mut x = features.to_owned();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            x = x.dot(&layer.weights) + &layer.bias;
            if i != last {
                x.mapv_inplace(|v| self.activation.apply(v));
            }
        }
        Ok(x)
    }

    /// Parameter gradients given ∂L/∂logits from the matching forward pass.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        logit_grad: ArrayView2<'_, f64>,
    ) -> Result<Gradients> {
        let n = cache.inputs[0].nrows();
        if logit_grad.dim() != (n, self.num_classes()) || cache.inputs.len() != self.layers.len()
        {
            return Err(Error::Dimension {
                expected: n * self.num_classes(),
                got: logit_grad.len(),
                context: "logit gradient shape against forward cache",
            });
        }
        let mut out = Vec::with_capacity(self.layers.len());
        let mut delta = logit_grad.to_owned();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let w_grad = cache.inputs[i].t().dot(&delta);
            let b_grad = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut back = delta.dot(&layer.weights.t());
                back.zip_mut_with(&cache.pre[i - 1], |d, &p| *d *= self.activation.derivative(p));
                delta = back;
            }
            out.push(Dense {
                weights: w_grad,
                bias: b_grad,
            });
        }
        out.reverse();
        Ok(Gradients { layers: out })
    }

    /// All parameters, layer by layer, weights (row-major) before biases.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            v.extend(l.weights.iter());
            v.extend(l.bias.iter());
        }
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Dimension {
                expected: self.num_params(),
                got: flat.len(),
                context: "flat parameter vector",
            });
        }
        let mut it = flat.iter();
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|p| {
                *p = *it.next().expect("length checked");
            });
        }
        Ok(())
    }

    fn check_input(&self, features: ArrayView2<'_, f64>) -> Result<()> {
        if features.ncols() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: features.ncols(),
                context: "feature dimension",
            });
        }
        Ok(())
    }
}

impl Gradients {
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for l in &self.layers {
            v.extend(l.weights.iter());
            v.extend(l.bias.iter());
        }
        v
    }
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(Error::config(
            "hidden",
            format!("network shape {sizes:?} needs an input and an output layer of non-zero width"),
        ));
    }
    if *sizes.last().unwrap() < 2 {
        return Err(Error::config("num_classes", "at least 2 output classes required"));
    }
    Ok(())
}

pub(crate) fn softmax_row(row: ArrayView1<'_, f64>) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut e: Vec<f64> = row.iter().map(|z| (z - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter_mut().for_each(|v| *v /= s);
    e
}
