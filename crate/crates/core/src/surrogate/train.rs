use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, Mlp, Workspace};
use crate::error::{Error, Result};
use crate::seed::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub minibatch: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Train members on the rayon pool. Results do not depend on this flag.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            minibatch: 10,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            parallel: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.minibatch == 0 {
            return Err(Error::config("epochs and minibatch must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("Adam betas must lie in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::config("Adam epsilon must be positive"));
        }
        Ok(())
    }
}

struct Adam {
    m: Gradients,
    v: Gradients,
    step: i32,
}

impl Adam {
    fn new(mlp: &Mlp) -> Self {
        Self {
            m: Gradients::zeros_like(mlp),
            v: Gradients::zeros_like(mlp),
            step: 0,
        }
    }

    fn update(&mut self, mlp: &mut Mlp, grads: &Gradients, cfg: &TrainConfig) {
        self.step += 1;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let lr = cfg.learning_rate;
        let eps = cfg.epsilon;
        let apply = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            }
        };
        for (((layer, g), m), v) in mlp
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.m.layers)
            .zip(&mut self.v.layers)
        {
            apply(&mut layer.weights, &g.weights, &mut m.weights, &mut v.weights);
            apply(&mut layer.bias, &g.bias, &mut m.bias, &mut v.bias);
        }
    }
}

/// Mean squared error of `mlp` over a row-major dataset.
pub(crate) fn dataset_mse(mlp: &Mlp, xs: &[f64], ys: &[f64], rows: usize) -> f64 {
    const CHUNK: usize = 256;
    let n_in = mlp.spec().input_dim;
    let n_out = mlp.spec().output_dim;
    let mut ws = Workspace::default();
    let mut total = 0.0;
    let mut start = 0;
    while start < rows {
        let b = CHUNK.min(rows - start);
        let out = mlp.forward_batch(&xs[start * n_in..(start + b) * n_in], b, &mut ws);
        total += out
            .iter()
            .zip(&ys[start * n_out..(start + b) * n_out])
            .map(|(o, t)| (o - t) * (o - t))
            .sum::<f64>();
        start += b;
    }
    total / (rows * n_out) as f64
}

/// Minibatch Adam on the MSE loss. Returns the full-dataset MSE before and
/// after training.
pub(crate) fn train_member(
    mlp: &mut Mlp,
    member: usize,
    xs: &[f64],
    ys: &[f64],
    rows: usize,
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<(f64, f64)> {
    let n_in = mlp.spec().input_dim;
    let n_out = mlp.spec().output_dim;
    let initial = dataset_mse(mlp, xs, ys, rows);
    let mut order: Vec<usize> = (0..rows).collect();
    let mut ws = Workspace::default();
    let mut grads = Gradients::zeros_like(mlp);
    let mut adam = Adam::new(mlp);
    let mut bx = Vec::with_capacity(cfg.minibatch * n_in);
    let mut by = Vec::with_capacity(cfg.minibatch * n_out);
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        for idx in order.chunks(cfg.minibatch) {
            bx.clear();
            by.clear();
            for &i in idx {
                bx.extend_from_slice(&xs[i * n_in..(i + 1) * n_in]);
                by.extend_from_slice(&ys[i * n_out..(i + 1) * n_out]);
            }
            let loss = mlp.loss_and_gradient(&bx, &by, idx.len(), &mut ws, &mut grads);
            if !loss.is_finite() {
                return Err(Error::Training {
                    member,
                    message: format!("non-finite loss {loss} in epoch {epoch}"),
                });
            }
            adam.update(mlp, &grads, cfg);
        }
    }
    let last = dataset_mse(mlp, xs, ys, rows);
    if !last.is_finite() {
        return Err(Error::Training {
            member,
            message: format!("non-finite loss {last} after training"),
        });
    }
    Ok((initial, last))
}
