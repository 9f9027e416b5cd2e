//! Dense multilayer perceptron with a hand-written backward pass.
//!
//! Weights are stored input-major (`w[i * outputs + o]`), so the forward pass
//! and the weight-gradient accumulation are contiguous axpy loops.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use crate::error::{Error, Result};
use crate::seed::Rng;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub activation: Activation,
}

impl MlpSpec {
    pub fn new(
        input_dim: usize,
        output_dim: usize,
        hidden_widths: Vec<usize>,
        activation: Activation,
    ) -> Result<Self> {
        let spec = Self {
            input_dim,
            output_dim,
            hidden_widths,
            activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::argument("MLP input and output dimensions must be positive"));
        }
        if self.hidden_widths.is_empty() {
            return Err(Error::argument("MLP needs at least one hidden layer"));
        }
        if self.hidden_widths.contains(&0) {
            return Err(Error::argument("hidden layer widths must be positive"));
        }
        Ok(())
    }

    /// `(inputs, outputs)` of every layer, input to output.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input_dim];
        dims.extend(&self.hidden_widths);
        dims.push(self.output_dim);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Input-major: `weights[i * outputs + o]` connects input `i` to output `o`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs)
            .map(|_| rng.gen_range(-limit..limit))
            .collect();
        Self {
            inputs,
            outputs,
            weights,
            bias: vec![0.0; outputs],
        }
    }

    /// `out[b, :] = bias + sum_i a[b, i] * w[i, :]`
    fn forward(&self, a: &[f64], batch: usize, out: &mut Vec<f64>) {
        out.clear();
        out.reserve(batch * self.outputs);
        for row in a.chunks_exact(self.inputs).take(batch) {
            let start = out.len();
            out.extend_from_slice(&self.bias);
            let z = &mut out[start..];
            for (&ai, w) in row.iter().zip(self.weights.chunks_exact(self.outputs)) {
                axpy(ai, w, z);
            }
        }
    }
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Parameter gradients, laid out like the network's layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            layers: mlp
                .layers
                .iter()
                .map(|l| Layer::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    fn clear(&mut self) {
        for l in &mut self.layers {
            l.weights.fill(0.0);
            l.bias.fill(0.0);
        }
    }

    /// Flattened in the same order as [`Mlp::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }
}

fn flatten_layers(layers: &[Layer]) -> Vec<f64> {
    layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
        .collect()
}

/// Scratch buffers reused across minibatches.
#[derive(Default)]
pub(crate) struct Workspace {
    /// Pre-activations per layer.
    z: Vec<Vec<f64>>,
    /// Layer inputs: `a[0]` is the batch, `a[l]` the activated output of layer `l - 1`.
    a: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    spec: MlpSpec,
    layers: Vec<Layer>,
}

impl Mlp {
    /// Glorot-initialized network.
    pub fn new(spec: MlpSpec, rng: &mut Rng) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layer_shapes()
            .into_iter()
            .map(|(i, o)| Layer::glorot(i, o, rng))
            .collect();
        Ok(Self { spec, layers })
    }

    pub fn from_layers(spec: MlpSpec, layers: Vec<Layer>) -> Result<Self> {
        spec.validate()?;
        let shapes = spec.layer_shapes();
        if shapes.len() != layers.len() {
            return Err(Error::argument(format!(
                "spec implies {} layers, got {}",
                shapes.len(),
                layers.len()
            )));
        }
        for (k, ((i, o), l)) in shapes.iter().zip(&layers).enumerate() {
            if l.inputs != *i
                || l.outputs != *o
                || l.weights.len() != i * o
                || l.bias.len() != *o
            {
                return Err(Error::argument(format!(
                    "layer {k}: expected {i}x{o}, got {}x{} with {} weights and {} biases",
                    l.inputs,
                    l.outputs,
                    l.weights.len(),
                    l.bias.len()
                )));
            }
        }
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All parameters flattened layer by layer (weights, then bias).
    pub fn parameters(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_parameters() {
            return Err(Error::argument(format!(
                "expected {} parameters, got {}",
                self.num_parameters(),
                params.len()
            )));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = it.next().unwrap_or_default();
            }
        }
        Ok(())
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.spec.input_dim {
            return Err(Error::argument(format!(
                "input has {} values, network expects {}",
                x.len(),
                self.spec.input_dim
            )));
        }
        let mut ws = Workspace::default();
        Ok(self.forward_batch(x, 1, &mut ws).to_vec())
    }

    /// Forward pass over a row-major batch; returns the output block.
    pub(crate) fn forward_batch<'w>(&self, xs: &[f64], batch: usize, ws: &'w mut Workspace) -> &'w [f64] {
        let n_layers = self.layers.len();
        ws.z.resize_with(n_layers, Vec::new);
        ws.a.resize_with(n_layers + 1, Vec::new);
        ws.a[0].clear();
        ws.a[0].extend_from_slice(&xs[..batch * self.spec.input_dim]);
        let act = self.spec.activation;
        for (l, layer) in self.layers.iter().enumerate() {
            let (head, tail) = ws.a.split_at_mut(l + 1);
            layer.forward(&head[l], batch, &mut ws.z[l]);
            let out = &mut tail[0];
            out.clear();
            if l + 1 < n_layers {
                out.extend(ws.z[l].iter().map(|&z| act.apply(z)));
            } else {
                out.extend_from_slice(&ws.z[l]);
            }
        }
        &ws.a[n_layers]
    }

    /// Mean squared error over the batch and outputs, accumulating its
    /// gradient into `grads` (which is cleared first).
    pub(crate) fn loss_and_gradient(
        &self,
        xs: &[f64],
        ys: &[f64],
        batch: usize,
        ws: &mut Workspace,
        grads: &mut Gradients,
    ) -> f64 {
        let m = self.spec.output_dim;
        let n_layers = self.layers.len();
        self.forward_batch(xs, batch, ws);
        let scale = 2.0 / (batch * m) as f64;
        let out = &ws.a[n_layers];
        ws.delta.clear();
        let mut loss = 0.0;
        for (o, t) in out.iter().zip(&ys[..batch * m]) {
            let r = o - t;
            loss += r * r;
            ws.delta.push(scale * r);
        }
        loss /= (batch * m) as f64;

        grads.clear();
        let act = self.spec.activation;
        for l in (0..n_layers).rev() {
            let layer = &self.layers[l];
            let g = &mut grads.layers[l];
            let a_in = &ws.a[l];
            for (row, d) in a_in
                .chunks_exact(layer.inputs)
                .zip(ws.delta.chunks_exact(layer.outputs))
            {
                for (&ai, gw) in row.iter().zip(g.weights.chunks_exact_mut(layer.outputs)) {
                    axpy(ai, d, gw);
                }
                for (gb, di) in g.bias.iter_mut().zip(d) {
                    *gb += di;
                }
            }
            if l == 0 {
                break;
            }
            let z_prev = &ws.z[l - 1];
            ws.delta_prev.clear();
            for (d, zrow) in ws
                .delta
                .chunks_exact(layer.outputs)
                .zip(z_prev.chunks_exact(layer.inputs))
            {
                for (w, &z) in layer.weights.chunks_exact(layer.outputs).zip(zrow) {
                    ws.delta_prev.push(dot(w, d) * act.derivative(z));
                }
            }
            std::mem::swap(&mut ws.delta, &mut ws.delta_prev);
        }
        loss
    }

    /// Gradient of the squared error `mean_j (y*_j - y_j)^2` for one sample.
    pub fn backward(&self, x: &[f64], target: &[f64]) -> Result<Gradients> {
        if x.len() != self.spec.input_dim || target.len() != self.spec.output_dim {
            return Err(Error::argument(format!(
                "expected input {} and target {}, got {} and {}",
                self.spec.input_dim,
                self.spec.output_dim,
                x.len(),
                target.len()
            )));
        }
        let mut ws = Workspace::default();
        let mut grads = Gradients::zeros_like(self);
        self.loss_and_gradient(x, target, 1, &mut ws, &mut grads);
        Ok(grads)
    }

    /// Squared-error loss for one sample, matching [`Mlp::backward`].
    pub fn loss(&self, x: &[f64], target: &[f64]) -> Result<f64> {
        let y = self.forward(x)?;
        if target.len() != y.len() {
            return Err(Error::argument("target length does not match output"));
        }
        Ok(y.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::SeedTree;

    #[test]
    fn linear_layer_picks_weight_column() {
        // With x = (1, 0) the output is the weights leaving input 0.
        let spec = MlpSpec::new(2, 2, vec![2], Activation::Relu).unwrap();
        let hidden = Layer {
            inputs: 2,
            outputs: 2,
            weights: vec![1.0, 0.0, 0.0, 1.0],
            bias: vec![0.0; 2],
        };
        let out = Layer {
            inputs: 2,
            outputs: 2,
            weights: vec![0.3, -0.7, 0.9, 0.2],
            bias: vec![0.0; 2],
        };
        let mlp = Mlp::from_layers(spec, vec![hidden, out]).unwrap();
        assert_eq!(mlp.forward(&[1.0, 0.0]).unwrap(), vec![0.3, -0.7]);
    }

    #[test]
    fn zero_input_relu_zero_bias_gives_zero() {
        let spec = MlpSpec::new(3, 2, vec![5, 4], Activation::Relu).unwrap();
        let mlp = Mlp::new(spec, &mut SeedTree::new(1).rng("m", 0)).unwrap();
        assert_eq!(mlp.forward(&[0.0; 3]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn shape_mismatch_is_argument_error() {
        let spec = MlpSpec::new(3, 2, vec![4], Activation::Tanh).unwrap();
        let mlp = Mlp::new(spec.clone(), &mut SeedTree::new(1).rng("m", 0)).unwrap();
        assert!(matches!(mlp.forward(&[0.0; 2]), Err(Error::Argument(_))));
        assert!(matches!(mlp.backward(&[0.0; 3], &[1.0]), Err(Error::Argument(_))));
        assert!(Mlp::from_layers(spec, vec![Layer::zeros(3, 4)]).is_err());
        assert!(MlpSpec::new(3, 2, vec![], Activation::Tanh).is_err());
    }

    #[test]
    fn batch_forward_matches_single() {
        let spec = MlpSpec::new(4, 3, vec![7, 5], Activation::Elu).unwrap();
        let mlp = Mlp::new(spec, &mut SeedTree::new(2).rng("m", 0)).unwrap();
        let xs: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut ws = Workspace::default();
        let batch = mlp.forward_batch(&xs, 5, &mut ws).to_vec();
        for (b, x) in xs.chunks(4).enumerate() {
            assert_eq!(&batch[b * 3..b * 3 + 3], mlp.forward(x).unwrap().as_slice());
        }
    }

    #[test]
    fn batch_gradient_is_mean_of_sample_gradients() {
        let spec = MlpSpec::new(2, 2, vec![6], Activation::Tanh).unwrap();
        let mlp = Mlp::new(spec, &mut SeedTree::new(3).rng("m", 0)).unwrap();
        let xs = [0.1, 0.9, -0.4, 0.3, 0.7, -0.2];
        let ys = [1.0, 0.0, 0.5, -0.5, 0.2, 0.1];
        let mut ws = Workspace::default();
        let mut g = Gradients::zeros_like(&mlp);
        mlp.loss_and_gradient(&xs, &ys, 3, &mut ws, &mut g);
        let mut mean = vec![0.0; mlp.num_parameters()];
        for b in 0..3 {
            let gb = mlp.backward(&xs[b * 2..b * 2 + 2], &ys[b * 2..b * 2 + 2]).unwrap();
            for (m, v) in mean.iter_mut().zip(gb.flatten()) {
                *m += v / 3.0;
            }
        }
        for (a, b) in g.flatten().iter().zip(&mean) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn parameters_round_trip() {
        let spec = MlpSpec::new(2, 1, vec![3], Activation::Hardswish).unwrap();
        let mut mlp = Mlp::new(spec, &mut SeedTree::new(4).rng("m", 0)).unwrap();
        let p = mlp.parameters();
        assert_eq!(p.len(), 2 * 3 + 3 + 3 + 1);
        let doubled: Vec<f64> = p.iter().map(|v| v * 2.0).collect();
        mlp.set_parameters(&doubled).unwrap();
        assert_eq!(mlp.parameters(), doubled);
        assert!(mlp.set_parameters(&p[1..]).is_err());
    }
}
