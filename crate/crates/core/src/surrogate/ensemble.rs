//! Deep-ensemble surrogate: K independently initialized MLPs trained on the
//! full dataset, combined into a predictive mean and an epistemic variance.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::mlp::{Mlp, MlpSpec, Workspace};
use super::train::{train_member, TrainConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed::SeedTree;
use crate::space::{DesignPoint, DesignSpace};

/// Ten-member activation roster used by the benchmark surrogates.
pub const DEFAULT_ACTIVATIONS: [Activation; 10] = [
    Activation::Tanh,
    Activation::Tanh,
    Activation::Relu,
    Activation::Relu,
    Activation::Celu,
    Activation::Celu,
    Activation::LeakyRelu,
    Activation::LeakyRelu,
    Activation::Elu,
    Activation::Hardswish,
];

pub const DEFAULT_HIDDEN_WIDTHS: [usize; 3] = [100, 50, 100];

/// Wider preset for harder simulators.
pub const AIRFOIL_HIDDEN_WIDTHS: [usize; 4] = [150, 200, 200, 150];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    pub members: usize,
    pub hidden_widths: Vec<usize>,
    /// Assigned round-robin: member `k` uses `activations[k % len]`.
    pub activations: Vec<Activation>,
    pub train: TrainConfig,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            members: DEFAULT_ACTIVATIONS.len(),
            hidden_widths: DEFAULT_HIDDEN_WIDTHS.to_vec(),
            activations: DEFAULT_ACTIVATIONS.to_vec(),
            train: TrainConfig::default(),
        }
    }
}

impl SurrogateConfig {
    pub fn airfoil_scale() -> Self {
        Self {
            hidden_widths: AIRFOIL_HIDDEN_WIDTHS.to_vec(),
            train: TrainConfig {
                minibatch: 20,
                ..TrainConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.members < 2 {
            return Err(Error::config("an ensemble needs at least 2 members"));
        }
        if self.activations.is_empty() {
            return Err(Error::config("activation roster is empty"));
        }
        if self.hidden_widths.is_empty() || self.hidden_widths.contains(&0) {
            return Err(Error::config("hidden_widths must be a non-empty list of positive widths"));
        }
        self.train.validate()
    }

    pub fn roster(&self, input_dim: usize, output_dim: usize) -> Result<Vec<MlpSpec>> {
        self.validate()?;
        (0..self.members)
            .map(|k| {
                MlpSpec::new(
                    input_dim,
                    output_dim,
                    self.hidden_widths.clone(),
                    self.activations[k % self.activations.len()],
                )
            })
            .collect()
    }
}

/// Affine map from the design box onto `[0, 1]^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputScaler {
    pub lower: Vec<f64>,
    pub width: Vec<f64>,
}

impl InputScaler {
    pub fn from_space(space: &DesignSpace) -> Self {
        Self {
            lower: space.lower().to_vec(),
            width: (0..space.dim()).map(|i| space.width(i)).collect(),
        }
    }

    pub fn scale(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.width))
            .map(|(v, (lo, w))| (v - lo) / w)
            .collect()
    }

    pub fn unscale(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lower.iter().zip(&self.width))
            .map(|(v, (lo, w))| lo + v * w)
            .collect()
    }
}

/// Per-objective standardization by training-target mean and std.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl OutputScaler {
    pub fn fit(ys: &[Vec<f64>]) -> Result<Self> {
        let m = ys.first().map(Vec::len).unwrap_or(0);
        if m == 0 {
            return Err(Error::config("cannot fit an output scaler on no targets"));
        }
        let n = ys.len() as f64;
        let mut mean = vec![0.0; m];
        for y in ys {
            for (a, v) in mean.iter_mut().zip(y) {
                *a += v;
            }
        }
        mean.iter_mut().for_each(|a| *a /= n);
        let mut std = vec![0.0; m];
        for y in ys {
            for ((s, v), mu) in std.iter_mut().zip(y).zip(&mean) {
                *s += (v - mu) * (v - mu);
            }
        }
        for (j, (s, mu)) in std.iter_mut().zip(&mean).enumerate() {
            *s = (*s / n).sqrt();
            if !(*s > 1e-12 * mu.abs().max(1.0)) {
                return Err(Error::config(format!(
                    "objective {j} is constant over the training data; cannot standardize"
                )));
            }
        }
        Ok(Self { mean, std })
    }

    pub fn standardize(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (mu, s))| (v - mu) / s)
            .collect()
    }

    pub fn destandardize(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (mu, s))| mu + v * s)
            .collect()
    }
}

/// Per-member full-dataset MSE (standardized targets) before and after training.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub initial_mse: Vec<f64>,
    pub final_mse: Vec<f64>,
}

/// Ensemble mean (original units) and epistemic variance (standardized units).
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub mean: Vec<Vec<f64>>,
    pub variance: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSurrogate {
    members: Vec<Mlp>,
    input: InputScaler,
    output: OutputScaler,
}

const PREDICT_CHUNK: usize = 512;

impl EnsembleSurrogate {
    pub fn from_parts(members: Vec<Mlp>, input: InputScaler, output: OutputScaler) -> Result<Self> {
        if members.len() < 2 {
            return Err(Error::argument("an ensemble needs at least 2 members"));
        }
        let (n, m) = (members[0].spec().input_dim, members[0].spec().output_dim);
        if members
            .iter()
            .any(|mlp| mlp.spec().input_dim != n || mlp.spec().output_dim != m)
        {
            return Err(Error::argument("ensemble members disagree on input/output dimensions"));
        }
        if input.lower.len() != n || input.width.len() != n {
            return Err(Error::argument("input scaler does not match member input dimension"));
        }
        if output.mean.len() != m || output.std.len() != m {
            return Err(Error::argument("output scaler does not match member output dimension"));
        }
        if output.std.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::argument("output scaler std must be positive"));
        }
        Ok(Self {
            members,
            input,
            output,
        })
    }

    pub fn members(&self) -> &[Mlp] {
        &self.members
    }

    pub fn input_scaler(&self) -> &InputScaler {
        &self.input
    }

    pub fn output_scaler(&self) -> &OutputScaler {
        &self.output
    }

    pub fn input_dim(&self) -> usize {
        self.members[0].spec().input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.members[0].spec().output_dim
    }

    fn scaled_block(&self, xs: &[DesignPoint]) -> Vec<f64> {
        xs.iter().flat_map(|x| self.input.scale(x)).collect()
    }

    /// Standardized outputs of every member: `[member][row][objective]`.
    pub fn member_outputs(&self, xs: &[DesignPoint]) -> Vec<Vec<Vec<f64>>> {
        let m = self.output_dim();
        let block = self.scaled_block(xs);
        let n_in = self.input_dim();
        self.members
            .iter()
            .map(|mlp| {
                let mut ws = Workspace::default();
                let mut rows = Vec::with_capacity(xs.len());
                for chunk in block.chunks(PREDICT_CHUNK * n_in) {
                    let b = chunk.len() / n_in;
                    let out = mlp.forward_batch(chunk, b, &mut ws);
                    rows.extend(out.chunks_exact(m).map(<[f64]>::to_vec));
                }
                rows
            })
            .collect()
    }

    fn predict_chunk(&self, xs: &[DesignPoint], ws: &mut Workspace, out: &mut Prediction) {
        let n_in = self.input_dim();
        let m = self.output_dim();
        let b = xs.len();
        let block = self.scaled_block(xs);
        let k = self.members.len() as f64;
        // Shifted sums around member 0: mean = mu_0 + s1/K and
        // var = s2/K - (s1/K)^2, the same quantity as (1/K) sum mu_k^2 - mean^2
        // without cancellation; identical members give exactly zero.
        let first = self.members[0].forward_batch(&block, b, ws).to_vec();
        let mut s1 = vec![0.0; b * m];
        let mut s2 = vec![0.0; b * m];
        for mlp in &self.members[1..] {
            let o = mlp.forward_batch(&block[..b * n_in], b, ws);
            for (((a, q), v), f) in s1.iter_mut().zip(s2.iter_mut()).zip(o).zip(&first) {
                let d = v - f;
                *a += d;
                *q += d * d;
            }
        }
        for r in 0..b {
            let mut mean_z = Vec::with_capacity(m);
            let mut var = Vec::with_capacity(m);
            for j in 0..m {
                let i = r * m + j;
                let shift = s1[i] / k;
                mean_z.push(first[i] + shift);
                var.push((s2[i] / k - shift * shift).max(0.0));
            }
            out.mean.push(self.output.destandardize(&mean_z));
            out.variance.push(var);
        }
    }

    pub fn predict(&self, xs: &[DesignPoint]) -> Prediction {
        let parts: Vec<Prediction> = xs
            .par_chunks(PREDICT_CHUNK)
            .map(|chunk| {
                let mut ws = Workspace::default();
                let mut p = Prediction {
                    mean: Vec::with_capacity(chunk.len()),
                    variance: Vec::with_capacity(chunk.len()),
                };
                self.predict_chunk(chunk, &mut ws, &mut p);
                p
            })
            .collect();
        let mut out = Prediction {
            mean: Vec::with_capacity(xs.len()),
            variance: Vec::with_capacity(xs.len()),
        };
        for p in parts {
            out.mean.extend(p.mean);
            out.variance.extend(p.variance);
        }
        out
    }

    /// Ensemble mean per objective, in original units.
    pub fn predict_mean(&self, xs: &[DesignPoint]) -> Vec<Vec<f64>> {
        self.predict(xs).mean
    }

    /// Population variance of member predictions per objective, in
    /// standardized output units.
    pub fn predict_epistemic_variance(&self, xs: &[DesignPoint]) -> Vec<Vec<f64>> {
        self.predict(xs).variance
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: EnsembleSurrogate = serde_json::from_str(text)?;
        let members = raw
            .members
            .into_iter()
            .map(|m| {
                let spec = m.spec().clone();
                Mlp::from_layers(spec, m.layers().to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(members, raw.input, raw.output)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::load(path, e.to_string()))?;
        Self::from_json(&text).map_err(|e| Error::load(path, e.to_string()))
    }
}

/// Trains one network per spec on the full dataset.
///
/// Member `k` draws its initial weights from stream `("init", k)` and its
/// minibatch order from `("shuffle", k)` of `seed`, so results do not depend
/// on how members are scheduled onto threads.
pub fn train_ensemble(
    ds: &Dataset,
    space: &DesignSpace,
    specs: &[MlpSpec],
    cfg: &TrainConfig,
    seed: SeedTree,
) -> Result<(EnsembleSurrogate, TrainReport)> {
    cfg.validate()?;
    if specs.len() < 2 {
        return Err(Error::config("an ensemble needs at least 2 members"));
    }
    if ds.dim() != space.dim() {
        return Err(Error::argument("dataset and design space dimensions differ"));
    }
    for s in specs {
        s.validate()?;
        if s.input_dim != ds.dim() || s.output_dim != ds.num_objectives() {
            return Err(Error::config(format!(
                "member spec {}->{} does not match dataset {}->{}",
                s.input_dim,
                s.output_dim,
                ds.dim(),
                ds.num_objectives()
            )));
        }
    }
    if ds.len() < cfg.minibatch {
        return Err(Error::config(format!(
            "dataset has {} rows, fewer than the minibatch size {}",
            ds.len(),
            cfg.minibatch
        )));
    }
    let input = InputScaler::from_space(space);
    let output = OutputScaler::fit(ds.performances())?;
    let xs: Vec<f64> = ds.designs().iter().flat_map(|x| input.scale(x)).collect();
    let ys: Vec<f64> = ds
        .performances()
        .iter()
        .flat_map(|y| output.standardize(y))
        .collect();
    let rows = ds.len();

    let train_one = |(k, spec): (usize, &MlpSpec)| -> Result<(Mlp, f64, f64)> {
        let mut mlp = Mlp::new(spec.clone(), &mut seed.rng("init", k as u64))?;
        let mut rng = seed.rng("shuffle", k as u64);
        let (a, b) = train_member(&mut mlp, k, &xs, &ys, rows, cfg, &mut rng)?;
        Ok((mlp, a, b))
    };
    let trained: Vec<(Mlp, f64, f64)> = if cfg.parallel {
        specs.par_iter().enumerate().map(train_one).collect::<Result<_>>()?
    } else {
        specs.iter().enumerate().map(train_one).collect::<Result<_>>()?
    };

    let mut members = Vec::with_capacity(trained.len());
    let mut report = TrainReport {
        initial_mse: Vec::new(),
        final_mse: Vec::new(),
    };
    for (mlp, a, b) in trained {
        members.push(mlp);
        report.initial_mse.push(a);
        report.final_mse.push(b);
    }
    Ok((EnsembleSurrogate::from_parts(members, input, output)?, report))
}
