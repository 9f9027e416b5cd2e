use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::acquisition::AcquisitionConfig;
use crate::error::{Error, Result};
use crate::metrics::{HypervolumeSpec, DEFAULT_MC_SAMPLES};
use crate::moea::NsgaConfig;
use crate::problems::{Problem, ProblemSpec};
use crate::surrogate::SurrogateConfig;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    LbnMobo,
    /// Plain NSGA-II on the NFP; one iteration is one generation with
    /// population `batch_size`.
    Nsga2Baseline,
    /// Uniform random batches.
    RandomBaseline,
    /// LBN-MOBO with an M-dimensional (mean only) acquisition.
    AblateUncertainty,
}

impl Mode {
    pub const ALL: [Mode; 4] = [
        Mode::LbnMobo,
        Mode::Nsga2Baseline,
        Mode::RandomBaseline,
        Mode::AblateUncertainty,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::LbnMobo => "lbn-mobo",
            Mode::Nsga2Baseline => "nsga2-baseline",
            Mode::RandomBaseline => "random-baseline",
            Mode::AblateUncertainty => "ablate-uncertainty",
        }
    }

    pub fn uses_surrogate(self) -> bool {
        matches!(self, Mode::LbnMobo | Mode::AblateUncertainty)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown mode {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// All-minimize reference point; the problem default when omitted.
    pub reference_point: Option<Vec<f64>>,
    pub mc_samples: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            reference_point: None,
            mc_samples: DEFAULT_MC_SAMPLES,
        }
    }
}

/// Everything a run needs. Stored verbatim (after [`RunConfig::resolve`]) as
/// `config.toml` in the output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub master_seed: u64,
    pub batch_size: usize,
    pub iterations: usize,
    /// Size of the initial uniform sample; defaults to `batch_size`.
    #[serde(default)]
    pub init_size: Option<usize>,
    pub output_dir: PathBuf,
    /// Worker threads for every parallel phase; all cores when omitted.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Retrain the surrogate after the last batch. The result is saved but
    /// not used by the run itself.
    #[serde(default = "yes")]
    pub train_final_surrogate: bool,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub surrogate: SurrogateConfig,
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

fn yes() -> bool {
    true
}

impl RunConfig {
    /// A config with library defaults for everything but the essentials.
    pub fn new(problem: ProblemSpec, batch_size: usize, iterations: usize, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            mode: Mode::default(),
            master_seed: 0,
            batch_size,
            iterations,
            init_size: None,
            output_dir: output_dir.into(),
            threads: None,
            train_final_surrogate: true,
            problem,
            surrogate: SurrogateConfig::default(),
            acquisition: AcquisitionConfig::default(),
            metrics: MetricsConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::load(path, e.to_string()))?;
        Self::from_toml(&text)
    }

    pub fn init_size(&self) -> usize {
        self.init_size.unwrap_or(self.batch_size)
    }

    pub fn hypervolume_spec(&self, problem: &Problem) -> Result<HypervolumeSpec> {
        let reference = match &self.metrics.reference_point {
            Some(r) => r.clone(),
            None => problem.default_reference_point().ok_or_else(|| {
                Error::config(format!(
                    "problem {} has no default reference point; set metrics.reference_point",
                    problem.name()
                ))
            })?,
        };
        if reference.len() != problem.num_objectives() {
            return Err(Error::config(format!(
                "reference point has {} coordinates but the problem has {} objectives",
                reference.len(),
                problem.num_objectives()
            )));
        }
        let spec = HypervolumeSpec {
            reference_point: reference,
            mc_samples: self.metrics.mc_samples,
            ideal_point: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Acquisition settings with the batch size filled in and the ablation
    /// switch following the mode.
    pub fn acquisition_config(&self) -> AcquisitionConfig {
        AcquisitionConfig {
            batch_size: self.batch_size,
            use_uncertainty: self.acquisition.use_uncertainty && self.mode != Mode::AblateUncertainty,
            ..self.acquisition.clone()
        }
    }

    pub fn baseline_nsga_config(&self) -> NsgaConfig {
        NsgaConfig {
            population: self.batch_size,
            generations: self.iterations.max(1),
            ..self.acquisition.nsga.clone()
        }
    }

    /// Checks the config against the problem and returns the built problem.
    pub fn validate(&self) -> Result<Problem> {
        let problem = self.problem.build()?;
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.iterations == 0 && self.mode != Mode::RandomBaseline {
            return Err(Error::config("iterations must be at least 1 (0 is allowed for random-baseline)"));
        }
        if self.init_size() == 0 {
            return Err(Error::config("init_size must be at least 1"));
        }
        if self.master_seed > i64::MAX as u64 {
            return Err(Error::config("master_seed must fit in a signed 64-bit integer"));
        }
        if self.threads == Some(0) {
            return Err(Error::config("threads must be at least 1"));
        }
        match self.mode {
            Mode::LbnMobo | Mode::AblateUncertainty => {
                self.surrogate.validate()?;
                self.acquisition_config().validate()?;
                if self.init_size() < self.surrogate.train.minibatch {
                    return Err(Error::config(format!(
                        "init_size {} is smaller than the training minibatch {}",
                        self.init_size(),
                        self.surrogate.train.minibatch
                    )));
                }
            }
            Mode::Nsga2Baseline => {
                if self.init_size() != self.batch_size {
                    return Err(Error::config("nsga2-baseline needs init_size equal to batch_size"));
                }
                self.baseline_nsga_config().validate()?;
            }
            Mode::RandomBaseline => {}
        }
        self.hypervolume_spec(&problem)?;
        Ok(problem)
    }

    /// Fills every defaulted field that depends on the problem.
    pub fn resolve(&self) -> Result<RunConfig> {
        let problem = self.validate()?;
        let mut out = self.clone();
        out.init_size = Some(self.init_size());
        out.metrics.reference_point = Some(self.hypervolume_spec(&problem)?.reference_point);
        Ok(out)
    }
}
