//! Python module `lbn_mobo`.

use std::cell::RefCell;
use std::path::PathBuf;

use lbn_mobo::dataset::Dataset;
use lbn_mobo::metrics::{self, HypervolumeSpec};
use lbn_mobo::moea::{self, NsgaConfig};
use lbn_mobo::optimizer::{self, RunConfig, RunState};
use lbn_mobo::problems::{self, ProblemSpec, ZdtVariant};
use lbn_mobo::seed::SeedTree;
use lbn_mobo::space::{self, Direction};
use lbn_mobo::surrogate::{self, Activation, EnsembleSurrogate, SurrogateConfig};
use lbn_mobo::Error;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(lbn_mobo, EvaluationError, PyException);
create_exception!(lbn_mobo, OptimizerError, PyException);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Argument(_) | Error::Config(_) => PyValueError::new_err(e.to_string()),
        Error::Load { .. } | Error::Io(_) => PyOSError::new_err(e.to_string()),
        Error::Evaluation { ref stderr, .. } => match stderr {
            Some(s) if !s.trim().is_empty() => EvaluationError::new_err(format!("{e}\n{s}")),
            _ => EvaluationError::new_err(e.to_string()),
        },
        _ => OptimizerError::new_err(e.to_string()),
    }
}

fn direction_name(d: Direction) -> &'static str {
    match d {
        Direction::Minimize => "minimize",
        Direction::Maximize => "maximize",
    }
}

#[pyclass(name = "DesignSpace", frozen)]
struct PyDesignSpace {
    inner: space::DesignSpace,
}

#[pymethods]
impl PyDesignSpace {
    #[new]
    fn new(lower: Vec<f64>, upper: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: space::DesignSpace::new(lower, upper).map_err(to_py)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn lower(&self) -> Vec<f64> {
        self.inner.lower().to_vec()
    }

    #[getter]
    fn upper(&self) -> Vec<f64> {
        self.inner.upper().to_vec()
    }

    fn contains(&self, x: Vec<f64>) -> bool {
        self.inner.contains(&x)
    }

    /// Uniform sample of `count` designs.
    #[pyo3(signature = (count, seed=0))]
    fn sample(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = SeedTree::new(seed).rng("sample", 0);
        space::uniform_sample(&self.inner, count, &mut rng)
    }

    fn __repr__(&self) -> String {
        format!("DesignSpace(dim={})", self.inner.dim())
    }
}

#[pyclass(name = "Problem", frozen)]
struct PyProblem {
    inner: problems::Problem,
}

#[pymethods]
impl PyProblem {
    /// Built-in benchmark by name: zdt1, zdt2, zdt3, dtlz1 or dtlz4.
    #[staticmethod]
    #[pyo3(signature = (name, dim=None, objectives=None))]
    fn builtin(name: &str, dim: Option<usize>, objectives: Option<usize>) -> PyResult<Self> {
        let number = |prefix: &str| {
            name[prefix.len()..]
                .parse::<u8>()
                .map_err(|_| PyValueError::new_err(format!("unknown problem {name:?}")))
        };
        let spec = if name.starts_with("zdt") {
            let variant = number("zdt")?;
            ProblemSpec::Zdt {
                variant,
                dim: dim.unwrap_or(if variant == 3 { 6 } else { 30 }),
            }
        } else if name.starts_with("dtlz") {
            ProblemSpec::Dtlz {
                variant: number("dtlz")?,
                dim: dim.unwrap_or(6),
                objectives: objectives.unwrap_or(3),
            }
        } else {
            return Err(PyValueError::new_err(format!("unknown problem {name:?}")));
        };
        Ok(Self {
            inner: spec.build().map_err(to_py)?,
        })
    }

    /// Problem backed by an external command that reads and writes CSV files.
    #[staticmethod]
    #[pyo3(signature = (command, workdir, lower, upper, directions, name="external"))]
    fn external(
        command: String,
        workdir: PathBuf,
        lower: Vec<f64>,
        upper: Vec<f64>,
        directions: Vec<String>,
        name: &str,
    ) -> PyResult<Self> {
        let directions = directions
            .iter()
            .map(|d| match d.as_str() {
                "minimize" | "min" => Ok(Direction::Minimize),
                "maximize" | "max" => Ok(Direction::Maximize),
                other => Err(PyValueError::new_err(format!("unknown direction {other:?}"))),
            })
            .collect::<PyResult<Vec<_>>>()?;
        let spec = ProblemSpec::External {
            name: name.to_string(),
            command,
            workdir,
            lower,
            upper,
            directions,
        };
        Ok(Self {
            inner: spec.build().map_err(to_py)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn num_objectives(&self) -> usize {
        self.inner.num_objectives()
    }

    #[getter]
    fn directions(&self) -> Vec<&'static str> {
        self.inner.directions().iter().map(|&d| direction_name(d)).collect()
    }

    #[getter]
    fn space(&self) -> PyDesignSpace {
        PyDesignSpace {
            inner: self.inner.space().clone(),
        }
    }

    #[getter]
    fn reference_point(&self) -> Option<Vec<f64>> {
        self.inner.default_reference_point()
    }

    fn evaluate(&self, py: Python<'_>, xs: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        py.detach(|| self.inner.evaluate_batch(&xs)).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem({:?}, dim={}, objectives={})",
            self.inner.name(),
            self.inner.dim(),
            self.inner.num_objectives()
        )
    }
}

#[pyclass(name = "Surrogate", frozen)]
struct PySurrogate {
    inner: EnsembleSurrogate,
}

fn parse_activation(name: &str) -> PyResult<Activation> {
    let key = name.to_ascii_lowercase().replace(['_', '-'], "");
    Activation::ALL
        .into_iter()
        .find(|a| format!("{a:?}").to_ascii_lowercase() == key)
        .ok_or_else(|| PyValueError::new_err(format!("unknown activation {name:?}")))
}

#[pymethods]
impl PySurrogate {
    /// Trains a deep ensemble on `(xs, ys)` over the box `space`.
    #[staticmethod]
    #[pyo3(signature = (xs, ys, space, members=None, hidden_widths=None, activations=None, epochs=None, minibatch=None, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        py: Python<'_>,
        xs: Vec<Vec<f64>>,
        ys: Vec<Vec<f64>>,
        space: &PyDesignSpace,
        members: Option<usize>,
        hidden_widths: Option<Vec<usize>>,
        activations: Option<Vec<String>>,
        epochs: Option<usize>,
        minibatch: Option<usize>,
        seed: u64,
    ) -> PyResult<Self> {
        let mut cfg = SurrogateConfig::default();
        if let Some(acts) = activations {
            cfg.activations = acts.iter().map(|a| parse_activation(a)).collect::<PyResult<_>>()?;
            cfg.members = cfg.activations.len();
        }
        if let Some(m) = members {
            cfg.members = m;
        }
        if let Some(w) = hidden_widths {
            cfg.hidden_widths = w;
        }
        if let Some(e) = epochs {
            cfg.train.epochs = e;
        }
        if let Some(b) = minibatch {
            cfg.train.minibatch = b;
        }
        let m = ys.first().map_or(0, Vec::len);
        let space = &space.inner;
        let inner = py
            .detach(|| {
                let mut ds = Dataset::new(space.dim(), vec![Direction::Minimize; m])?;
                ds.append(&xs, &ys, 0)?;
                let specs = cfg.roster(space.dim(), m)?;
                surrogate::train_ensemble(&ds, space, &specs, &cfg.train, SeedTree::new(seed))
            })
            .map_err(to_py)?
            .0;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: EnsembleSurrogate::load(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    #[getter]
    fn members(&self) -> usize {
        self.inner.members().len()
    }

    /// Returns `(mean, variance)`; variance is in standardized units.
    fn predict(&self, py: Python<'_>, xs: Vec<Vec<f64>>) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let p = py.detach(|| self.inner.predict(&xs));
        (p.mean, p.variance)
    }
}

#[pyclass(name = "RunResult", frozen)]
struct PyRunResult {
    state: RunState,
}

#[pymethods]
impl PyRunResult {
    #[getter]
    fn iteration(&self) -> usize {
        self.state.iteration
    }

    #[getter]
    fn output_dir(&self) -> PathBuf {
        self.state.config.output_dir.clone()
    }

    #[getter]
    fn final_hypervolume(&self) -> f64 {
        self.state.final_hypervolume()
    }

    #[getter]
    fn hypervolumes(&self) -> Vec<f64> {
        self.state.history.iter().map(|m| m.hv_estimate).collect()
    }

    #[getter]
    fn history<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.state
            .history
            .iter()
            .map(|m| {
                let d = PyDict::new(py);
                d.set_item("iteration", m.iteration)?;
                d.set_item("hv", m.hv_estimate)?;
                d.set_item("hv_std_error", m.hv_std_error)?;
                d.set_item("front_size", m.front_size)?;
                d.set_item("dataset_size", m.dataset_size)?;
                d.set_item("accepted", m.accepted)?;
                d.set_item("duplicates", m.duplicates)?;
                d.set_item("surrogate_mse", m.surrogate_mse.clone())?;
                Ok(d)
            })
            .collect()
    }

    #[getter]
    fn pareto_designs(&self) -> Vec<Vec<f64>> {
        self.state.pareto.designs.clone()
    }

    #[getter]
    fn pareto_performances(&self) -> Vec<Vec<f64>> {
        self.state.pareto.performances.clone()
    }

    #[getter]
    fn designs(&self) -> Vec<Vec<f64>> {
        self.state.dataset.designs().to_vec()
    }

    #[getter]
    fn performances(&self) -> Vec<Vec<f64>> {
        self.state.dataset.performances().to_vec()
    }

    #[getter]
    fn surrogate(&self) -> Option<PySurrogate> {
        self.state.surrogate.clone().map(|inner| PySurrogate { inner })
    }

    /// Resolved configuration as TOML.
    fn config_toml(&self) -> PyResult<String> {
        self.state.config.to_toml().map_err(to_py)
    }
}

/// Starts a run from TOML text. `output_dir`, if given, overrides the config.
#[pyfunction]
#[pyo3(signature = (config, output_dir=None))]
fn run(py: Python<'_>, config: &str, output_dir: Option<PathBuf>) -> PyResult<PyRunResult> {
    let mut cfg = RunConfig::from_toml(config).map_err(to_py)?;
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    let state = py.detach(|| optimizer::run(&cfg)).map_err(to_py)?;
    Ok(PyRunResult { state })
}

/// Continues a run from its last complete snapshot.
#[pyfunction]
#[pyo3(signature = (run_dir, iterations=None))]
fn resume(py: Python<'_>, run_dir: PathBuf, iterations: Option<usize>) -> PyResult<PyRunResult> {
    let state = py
        .detach(|| {
            let replacement = match iterations {
                Some(q) => {
                    let mut cfg = RunConfig::load(&run_dir.join(optimizer::snapshot::CONFIG_FILE))?;
                    cfg.iterations = q;
                    Some(cfg)
                }
                None => None,
            };
            optimizer::resume_with(&run_dir, replacement.as_ref(), &Default::default())
        })
        .map_err(to_py)?;
    Ok(PyRunResult { state })
}

#[pyfunction]
fn dominates(a: Vec<f64>, b: Vec<f64>) -> PyResult<bool> {
    moea::dominates(&a, &b).map_err(to_py)
}

/// Fronts as lists of indices, best front first. All objectives are minimized.
#[pyfunction]
fn fast_nondominated_sort(points: Vec<Vec<f64>>) -> Vec<Vec<usize>> {
    moea::fast_nondominated_sort(&points)
}

#[pyfunction]
fn crowding_distance(front: Vec<Vec<f64>>) -> Vec<f64> {
    moea::crowding_distance(&front)
}

#[pyfunction]
fn hypervolume_2d(front: Vec<Vec<f64>>, reference: Vec<f64>) -> PyResult<f64> {
    if reference.len() != 2 || front.iter().any(|p| p.len() != 2) {
        return Err(PyValueError::new_err("hypervolume_2d needs two objectives"));
    }
    Ok(metrics::hypervolume_2d_exact(&front, &reference))
}

/// Monte Carlo estimate; returns `(estimate, std_error)`.
#[pyfunction]
#[pyo3(signature = (front, reference, samples=metrics::DEFAULT_MC_SAMPLES, seed=0, ideal=None))]
fn hypervolume_mc(
    py: Python<'_>,
    front: Vec<Vec<f64>>,
    reference: Vec<f64>,
    samples: usize,
    seed: u64,
    ideal: Option<Vec<f64>>,
) -> PyResult<(f64, f64)> {
    let mut spec = HypervolumeSpec::new(reference);
    spec.mc_samples = samples;
    spec.ideal_point = ideal;
    spec.validate().map_err(to_py)?;
    if front.iter().any(|p| p.len() != spec.reference_point.len()) {
        return Err(PyValueError::new_err("front and reference point dimensions differ"));
    }
    let hv = py.detach(|| metrics::hypervolume_mc(&front, &spec, seed));
    Ok((hv.estimate, hv.std_error))
}

/// Dense sample of the true ZDT Pareto front.
#[pyfunction]
#[pyo3(signature = (variant, resolution=10_000))]
fn zdt_reference_front(variant: u8, resolution: usize) -> PyResult<Vec<(f64, f64)>> {
    let v = ZdtVariant::from_number(variant).map_err(to_py)?;
    let front = metrics::reference_front(v, resolution).map_err(to_py)?;
    Ok(front.into_iter().map(|[a, b]| (a, b)).collect())
}

/// Plain NSGA-II on a Python objective. `objective` maps a list of designs
/// to a list of objective vectors (all minimized). Returns `(xs, objectives)`
/// of the final population.
#[pyfunction]
#[pyo3(signature = (objective, space, population=100, generations=100, seed=0))]
fn nsga2(
    objective: Bound<'_, PyAny>,
    space: &PyDesignSpace,
    population: usize,
    generations: usize,
    seed: u64,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let cfg = NsgaConfig {
        population,
        generations,
        seed,
        ..NsgaConfig::default()
    };
    let raised: RefCell<Option<PyErr>> = RefCell::new(None);
    let result = moea::nsga2_run(
        |xs| {
            let out = objective.call1((xs.to_vec(),)).and_then(|r| r.extract::<Vec<Vec<f64>>>());
            out.map_err(|e| {
                let msg = e.to_string();
                *raised.borrow_mut() = Some(e);
                Error::Evaluation {
                    message: msg,
                    stderr: None,
                }
            })
        },
        &space.inner,
        &cfg,
    );
    match result {
        Ok(pop) => Ok(pop.individuals.into_iter().map(|i| (i.x, i.objectives)).unzip()),
        Err(e) => Err(raised.into_inner().unwrap_or_else(|| to_py(e))),
    }
}

#[pyfunction]
fn builtin_problems() -> Vec<(&'static str, &'static str)> {
    problems::builtin_problems()
}

#[pymodule]
#[pyo3(name = "lbn_mobo")]
fn lbn_mobo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("EvaluationError", m.py().get_type::<EvaluationError>())?;
    m.add("OptimizerError", m.py().get_type::<OptimizerError>())?;
    m.add_class::<PyDesignSpace>()?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PySurrogate>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(resume, m)?)?;
    m.add_function(wrap_pyfunction!(dominates, m)?)?;
    m.add_function(wrap_pyfunction!(fast_nondominated_sort, m)?)?;
    m.add_function(wrap_pyfunction!(crowding_distance, m)?)?;
    m.add_function(wrap_pyfunction!(hypervolume_2d, m)?)?;
    m.add_function(wrap_pyfunction!(hypervolume_mc, m)?)?;
    m.add_function(wrap_pyfunction!(zdt_reference_front, m)?)?;
    m.add_function(wrap_pyfunction!(nsga2, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_problems, m)?)?;
    Ok(())
}
