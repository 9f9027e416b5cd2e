//! The outer optimization loop, its baselines, and run persistence.

mod config;
pub mod report;
pub mod snapshot;

use std::path::Path;
use std::time::Instant;

pub use config::{MetricsConfig, Mode, RunConfig};
pub use snapshot::{IterationMetrics, PopulationFile, WallTimes};

use crate::acquisition::{acquire, AcquisitionDiagnostics};
use crate::dataset::{AppendReport, Dataset};
use crate::error::{Error, Result};
use crate::metrics::{hypervolume, HypervolumeSpec};
use crate::moea::{fast_nondominated_sort, Nsga2};
use crate::problems::Problem;
use crate::seed::SeedTree;
use crate::space::{to_minimization, uniform_sample, DesignPoint, PerformanceVector};
use crate::surrogate::{train_ensemble, EnsembleSurrogate};
use snapshot::{Snapshot, CONFIG_FILE, DATASET_FILE, METRICS_FILE, POPULATION_FILE, SURROGATE_FILE, TIMINGS_FILE};

/// Non-dominated rows of a dataset under its directions, in dataset order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParetoSet {
    pub indices: Vec<usize>,
    pub designs: Vec<DesignPoint>,
    /// Stored NFP values, in the problem's own directions.
    pub performances: Vec<PerformanceVector>,
}

impl ParetoSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub fn extract_pareto(ds: &Dataset) -> ParetoSet {
    let mins: Vec<Vec<f64>> = ds
        .performances()
        .iter()
        .map(|y| to_minimization(y, ds.directions()))
        .collect();
    let indices = fast_nondominated_sort(&mins).into_iter().next().unwrap_or_default();
    ParetoSet {
        designs: indices.iter().map(|&i| ds.designs()[i].clone()).collect(),
        performances: indices.iter().map(|&i| ds.performances()[i].clone()).collect(),
        indices,
    }
}

#[derive(Clone, Debug)]
pub struct RunState {
    /// Resolved configuration.
    pub config: RunConfig,
    /// Last completed iteration.
    pub iteration: usize,
    pub dataset: Dataset,
    pub pareto: ParetoSet,
    pub history: Vec<IterationMetrics>,
    pub timings: Vec<WallTimes>,
    /// Latest trained surrogate, when the mode has one.
    pub surrogate: Option<EnsembleSurrogate>,
}

impl RunState {
    pub fn final_hypervolume(&self) -> f64 {
        self.history.last().map_or(0.0, |m| m.hv_estimate)
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Stop after this iteration has been persisted, as if interrupted.
    pub stop_after: Option<usize>,
    /// Print one line per iteration to stderr.
    pub progress: bool,
}

struct Driver {
    cfg: RunConfig,
    problem: Problem,
    hv: HypervolumeSpec,
    seeds: SeedTree,
    dataset: Dataset,
    surrogate: Option<EnsembleSurrogate>,
    engine: Option<Nsga2>,
    history: Vec<IterationMetrics>,
    timings: Vec<WallTimes>,
    iteration: usize,
    progress: bool,
}

fn clock() -> Instant {
    Instant::now()
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config(format!("cannot build thread pool: {e}")))?
            .install(f),
        None => f(),
    }
}

impl Driver {
    fn new(cfg: RunConfig, problem: Problem) -> Result<Self> {
        let hv = cfg.hypervolume_spec(&problem)?;
        let dataset = Dataset::new(problem.dim(), problem.directions().to_vec())?;
        Ok(Self {
            seeds: SeedTree::new(cfg.master_seed),
            hv,
            dataset,
            surrogate: None,
            engine: None,
            history: Vec::new(),
            timings: Vec::new(),
            iteration: 0,
            progress: false,
            cfg,
            problem,
        })
    }

    fn root(&self) -> &Path {
        &self.cfg.output_dir
    }

    fn minimized(&self, ys: &[PerformanceVector]) -> Vec<Vec<f64>> {
        ys.iter().map(|y| to_minimization(y, self.problem.directions())).collect()
    }

    fn needs_training(&self, k: usize) -> bool {
        self.cfg.mode.uses_surrogate() && (k < self.cfg.iterations || self.cfg.train_final_surrogate)
    }

    fn train(&mut self, k: usize, times: &mut WallTimes) -> Result<Option<Vec<f64>>> {
        if !self.needs_training(k) {
            self.surrogate = None;
            return Ok(None);
        }
        let t = clock();
        let specs = self
            .cfg
            .surrogate
            .roster(self.problem.dim(), self.problem.num_objectives())?;
        let (s, report) = train_ensemble(
            &self.dataset,
            self.problem.space(),
            &specs,
            &self.cfg.surrogate.train,
            self.seeds.subtree("train", k as u64),
        )?;
        self.surrogate = Some(s);
        times.train = t.elapsed().as_secs_f64();
        Ok(Some(report.final_mse))
    }

    fn initialize(&mut self) -> Result<()> {
        let mut times = WallTimes::default();
        let xs = uniform_sample(
            self.problem.space(),
            self.cfg.init_size(),
            &mut self.seeds.rng("init-sample", 0),
        );
        let t = clock();
        let ys = self.problem.evaluate_batch(&xs)?;
        times.evaluate = t.elapsed().as_secs_f64();
        let report = self.dataset.append(&xs, &ys, 0)?;
        if self.cfg.mode == Mode::Nsga2Baseline {
            let mins = self.minimized(&ys);
            self.engine = Some(Nsga2::new(
                self.problem.space().clone(),
                self.cfg.baseline_nsga_config(),
                xs.clone(),
                mins,
            )?);
        }
        let mse = self.train(0, &mut times)?;
        self.finish(0, &xs, report, mse, times, None)
    }

    fn step(&mut self, k: usize) -> Result<()> {
        let mut times = WallTimes::default();
        let mut diag = None;
        let t = clock();
        let xs = match self.cfg.mode {
            Mode::LbnMobo | Mode::AblateUncertainty => {
                let surrogate = self.surrogate.as_ref().ok_or_else(|| Error::Evolution {
                    generation: k,
                    message: "no trained surrogate available".into(),
                })?;
                let acq = acquire(
                    surrogate,
                    self.problem.space(),
                    &self.dataset,
                    &self.cfg.acquisition_config(),
                    &self.seeds.subtree("acquire", k as u64),
                )?;
                diag = Some(acq.diagnostics);
                acq.candidates
            }
            Mode::RandomBaseline => uniform_sample(
                self.problem.space(),
                self.cfg.batch_size,
                &mut self.seeds.rng("random-sample", k as u64),
            ),
            Mode::Nsga2Baseline => {
                let engine = self.engine.as_ref().expect("baseline engine is initialized");
                engine.offspring(self.cfg.batch_size, &mut self.seeds.rng("nsga-offspring", k as u64))
            }
        };
        times.acquire = t.elapsed().as_secs_f64();
        let t = clock();
        let ys = self.problem.evaluate_batch(&xs)?;
        times.evaluate = t.elapsed().as_secs_f64();
        let report = self.dataset.append(&xs, &ys, k)?;
        if let Some(engine) = self.engine.as_mut() {
            let mins: Vec<Vec<f64>> = ys.iter().map(|y| to_minimization(y, self.problem.directions())).collect();
            engine.advance(xs.clone(), mins)?;
        }
        let mse = self.train(k, &mut times)?;
        self.finish(k, &xs, report, mse, times, diag.as_ref())
    }

    fn finish(
        &mut self,
        k: usize,
        candidates: &[DesignPoint],
        report: AppendReport,
        surrogate_mse: Option<Vec<f64>>,
        times: WallTimes,
        diag: Option<&AcquisitionDiagnostics>,
    ) -> Result<()> {
        let pareto = extract_pareto(&self.dataset);
        let front = self.minimized(&pareto.performances);
        let hv = hypervolume(&front, &self.hv, self.seeds.child("hypervolume", k as u64));
        let metrics = IterationMetrics {
            iteration: k,
            hv_estimate: hv.estimate,
            hv_std_error: hv.std_error,
            front_size: pareto.len(),
            dataset_size: self.dataset.len(),
            evaluated: candidates.len(),
            accepted: report.accepted,
            duplicates: report.duplicates,
            non_finite: report.non_finite,
            surrogate_mse,
        };
        let population = self.engine.as_ref().map(|e| PopulationFile {
            x: e.population().iter().map(|i| i.x.clone()).collect(),
            objectives: e.population().iter().map(|i| i.objectives.clone()).collect(),
        });
        Snapshot {
            dataset: &self.dataset,
            candidates,
            metrics: &metrics,
            timings: &times,
            surrogate: self.surrogate.as_ref(),
            acquisition: diag,
            population: population.as_ref(),
        }
        .write(self.root(), k)?;
        if self.progress {
            eprintln!(
                "iter {k:>3}  hv {:.6}  front {:>5}  data {:>6}  train {:.1}s  acquire {:.1}s  evaluate {:.1}s",
                metrics.hv_estimate,
                metrics.front_size,
                metrics.dataset_size,
                times.train,
                times.acquire,
                times.evaluate
            );
        }
        self.history.push(metrics);
        self.timings.push(times);
        self.iteration = k;
        Ok(())
    }

    fn iterate(mut self, from: usize, opts: &RunOptions) -> Result<RunState> {
        for k in from..=self.cfg.iterations {
            if opts.stop_after.is_some_and(|s| self.iteration >= s) {
                break;
            }
            self.step(k)?;
        }
        Ok(RunState {
            pareto: extract_pareto(&self.dataset),
            config: self.cfg,
            iteration: self.iteration,
            dataset: self.dataset,
            history: self.history,
            timings: self.timings,
            surrogate: self.surrogate,
        })
    }
}

/// Runs a fresh optimization into `cfg.output_dir`.
pub fn run(cfg: &RunConfig) -> Result<RunState> {
    run_with(cfg, &RunOptions::default())
}

pub fn run_with(cfg: &RunConfig, opts: &RunOptions) -> Result<RunState> {
    let cfg = cfg.resolve()?;
    let problem = cfg.problem.build()?;
    let root = cfg.output_dir.clone();
    if root.join(CONFIG_FILE).exists() {
        return Err(Error::config(format!(
            "{} already holds a run; use resume or pick another output_dir",
            root.display()
        )));
    }
    std::fs::create_dir_all(&root)?;
    std::fs::write(root.join(CONFIG_FILE), cfg.to_toml()?)?;
    let threads = cfg.threads;
    let opts = opts.clone();
    with_threads(threads, move || {
        let mut d = Driver::new(cfg, problem)?;
        d.progress = opts.progress;
        d.initialize()?;
        d.iterate(1, &opts)
    })
}

/// Continues the run stored in `dir` with its recorded configuration.
pub fn resume(dir: &Path) -> Result<RunState> {
    resume_with(dir, None, &RunOptions::default())
}

/// Continues the run in `dir`. A replacement config may change, for example,
/// the iteration count, but must target the same problem.
pub fn resume_with(dir: &Path, replacement: Option<&RunConfig>, opts: &RunOptions) -> Result<RunState> {
    let config_path = dir.join(CONFIG_FILE);
    let stored = RunConfig::load(&config_path)?;
    let mut cfg = match replacement {
        Some(r) => {
            if r.problem.name() != stored.problem.name() {
                return Err(Error::load(
                    &config_path,
                    format!(
                        "run was made for problem {:?}, not {:?}",
                        stored.problem.name(),
                        r.problem.name()
                    ),
                ));
            }
            r.resolve()?
        }
        None => stored.resolve()?,
    };
    cfg.output_dir = dir.to_path_buf();
    if replacement.is_some() {
        std::fs::write(&config_path, cfg.to_toml()?)?;
    }
    let problem = cfg.problem.build()?;
    let done = snapshot::completed_iterations(dir);
    let threads = cfg.threads;
    let opts = opts.clone();
    with_threads(threads, move || {
        let mut d = Driver::new(cfg, problem)?;
        d.progress = opts.progress;
        let Some(&last) = done.last() else {
            d.initialize()?;
            return d.iterate(1, &opts);
        };
        d.load(last)?;
        d.iterate(last + 1, &opts)
    })
}

impl Driver {
    fn load(&mut self, last: usize) -> Result<()> {
        let root = self.root().to_path_buf();
        for k in 0..=last {
            let dir = snapshot::iter_dir(&root, k);
            self.history.push(snapshot::read_json(&dir.join(METRICS_FILE))?);
            self.timings.push(snapshot::read_json(&dir.join(TIMINGS_FILE)).unwrap_or_default());
        }
        let dir = snapshot::iter_dir(&root, last);
        self.dataset = Dataset::load_csv(&dir.join(DATASET_FILE), self.problem.directions().to_vec())?;
        if self.dataset.dim() != self.problem.dim() {
            return Err(Error::load(dir.join(DATASET_FILE), "dataset dimension does not match the problem"));
        }
        self.iteration = last;
        if self.cfg.mode.uses_surrogate() {
            let ckpt = dir.join(SURROGATE_FILE);
            if ckpt.is_file() {
                self.surrogate = Some(EnsembleSurrogate::load(&ckpt)?);
            } else if last < self.cfg.iterations {
                // The final retrain may have been skipped; redo it.
                let specs = self
                    .cfg
                    .surrogate
                    .roster(self.problem.dim(), self.problem.num_objectives())?;
                let (s, _) = train_ensemble(
                    &self.dataset,
                    self.problem.space(),
                    &specs,
                    &self.cfg.surrogate.train,
                    self.seeds.subtree("train", last as u64),
                )?;
                self.surrogate = Some(s);
            }
        }
        if self.cfg.mode == Mode::Nsga2Baseline {
            let pop: PopulationFile = snapshot::read_json(&dir.join(POPULATION_FILE))?;
            self.engine = Some(
                Nsga2::new(
                    self.problem.space().clone(),
                    self.cfg.baseline_nsga_config(),
                    pop.x,
                    pop.objectives,
                )
                .map_err(|e| Error::load(dir.join(POPULATION_FILE), e.to_string()))?,
            );
        }
        Ok(())
    }
}
