//! Batch acquisition over predicted objectives and epistemic uncertainty.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{design_key, Dataset};
use crate::error::{Error, Result};
use crate::moea::{crowding_distance, fast_nondominated_sort, nsga2_run, NsgaConfig};
use crate::seed::SeedTree;
use crate::space::{uniform_sample, DesignPoint, DesignSpace, Direction};
use crate::surrogate::{EnsembleSurrogate, Prediction};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionConfig {
    /// Number of candidates `S`. Run configs set this from the top-level
    /// batch size.
    #[serde(skip)]
    pub batch_size: usize,
    /// Independent NSGA-II runs; `None` means `ceil(S / per_seed_population)`.
    pub num_seeds: Option<usize>,
    pub per_seed_population: usize,
    /// Template for every seed run. `population` and `seed` are overridden.
    pub nsga: NsgaConfig,
    pub use_uncertainty: bool,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            batch_size: 100,
            num_seeds: None,
            per_seed_population: 100,
            nsga: NsgaConfig::default(),
            use_uncertainty: true,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("acquisition batch size must be at least 1"));
        }
        if self.num_seeds == Some(0) {
            return Err(Error::config("num_seeds must be at least 1"));
        }
        if self.per_seed_population < 4 || !self.per_seed_population.is_multiple_of(2) {
            return Err(Error::config(format!(
                "per_seed_population must be even and at least 4, got {}",
                self.per_seed_population
            )));
        }
        NsgaConfig {
            population: self.per_seed_population,
            ..self.nsga.clone()
        }
        .validate()
    }

    pub fn seeds(&self) -> usize {
        self.num_seeds
            .unwrap_or_else(|| self.batch_size.div_ceil(self.per_seed_population))
            .max(1)
    }
}

/// Maps a prediction to all-minimize acquisition objectives: the signed
/// means followed, when `use_uncertainty` is set, by the negated variances.
pub fn objectives_from_prediction(pred: &Prediction, directions: &[Direction], use_uncertainty: bool) -> Vec<Vec<f64>> {
    pred.mean
        .iter()
        .zip(&pred.variance)
        .map(|(mu, var)| {
            let mut row: Vec<f64> = mu.iter().zip(directions).map(|(&v, d)| d.to_min(v)).collect();
            if use_uncertainty {
                row.extend(var.iter().map(|v| -v));
            }
            row
        })
        .collect()
}

pub fn acquisition_objectives(
    surrogate: &EnsembleSurrogate,
    directions: &[Direction],
    xs: &[DesignPoint],
    use_uncertainty: bool,
) -> Vec<Vec<f64>> {
    objectives_from_prediction(&surrogate.predict(xs), directions, use_uncertainty)
}

/// Picks `count` indices by non-dominated rank, filling whole fronts first
/// and cutting the last front by crowding distance (descending, ties by
/// index). Returned indices are in selection order.
pub fn select_by_rank_and_crowding<T: AsRef<[f64]>>(objectives: &[T], count: usize) -> Vec<usize> {
    let mut selected = Vec::with_capacity(count.min(objectives.len()));
    for front in fast_nondominated_sort(objectives) {
        let room = count - selected.len();
        if room == 0 {
            break;
        }
        if front.len() <= room {
            selected.extend(front);
            continue;
        }
        let pts: Vec<&[f64]> = front.iter().map(|&i| objectives[i].as_ref()).collect();
        let cd = crowding_distance(&pts);
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| cd[b].total_cmp(&cd[a]).then(a.cmp(&b)));
        selected.extend(order[..room].iter().map(|&i| front[i]));
    }
    selected
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionDiagnostics {
    pub seeds: usize,
    pub per_seed_front_sizes: Vec<usize>,
    pub pool_size: usize,
    pub duplicates_of_known: usize,
    pub duplicates_internal: usize,
    pub topped_up: usize,
    /// Predicted means of the selected candidates (original units).
    pub selected_mean: Vec<Vec<f64>>,
    /// Epistemic variances of the selected candidates (standardized units).
    pub selected_variance: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Acquisition {
    pub candidates: Vec<DesignPoint>,
    pub diagnostics: AcquisitionDiagnostics,
}

/// Runs independent NSGA-II searches on the surrogate and selects exactly
/// `cfg.batch_size` new designs, none of which appear in `known`.
///
/// Seed run `j` uses child `("acq-nsga", j)` of `seed`; top-up samples come
/// from stream `("acq-topup", 0)`.
pub fn acquire(
    surrogate: &EnsembleSurrogate,
    space: &DesignSpace,
    known: &Dataset,
    cfg: &AcquisitionConfig,
    seed: &SeedTree,
) -> Result<Acquisition> {
    cfg.validate()?;
    if surrogate.input_dim() != space.dim() {
        return Err(Error::argument(format!(
            "surrogate expects {} inputs but the space has {} dimensions",
            surrogate.input_dim(),
            space.dim()
        )));
    }
    if surrogate.output_dim() != known.num_objectives() {
        return Err(Error::argument("surrogate and dataset disagree on the number of objectives"));
    }
    let directions = known.directions();
    let seeds = cfg.seeds();
    let objective_fn =
        |xs: &[DesignPoint]| Ok(acquisition_objectives(surrogate, directions, xs, cfg.use_uncertainty));
    let runs = (0..seeds)
        .into_par_iter()
        .map(|j| {
            let nsga = NsgaConfig {
                population: cfg.per_seed_population,
                seed: seed.child("acq-nsga", j as u64),
                ..cfg.nsga.clone()
            };
            nsga2_run(objective_fn, space, &nsga)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut diag = AcquisitionDiagnostics {
        seeds,
        per_seed_front_sizes: runs.iter().map(|p| p.first_front().count()).collect(),
        pool_size: 0,
        duplicates_of_known: 0,
        duplicates_internal: 0,
        topped_up: 0,
        selected_mean: Vec::new(),
        selected_variance: Vec::new(),
    };
    let mut seen = HashSet::new();
    let mut pool_x = Vec::new();
    let mut pool_obj = Vec::new();
    for ind in runs.into_iter().flat_map(|p| p.individuals) {
        if known.contains(&ind.x) {
            diag.duplicates_of_known += 1;
        } else if !seen.insert(design_key(&ind.x)) {
            diag.duplicates_internal += 1;
        } else {
            pool_x.push(ind.x);
            pool_obj.push(ind.objectives);
        }
    }
    diag.pool_size = pool_x.len();

    let s = cfg.batch_size;
    let mut candidates: Vec<DesignPoint> = select_by_rank_and_crowding(&pool_obj, s)
        .into_iter()
        .map(|i| pool_x[i].clone())
        .collect();
    if candidates.len() < s {
        let mut rng = seed.rng("acq-topup", 0);
        while candidates.len() < s {
            let need = s - candidates.len();
            for x in uniform_sample(space, need, &mut rng) {
                if !known.contains(&x) && seen.insert(design_key(&x)) {
                    candidates.push(x);
                    diag.topped_up += 1;
                }
            }
        }
    }
    let pred = surrogate.predict(&candidates);
    diag.selected_mean = pred.mean;
    diag.selected_variance = pred.variance;
    Ok(Acquisition {
        candidates,
        diagnostics: diag,
    })
}
