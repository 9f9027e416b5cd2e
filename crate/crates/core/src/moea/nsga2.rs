//! Generational NSGA-II with elitist (mu + lambda) survival.

use std::cmp::Ordering;
use std::io::Write;

use rand::{Rng as _, SeedableRng};
use serde::{Deserialize, Serialize};

use super::operators::{polynomial_mutation, sbx};
use super::sorting::{crowding_distance, fast_nondominated_sort, ranks_from_fronts};
use crate::error::{Error, Result};
use crate::seed::Rng;
use crate::space::{uniform_sample, DesignPoint, DesignSpace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NsgaConfig {
    pub population: usize,
    pub generations: usize,
    pub sbx_eta: f64,
    pub sbx_prob: f64,
    pub mut_eta: f64,
    /// Per-variable mutation probability; `None` means `1 / n`.
    pub mut_prob: Option<f64>,
    pub seed: u64,
}

impl Default for NsgaConfig {
    fn default() -> Self {
        Self {
            population: 100,
            generations: 1000,
            sbx_eta: 15.0,
            sbx_prob: 0.9,
            mut_eta: 20.0,
            mut_prob: None,
            seed: 0,
        }
    }
}

impl NsgaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 || !self.population.is_multiple_of(2) {
            return Err(Error::config(format!(
                "NSGA-II population must be even and at least 4, got {}",
                self.population
            )));
        }
        if self.generations == 0 {
            return Err(Error::config("NSGA-II needs at least one generation"));
        }
        let probs = [Some(self.sbx_prob), self.mut_prob];
        if probs.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::config("NSGA-II probabilities must lie in [0, 1]"));
        }
        if !(self.sbx_eta >= 0.0 && self.mut_eta >= 0.0) {
            return Err(Error::config("distribution indices must be non-negative"));
        }
        Ok(())
    }

    pub fn mutation_probability(&self, dim: usize) -> f64 {
        self.mut_prob.unwrap_or(1.0 / dim as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub x: DesignPoint,
    /// All-minimize objective values.
    pub objectives: Vec<f64>,
    pub rank: usize,
    pub crowding: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Population {
    pub individuals: Vec<Individual>,
}

impl Population {
    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    /// Individuals of rank 0.
    pub fn first_front(&self) -> impl Iterator<Item = &Individual> {
        self.individuals.iter().filter(|i| i.rank == 0)
    }
}

/// Recomputes rank and crowding of every individual against the others.
pub fn annotate(individuals: &mut [Individual]) {
    let objs: Vec<&[f64]> = individuals.iter().map(|i| i.objectives.as_slice()).collect();
    let fronts = fast_nondominated_sort(&objs);
    let ranks = ranks_from_fronts(&fronts, individuals.len());
    let mut crowding = vec![0.0; individuals.len()];
    for front in &fronts {
        let pts: Vec<&[f64]> = front.iter().map(|&i| objs[i]).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&pts)) {
            crowding[i] = d;
        }
    }
    for ((ind, r), c) in individuals.iter_mut().zip(ranks).zip(crowding) {
        ind.rank = r;
        ind.crowding = c;
    }
}

/// Crowded comparison: lower rank first, then larger crowding distance.
pub fn crowded_order(a: &Individual, b: &Individual) -> Ordering {
    a.rank
        .cmp(&b.rank)
        .then_with(|| b.crowding.partial_cmp(&a.crowding).unwrap_or(Ordering::Equal))
}

fn check_finite(objs: &[Vec<f64>], generation: usize) -> Result<()> {
    for (row, y) in objs.iter().enumerate() {
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::Evolution {
                generation,
                message: format!("objective vector {row} is not finite: {y:?}"),
            });
        }
    }
    Ok(())
}

/// Step-wise NSGA-II state. Evaluation stays with the caller, which lets the
/// same engine drive both surrogate searches and NFP-in-the-loop baselines.
#[derive(Clone, Debug)]
pub struct Nsga2 {
    space: DesignSpace,
    cfg: NsgaConfig,
    population: Vec<Individual>,
    generation: usize,
}

impl Nsga2 {
    pub fn new(
        space: DesignSpace,
        cfg: NsgaConfig,
        xs: Vec<DesignPoint>,
        objectives: Vec<Vec<f64>>,
    ) -> Result<Self> {
        cfg.validate()?;
        if xs.len() != objectives.len() || xs.is_empty() {
            return Err(Error::argument("initial population and objectives must be non-empty and aligned"));
        }
        check_finite(&objectives, 0)?;
        let mut population: Vec<Individual> = xs
            .into_iter()
            .zip(objectives)
            .map(|(x, objectives)| Individual {
                x,
                objectives,
                rank: 0,
                crowding: 0.0,
            })
            .collect();
        annotate(&mut population);
        Ok(Self {
            space,
            cfg,
            population,
            generation: 0,
        })
    }

    pub fn population(&self) -> &[Individual] {
        &self.population
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn config(&self) -> &NsgaConfig {
        &self.cfg
    }

    fn tournament(&self, rng: &mut Rng) -> &Individual {
        let n = self.population.len();
        let a = &self.population[rng.gen_range(0..n)];
        let b = &self.population[rng.gen_range(0..n)];
        if crowded_order(b, a) == Ordering::Less {
            b
        } else {
            a
        }
    }

    /// Produces `count` children by binary tournament, SBX and polynomial
    /// mutation; every child lies inside the box.
    pub fn offspring(&self, count: usize, rng: &mut Rng) -> Vec<DesignPoint> {
        let pm = self.cfg.mutation_probability(self.space.dim());
        let mut kids = Vec::with_capacity(count);
        while kids.len() < count {
            let p1 = self.tournament(rng);
            let p2 = self.tournament(rng);
            let (mut c1, mut c2) = sbx(&p1.x, &p2.x, self.cfg.sbx_eta, self.cfg.sbx_prob, rng);
            for c in [&mut c1, &mut c2] {
                polynomial_mutation(c, &self.space, self.cfg.mut_eta, pm, rng);
            }
            kids.push(c1);
            if kids.len() < count {
                kids.push(c2);
            }
        }
        kids
    }

    /// Merges evaluated children into the population and keeps the best
    /// `population` individuals by (rank, crowding desc, insertion order).
    pub fn advance(&mut self, children: Vec<DesignPoint>, objectives: Vec<Vec<f64>>) -> Result<()> {
        let generation = self.generation + 1;
        if children.len() != objectives.len() {
            return Err(Error::Evolution {
                generation,
                message: format!("{} children but {} objective vectors", children.len(), objectives.len()),
            });
        }
        check_finite(&objectives, generation)?;
        let mut pool = std::mem::take(&mut self.population);
        pool.extend(children.into_iter().zip(objectives).map(|(x, objectives)| Individual {
            x,
            objectives,
            rank: 0,
            crowding: 0.0,
        }));
        annotate(&mut pool);
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.sort_by(|&a, &b| crowded_order(&pool[a], &pool[b]).then(a.cmp(&b)));
        order.truncate(self.cfg.population);
        let mut keep = vec![false; pool.len()];
        for &i in &order {
            keep[i] = true;
        }
        // Survivors keep their pool order.
        let mut next: Vec<Individual> = pool
            .into_iter()
            .zip(keep)
            .filter_map(|(ind, k)| k.then_some(ind))
            .collect();
        annotate(&mut next);
        self.population = next;
        self.generation = generation;
        Ok(())
    }

    pub fn into_population(self) -> Population {
        Population {
            individuals: self.population,
        }
    }
}

/// One row of the optional per-generation trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GenerationTrace {
    pub generation: usize,
    pub front0_size: usize,
    pub hypervolume: Option<f64>,
}

/// Runs NSGA-II from a uniform initial population.
///
/// `objective_fn` maps a batch of designs to all-minimize objective vectors.
pub fn nsga2_run<F>(objective_fn: F, space: &DesignSpace, cfg: &NsgaConfig) -> Result<Population>
where
    F: Fn(&[DesignPoint]) -> Result<Vec<Vec<f64>>>,
{
    nsga2_run_traced(objective_fn, space, cfg, None, |_| {})
}

/// [`nsga2_run`] with a callback after every generation (generation 0 is the
/// initial population). When `reference_point` is given, the trace carries
/// the hypervolume of front 0.
pub fn nsga2_run_traced<F, T>(
    objective_fn: F,
    space: &DesignSpace,
    cfg: &NsgaConfig,
    reference_point: Option<&[f64]>,
    mut trace: T,
) -> Result<Population>
where
    F: Fn(&[DesignPoint]) -> Result<Vec<Vec<f64>>>,
    T: FnMut(GenerationTrace),
{
    cfg.validate()?;
    let mut rng = Rng::seed_from_u64(cfg.seed);
    let xs = uniform_sample(space, cfg.population, &mut rng);
    let objs = objective_fn(&xs).map_err(|e| Error::Evolution {
        generation: 0,
        message: e.to_string(),
    })?;
    let mut engine = Nsga2::new(space.clone(), cfg.clone(), xs, objs)?;
    let emit = |engine: &Nsga2, trace: &mut T| {
        let front: Vec<Vec<f64>> = engine
            .population
            .iter()
            .filter(|i| i.rank == 0)
            .map(|i| i.objectives.clone())
            .collect();
        let hypervolume = reference_point.map(|r| front_hypervolume(&front, r, engine.generation as u64));
        trace(GenerationTrace {
            generation: engine.generation,
            front0_size: front.len(),
            hypervolume,
        });
    };
    emit(&engine, &mut trace);
    for g in 1..=cfg.generations {
        let kids = engine.offspring(cfg.population, &mut rng);
        let objs = objective_fn(&kids).map_err(|e| Error::Evolution {
            generation: g,
            message: e.to_string(),
        })?;
        engine.advance(kids, objs)?;
        emit(&engine, &mut trace);
    }
    Ok(engine.into_population())
}

fn front_hypervolume(front: &[Vec<f64>], reference: &[f64], generation: u64) -> f64 {
    use crate::metrics::{hypervolume_2d_exact, hypervolume_mc, HypervolumeSpec};
    if reference.len() == 2 {
        hypervolume_2d_exact(front, reference)
    } else {
        let spec = HypervolumeSpec {
            reference_point: reference.to_vec(),
            mc_samples: 100_000,
            ideal_point: None,
        };
        hypervolume_mc(front, &spec, crate::seed::derive_seed(generation, "trace-hv", 0)).estimate
    }
}

/// Writes a trace as CSV: `generation,front0_size,hypervolume`.
pub fn write_trace_csv<W: Write>(rows: &[GenerationTrace], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["generation", "front0_size", "hypervolume"])?;
    for r in rows {
        w.write_record([
            r.generation.to_string(),
            r.front0_size.to_string(),
            r.hypervolume.map(|h| h.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::design_key;
    use std::collections::HashSet;

    fn schaffer(xs: &[DesignPoint]) -> Result<Vec<Vec<f64>>> {
        Ok(xs.iter().map(|x| vec![x[0] * x[0], (x[0] - 1.0).powi(2)]).collect())
    }

    #[test]
    fn converges_on_schaffer_front() {
        let space = DesignSpace::new(vec![-2.0], vec![3.0]).unwrap();
        let cfg = NsgaConfig {
            population: 40,
            generations: 50,
            seed: 17,
            ..NsgaConfig::default()
        };
        let pop = nsga2_run(schaffer, &space, &cfg).unwrap();
        assert_eq!(pop.len(), 40);
        let front: Vec<_> = pop.first_front().collect();
        assert!(!front.is_empty());
        for ind in front {
            let (f1, f2) = (ind.objectives[0], ind.objectives[1]);
            assert!((-1e-9..=1.05).contains(&f1), "f1 = {f1}");
            let curve = (1.0 - f1.sqrt()).powi(2);
            assert!((f2 - curve).abs() <= 0.05, "({f1}, {f2}) vs {curve}");
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let space = DesignSpace::new(vec![-2.0, -2.0], vec![3.0, 3.0]).unwrap();
        let f = |xs: &[DesignPoint]| -> Result<Vec<Vec<f64>>> {
            Ok(xs.iter().map(|x| vec![x[0] * x[0] + x[1], (x[0] - 1.0).powi(2) - x[1]]).collect())
        };
        let cfg = NsgaConfig {
            population: 20,
            generations: 15,
            seed: 3,
            ..NsgaConfig::default()
        };
        assert_eq!(nsga2_run(f, &space, &cfg).unwrap(), nsga2_run(f, &space, &cfg).unwrap());
    }

    #[test]
    fn no_variation_children_are_parent_copies() {
        let space = DesignSpace::new(vec![-2.0], vec![3.0]).unwrap();
        let cfg = NsgaConfig {
            population: 12,
            generations: 1,
            sbx_prob: 0.0,
            mut_prob: Some(0.0),
            ..NsgaConfig::default()
        };
        let mut rng = Rng::seed_from_u64(5);
        let xs = uniform_sample(&space, 12, &mut rng);
        let objs = schaffer(&xs).unwrap();
        let mut engine = Nsga2::new(space, cfg, xs.clone(), objs).unwrap();
        let parents: HashSet<Vec<u64>> = xs.iter().map(|x| design_key(x)).collect();
        let before: Vec<Vec<f64>> = engine.population().iter().filter(|i| i.rank == 0).map(|i| i.objectives.clone()).collect();
        for _ in 0..5 {
            let kids = engine.offspring(12, &mut rng);
            assert!(kids.iter().all(|k| parents.contains(&design_key(k))));
            let objs = schaffer(&kids).unwrap();
            engine.advance(kids, objs).unwrap();
            // Elitism: the old front is never lost, only duplicated.
            for f in &before {
                assert!(engine.population().iter().any(|i| &i.objectives == f));
            }
        }
    }

    #[test]
    fn survivors_come_from_the_pool_and_stay_in_bounds() {
        let space = DesignSpace::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let f = |xs: &[DesignPoint]| -> Result<Vec<Vec<f64>>> {
            Ok(xs.iter().map(|x| vec![x[0], 1.0 - x[0] * x[0] + x[1]]).collect())
        };
        let cfg = NsgaConfig {
            population: 16,
            generations: 1,
            seed: 9,
            ..NsgaConfig::default()
        };
        let mut rng = Rng::seed_from_u64(cfg.seed);
        let xs = uniform_sample(&space, 16, &mut rng);
        let mut engine = Nsga2::new(space.clone(), cfg, xs.clone(), f(&xs).unwrap()).unwrap();
        for _ in 0..20 {
            let pool_keys: HashSet<Vec<u64>> = engine.population().iter().map(|i| design_key(&i.x)).collect();
            let kids = engine.offspring(16, &mut rng);
            assert!(kids.iter().all(|k| space.contains(k)));
            let mut all = pool_keys;
            all.extend(kids.iter().map(|k| design_key(k)));
            let objs = f(&kids).unwrap();
            engine.advance(kids, objs).unwrap();
            assert_eq!(engine.population().len(), 16);
            for ind in engine.population().iter().filter(|i| i.rank == 0) {
                assert!(all.contains(&design_key(&ind.x)));
            }
        }
    }

    #[test]
    fn non_finite_objectives_name_the_generation() {
        let space = DesignSpace::unit(1).unwrap();
        let cfg = NsgaConfig {
            population: 8,
            generations: 3,
            ..NsgaConfig::default()
        };
        let calls = std::cell::Cell::new(0);
        let f = |xs: &[DesignPoint]| -> Result<Vec<Vec<f64>>> {
            calls.set(calls.get() + 1);
            let bad = calls.get() == 3;
            Ok(xs.iter().map(|x| vec![if bad { f64::NAN } else { x[0] }, 1.0 - x[0]]).collect())
        };
        match nsga2_run(f, &space, &cfg) {
            Err(Error::Evolution { generation, .. }) => assert_eq!(generation, 2),
            other => panic!("expected evolution error, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let bad = [
            NsgaConfig { population: 5, ..NsgaConfig::default() },
            NsgaConfig { population: 2, ..NsgaConfig::default() },
            NsgaConfig { generations: 0, ..NsgaConfig::default() },
            NsgaConfig { sbx_prob: 1.5, ..NsgaConfig::default() },
            NsgaConfig { mut_prob: Some(-0.1), ..NsgaConfig::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        assert_eq!(NsgaConfig::default().mutation_probability(30), 1.0 / 30.0);
    }

    #[test]
    fn trace_reports_every_generation() {
        let space = DesignSpace::new(vec![-2.0], vec![3.0]).unwrap();
        let cfg = NsgaConfig {
            population: 20,
            generations: 10,
            seed: 1,
            ..NsgaConfig::default()
        };
        let mut rows = Vec::new();
        nsga2_run_traced(schaffer, &space, &cfg, Some(&[5.0, 5.0]), |t| rows.push(t)).unwrap();
        assert_eq!(rows.len(), 11);
        assert!(rows.iter().all(|r| r.hypervolume.unwrap() > 0.0 && r.front0_size > 0));
        assert_eq!(rows.last().unwrap().generation, 10);
        let mut buf = Vec::new();
        write_trace_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("generation,front0_size,hypervolume\n"));
        assert_eq!(text.lines().count(), 12);
    }
}
