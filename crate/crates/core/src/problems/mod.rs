//! Native forward processes: analytic benchmarks and external simulators.

mod dtlz;
mod external;
mod zdt;

use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{DesignPoint, DesignSpace, Direction, PerformanceVector};

pub use dtlz::{dtlz_suite, Dtlz, DtlzVariant};
pub use external::{external_nfp, ExternalNfp};
pub use zdt::{zdt_suite, Zdt, ZdtVariant};

/// Rows per parallel chunk when evaluating analytic problems.
pub const DEFAULT_CHUNK_SIZE: usize = 1024;

/// A batch map from designs to performance vectors.
pub trait Evaluator: Send + Sync {
    fn evaluate(&self, xs: &[DesignPoint]) -> Result<Vec<PerformanceVector>>;
}

/// A closed-form objective evaluated one point at a time.
pub trait AnalyticFunction: Send + Sync {
    fn eval_point(&self, x: &[f64]) -> Vec<f64>;
}

/// Evaluates an analytic function over a batch in parallel chunks.
pub struct Chunked<F> {
    pub function: F,
    pub chunk_size: usize,
}

impl<F: AnalyticFunction> Evaluator for Chunked<F> {
    fn evaluate(&self, xs: &[DesignPoint]) -> Result<Vec<PerformanceVector>> {
        Ok(xs
            .par_chunks(self.chunk_size.max(1))
            .flat_map_iter(|chunk| chunk.iter().map(|x| self.function.eval_point(x)))
            .collect())
    }
}

#[derive(Clone)]
pub struct Problem {
    name: String,
    space: DesignSpace,
    directions: Vec<Direction>,
    evaluator: Arc<dyn Evaluator>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("dim", &self.space.dim())
            .field("directions", &self.directions)
            .finish()
    }
}

impl Problem {
    pub fn new(
        name: impl Into<String>,
        space: DesignSpace,
        directions: Vec<Direction>,
        evaluator: Arc<dyn Evaluator>,
    ) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::argument("a problem needs at least one objective"));
        }
        Ok(Self {
            name: name.into(),
            space,
            directions,
            evaluator,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &DesignSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn num_objectives(&self) -> usize {
        self.directions.len()
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    /// Evaluates a batch, preserving order.
    ///
    /// Inputs must lie in the design space; outputs are checked for length
    /// and finiteness.
    pub fn evaluate_batch(&self, xs: &[DesignPoint]) -> Result<Vec<PerformanceVector>> {
        for x in xs {
            self.space.check(x)?;
        }
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        let ys = self.evaluator.evaluate(xs)?;
        if ys.len() != xs.len() {
            return Err(Error::evaluation(format!(
                "{}: evaluator returned {} rows for {} designs",
                self.name,
                ys.len(),
                xs.len()
            )));
        }
        for (row, y) in ys.iter().enumerate() {
            if y.len() != self.num_objectives() {
                return Err(Error::evaluation(format!(
                    "{}: row {row} has {} objectives, expected {}",
                    self.name,
                    y.len(),
                    self.num_objectives()
                )));
            }
            if !y.iter().all(|v| v.is_finite()) {
                return Err(Error::evaluation(format!(
                    "{}: row {row} is not finite: {y:?}",
                    self.name
                )));
            }
        }
        Ok(ys)
    }

    /// Default hypervolume reference point in the all-minimize convention,
    /// when the problem has a known one.
    pub fn default_reference_point(&self) -> Option<Vec<f64>> {
        let m = self.num_objectives();
        if self.name.starts_with("zdt") {
            Some(vec![11.0; m])
        } else if self.name.starts_with("dtlz") {
            Some(vec![1.1; m])
        } else {
            None
        }
    }
}

/// Serializable description of a problem, as it appears in run configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProblemSpec {
    Zdt {
        variant: u8,
        dim: usize,
    },
    Dtlz {
        variant: u8,
        dim: usize,
        objectives: usize,
    },
    External {
        name: String,
        command: String,
        workdir: PathBuf,
        lower: Vec<f64>,
        upper: Vec<f64>,
        directions: Vec<Direction>,
    },
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Problem> {
        match self {
            ProblemSpec::Zdt { variant, dim } => zdt_suite(ZdtVariant::from_number(*variant)?, *dim),
            ProblemSpec::Dtlz {
                variant,
                dim,
                objectives,
            } => dtlz_suite(DtlzVariant::from_number(*variant)?, *dim, *objectives),
            ProblemSpec::External {
                name,
                command,
                workdir,
                lower,
                upper,
                directions,
            } => {
                let space = DesignSpace::new(lower.clone(), upper.clone())?;
                let mut p = external_nfp(command, workdir, space, directions.clone())?;
                p.name = name.clone();
                Ok(p)
            }
        }
    }

    /// Name the built problem will carry.
    pub fn name(&self) -> String {
        match self {
            ProblemSpec::Zdt { variant, .. } => format!("zdt{variant}"),
            ProblemSpec::Dtlz { variant, .. } => format!("dtlz{variant}"),
            ProblemSpec::External { name, .. } => name.clone(),
        }
    }
}

/// Names and one-line descriptions of the built-in problems.
pub fn builtin_problems() -> Vec<(&'static str, &'static str)> {
    vec![
        ("zdt1", "ZDT1, 2 objectives, convex front, n >= 2 (default 30)"),
        ("zdt2", "ZDT2, 2 objectives, non-convex front, n >= 2 (default 30)"),
        ("zdt3", "ZDT3, 2 objectives, disconnected front, n >= 2 (default 6)"),
        ("dtlz1", "DTLZ1, M objectives, linear front, n >= M (default n=6, M=3)"),
        ("dtlz4", "DTLZ4, M objectives, spherical front, alpha=100 (default n=6, M=3)"),
    ]
}
