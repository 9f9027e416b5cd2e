//! Box-bounded design spaces and objective directions.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::Rng;

/// A point in the design space.
pub type DesignPoint = Vec<f64>;

/// Objective values of one design, in the problem's own directions.
pub type PerformanceVector = Vec<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Minimize,
    Maximize,
}

impl Direction {
    /// Maps a value into the all-minimize convention.
    #[inline]
    pub fn to_min(self, v: f64) -> f64 {
        match self {
            Direction::Minimize => v,
            Direction::Maximize => -v,
        }
    }
}

/// Converts a performance vector into the all-minimize convention.
pub fn to_minimization(y: &[f64], directions: &[Direction]) -> Vec<f64> {
    y.iter().zip(directions).map(|(&v, d)| d.to_min(v)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct DesignSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<RawSpace> for DesignSpace {
    type Error = Error;
    fn try_from(raw: RawSpace) -> Result<Self> {
        DesignSpace::new(raw.lower, raw.upper)
    }
}

impl From<DesignSpace> for RawSpace {
    fn from(space: DesignSpace) -> Self {
        RawSpace {
            lower: space.lower,
            upper: space.upper,
        }
    }
}

impl DesignSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::argument("design space needs at least one dimension"));
        }
        if lower.len() != upper.len() {
            return Err(Error::argument(format!(
                "bound length mismatch: {} lower vs {} upper",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::argument(format!(
                    "dimension {i}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The unit hypercube `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    pub fn clip(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::argument(format!(
                "design has {} coordinates, space has {}",
                x.len(),
                self.dim()
            )));
        }
        if !self.contains(x) {
            return Err(Error::argument(format!("design {x:?} is outside the design space")));
        }
        Ok(())
    }
}

/// Draws `count` i.i.d. uniform points from the box.
pub fn uniform_sample(space: &DesignSpace, count: usize, rng: &mut Rng) -> Vec<DesignPoint> {
    (0..count)
        .map(|_| {
            (0..space.dim())
                .map(|i| (space.lower[i] + rng.gen::<f64>() * space.width(i)).min(space.upper[i]))
                .collect()
        })
        .collect()
}
