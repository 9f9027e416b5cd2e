use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{AnalyticFunction, Chunked, Problem, DEFAULT_CHUNK_SIZE};
use crate::error::{Error, Result};
use crate::space::{DesignSpace, Direction};

/// Exponent applied to the position variables in DTLZ4.
pub const DTLZ4_ALPHA: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DtlzVariant {
    Dtlz1,
    Dtlz4,
}

impl DtlzVariant {
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Self::Dtlz1),
            4 => Ok(Self::Dtlz4),
            _ => Err(Error::argument(format!("unsupported DTLZ variant {n}; expected 1 or 4"))),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Self::Dtlz1 => 1,
            Self::Dtlz4 => 4,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Dtlz {
    pub variant: DtlzVariant,
    pub objectives: usize,
}

impl Dtlz {
    fn dtlz1(&self, x: &[f64]) -> Vec<f64> {
        let m = self.objectives;
        let tail = &x[m - 1..];
        let g = 100.0
            * (tail.len() as f64
                + tail
                    .iter()
                    .map(|&v| (v - 0.5).powi(2) - (20.0 * PI * (v - 0.5)).cos())
                    .sum::<f64>());
        let scale = 0.5 * (1.0 + g);
        (0..m)
            .map(|i| {
                let mut f = scale;
                for &v in &x[..m - 1 - i] {
                    f *= v;
                }
                if i > 0 {
                    f *= 1.0 - x[m - 1 - i];
                }
                f
            })
            .collect()
    }

    fn dtlz4(&self, x: &[f64]) -> Vec<f64> {
        let m = self.objectives;
        let g: f64 = x[m - 1..].iter().map(|&v| (v - 0.5).powi(2)).sum();
        let theta: Vec<f64> = x[..m - 1]
            .iter()
            .map(|&v| v.powf(DTLZ4_ALPHA) * FRAC_PI_2)
            .collect();
        (0..m)
            .map(|i| {
                let mut f = 1.0 + g;
                for t in &theta[..m - 1 - i] {
                    f *= t.cos();
                }
                if i > 0 {
                    f *= theta[m - 1 - i].sin();
                }
                f
            })
            .collect()
    }
}

impl AnalyticFunction for Dtlz {
    fn eval_point(&self, x: &[f64]) -> Vec<f64> {
        match self.variant {
            DtlzVariant::Dtlz1 => self.dtlz1(x),
            DtlzVariant::Dtlz4 => self.dtlz4(x),
        }
    }
}

/// DTLZ problem on `[0, 1]^n` with `m` minimized objectives.
pub fn dtlz_suite(variant: DtlzVariant, n: usize, m: usize) -> Result<Problem> {
    if m < 2 {
        return Err(Error::argument(format!("DTLZ needs at least 2 objectives, got {m}")));
    }
    if n < m {
        return Err(Error::argument(format!("DTLZ needs n >= M, got n={n}, M={m}")));
    }
    Problem::new(
        format!("dtlz{}", variant.number()),
        DesignSpace::unit(n)?,
        vec![Direction::Minimize; m],
        Arc::new(Chunked {
            function: Dtlz {
                variant,
                objectives: m,
            },
            chunk_size: DEFAULT_CHUNK_SIZE,
        }),
    )
}
