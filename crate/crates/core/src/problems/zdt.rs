use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{AnalyticFunction, Chunked, Problem, DEFAULT_CHUNK_SIZE};
use crate::error::{Error, Result};
use crate::space::{DesignSpace, Direction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZdtVariant {
    Zdt1,
    Zdt2,
    Zdt3,
}

impl ZdtVariant {
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Self::Zdt1),
            2 => Ok(Self::Zdt2),
            3 => Ok(Self::Zdt3),
            _ => Err(Error::argument(format!("unknown ZDT variant {n}; expected 1, 2 or 3"))),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Self::Zdt1 => 1,
            Self::Zdt2 => 2,
            Self::Zdt3 => 3,
        }
    }

    /// Second objective as a function of `f1` and `g`.
    pub fn f2(self, f1: f64, g: f64) -> f64 {
        let r = f1 / g;
        match self {
            Self::Zdt1 => g * (1.0 - r.sqrt()),
            Self::Zdt2 => g * (1.0 - r * r),
            Self::Zdt3 => g * (1.0 - r.sqrt() - r * (10.0 * PI * f1).sin()),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Zdt {
    pub variant: ZdtVariant,
}

impl Zdt {
    /// `g = 1 + 9/(n-1) * sum(x_2..x_n)`.
    pub fn g(x: &[f64]) -> f64 {
        let n = x.len();
        1.0 + 9.0 / (n as f64 - 1.0) * x[1..].iter().sum::<f64>()
    }
}

impl AnalyticFunction for Zdt {
    fn eval_point(&self, x: &[f64]) -> Vec<f64> {
        let f1 = x[0];
        let g = Self::g(x);
        vec![f1, self.variant.f2(f1, g)]
    }
}

/// ZDT problem on `[0, 1]^n`, both objectives minimized.
pub fn zdt_suite(variant: ZdtVariant, n: usize) -> Result<Problem> {
    if n < 2 {
        return Err(Error::argument(format!("ZDT needs n >= 2, got {n}")));
    }
    Problem::new(
        format!("zdt{}", variant.number()),
        DesignSpace::unit(n)?,
        vec![Direction::Minimize; 2],
        Arc::new(Chunked {
            function: Zdt { variant },
            chunk_size: DEFAULT_CHUNK_SIZE,
        }),
    )
}
