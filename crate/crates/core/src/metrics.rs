//! Hypervolume indicators and benchmark reference fronts.

use rand::{Rng as _, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{Zdt, ZdtVariant};
use crate::problems::AnalyticFunction;
use crate::seed::{derive_seed, Rng};

pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;
const MC_CHUNK: usize = 1 << 16;

/// Settings for the Monte-Carlo estimator. All coordinates use the
/// all-minimize convention.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypervolumeSpec {
    pub reference_point: Vec<f64>,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    /// Lower corner of the sampling box. Defaults to the front's
    /// component-wise minimum minus 5% of its distance to the reference.
    #[serde(default)]
    pub ideal_point: Option<Vec<f64>>,
}

fn default_mc_samples() -> usize {
    DEFAULT_MC_SAMPLES
}

impl HypervolumeSpec {
    pub fn new(reference_point: Vec<f64>) -> Self {
        Self {
            reference_point,
            mc_samples: DEFAULT_MC_SAMPLES,
            ideal_point: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reference_point.len() < 2 || !self.reference_point.iter().all(|v| v.is_finite()) {
            return Err(Error::config("reference point needs at least two finite coordinates"));
        }
        if self.mc_samples == 0 {
            return Err(Error::config("mc_samples must be positive"));
        }
        if let Some(ideal) = &self.ideal_point {
            if ideal.len() != self.reference_point.len()
                || ideal.iter().zip(&self.reference_point).any(|(i, r)| !(i < r))
            {
                return Err(Error::config("ideal point must lie strictly below the reference point"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HvEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

fn within_reference<'a, T: AsRef<[f64]>>(front: &'a [T], reference: &'a [f64]) -> impl Iterator<Item = &'a [f64]> {
    front
        .iter()
        .map(|p| p.as_ref())
        .filter(move |p| p.iter().zip(reference).all(|(v, r)| v <= r))
}

/// Exact dominated area of a two-objective front. Points outside the
/// reference box are ignored; dominated points contribute nothing.
pub fn hypervolume_2d_exact<T: AsRef<[f64]>>(front: &[T], reference: &[f64]) -> f64 {
    let mut pts: Vec<(f64, f64)> = within_reference(front, reference).map(|p| (p[0], p[1])).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut best = reference[1];
    let mut area = 0.0;
    for (x, y) in pts {
        if y < best {
            area += (reference[0] - x) * (best - y);
            best = y;
        }
    }
    area
}

/// Monte-Carlo hypervolume: uniform samples in the `[ideal, reference]` box,
/// counted when weakly dominated by some front point. Chunks of samples use
/// independent child seeds, so the estimate does not depend on the thread
/// count.
pub fn hypervolume_mc<T: AsRef<[f64]>>(front: &[T], spec: &HypervolumeSpec, seed: u64) -> HvEstimate {
    let reference = &spec.reference_point;
    let pts: Vec<&[f64]> = within_reference(front, reference).collect();
    if pts.is_empty() || spec.mc_samples == 0 {
        return HvEstimate {
            estimate: 0.0,
            std_error: 0.0,
        };
    }
    let m = reference.len();
    let ideal: Vec<f64> = match &spec.ideal_point {
        Some(i) => i.clone(),
        None => (0..m)
            .map(|k| {
                let lo = pts.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
                let margin = 0.05 * (reference[k] - lo);
                if margin > 0.0 {
                    lo - margin
                } else {
                    lo - 0.05 * lo.abs().max(1.0)
                }
            })
            .collect(),
    };
    let volume: f64 = ideal.iter().zip(reference).map(|(l, r)| r - l).product();
    let n = spec.mc_samples;
    let chunks = n.div_ceil(MC_CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = Rng::seed_from_u64(derive_seed(seed, "hv-mc", c as u64));
            let count = MC_CHUNK.min(n - c * MC_CHUNK);
            let mut s = vec![0.0; m];
            let mut hits = 0u64;
            for _ in 0..count {
                for k in 0..m {
                    s[k] = ideal[k] + rng.gen::<f64>() * (reference[k] - ideal[k]);
                }
                if pts.iter().any(|p| p.iter().zip(&s).all(|(a, b)| a <= b)) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let p = hits as f64 / n as f64;
    HvEstimate {
        estimate: volume * p,
        std_error: volume * (p * (1.0 - p) / n as f64).sqrt(),
    }
}

/// Hypervolume with the exact method for two objectives and Monte Carlo
/// otherwise.
pub fn hypervolume<T: AsRef<[f64]>>(front: &[T], spec: &HypervolumeSpec, seed: u64) -> HvEstimate {
    if spec.reference_point.len() == 2 && spec.ideal_point.is_none() {
        HvEstimate {
            estimate: hypervolume_2d_exact(front, &spec.reference_point),
            std_error: 0.0,
        }
    } else {
        hypervolume_mc(front, spec, seed)
    }
}

/// True Pareto front of a ZDT problem sampled on a uniform `x1` grid with
/// the remaining variables at zero. Points come out sorted by `f1`.
pub fn reference_front(variant: ZdtVariant, resolution: usize) -> Result<Vec<[f64; 2]>> {
    if resolution < 100 {
        return Err(Error::argument(format!("reference front resolution must be >= 100, got {resolution}")));
    }
    let zdt = Zdt { variant };
    let mut front = Vec::new();
    let mut best = f64::INFINITY;
    for i in 0..resolution {
        let x1 = i as f64 / (resolution - 1) as f64;
        let y = zdt.eval_point(&[x1, 0.0]);
        if y[1] < best {
            best = y[1];
            front.push([y[0], y[1]]);
        }
    }
    Ok(front)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop, prop_assert, proptest};

    #[test]
    fn exact_examples() {
        assert_eq!(hypervolume_2d_exact(&[[1.0, 2.0], [2.0, 1.0]], &[3.0, 3.0]), 3.0);
        assert_eq!(hypervolume_2d_exact(&[[0.0, 0.0]], &[1.0, 1.0]), 1.0);
        assert_eq!(
            hypervolume_2d_exact(&[[1.0, 2.0], [2.0, 1.0], [2.5, 2.5]], &[3.0, 3.0]),
            3.0
        );
        assert_eq!(hypervolume_2d_exact::<[f64; 2]>(&[], &[3.0, 3.0]), 0.0);
        assert_eq!(hypervolume_2d_exact(&[[4.0, 0.0]], &[3.0, 3.0]), 0.0);
    }

    #[test]
    fn mc_trivial_cases() {
        let spec = HypervolumeSpec {
            reference_point: vec![1.0, 2.0, 3.0],
            mc_samples: 10_000,
            ideal_point: Some(vec![0.0, 0.0, 0.0]),
        };
        let full = hypervolume_mc(&[[0.0, 0.0, 0.0]], &spec, 1);
        assert_eq!(full.estimate, 6.0);
        assert_eq!(full.std_error, 0.0);
        let empty = hypervolume_mc::<[f64; 3]>(&[], &spec, 1);
        assert_eq!((empty.estimate, empty.std_error), (0.0, 0.0));
    }

    #[test]
    fn mc_matches_exact_on_random_fronts() {
        let mut rng = Rng::seed_from_u64(11);
        let mut misses = 0;
        for t in 0..50 {
            let k = rng.gen_range(1..30);
            let front: Vec<[f64; 2]> = (0..k).map(|_| [rng.gen::<f64>(), rng.gen::<f64>()]).collect();
            let spec = HypervolumeSpec {
                reference_point: vec![1.1, 1.1],
                mc_samples: 200_000,
                ideal_point: None,
            };
            let exact = hypervolume_2d_exact(&front, &spec.reference_point);
            let mc = hypervolume_mc(&front, &spec, t);
            if (mc.estimate - exact).abs() > 3.0 * mc.std_error {
                misses += 1;
            }
        }
        // A 3-sigma band fails with probability ~0.3% per front.
        assert!(misses <= 1, "{misses} fronts outside 3 standard errors");
    }

    #[test]
    fn mc_std_error_scales_as_inverse_sqrt() {
        let front = [[0.2, 0.7], [0.5, 0.4], [0.8, 0.1]];
        let spec = |n| HypervolumeSpec {
            reference_point: vec![1.0, 1.0],
            mc_samples: n,
            ideal_point: Some(vec![0.0, 0.0]),
        };
        let a = hypervolume_mc(&front, &spec(100_000), 5).std_error;
        let b = hypervolume_mc(&front, &spec(200_000), 5).std_error;
        let c = hypervolume_mc(&front, &spec(400_000), 5).std_error;
        assert!((a / b - 2f64.sqrt()).abs() < 0.02, "{a} {b}");
        assert!((a / c - 2.0).abs() < 0.03, "{a} {c}");
    }

    #[test]
    fn mc_is_deterministic() {
        let front = [[0.2, 0.7, 0.3], [0.5, 0.4, 0.1]];
        let spec = HypervolumeSpec {
            reference_point: vec![1.0; 3],
            mc_samples: 150_000,
            ideal_point: None,
        };
        assert_eq!(hypervolume_mc(&front, &spec, 9), hypervolume_mc(&front, &spec, 9));
    }

    #[test]
    fn zdt_reference_fronts() {
        for (front, f) in [
            (reference_front(ZdtVariant::Zdt1, 1000).unwrap(), (|f1: f64| 1.0 - f1.sqrt()) as fn(f64) -> f64),
            (reference_front(ZdtVariant::Zdt2, 1000).unwrap(), |f1: f64| 1.0 - f1 * f1),
        ] {
            assert_eq!(front.len(), 1000);
            for p in front {
                assert!((p[1] - f(p[0])).abs() <= 1e-12);
            }
        }
        let res = 10_000;
        let front = reference_front(ZdtVariant::Zdt3, res).unwrap();
        let step = 1.0 / (res - 1) as f64;
        let gaps = front.windows(2).filter(|w| w[1][0] - w[0][0] > 1.5 * step).count();
        assert_eq!(gaps + 1, 5);
        assert!(reference_front(ZdtVariant::Zdt1, 99).is_err());
    }

    proptest! {
        #[test]
        fn adding_a_point_never_decreases(
            pts in prop::collection::vec((0.0f64..2.0, 0.0f64..2.0), 0..20),
            extra in (0.0f64..2.5, 0.0f64..2.5),
        ) {
            let front: Vec<[f64; 2]> = pts.iter().map(|&(a, b)| [a, b]).collect();
            let reference = [2.0, 2.0];
            let before = hypervolume_2d_exact(&front, &reference);
            let mut grown = front.clone();
            grown.push([extra.0, extra.1]);
            prop_assert!(hypervolume_2d_exact(&grown, &reference) >= before);
        }

        #[test]
        fn shift_and_scale_covariance(
            pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..20),
            shift in (-5.0f64..5.0, -5.0f64..5.0),
            scale in 0.1f64..10.0,
        ) {
            let front: Vec<[f64; 2]> = pts.iter().map(|&(a, b)| [a, b]).collect();
            let reference = [1.2, 1.3];
            let hv = hypervolume_2d_exact(&front, &reference);
            let shifted: Vec<[f64; 2]> = front.iter().map(|p| [p[0] + shift.0, p[1] + shift.1]).collect();
            let hv_shift = hypervolume_2d_exact(&shifted, &[reference[0] + shift.0, reference[1] + shift.1]);
            prop_assert!((hv_shift - hv).abs() <= 1e-9 * (1.0 + hv));
            let scaled: Vec<[f64; 2]> = front.iter().map(|p| [p[0] * scale, p[1]]).collect();
            let hv_scale = hypervolume_2d_exact(&scaled, &[reference[0] * scale, reference[1]]);
            prop_assert!((hv_scale - scale * hv).abs() <= 1e-9 * (1.0 + scale * hv));
        }
    }
}
