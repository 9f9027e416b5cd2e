//! Real-coded variation operators.

use rand::Rng as _;

use crate::seed::Rng;
use crate::space::DesignSpace;

/// Simulated binary crossover.
///
/// With probability `prob` the pair is recombined; each variable is then
/// crossed with probability one half using spread factor `beta` drawn from
/// the SBX distribution with index `eta`. Children are not clipped here.
pub fn sbx(p1: &[f64], p2: &[f64], eta: f64, prob: f64, rng: &mut Rng) -> (Vec<f64>, Vec<f64>) {
    let mut c1 = p1.to_vec();
    let mut c2 = p2.to_vec();
    if rng.gen::<f64>() >= prob {
        return (c1, c2);
    }
    let exponent = 1.0 / (eta + 1.0);
    for i in 0..p1.len() {
        if rng.gen::<f64>() > 0.5 || (p1[i] - p2[i]).abs() <= 1e-14 {
            continue;
        }
        let u: f64 = rng.gen();
        let beta = if u <= 0.5 {
            (2.0 * u).powf(exponent)
        } else {
            (1.0 / (2.0 * (1.0 - u))).powf(exponent)
        };
        c1[i] = 0.5 * ((1.0 + beta) * p1[i] + (1.0 - beta) * p2[i]);
        c2[i] = 0.5 * ((1.0 - beta) * p1[i] + (1.0 + beta) * p2[i]);
    }
    (c1, c2)
}

/// Polynomial mutation followed by clipping to the box. Each variable
/// mutates independently with probability `prob`.
pub fn polynomial_mutation(x: &mut [f64], space: &DesignSpace, eta: f64, prob: f64, rng: &mut Rng) {
    let exponent = 1.0 / (eta + 1.0);
    for (i, v) in x.iter_mut().enumerate() {
        if rng.gen::<f64>() >= prob {
            continue;
        }
        let u: f64 = rng.gen();
        let delta = if u < 0.5 {
            (2.0 * u).powf(exponent) - 1.0
        } else {
            1.0 - (2.0 * (1.0 - u)).powf(exponent)
        };
        *v += delta * space.width(i);
    }
    space.clip(x);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::SeedTree;

    #[test]
    fn sbx_preserves_midpoint() {
        let mut rng = SeedTree::new(1).rng("sbx", 0);
        let p1 = [0.2, 0.9, 0.5];
        let p2 = [0.6, 0.1, 0.5];
        for _ in 0..100 {
            let (c1, c2) = sbx(&p1, &p2, 15.0, 1.0, &mut rng);
            for i in 0..3 {
                assert!(((c1[i] + c2[i]) - (p1[i] + p2[i])).abs() < 1e-12);
            }
            assert_eq!(c1[2], 0.5);
        }
    }

    #[test]
    fn zero_probabilities_copy_parents() {
        let space = DesignSpace::unit(3).unwrap();
        let mut rng = SeedTree::new(2).rng("op", 0);
        let p1 = [0.2, 0.9, 0.5];
        let p2 = [0.6, 0.1, 0.4];
        let (mut c1, c2) = sbx(&p1, &p2, 15.0, 0.0, &mut rng);
        polynomial_mutation(&mut c1, &space, 20.0, 0.0, &mut rng);
        assert_eq!(c1, p1);
        assert_eq!(c2, p2);
    }

    #[test]
    fn mutation_respects_bounds() {
        let space = DesignSpace::new(vec![-1.0, 0.0], vec![1.0, 0.001]).unwrap();
        let mut rng = SeedTree::new(3).rng("op", 0);
        for _ in 0..1000 {
            let mut x = vec![0.99, 0.0005];
            polynomial_mutation(&mut x, &space, 5.0, 1.0, &mut rng);
            assert!(space.contains(&x));
        }
    }
}
