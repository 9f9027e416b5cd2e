use serde::{Deserialize, Serialize};

/// Hidden-layer nonlinearities. Parameters follow the PyTorch defaults
/// (`alpha = 1` for CELU/ELU, slope `0.01` for LeakyReLU).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
    #[serde(rename = "ReLU")]
    Relu,
    #[serde(rename = "CELU")]
    Celu,
    #[serde(rename = "LeakyReLU")]
    LeakyRelu,
    #[serde(rename = "ELU")]
    Elu,
    Hardswish,
}

const LEAKY_SLOPE: f64 = 0.01;
const CELU_ALPHA: f64 = 1.0;
const ELU_ALPHA: f64 = 1.0;

impl Activation {
    pub const ALL: [Activation; 6] = [
        Activation::Tanh,
        Activation::Relu,
        Activation::Celu,
        Activation::LeakyRelu,
        Activation::Elu,
        Activation::Hardswish,
    ];

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Celu => z.max(0.0) + (CELU_ALPHA * ((z / CELU_ALPHA).exp() - 1.0)).min(0.0),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    ELU_ALPHA * z.exp_m1()
                }
            }
            Activation::Hardswish => {
                if z <= -3.0 {
                    0.0
                } else if z >= 3.0 {
                    z
                } else {
                    z * (z + 3.0) / 6.0
                }
            }
        }
    }

    /// Derivative with respect to the pre-activation `z`.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Celu => {
                if z > 0.0 {
                    1.0
                } else {
                    (z / CELU_ALPHA).exp()
                }
            }
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Elu => {
                if z > 0.0 {
                    1.0
                } else {
                    ELU_ALPHA * z.exp()
                }
            }
            Activation::Hardswish => {
                if z <= -3.0 {
                    0.0
                } else if z >= 3.0 {
                    1.0
                } else {
                    (2.0 * z + 3.0) / 6.0
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-6;
        for act in Activation::ALL {
            for &z in &[-4.1, -2.5, -0.7, -0.01, 0.3, 1.2, 2.9, 3.7] {
                let fd = (act.apply(z + h) - act.apply(z - h)) / (2.0 * h);
                assert!((fd - act.derivative(z)).abs() < 1e-6, "{act:?} at {z}");
            }
        }
    }

    #[test]
    fn zero_maps_to_zero() {
        for act in Activation::ALL {
            assert_eq!(act.apply(0.0), 0.0, "{act:?}");
        }
    }
}
