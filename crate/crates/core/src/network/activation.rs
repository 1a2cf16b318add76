use serde::{Deserialize, Serialize};

/// Smooth, monotonically increasing, Lipschitz unit nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Activation {
    Identity,
    /// `1 / (1 + e^{-a x})`; `slope` is `a`, the largest slope is `a/4`.
    Sigmoid { slope: f64 },
    Softplus,
    Tanh,
}

/// Value with first and second derivative at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationValue {
    pub value: f64,
    pub first: f64,
    pub second: f64,
}

impl Activation {
    pub fn sigmoid(slope: f64) -> Self {
        Activation::Sigmoid { slope }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Activation::Identity)
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            Activation::Sigmoid { slope } if !(slope > 0.0 && slope.is_finite()) => {
                Err(format!("sigmoid slope must be positive and finite, got {slope}"))
            }
            _ => Ok(()),
        }
    }

    /// Supremum of the first derivative over the real line.
    pub fn max_slope(&self) -> f64 {
        match *self {
            Activation::Identity | Activation::Softplus | Activation::Tanh => 1.0,
            Activation::Sigmoid { slope } => slope / 4.0,
        }
    }

    pub fn eval(&self, x: f64) -> ActivationValue {
        match *self {
            Activation::Identity => ActivationValue {
                value: x,
                first: 1.0,
                second: 0.0,
            },
            Activation::Sigmoid { slope } => {
                let (s, s1m, centre) = logistic_parts(slope * x);
                ActivationValue {
                    value: s,
                    first: slope * s1m,
                    second: slope * slope * s1m * centre,
                }
            }
            Activation::Softplus => {
                let (s, s1m, _) = logistic_parts(x);
                ActivationValue {
                    value: x.max(0.0) + (-x.abs()).exp().ln_1p(),
                    first: s,
                    second: s1m,
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                let d = 1.0 - t * t;
                ActivationValue {
                    value: t,
                    first: d,
                    second: -2.0 * t * d,
                }
            }
        }
    }
}

/// Returns `(s, s(1-s), 1-2s)` for the standard logistic at `z`, without
/// cancellation or overflow at large `|z|`.
fn logistic_parts(z: f64) -> (f64, f64, f64) {
    let e = (-z.abs()).exp();
    let denom = 1.0 + e;
    let s = if z >= 0.0 { 1.0 / denom } else { e / denom };
    let s1m = e / (denom * denom);
    let centre = if z >= 0.0 { (e - 1.0) / denom } else { (1.0 - e) / denom };
    (s, s1m, centre)
}
