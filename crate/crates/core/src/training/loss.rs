use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Error functions `E(φ_L, y)` whose gradient in `φ_L` vanishes only at `φ_L = y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossKind {
    /// `½‖φ − y‖²`.
    Squared,
    /// `sqrt(‖φ − y‖² + β)`.
    SmoothedL1 { beta: f64 },
    /// `(c²/2)·ln(1 + ‖φ − y‖²/c²)`.
    Cauchy { scale: f64 },
}

impl LossKind {
    pub const DEFAULT_BETA: f64 = 1e-6;

    pub fn smoothed_l1() -> Self {
        LossKind::SmoothedL1 {
            beta: Self::DEFAULT_BETA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LossKind::Squared => Ok(()),
            LossKind::SmoothedL1 { beta } if beta > 0.0 && beta.is_finite() => Ok(()),
            LossKind::Cauchy { scale } if scale > 0.0 && scale.is_finite() => Ok(()),
            other => Err(Error::InvalidArgument(format!("loss parameter must be positive: {other:?}"))),
        }
    }

    /// Value and gradient in the first argument.
    pub fn eval(&self, output: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
        if output.len() != target.len() {
            return Err(Error::shape("loss_eval", output.len(), target.len()));
        }
        let r: Vec<f64> = output.iter().zip(target).map(|(o, t)| o - t).collect();
        let r2: f64 = r.iter().map(|v| v * v).sum();
        Ok(match *self {
            LossKind::Squared => (0.5 * r2, r),
            LossKind::SmoothedL1 { beta } => {
                let value = (r2 + beta).sqrt();
                let grad = r.iter().map(|v| v / value).collect();
                (value, grad)
            }
            LossKind::Cauchy { scale } => {
                let c2 = scale * scale;
                let value = 0.5 * c2 * (r2 / c2).ln_1p();
                let denom = 1.0 + r2 / c2;
                (value, r.iter().map(|v| v / denom).collect())
            }
        })
    }
}

pub fn loss_eval(kind: LossKind, output: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    kind.eval(output, target)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothed_l1_at_exact_fit() {
        let (v, g) = LossKind::smoothed_l1().eval(&[0.3, -1.0], &[0.3, -1.0]).unwrap();
        assert!((v - 1e-3).abs() < 1e-15);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn squared_example() {
        let (v, g) = LossKind::Squared.eval(&[3.0, 4.0], &[0.0, 0.0]).unwrap();
        assert_eq!(v, 12.5);
        assert_eq!(g, vec![3.0, 4.0]);
    }

    #[test]
    fn smoothed_l1_gradient_formula() {
        let beta = 0.25;
        let (v, g) = LossKind::SmoothedL1 { beta }.eval(&[1.0, 2.0], &[0.0, 0.0]).unwrap();
        let value = (5.0f64 + beta).sqrt();
        assert!((v - value).abs() < 1e-15);
        assert!((g[0] - 1.0 / value).abs() < 1e-15 && (g[1] - 2.0 / value).abs() < 1e-15);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-5;
        let y = [0.2, -0.7, 1.1];
        let o = [1.0, 0.3, -0.4];
        for kind in [LossKind::Squared, LossKind::SmoothedL1 { beta: 1e-2 }, LossKind::Cauchy { scale: 0.8 }] {
            let (_, g) = kind.eval(&o, &y).unwrap();
            for i in 0..3 {
                let mut p = o;
                let mut m = o;
                p[i] += h;
                m[i] -= h;
                let fd = (kind.eval(&p, &y).unwrap().0 - kind.eval(&m, &y).unwrap().0) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-8, "{kind:?} coordinate {i}");
            }
        }
    }

    #[test]
    fn validation() {
        assert!(LossKind::SmoothedL1 { beta: 0.0 }.validate().is_err());
        assert!(LossKind::Cauchy { scale: -1.0 }.validate().is_err());
        assert!(LossKind::Squared.eval(&[1.0], &[1.0, 2.0]).is_err());
    }
}
