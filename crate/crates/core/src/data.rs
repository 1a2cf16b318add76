use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Paired samples `{(x_i, y_i)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        let d = Self { inputs, targets };
        d.validate()?;
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn target_dim(&self) -> usize {
        self.targets.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.len() != self.targets.len() {
            return Err(Error::shape("dataset", self.inputs.len(), self.targets.len()));
        }
        let (di, dt) = (self.input_dim(), self.target_dim());
        for (i, (x, y)) in self.inputs.iter().zip(&self.targets).enumerate() {
            if x.len() != di || y.len() != dt {
                return Err(Error::shape(
                    format!("dataset sample {i}"),
                    format!("({di}, {dt})"),
                    format!("({}, {})", x.len(), y.len()),
                ));
            }
            if x.iter().chain(y).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("dataset sample {i}")));
            }
        }
        Ok(())
    }

    /// Checks the dataset against network input/output widths.
    pub fn check_dims(&self, input_dim: usize, output_dim: usize) -> Result<()> {
        self.validate()?;
        if self.is_empty() {
            return Err(Error::InvalidArgument("empty dataset".into()));
        }
        if self.input_dim() != input_dim || self.target_dim() != output_dim {
            return Err(Error::shape(
                "dataset vs architecture",
                format!("inputs {input_dim}, targets {output_dim}"),
                format!("inputs {}, targets {}", self.input_dim(), self.target_dim()),
            ));
        }
        Ok(())
    }
}
