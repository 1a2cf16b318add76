use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, Architecture, WeightSet};
use crate::error::Result;
use crate::linalg::Matrix;

/// On-disk network: architecture, weights as arrays of rows, frozen biases.
///
/// Field order is the canonical key order, so write → read → write is
/// byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub widths: Vec<usize>,
    pub activations: Vec<Activation>,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
    pub seed: u64,
}

impl Checkpoint {
    pub fn new(arch: &Architecture, ws: &WeightSet, seed: u64) -> Self {
        Self {
            widths: arch.widths().to_vec(),
            activations: arch.activations().to_vec(),
            weights: ws.weights.iter().map(Matrix::to_rows).collect(),
            biases: ws.biases.clone(),
            seed,
        }
    }

    /// Rebuilds and validates the architecture and weights.
    pub fn restore(&self) -> Result<(Architecture, WeightSet)> {
        let arch = Architecture::new_unchecked_hidden(self.widths.clone(), self.activations.clone())?;
        let weights = self
            .weights
            .iter()
            .map(|rows| {
                if rows.is_empty() {
                    Ok(Matrix::zeros(0, 0))
                } else {
                    Matrix::from_rows(rows)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let ws = WeightSet::new(&arch, weights, self.biases.clone())?;
        Ok((arch, ws))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::init_weights_with;
    use crate::network::InitOptions;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn json_round_trip_is_byte_exact(seed in any::<u64>(), slope in 0.1f64..20.0, bias_scale in 0.0f64..2.0) {
            let arch = Architecture::new(
                vec![2, 3, 4, 2],
                vec![Activation::sigmoid(slope), Activation::Tanh, Activation::Identity],
            ).unwrap();
            let ws = init_weights_with(&arch, seed, InitOptions { scale: 1.3, bias_scale }).unwrap();
            let first = Checkpoint::new(&arch, &ws, seed).to_json().unwrap();
            let parsed = Checkpoint::from_json(&first).unwrap();
            let (a2, w2) = parsed.restore().unwrap();
            prop_assert_eq!(&a2, &arch);
            prop_assert_eq!(&w2, &ws);
            prop_assert_eq!(parsed.to_json().unwrap(), first);
        }
    }

    #[test]
    fn rejects_wrong_shapes_and_unknown_keys() {
        let arch = Architecture::with_hidden(vec![2, 2, 1], Activation::Softplus).unwrap();
        let ws = WeightSet::zeros(&arch);
        let mut cp = Checkpoint::new(&arch, &ws, 0);
        cp.weights[1] = vec![vec![1.0, 2.0]];
        assert!(cp.restore().is_err());
        let json = Checkpoint::new(&arch, &ws, 0).to_json().unwrap();
        let bad = json.replacen("\"seed\"", "\"extra\": 1,\n  \"seed\"", 1);
        assert!(Checkpoint::from_json(&bad).is_err());
    }
}
