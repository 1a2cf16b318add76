use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

/// Generator name, seed and parameters recorded with every dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetMeta {
    pub generator: String,
    pub seed: u64,
    pub params: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledDataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    pub meta: DatasetMeta,
}

impl LabeledDataset {
    fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>, meta: DatasetMeta) -> Result<Self> {
        Dataset::new(inputs.clone(), targets.clone())?;
        Ok(Self { inputs, targets, meta })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn to_dataset(&self) -> Result<Dataset> {
        Dataset::new(self.inputs.clone(), self.targets.clone())
    }
}

/// Class table for the four-region benchmark.
///
/// A point `p` falls in band 0..=3 by `‖p‖₂` against the radii 1, 2, 3 and
/// on side `a` when `p.x + p.y < 0`, side `b` otherwise. Its class (1..=4)
/// is `side[band]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelTable {
    pub a: [u8; 4],
    pub b: [u8; 4],
}

impl Default for LabelTable {
    fn default() -> Self {
        Self {
            a: [2, 1, 2, 4],
            b: [2, 1, 1, 3],
        }
    }
}

pub const FOUR_REGION_HALF_WIDTH: f64 = 4.0;
pub const FOUR_REGION_RADII: [f64; 3] = [1.0, 2.0, 3.0];
pub const FOUR_REGION_CLASSES: usize = 4;

impl LabelTable {
    pub fn validate(&self) -> Result<()> {
        if self.a.iter().chain(&self.b).any(|&c| !(1..=4).contains(&c)) {
            return Err(Error::Config(format!("label table entries must lie in 1..=4, got {self:?}")));
        }
        Ok(())
    }

    /// Class in 1..=4.
    pub fn class_of(&self, p: [f64; 2]) -> u8 {
        let d = (p[0] * p[0] + p[1] * p[1]).sqrt();
        let band = FOUR_REGION_RADII.iter().take_while(|&&r| d >= r).count();
        if p[0] + p[1] < 0.0 {
            self.a[band]
        } else {
            self.b[band]
        }
    }

    /// Class sequence met along the diagonal from `(−4,−4)` to `(4,4)`, with
    /// repeats collapsed.
    pub fn diagonal_sequence(&self) -> Vec<u8> {
        let mut seq = Vec::new();
        for s in [-1.0, 1.0] {
            let bands: Vec<usize> = if s < 0.0 { vec![3, 2, 1, 0] } else { vec![0, 1, 2, 3] };
            for band in bands {
                let c = if s < 0.0 { self.a[band] } else { self.b[band] };
                if seq.last() != Some(&c) {
                    seq.push(c);
                }
            }
        }
        seq
    }
}

/// Basis vector `e_{class−1}` of ℝ⁴.
pub fn one_hot(class: u8) -> Vec<f64> {
    let mut v = vec![0.0; FOUR_REGION_CLASSES];
    v[class as usize - 1] = 1.0;
    v
}

pub fn gen_four_region(n: usize, seed: u64, table: &LabelTable) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("four-region needs n ≥ 1".into()));
    }
    table.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = Uniform::new(-FOUR_REGION_HALF_WIDTH, FOUR_REGION_HALF_WIDTH).expect("valid range");
    let mut inputs = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let p = [side.sample(&mut rng), side.sample(&mut rng)];
        targets.push(one_hot(table.class_of(p)));
        inputs.push(p.to_vec());
    }
    LabeledDataset::new(
        inputs,
        targets,
        DatasetMeta {
            generator: "four_region".into(),
            seed,
            params: serde_json::json!({ "n": n, "table": table }),
        },
    )
}

/// Gerono lemniscate evaluated at angle `t`.
pub fn figure_eight_point(t: f64) -> [f64; 2] {
    [t.cos(), t.sin() * t.cos()]
}

/// Noisy points on the unit circle mapped to clean points on the figure eight.
pub fn gen_figure_eight(n_points: usize, noise_halfwidth: f64, seed: u64) -> Result<LabeledDataset> {
    if n_points < 2 {
        return Err(Error::InvalidArgument("figure-eight needs at least 2 points".into()));
    }
    if !(noise_halfwidth >= 0.0 && noise_halfwidth.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise half-width must be non-negative, got {noise_halfwidth}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(n_points);
    let mut targets = Vec::with_capacity(n_points);
    for i in 0..n_points {
        let t = 2.0 * PI * i as f64 / n_points as f64;
        let mut x = vec![t.cos(), t.sin()];
        if noise_halfwidth > 0.0 {
            for v in &mut x {
                *v += rng.random_range(-noise_halfwidth..=noise_halfwidth);
            }
        }
        inputs.push(x);
        targets.push(figure_eight_point(t).to_vec());
    }
    LabeledDataset::new(
        inputs,
        targets,
        DatasetMeta {
            generator: "figure_eight".into(),
            seed,
            params: serde_json::json!({ "n_points": n_points, "noise_halfwidth": noise_halfwidth }),
        },
    )
}

/// Orthogonal `n×n` matrix from Gram–Schmidt on a seeded Gaussian matrix.
/// Columns are normalized so the implied triangular factor has a positive
/// diagonal, which makes the draw unique per seed.
pub fn random_orthogonal(n: usize, seed: u64) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("orthogonal matrix needs n ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut c: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        for _ in 0..2 {
            for q in &cols {
                let proj = dot(&c, q);
                c.iter_mut().zip(q).for_each(|(x, y)| *x -= proj * y);
            }
        }
        let norm = dot(&c, &c).sqrt();
        if norm > 1e-8 {
            cols.push(c.into_iter().map(|x| x / norm).collect());
        }
    }
    Ok(Matrix::from_fn(n, n, |i, j| cols[j][i]))
}

/// Swiss-roll point `Q·[t cos t, t sin t, r]`.
pub fn swiss_roll_point(q: &Matrix, t: f64, r: f64) -> Vec<f64> {
    q.mul_vec(&[t * t.cos(), t * t.sin(), r]).expect("3x3 rotation")
}

/// Rotated Swiss roll mapped to the unit circle by `(t, r) ↦ (cos t, sin t)`.
pub fn gen_swiss_roll(n: usize, seed: u64, q_seed: u64) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("swiss roll needs n ≥ 1".into()));
    }
    let q = random_orthogonal(3, q_seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ts = Uniform::new(0.0, 2.0 * PI).expect("valid range");
    let rs = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
    let mut inputs = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let t = ts.sample(&mut rng);
        let r = rs.sample(&mut rng);
        inputs.push(swiss_roll_point(&q, t, r));
        targets.push(vec![t.cos(), t.sin()]);
    }
    LabeledDataset::new(
        inputs,
        targets,
        DatasetMeta {
            generator: "swiss_roll".into(),
            seed,
            params: serde_json::json!({ "n": n, "q_seed": q_seed }),
        },
    )
}
