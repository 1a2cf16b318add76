use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{frobenius_norm_collection, numerical_rank, rank_threshold, svd, Matrix, DEFAULT_TOL_FACTOR};
use crate::network::WeightSet;

const RETRIES: usize = 10;

/// Returns a weight set with every `W_l` of full numerical rank and
/// `‖ws − result‖_F ≤ epsilon` over the collection.
///
/// Rank-deficient layers have their numerically-zero singular values lifted
/// to a floor `0.999·ε/sqrt(L·k_l)`, where `k_l` is the number of lifted
/// values, so each layer moves by at most `ε/√L`. Full-rank layers are left
/// untouched.
pub fn perturb_to_full_rank(ws: &WeightSet, epsilon: f64, seed: u64) -> Result<WeightSet> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    let depth = ws.depth() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ws.clone();
    for (idx, w) in ws.weights.iter().enumerate() {
        let full = w.rows().min(w.cols());
        if numerical_rank(w, DEFAULT_TOL_FACTOR)? == full {
            continue;
        }
        let budget = 0.999 * epsilon / depth.sqrt();
        let mut candidate = lift(w, budget)?;
        let mut attempt = 0;
        while numerical_rank(&candidate, DEFAULT_TOL_FACTOR)? != full {
            attempt += 1;
            if attempt > RETRIES {
                return Err(Error::FullRank { retries: RETRIES });
            }
            // Spend half the remaining layer budget on a random nudge, then lift again.
            let used = candidate.sub(w)?.frobenius_norm();
            let room = 0.5 * (budget - used).max(0.0);
            let noise = Matrix::from_fn(w.rows(), w.cols(), |_, _| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g
            });
            let nn = noise.frobenius_norm().max(f64::MIN_POSITIVE);
            let nudged = w.add(&noise.scale(room / nn))?;
            candidate = lift(&nudged, 0.5 * budget)?;
        }
        out.weights[idx] = candidate;
    }
    let dist = frobenius_norm_collection(&out.diff(ws)?);
    debug_assert!(dist <= epsilon, "collection distance {dist} exceeds {epsilon}");
    Ok(out)
}

/// Lifts numerically-zero singular values so the layer moves by at most `budget`.
fn lift(w: &Matrix, budget: f64) -> Result<Matrix> {
    let s = svd(w)?;
    let thr = rank_threshold(s.sigma_max(), w.rows(), w.cols(), DEFAULT_TOL_FACTOR);
    let small: Vec<usize> = (0..s.singular_values.len())
        .filter(|&i| s.singular_values[i] <= thr || s.sigma_max() == 0.0)
        .collect();
    if small.is_empty() {
        return Ok(w.clone());
    }
    let floor = budget / (small.len() as f64).sqrt();
    let mut sv = s.singular_values.clone();
    for &i in &small {
        sv[i] = sv[i].max(floor);
    }
    let us = s.left_vectors.transpose().scale_rows(&sv)?.transpose();
    us.matmul(&s.right_vectors.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_weights, Activation, Architecture};

    #[test]
    fn zero_weights_become_full_rank_within_epsilon() {
        let arch = Architecture::with_hidden(vec![2, 3, 3, 2], Activation::sigmoid(1.0)).unwrap();
        let ws = WeightSet::zeros(&arch);
        let out = perturb_to_full_rank(&ws, 0.1, 0).unwrap();
        for w in &out.weights {
            assert_eq!(numerical_rank(w, 1.0).unwrap(), w.rows().min(w.cols()));
        }
        assert!(frobenius_norm_collection(&out.diff(&ws).unwrap()) <= 0.1);
    }

    #[test]
    fn full_rank_input_is_unchanged() {
        let arch = Architecture::with_hidden(vec![2, 4, 3], Activation::Tanh).unwrap();
        let ws = init_weights(&arch, 5, 1.0).unwrap();
        assert_eq!(perturb_to_full_rank(&ws, 1e-3, 1).unwrap(), ws);
    }

    #[test]
    fn rank_one_layer_shift_is_bounded() {
        let u = Matrix::column_vector(&[1.0, 2.0, -1.0]);
        let v = Matrix::from_rows(&[vec![0.5, -1.0, 2.0]]).unwrap();
        let w = u.matmul(&v).unwrap();
        let arch = Architecture::new(vec![3, 3], vec![Activation::Identity]).unwrap();
        let ws = WeightSet::new(&arch, vec![w.clone()], vec![vec![0.0; 3]]).unwrap();
        let eps = 0.05;
        let out = perturb_to_full_rank(&ws, eps, 2).unwrap();
        assert_eq!(numerical_rank(out.w(1), 1.0).unwrap(), 3);
        let before = svd(&w).unwrap().singular_values;
        let after = svd(out.w(1)).unwrap().singular_values;
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() <= eps / (ws.depth() as f64).sqrt());
        }
        assert!(out.w(1).sub(&w).unwrap().frobenius_norm() <= eps);
    }

    #[test]
    fn rejects_non_positive_epsilon() {
        let arch = Architecture::linear(vec![2, 2]).unwrap();
        assert!(perturb_to_full_rank(&WeightSet::zeros(&arch), 0.0, 0).is_err());
    }
}
