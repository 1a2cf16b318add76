//! Input Jacobian `D₂F`, its truncations `Ω_l`, and the directional
//! derivative of its spectral norm.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{kron_vec, norm2, svd, Matrix};
use crate::network::{ForwardTrace, WeightSet};

pub const DEFAULT_GAP_TOL: f64 = 1e-8;
/// Largest `∏_{i<L} n_i` the Kronecker form will build.
pub const KRONECKER_CAP: usize = 4096;

/// `Σ′_L W_Lᵀ Σ′_{L-1} W_{L-1}ᵀ … Σ′_1 W_1ᵀ`, `n_L × n_0`. With a linear
/// last layer `Σ′_L = I`.
pub fn input_jacobian(trace: &ForwardTrace, ws: &WeightSet) -> Result<Matrix> {
    let l = ws.depth();
    let m = omega(trace, ws, l)?;
    m.scale_rows(trace.sprime(l))
}

/// `Ω_l = W_lᵀ Σ′_{l-1} W_{l-1}ᵀ … Σ′_1 W_1ᵀ`, the Jacobian of the layer-`l`
/// pre-activation with respect to the input. `1 ≤ l ≤ L`.
pub fn omega(trace: &ForwardTrace, ws: &WeightSet, l: usize) -> Result<Matrix> {
    let depth = ws.depth();
    if l == 0 || l > depth {
        return Err(Error::LayerIndex { index: l, max: depth });
    }
    if trace.depth() != depth {
        return Err(Error::shape("omega trace", depth, trace.depth()));
    }
    let mut m = ws.w(1).transpose();
    for layer in 2..=l {
        m = ws.w(layer).transpose().matmul(&m.scale_rows(trace.sprime(layer - 1))?)?;
    }
    Ok(m)
}

/// `Ω_l h` for every `l = 1…L`, by forward recursion.
fn omega_times(trace: &ForwardTrace, ws: &WeightSet, h: &[f64]) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(ws.depth());
    let mut z = ws.w(1).tr_mul_vec(h)?;
    out.push(z.clone());
    for layer in 2..=ws.depth() {
        let scaled: Vec<f64> = z.iter().zip(trace.sprime(layer - 1)).map(|(a, s)| a * s).collect();
        z = ws.w(layer).tr_mul_vec(&scaled)?;
        out.push(z.clone());
    }
    Ok(out)
}

/// `σ″_l(x, h) = Σ″_l(x) Ω_l(x) h` for `l = 1…L`.
pub fn sigma_second_along(trace: &ForwardTrace, ws: &WeightSet, h: &[f64]) -> Result<Vec<Vec<f64>>> {
    let oh = omega_times(trace, ws, h)?;
    Ok(oh
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.iter().zip(trace.ssecond(i + 1)).map(|(a, s)| a * s).collect())
        .collect())
}

/// Top singular triplet of `D₂F` with its gap to the second value.
#[derive(Debug, Clone)]
pub struct TopSingular {
    pub sigma_max: f64,
    pub sigma_second: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

pub fn top_singular(j: &Matrix, gap_tol: f64) -> Result<TopSingular> {
    let s = svd(j)?;
    let (s1, s2) = (s.sigma_max(), s.sigma_second());
    if !(s1 - s2 > gap_tol * s1) {
        return Err(Error::DegenerateGap {
            sigma1: s1,
            sigma2: s2,
            gap_tol,
        });
    }
    Ok(TopSingular {
        sigma_max: s1,
        sigma_second: s2,
        u: s.left(0),
        v: s.right(0),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralDerivativeReport {
    pub sigma_max: f64,
    /// `σ₁ − σ₂`.
    pub gap: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub directional_derivative: f64,
    /// One term per hidden layer `l = 1…L−1`.
    pub per_layer_terms: Vec<f64>,
    /// Contribution of a nonlinear output layer; 0 when it is linear.
    pub output_term: f64,
}

/// `D‖D₂F(W, x)‖₂ h` as the per-layer sum
/// `Σ_l uᵀ (W_Lᵀ…Σ′_{l+1}W_{l+1}ᵀ) diag(σ″_l(x, h)) Ω_l(x) v`.
pub fn spectral_norm_directional_derivative(
    trace: &ForwardTrace,
    ws: &WeightSet,
    h: &[f64],
    gap_tol: f64,
) -> Result<SpectralDerivativeReport> {
    let l = ws.depth();
    if h.len() != ws.w(1).rows() {
        return Err(Error::shape("direction h", ws.w(1).rows(), h.len()));
    }
    let j = input_jacobian(trace, ws)?;
    let top = top_singular(&j, gap_tol)?;

    let ddh = sigma_second_along(trace, ws, h)?;
    let ov = omega_times(trace, ws, &top.v)?;

    // a_l = (Σ′_L W_Lᵀ … Σ′_{l+1} W_{l+1}ᵀ)ᵀ u, built top-down.
    let mut terms = vec![0.0; l];
    let mut g: Vec<f64> = top.u.iter().zip(trace.sprime(l)).map(|(a, s)| a * s).collect();
    terms[l - 1] = layer_term(&top.u, &ddh[l - 1], &ov[l - 1]);
    for layer in (1..l).rev() {
        let a = ws.w(layer + 1).mul_vec(&g)?;
        terms[layer - 1] = layer_term(&a, &ddh[layer - 1], &ov[layer - 1]);
        g = a.iter().zip(trace.sprime(layer)).map(|(x, s)| x * s).collect();
    }
    let output_term = terms.pop().unwrap_or(0.0);
    let directional_derivative = terms.iter().sum::<f64>() + output_term;
    Ok(SpectralDerivativeReport {
        sigma_max: top.sigma_max,
        gap: top.sigma_max - top.sigma_second,
        u: top.u,
        v: top.v,
        directional_derivative,
        per_layer_terms: terms,
        output_term,
    })
}

fn layer_term(left: &[f64], dd: &[f64], right: &[f64]) -> f64 {
    left.iter().zip(dd).zip(right).map(|((a, b), c)| a * b * c).sum()
}

/// The derivative written as an inner product `ζᵀη`.
#[derive(Debug, Clone)]
pub struct ZetaEta {
    /// Depends on the weights and the singular pair only.
    pub zeta: Vec<f64>,
    /// `Σ_l σ̇_1 ⊗ … ⊗ σ″_l(x, h) ⊗ … ⊗ σ̇_{L−1}`.
    pub eta: Vec<f64>,
    pub inner: f64,
}

/// Kronecker factorisation of the spectral-norm derivative. Only for tiny
/// networks with a linear output layer; `ζ` and `η` have length `∏_{i<L} n_i`.
pub fn zeta_eta_form(trace: &ForwardTrace, ws: &WeightSet, h: &[f64]) -> Result<ZetaEta> {
    let l = ws.depth();
    if trace.sprime(l).iter().any(|&d| d != 1.0) || trace.ssecond(l).iter().any(|&d| d != 0.0) {
        return Err(Error::Unsupported(
            "zeta/eta form requires a linear output layer".into(),
        ));
    }
    let len = (1..l).try_fold(1usize, |acc, k| acc.checked_mul(ws.w(k).cols()));
    let len = match len {
        Some(n) if n <= KRONECKER_CAP => n,
        Some(n) => return Err(Error::KroneckerTooLarge { len: n, cap: KRONECKER_CAP }),
        None => return Err(Error::KroneckerTooLarge { len: usize::MAX, cap: KRONECKER_CAP }),
    };
    if h.len() != ws.w(1).rows() {
        return Err(Error::shape("direction h", ws.w(1).rows(), h.len()));
    }
    let j = input_jacobian(trace, ws)?;
    let top = top_singular(&j, DEFAULT_GAP_TOL)?;

    if l == 1 {
        let zeta = vec![crate::linalg::dot(&top.u, &j.mul_vec(&top.v)?)];
        return Ok(ZetaEta { zeta, eta: vec![0.0], inner: 0.0 });
    }

    // Δ_1 = ddiag(W_1ᵀ v); each later level multiplies by W_lᵀ and spreads
    // every column into a diagonal block, so Δ_l σ̇-products stay multilinear.
    let mut delta = Matrix::diag(&ws.w(1).tr_mul_vec(&top.v)?);
    for layer in 2..l {
        let m = ws.w(layer).transpose().matmul(&delta)?;
        let n = m.rows();
        let mut next = Matrix::zeros(n, m.cols() * n);
        for c in 0..m.cols() {
            for r in 0..n {
                next[(r, c * n + r)] = m[(r, c)];
            }
        }
        delta = next;
    }
    debug_assert_eq!(delta.cols(), len);
    let wu = ws.w(l).mul_vec(&top.u)?;
    let zeta = delta.tr_mul_vec(&wu)?;

    let ddh = sigma_second_along(trace, ws, h)?;
    let mut eta = vec![0.0; len];
    for k in 1..l {
        let mut term = vec![1.0];
        for i in 1..l {
            let factor = if i == k { &ddh[i - 1][..] } else { trace.sprime(i) };
            term = kron_vec(&term, factor);
        }
        eta.iter_mut().zip(&term).for_each(|(e, t)| *e += t);
    }
    let inner = crate::linalg::dot(&zeta, &eta);
    Ok(ZetaEta { zeta, eta, inner })
}

/// Unit vector in the direction of `h`.
pub fn normalized(h: &[f64]) -> Vec<f64> {
    let n = norm2(h);
    h.iter().map(|v| v / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{forward, init_weights, Activation, Architecture};

    #[test]
    fn linear_network_jacobian_and_zero_derivative() {
        let arch = Architecture::linear(vec![3, 4, 2]).unwrap();
        let ws = init_weights(&arch, 3, 1.0).unwrap();
        let t = forward(&arch, &ws, &[0.2, 0.1, -0.4]).unwrap();
        let j = input_jacobian(&t, &ws).unwrap();
        let want = ws.w(2).transpose().matmul(&ws.w(1).transpose()).unwrap();
        assert!(j.sub(&want).unwrap().max_abs() < 1e-14);
        let o2 = omega(&t, &ws, 2).unwrap();
        assert!(o2.sub(&want).unwrap().max_abs() < 1e-14);
        assert_eq!(omega(&t, &ws, 1).unwrap(), ws.w(1).transpose());
        assert!(omega(&t, &ws, 0).is_err() && omega(&t, &ws, 3).is_err());
        let r = spectral_norm_directional_derivative(&t, &ws, &normalized(&[1.0, 2.0, 3.0]), DEFAULT_GAP_TOL).unwrap();
        assert_eq!(r.directional_derivative, 0.0);
        let z = zeta_eta_form(&t, &ws, &normalized(&[1.0, 2.0, 3.0])).unwrap();
        assert!(z.eta.iter().all(|&e| e == 0.0));
        assert_eq!(z.inner, 0.0);
    }

    #[test]
    fn single_sigmoid_layer_jacobian() {
        let arch = Architecture::new(vec![2, 3], vec![Activation::sigmoid(2.0)]).unwrap();
        let ws = init_weights(&arch, 1, 1.0).unwrap();
        let t = forward(&arch, &ws, &[0.4, -0.3]).unwrap();
        let j = input_jacobian(&t, &ws).unwrap();
        assert!(t.sprime(1).iter().all(|&d| d > 0.0));
        let want = ws.w(1).transpose().scale_rows(t.sprime(1)).unwrap();
        assert_eq!(j, want);
    }

    #[test]
    fn sigmoid_at_zero_preactivation_has_zero_derivative() {
        let arch = Architecture::with_hidden(vec![2, 3, 3, 2], Activation::sigmoid(3.0)).unwrap();
        let ws = init_weights(&arch, 5, 1.0).unwrap();
        // Zero input and zero biases: layer-1 pre-activations vanish, and so does σ″_1.
        let t = forward(&arch, &ws, &[0.0, 0.0]).unwrap();
        assert!(t.ssecond(1).iter().all(|&v| v == 0.0));
        let r = spectral_norm_directional_derivative(&t, &ws, &[0.6, 0.8], DEFAULT_GAP_TOL).unwrap();
        assert!(r.per_layer_terms[0] == 0.0);
    }

    #[test]
    fn kronecker_form_one_hidden_layer_hand_expansion() {
        let arch = Architecture::with_hidden(vec![2, 2, 1], Activation::sigmoid(1.0)).unwrap();
        let ws = init_weights(&arch, 12, 1.0).unwrap();
        let x = [0.7, -0.2];
        let h = normalized(&[0.3, 1.0]);
        let t = forward(&arch, &ws, &x).unwrap();
        let z = zeta_eta_form(&t, &ws, &h).unwrap();
        // n_L = 1, so u = ±1 and v ∝ J; ζ_k = u·w2_k·(W_1ᵀ v)_k, η_k = σ̈_k (W_1ᵀ h)_k.
        let j = input_jacobian(&t, &ws).unwrap();
        let top = top_singular(&j, DEFAULT_GAP_TOL).unwrap();
        let w1v = ws.w(1).tr_mul_vec(&top.v).unwrap();
        let w1h = ws.w(1).tr_mul_vec(&h).unwrap();
        let mut inner = 0.0;
        for k in 0..2 {
            let zeta = top.u[0] * ws.w(2)[(k, 0)] * w1v[k];
            let eta = t.ssecond(1)[k] * w1h[k];
            assert!((z.zeta[k] - zeta).abs() < 1e-14);
            assert!((z.eta[k] - eta).abs() < 1e-14);
            inner += zeta * eta;
        }
        assert!((z.inner - inner).abs() < 1e-14);
        let r = spectral_norm_directional_derivative(&t, &ws, &h, DEFAULT_GAP_TOL).unwrap();
        assert!((r.directional_derivative - z.inner).abs() < 1e-12);
    }

    #[test]
    fn kronecker_cap_and_nonlinear_output() {
        let arch = Architecture::with_hidden(vec![1, 70, 70, 1], Activation::Tanh).unwrap();
        let ws = init_weights(&arch, 1, 1.0).unwrap();
        let t = forward(&arch, &ws, &[0.3]).unwrap();
        assert!(matches!(zeta_eta_form(&t, &ws, &[1.0]), Err(Error::KroneckerTooLarge { len: 4900, .. })));

        let arch = Architecture::new_unchecked_hidden(vec![2, 2], vec![Activation::Tanh]).unwrap();
        let ws = init_weights(&arch, 1, 1.0).unwrap();
        let t = forward(&arch, &ws, &[0.3, 0.1]).unwrap();
        assert!(matches!(zeta_eta_form(&t, &ws, &[1.0, 0.0]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn degenerate_gap_is_refused() {
        let arch = Architecture::linear(vec![2, 2]).unwrap();
        let mut ws = init_weights(&arch, 1, 1.0).unwrap();
        ws.weights[0] = Matrix::identity(2);
        let t = forward(&arch, &ws, &[0.3, 0.1]).unwrap();
        let err = spectral_norm_directional_derivative(&t, &ws, &[1.0, 0.0], DEFAULT_GAP_TOL).unwrap_err();
        assert!(matches!(err, Error::DegenerateGap { sigma1, sigma2, .. } if sigma1 == 1.0 && sigma2 == 1.0));
    }
}
