use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{kron_vec, kronecker, Matrix};
use crate::network::{forward, Architecture, ForwardTrace, WeightSet};
use crate::training::LossKind;

/// `Ψ_l = Σ′_l W_{l+1} Ψ_{l+1}` with `Ψ_L = Σ′_L`; each `Ψ_l` is `n_l × n_L`.
#[derive(Debug, Clone)]
pub struct PsiChain {
    /// Stored as `Ψ_1 … Ψ_L`.
    psis: Vec<Matrix>,
}

impl PsiChain {
    /// `Ψ_l` (1-based).
    pub fn psi(&self, l: usize) -> &Matrix {
        &self.psis[l - 1]
    }

    pub fn depth(&self) -> usize {
        self.psis.len()
    }

    /// `Ψ_L, …, Ψ_1`.
    pub fn top_down(&self) -> impl Iterator<Item = &Matrix> {
        self.psis.iter().rev()
    }
}

fn check_trace(trace: &ForwardTrace, ws: &WeightSet) -> Result<()> {
    let l = ws.depth();
    if trace.depth() != l || trace.phis.len() != l + 1 {
        return Err(Error::shape("trace vs weights", l, trace.depth()));
    }
    for layer in 1..=l {
        let (r, c) = ws.w(layer).shape();
        if trace.phi(layer - 1).len() != r || trace.sprime(layer).len() != c {
            return Err(Error::shape(
                format!("trace layer {layer}"),
                format!("({r}, {c})"),
                format!("({}, {})", trace.phi(layer - 1).len(), trace.sprime(layer).len()),
            ));
        }
    }
    Ok(())
}

pub fn psi_chain(trace: &ForwardTrace, ws: &WeightSet) -> Result<PsiChain> {
    check_trace(trace, ws)?;
    let l = ws.depth();
    let mut psis = vec![Matrix::diag(trace.sprime(l))];
    for layer in (1..l).rev() {
        let next = psis.last().unwrap();
        let m = ws.w(layer + 1).matmul(next)?.scale_rows(trace.sprime(layer))?;
        psis.push(m);
    }
    psis.reverse();
    Ok(PsiChain { psis })
}

/// `D₁F(W, x)`: blocks `Ψ_l ⊗ φ_{l-1}` stacked from `l = L` down to `l = 1`.
pub fn weight_jacobian(trace: &ForwardTrace, chain: &PsiChain) -> Result<Matrix> {
    let l = chain.depth();
    if trace.depth() != l {
        return Err(Error::shape("weight_jacobian", l, trace.depth()));
    }
    let n_out = chain.psi(l).cols();
    let n: usize = (1..=l).map(|k| chain.psi(k).rows() * trace.phi(k - 1).len()).sum();
    let mut out = Vec::with_capacity(n * n_out);
    for layer in (1..=l).rev() {
        let block = kronecker(chain.psi(layer), &Matrix::column_vector(trace.phi(layer - 1)));
        out.extend_from_slice(block.as_slice());
    }
    Matrix::from_vec(n, n_out, out)
}

/// `D₁F(W, x)·e` without materialising the Jacobian, via `(Ψ ⊗ φ)e = (Ψe) ⊗ φ`.
pub fn weight_jacobian_times(trace: &ForwardTrace, chain: &PsiChain, e: &[f64]) -> Result<Vec<f64>> {
    let l = chain.depth();
    let mut out = Vec::new();
    for layer in (1..=l).rev() {
        let pe = chain.psi(layer).mul_vec(e)?;
        out.extend(kron_vec(&pe, trace.phi(layer - 1)));
    }
    Ok(out)
}

pub fn sample_jacobian(arch: &Architecture, ws: &WeightSet, x: &[f64]) -> Result<Matrix> {
    let trace = forward(arch, ws, x)?;
    let chain = psi_chain(&trace, ws)?;
    weight_jacobian(&trace, &chain)
}

/// `P(W) = [D₁F(W, x₁), …, D₁F(W, x_T)]`, `N × T·n_L`.
pub fn assemble_p(arch: &Architecture, ws: &WeightSet, inputs: &[Vec<f64>]) -> Result<Matrix> {
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("assemble_p needs at least one sample".into()));
    }
    if let Some(i) = inputs.iter().position(|x| x.len() != arch.input_dim()) {
        return Err(Error::shape(format!("sample {i}"), arch.input_dim(), inputs[i].len()));
    }
    let blocks = inputs
        .par_iter()
        .map(|x| sample_jacobian(arch, ws, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(hstack(&blocks, arch.param_count(), arch.output_dim()))
}

fn hstack(blocks: &[Matrix], rows: usize, block_cols: usize) -> Matrix {
    let cols = blocks.len() * block_cols;
    let mut p = Matrix::zeros(rows, cols);
    for (i, b) in blocks.iter().enumerate() {
        for r in 0..rows {
            p.row_mut(r)[i * block_cols..(i + 1) * block_cols].copy_from_slice(b.row(r));
        }
    }
    p
}

/// `ε(W)`: the per-sample gradients `∇E(φ_L(x_i))` concatenated in sample order.
pub fn residual_stack(outputs: &[Vec<f64>], targets: &[Vec<f64>], loss: LossKind) -> Result<Vec<f64>> {
    if outputs.len() != targets.len() {
        return Err(Error::shape("residual_stack", outputs.len(), targets.len()));
    }
    let mut out = Vec::new();
    for (o, t) in outputs.iter().zip(targets) {
        out.extend(loss.eval(o, t)?.1);
    }
    Ok(out)
}

/// `(1/T)·P·ε`.
pub fn gradient_from_parts(p: &Matrix, residuals: &[f64], samples: usize) -> Result<Vec<f64>> {
    let mut g = p.mul_vec(residuals)?;
    let inv_t = 1.0 / samples as f64;
    g.iter_mut().for_each(|v| *v *= inv_t);
    Ok(g)
}

#[derive(Debug, Clone)]
pub struct LossGradient {
    pub gradient: Vec<f64>,
    pub total_loss: f64,
}

struct SampleTerm {
    loss: f64,
    grad: Vec<f64>,
}

/// Total loss `(1/T)Σ E(F(W, x_i), y_i)` and `∇𝒥 = (1/T)·P·ε`, summed
/// per sample in sample order.
pub fn loss_gradient(arch: &Architecture, ws: &WeightSet, data: &Dataset, loss: LossKind) -> Result<LossGradient> {
    data.check_dims(arch.input_dim(), arch.output_dim())?;
    let terms = data
        .inputs
        .par_iter()
        .zip(&data.targets)
        .map(|(x, y)| -> Result<SampleTerm> {
            let trace = forward(arch, ws, x)?;
            let (loss, eps) = loss.eval(trace.output(), y)?;
            let chain = psi_chain(&trace, ws)?;
            let grad = weight_jacobian_times(&trace, &chain, &eps)?;
            Ok(SampleTerm { loss, grad })
        })
        .collect::<Result<Vec<_>>>()?;
    let t = data.len() as f64;
    let mut gradient = vec![0.0; arch.param_count()];
    let mut total = 0.0;
    for term in &terms {
        total += term.loss;
        gradient.iter_mut().zip(&term.grad).for_each(|(g, v)| *g += v);
    }
    gradient.iter_mut().for_each(|g| *g /= t);
    Ok(LossGradient {
        gradient,
        total_loss: total / t,
    })
}

/// Total loss only.
pub fn total_loss(arch: &Architecture, ws: &WeightSet, data: &Dataset, loss: LossKind) -> Result<f64> {
    data.check_dims(arch.input_dim(), arch.output_dim())?;
    let values = data
        .inputs
        .par_iter()
        .zip(&data.targets)
        .map(|(x, y)| {
            let out = crate::network::output(arch, ws, x)?;
            Ok(loss.eval(&out, y)?.0)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(values.iter().sum::<f64>() / data.len() as f64)
}

/// Everything the critical-point condition `P(W)ε(W) = 0` is built from.
#[derive(Debug, Clone)]
pub struct JacobianBundle {
    pub per_sample_d1f: Vec<Matrix>,
    pub p_matrix: Matrix,
    pub residuals: Vec<f64>,
    pub outputs: Vec<Vec<f64>>,
    pub gradient: Vec<f64>,
    pub total_loss: f64,
}

pub fn jacobian_bundle(arch: &Architecture, ws: &WeightSet, data: &Dataset, loss: LossKind) -> Result<JacobianBundle> {
    data.check_dims(arch.input_dim(), arch.output_dim())?;
    let per_sample = data
        .inputs
        .par_iter()
        .map(|x| -> Result<(Matrix, Vec<f64>)> {
            let trace = forward(arch, ws, x)?;
            let chain = psi_chain(&trace, ws)?;
            Ok((weight_jacobian(&trace, &chain)?, trace.output().to_vec()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (per_sample_d1f, outputs): (Vec<Matrix>, Vec<Vec<f64>>) = per_sample.into_iter().unzip();
    let p_matrix = hstack(&per_sample_d1f, arch.param_count(), arch.output_dim());
    let residuals = residual_stack(&outputs, &data.targets, loss)?;
    let gradient = gradient_from_parts(&p_matrix, &residuals, data.len())?;
    let mut total = 0.0;
    for (o, y) in outputs.iter().zip(&data.targets) {
        total += loss.eval(o, y)?.0;
    }
    Ok(JacobianBundle {
        per_sample_d1f,
        p_matrix,
        residuals,
        outputs,
        gradient,
        total_loss: total / data.len() as f64,
    })
}
