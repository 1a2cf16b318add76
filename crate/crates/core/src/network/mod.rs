//! Architectures, activations, weights and traced forward passes.
//!
//! Conventions: layer `l` (1-based) owns `W_l` of shape `n_{l-1} × n_l` and a
//! frozen bias `b_l ∈ ℝ^{n_l}`, and maps `φ_{l-1} ↦ σ_l(W_lᵀ φ_{l-1} + b_l)`.

mod activation;
mod checkpoint;

pub use activation::{Activation, ActivationValue};
pub use checkpoint::Checkpoint;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, Matrix, DEFAULT_TOL_FACTOR};

/// Widths `n₀…n_L` and one activation per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    widths: Vec<usize>,
    activations: Vec<Activation>,
}

impl Architecture {
    /// Rejects identity activations on hidden layers.
    pub fn new(widths: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        let arch = Self::new_unchecked_hidden(widths, activations)?;
        let l = arch.depth();
        if let Some(i) = arch.activations[..l - 1].iter().position(Activation::is_identity) {
            return Err(Error::Architecture(format!(
                "identity activation on hidden layer {} (only the last layer may be linear)",
                i + 1
            )));
        }
        Ok(arch)
    }

    /// Like [`Architecture::new`] but allows identity on hidden layers.
    pub fn new_unchecked_hidden(widths: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Architecture(format!(
                "need at least two widths (L >= 1), got {}",
                widths.len()
            )));
        }
        if let Some(i) = widths.iter().position(|&n| n == 0) {
            return Err(Error::Architecture(format!("width n_{i} is zero")));
        }
        if activations.len() != widths.len() - 1 {
            return Err(Error::Architecture(format!(
                "{} layers but {} activations",
                widths.len() - 1,
                activations.len()
            )));
        }
        for (i, a) in activations.iter().enumerate() {
            a.validate()
                .map_err(|e| Error::Architecture(format!("layer {}: {e}", i + 1)))?;
        }
        Ok(Self {
            widths,
            activations,
        })
    }

    /// Every hidden layer uses `hidden`; the last layer is linear.
    pub fn with_hidden(widths: Vec<usize>, hidden: Activation) -> Result<Self> {
        let l = widths.len().saturating_sub(1);
        let mut acts = vec![hidden; l];
        if let Some(last) = acts.last_mut() {
            *last = Activation::Identity;
        }
        Self::new(widths, acts)
    }

    /// All layers linear.
    pub fn linear(widths: Vec<usize>) -> Result<Self> {
        let l = widths.len().saturating_sub(1);
        Self::new_unchecked_hidden(widths, vec![Activation::Identity; l])
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    /// Number of layers `L`.
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        self.widths[self.depth()]
    }

    /// `n_l`, 0-based over `n₀…n_L`.
    pub fn width(&self, l: usize) -> usize {
        self.widths[l]
    }

    /// Activation of layer `l` (1-based).
    pub fn activation(&self, l: usize) -> Activation {
        self.activations[l - 1]
    }

    /// `N = Σ n_{l-1}·n_l`.
    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1]).sum()
    }

    /// Offset of layer `l`'s block in the flat parameter vector. Blocks run
    /// from layer `L` down to layer 1.
    pub fn block_offset(&self, l: usize) -> usize {
        (l + 1..=self.depth())
            .map(|m| self.widths[m - 1] * self.widths[m])
            .sum()
    }

    /// Flat index of `W_l[k, i]`; within a block the matrix is stacked
    /// column by column, matching `Ψ_l ⊗ φ_{l-1}`.
    pub fn param_index(&self, l: usize, k: usize, i: usize) -> usize {
        self.block_offset(l) + i * self.widths[l - 1] + k
    }
}

/// Weight matrices `W_1…W_L` and frozen biases.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl WeightSet {
    pub fn zeros(arch: &Architecture) -> Self {
        let weights = arch
            .widths
            .windows(2)
            .map(|w| Matrix::zeros(w[0], w[1]))
            .collect();
        let biases = arch.widths[1..].iter().map(|&n| vec![0.0; n]).collect();
        Self { weights, biases }
    }

    pub fn new(arch: &Architecture, weights: Vec<Matrix>, biases: Vec<Vec<f64>>) -> Result<Self> {
        let ws = Self { weights, biases };
        ws.check(arch)?;
        Ok(ws)
    }

    /// `W_l` (1-based).
    pub fn w(&self, l: usize) -> &Matrix {
        &self.weights[l - 1]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        &self.biases[l - 1]
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn check(&self, arch: &Architecture) -> Result<()> {
        let l = arch.depth();
        if self.weights.len() != l || self.biases.len() != l {
            return Err(Error::shape(
                "WeightSet layers",
                l,
                format!("{} weights, {} biases", self.weights.len(), self.biases.len()),
            ));
        }
        for layer in 1..=l {
            let want = (arch.width(layer - 1), arch.width(layer));
            if self.w(layer).shape() != want {
                return Err(Error::shape(
                    format!("W_{layer}"),
                    format!("{want:?}"),
                    format!("{:?}", self.w(layer).shape()),
                ));
            }
            if self.bias(layer).len() != want.1 {
                return Err(Error::shape(format!("b_{layer}"), want.1, self.bias(layer).len()));
            }
            if !self.w(layer).is_finite() || self.bias(layer).iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("layer {layer} parameters")));
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.rows() * w.cols()).sum()
    }

    /// Flattened weights in Jacobian row order (see [`Architecture::param_index`]).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for w in self.weights.iter().rev() {
            for i in 0..w.cols() {
                for k in 0..w.rows() {
                    out.push(w[(k, i)]);
                }
            }
        }
        out
    }

    /// Replaces the weights from a flat vector; biases are kept.
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::shape("WeightSet::set_flat", self.param_count(), flat.len()));
        }
        let mut it = flat.iter();
        for w in self.weights.iter_mut().rev() {
            for i in 0..w.cols() {
                for k in 0..w.rows() {
                    w[(k, i)] = *it.next().expect("length checked");
                }
            }
        }
        Ok(())
    }

    /// `self + scale·delta` with `delta` in flat order.
    pub fn add_flat(&self, delta: &[f64], scale: f64) -> Result<WeightSet> {
        let mut flat = self.to_flat();
        if delta.len() != flat.len() {
            return Err(Error::shape("WeightSet::add_flat", flat.len(), delta.len()));
        }
        flat.iter_mut().zip(delta).for_each(|(w, d)| *w += scale * d);
        let mut out = self.clone();
        out.set_flat(&flat)?;
        Ok(out)
    }

    /// Layer-wise difference `self − other`.
    pub fn diff(&self, other: &WeightSet) -> Result<Vec<Matrix>> {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| a.sub(b))
            .collect()
    }
}

/// Everything one forward pass records for the Jacobian calculus.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `φ₀ … φ_L`, with `φ₀ = x`.
    pub phis: Vec<Vec<f64>>,
    /// Pre-activations `W_lᵀ φ_{l-1} + b_l`, index `l-1`.
    pub pre: Vec<Vec<f64>>,
    /// `σ̇_l`, index `l-1`.
    pub sigma_prime: Vec<Vec<f64>>,
    /// `σ̈_l`, index `l-1`.
    pub sigma_second: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn depth(&self) -> usize {
        self.pre.len()
    }

    pub fn output(&self) -> &[f64] {
        self.phis.last().expect("trace has at least one layer")
    }

    /// `φ_l`, 0-based so that `phi(0)` is the input.
    pub fn phi(&self, l: usize) -> &[f64] {
        &self.phis[l]
    }

    /// `σ̇_l` (1-based).
    pub fn sprime(&self, l: usize) -> &[f64] {
        &self.sigma_prime[l - 1]
    }

    /// `σ̈_l` (1-based).
    pub fn ssecond(&self, l: usize) -> &[f64] {
        &self.sigma_second[l - 1]
    }
}

/// `σ(Wᵀx + b)` entrywise. `layer` only labels errors.
pub fn layer_map(w: &Matrix, b: &[f64], kind: Activation, x: &[f64], layer: usize) -> Result<Vec<f64>> {
    let pre = pre_activation(w, b, x, layer)?;
    Ok(pre.into_iter().map(|z| kind.eval(z).value).collect())
}

fn pre_activation(w: &Matrix, b: &[f64], x: &[f64], layer: usize) -> Result<Vec<f64>> {
    if x.len() != w.rows() {
        return Err(Error::shape(format!("layer {layer} input"), w.rows(), x.len()));
    }
    if b.len() != w.cols() {
        return Err(Error::shape(format!("layer {layer} bias"), w.cols(), b.len()));
    }
    let mut z = w.tr_mul_vec(x)?;
    z.iter_mut().zip(b).for_each(|(z, b)| *z += b);
    Ok(z)
}

pub fn forward(arch: &Architecture, ws: &WeightSet, x: &[f64]) -> Result<ForwardTrace> {
    let l = arch.depth();
    if ws.depth() != l {
        return Err(Error::shape("forward layers", l, ws.depth()));
    }
    if x.len() != arch.input_dim() {
        return Err(Error::shape("forward input", arch.input_dim(), x.len()));
    }
    let mut trace = ForwardTrace {
        phis: Vec::with_capacity(l + 1),
        pre: Vec::with_capacity(l),
        sigma_prime: Vec::with_capacity(l),
        sigma_second: Vec::with_capacity(l),
    };
    trace.phis.push(x.to_vec());
    for layer in 1..=l {
        let z = pre_activation(ws.w(layer), ws.bias(layer), trace.phis.last().unwrap(), layer)?;
        let act = arch.activation(layer);
        let n = z.len();
        let (mut phi, mut d1, mut d2) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for &zi in &z {
            let v = act.eval(zi);
            phi.push(v.value);
            d1.push(v.first);
            d2.push(v.second);
        }
        trace.pre.push(z);
        trace.phis.push(phi);
        trace.sigma_prime.push(d1);
        trace.sigma_second.push(d2);
    }
    if trace.phis.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("forward activations".into()));
    }
    Ok(trace)
}

/// `F(W, x)` without recording derivatives.
pub fn output(arch: &Architecture, ws: &WeightSet, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != arch.input_dim() {
        return Err(Error::shape("forward input", arch.input_dim(), x.len()));
    }
    let mut phi = x.to_vec();
    for layer in 1..=arch.depth() {
        phi = layer_map(ws.w(layer), ws.bias(layer), arch.activation(layer), &phi, layer)?;
    }
    Ok(phi)
}

/// Weight initialization options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitOptions {
    /// Entries are `N(0, 1)·scale/sqrt(n_{l-1})`.
    pub scale: f64,
    /// Frozen biases are `N(0, 1)·bias_scale`; zero gives all-zero biases.
    pub bias_scale: f64,
}

impl Default for InitOptions {
    fn default() -> Self {
        Self {
            scale: 1.0,
            bias_scale: 0.0,
        }
    }
}

const INIT_RETRIES: usize = 10;

pub fn init_weights(arch: &Architecture, seed: u64, scale: f64) -> Result<WeightSet> {
    init_weights_with(
        arch,
        seed,
        InitOptions {
            scale,
            ..InitOptions::default()
        },
    )
}

/// Gaussian init with every `W_l` checked for full rank (redrawn on failure).
pub fn init_weights_with(arch: &Architecture, seed: u64, opts: InitOptions) -> Result<WeightSet> {
    if !(opts.scale > 0.0 && opts.scale.is_finite()) {
        return Err(Error::InvalidArgument(format!("init scale must be positive, got {}", opts.scale)));
    }
    if !(opts.bias_scale >= 0.0 && opts.bias_scale.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "bias scale must be non-negative, got {}",
            opts.bias_scale
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(arch.depth());
    for layer in 1..=arch.depth() {
        let (rows, cols) = (arch.width(layer - 1), arch.width(layer));
        let std = opts.scale / (rows as f64).sqrt();
        let mut attempt = 0;
        let w = loop {
            let w = Matrix::from_fn(rows, cols, |_, _| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g * std
            });
            if numerical_rank(&w, DEFAULT_TOL_FACTOR)? == rows.min(cols) {
                break w;
            }
            attempt += 1;
            if attempt > INIT_RETRIES {
                return Err(Error::InitRank {
                    layer,
                    retries: INIT_RETRIES,
                });
            }
        };
        weights.push(w);
    }
    let biases = (1..=arch.depth())
        .map(|layer| {
            (0..arch.width(layer))
                .map(|_| {
                    if opts.bias_scale == 0.0 {
                        0.0
                    } else {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        g * opts.bias_scale
                    }
                })
                .collect()
        })
        .collect();
    Ok(WeightSet { weights, biases })
}
