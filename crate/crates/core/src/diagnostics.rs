//! Runnable certificates: the rank condition on `P(W)`, per-layer
//! submersion/immersion classification, the width advisory and empirical
//! Lipschitz constants.

use serde::Serialize;

use crate::calculus::{input_jacobian, jacobian_bundle, psi_chain, weight_jacobian};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{norm2, numerical_rank, rank_from_singular_values, singular_values, spectral_norm};
use crate::network::{forward, Architecture, WeightSet};
use crate::training::LossKind;

pub const DEFAULT_EXACTNESS_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Full rank and (numerically) zero residuals: an exact fit at a global minimum.
    CertifiedExactRegime,
    /// Full rank, residuals away from zero, gradient below the margin-scaled
    /// tolerance: the iterate sits on a non-coercive slope, not a critical point.
    NoCriticalPointRegime,
    Uncertified,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateOptions {
    pub tol_factor: f64,
    pub exactness_tol: f64,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        Self {
            tol_factor: crate::linalg::DEFAULT_TOL_FACTOR,
            exactness_tol: DEFAULT_EXACTNESS_TOL,
        }
    }
}

/// Rank certificate for the weights actually visited. It says nothing about
/// other points of weight space.
#[derive(Debug, Clone, Serialize)]
pub struct RankCertificate {
    pub rank_p: usize,
    /// `T·n_L`.
    pub required: usize,
    /// `σ_{T·n_L}(P)`, 0 when rank deficient.
    pub margin: f64,
    /// `‖ε(W)‖₂`.
    pub residual_norm: f64,
    /// `max_i ‖F(W, x_i) − y_i‖₂`.
    pub max_output_residual: f64,
    pub gradient_norm: f64,
    pub verdict: Verdict,
    pub scope: &'static str,
}

pub fn certify_theorem1(
    arch: &Architecture,
    ws: &WeightSet,
    data: &Dataset,
    loss: LossKind,
    opts: CertificateOptions,
) -> Result<RankCertificate> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("certificate needs a non-empty dataset".into()));
    }
    let b = jacobian_bundle(arch, ws, data, loss)?;
    let (rows, cols) = b.p_matrix.shape();
    let required = data.len() * arch.output_dim();
    let sv = singular_values(&b.p_matrix)?;
    let rank_p = rank_from_singular_values(&sv, rows, cols, opts.tol_factor);
    let margin = if rank_p == required { sv[required - 1] } else { 0.0 };
    let residual_norm = norm2(&b.residuals);
    let max_output_residual = b
        .outputs
        .iter()
        .zip(&data.targets)
        .map(|(o, y)| o.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let gradient_norm = norm2(&b.gradient);
    let tol = opts.exactness_tol;
    let verdict = if rank_p != required {
        Verdict::Uncertified
    } else if residual_norm <= tol && max_output_residual <= tol {
        Verdict::CertifiedExactRegime
    } else if residual_norm > tol && gradient_norm < tol * margin {
        Verdict::NoCriticalPointRegime
    } else {
        Verdict::Uncertified
    };
    Ok(RankCertificate {
        rank_p,
        required,
        margin,
        residual_norm,
        max_output_residual,
        gradient_norm,
        verdict,
        scope: "trajectory-local: checked at the supplied weights only",
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Submersion,
    Immersion,
    DiffeomorphismCandidate,
    RankDeficient,
}

#[derive(Debug, Clone, Serialize)]
pub struct LayerClass {
    pub layer: usize,
    pub fan_in: usize,
    pub fan_out: usize,
    pub jacobian_rank: usize,
    pub classification: LayerKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainKind {
    /// Non-increasing widths, all layers full rank.
    SubmersionChain,
    /// Non-decreasing widths, all layers full rank.
    ImmersionChain,
    /// Constant widths, all layers full rank.
    DiffeomorphismChain,
    Mixed,
    RankDeficient,
}

#[derive(Debug, Clone, Serialize)]
pub struct LayerReport {
    pub layers: Vec<LayerClass>,
    pub chain: ChainKind,
}

/// Classifies each layer by the rank of its differential `Σ′_l(x) W_lᵀ` at `x`.
pub fn classify_layers(arch: &Architecture, ws: &WeightSet, x: &[f64]) -> Result<LayerReport> {
    let trace = forward(arch, ws, x)?;
    let mut layers = Vec::with_capacity(arch.depth());
    for l in 1..=arch.depth() {
        let d = ws.w(l).transpose().scale_rows(trace.sprime(l))?;
        let (fan_in, fan_out) = (arch.width(l - 1), arch.width(l));
        let jacobian_rank = numerical_rank(&d, crate::linalg::DEFAULT_TOL_FACTOR)?;
        let classification = if fan_in == fan_out && jacobian_rank == fan_in {
            LayerKind::DiffeomorphismCandidate
        } else if fan_in > fan_out && jacobian_rank == fan_out {
            LayerKind::Submersion
        } else if fan_in < fan_out && jacobian_rank == fan_in {
            LayerKind::Immersion
        } else {
            LayerKind::RankDeficient
        };
        layers.push(LayerClass {
            layer: l,
            fan_in,
            fan_out,
            jacobian_rank,
            classification,
        });
    }
    let widths = arch.widths();
    let chain = if layers.iter().any(|c| c.classification == LayerKind::RankDeficient) {
        ChainKind::RankDeficient
    } else if widths.windows(2).all(|w| w[0] == w[1]) {
        ChainKind::DiffeomorphismChain
    } else if widths.windows(2).all(|w| w[0] >= w[1]) {
        ChainKind::SubmersionChain
    } else if widths.windows(2).all(|w| w[0] <= w[1]) {
        ChainKind::ImmersionChain
    } else {
        ChainKind::Mixed
    };
    Ok(LayerReport { layers, chain })
}

#[derive(Debug, Clone, Serialize)]
pub struct FlaggedLayer {
    pub layer: usize,
    pub width: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct WidthAdvisory {
    pub data_dim: usize,
    /// Hidden widths must exceed this.
    pub threshold: usize,
    pub flagged: Vec<FlaggedLayer>,
    pub pass: bool,
}

/// Flags every hidden layer whose width is at most twice the data dimension.
pub fn width_advisory(arch: &Architecture, data_dim: usize) -> Result<WidthAdvisory> {
    if data_dim == 0 {
        return Err(Error::InvalidArgument("data_dim must be at least 1".into()));
    }
    let threshold = 2 * data_dim;
    let flagged: Vec<FlaggedLayer> = (1..arch.depth())
        .filter(|&l| arch.width(l) <= threshold)
        .map(|l| FlaggedLayer {
            layer: l,
            width: arch.width(l),
        })
        .collect();
    Ok(WidthAdvisory {
        data_dim,
        threshold,
        pass: flagged.is_empty(),
        flagged,
    })
}

/// Largest `‖D₁F‖₂` and `‖D₂F‖₂` over the probes. These are lower bounds of
/// the true Lipschitz constants.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LipschitzEstimates {
    pub weight_lip: f64,
    pub input_lip: f64,
    pub probes: usize,
}

pub fn lipschitz_estimates(arch: &Architecture, ws: &WeightSet, probes: &[Vec<f64>]) -> Result<LipschitzEstimates> {
    if probes.is_empty() {
        return Err(Error::InvalidArgument("lipschitz_estimates needs at least one probe".into()));
    }
    let mut weight_lip: f64 = 0.0;
    let mut input_lip: f64 = 0.0;
    for x in probes {
        let trace = forward(arch, ws, x)?;
        let chain = psi_chain(&trace, ws)?;
        weight_lip = weight_lip.max(spectral_norm(&weight_jacobian(&trace, &chain)?)?);
        input_lip = input_lip.max(spectral_norm(&input_jacobian(&trace, ws)?)?);
    }
    Ok(LipschitzEstimates {
        weight_lip,
        input_lip,
        probes: probes.len(),
    })
}

/// Combined JSON report written by `diagnose`.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    pub verdict: Verdict,
    pub rank_p: usize,
    pub required: usize,
    pub margin: f64,
    pub residual_norm: f64,
    pub max_output_residual: f64,
    pub gradient_norm: f64,
    pub scope: &'static str,
    pub per_layer: Vec<LayerClass>,
    pub chain: ChainKind,
    pub width: WidthAdvisory,
    pub lipschitz: LipschitzEstimates,
}

impl DiagnosticsReport {
    pub fn new(cert: RankCertificate, layers: LayerReport, width: WidthAdvisory, lipschitz: LipschitzEstimates) -> Self {
        Self {
            verdict: cert.verdict,
            rank_p: cert.rank_p,
            required: cert.required,
            margin: cert.margin,
            residual_norm: cert.residual_norm,
            max_output_residual: cert.max_output_residual,
            gradient_norm: cert.gradient_norm,
            scope: cert.scope,
            per_layer: layers.layers,
            chain: layers.chain,
            width,
            lipschitz,
        }
    }
}
