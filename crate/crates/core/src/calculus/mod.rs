//! Exact derivative objects of the network map: `Ψ_l`, `D₁F`, `P(W)`,
//! `ε(W)`, `∇𝒥`, `D₂F`, `Ω_l` and the spectral-norm derivative, plus
//! independent finite-difference oracles for each of them.

mod jacobian;
pub mod oracle;
mod spectral;

pub use jacobian::{
    assemble_p, gradient_from_parts, jacobian_bundle, loss_gradient, psi_chain, residual_stack, sample_jacobian,
    total_loss, weight_jacobian, weight_jacobian_times, JacobianBundle, LossGradient, PsiChain,
};
pub use spectral::{
    input_jacobian, normalized, omega, sigma_second_along, spectral_norm_directional_derivative, top_singular,
    zeta_eta_form, SpectralDerivativeReport, TopSingular, ZetaEta, DEFAULT_GAP_TOL, KRONECKER_CAP,
};
