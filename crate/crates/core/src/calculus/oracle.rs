//! Central finite-difference oracles and the randomized agreement suite.
//!
//! Each oracle only ever calls the plain forward map (or a spectral norm of
//! the input Jacobian), never the analytic derivative it is compared with.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{
    input_jacobian, loss_gradient, psi_chain, spectral_norm_directional_derivative, weight_jacobian,
    zeta_eta_form, DEFAULT_GAP_TOL, KRONECKER_CAP,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, Matrix};
use crate::network::{forward, init_weights_with, output, Activation, Architecture, InitOptions, WeightSet};
use crate::training::LossKind;

pub const DEFAULT_STEP: f64 = 1e-5;
/// Denominator floor in [`relative_error`].
pub const RELATIVE_FLOOR: f64 = 1e-3;

/// `|a − b| / max(|a|, |b|, RELATIVE_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

/// `∂F/∂w` by central differences over the flat parameter vector; `N × n_L`.
pub fn fd_weight_jacobian(arch: &Architecture, ws: &WeightSet, x: &[f64], step: f64) -> Result<Matrix> {
    let flat = ws.to_flat();
    let mut out = Matrix::zeros(flat.len(), arch.output_dim());
    let mut probe = ws.clone();
    for k in 0..flat.len() {
        let mut f = flat.clone();
        f[k] = flat[k] + step;
        probe.set_flat(&f)?;
        let plus = output(arch, &probe, x)?;
        f[k] = flat[k] - step;
        probe.set_flat(&f)?;
        let minus = output(arch, &probe, x)?;
        for j in 0..plus.len() {
            out[(k, j)] = (plus[j] - minus[j]) / (2.0 * step);
        }
    }
    Ok(out)
}

/// `∂F/∂x` by central differences; `n_L × n_0`.
pub fn fd_input_jacobian(arch: &Architecture, ws: &WeightSet, x: &[f64], step: f64) -> Result<Matrix> {
    let mut out = Matrix::zeros(arch.output_dim(), x.len());
    for k in 0..x.len() {
        let mut xp = x.to_vec();
        xp[k] += step;
        let mut xm = x.to_vec();
        xm[k] -= step;
        let (p, m) = (output(arch, ws, &xp)?, output(arch, ws, &xm)?);
        for j in 0..p.len() {
            out[(j, k)] = (p[j] - m[j]) / (2.0 * step);
        }
    }
    Ok(out)
}

/// `∇𝒥` by central differences of the total loss.
pub fn fd_loss_gradient(arch: &Architecture, ws: &WeightSet, data: &Dataset, loss: LossKind, step: f64) -> Result<Vec<f64>> {
    let total = |w: &WeightSet| -> Result<f64> {
        let mut s = 0.0;
        for (x, y) in data.inputs.iter().zip(&data.targets) {
            s += loss.eval(&output(arch, w, x)?, y)?.0;
        }
        Ok(s / data.len() as f64)
    };
    let flat = ws.to_flat();
    let mut probe = ws.clone();
    let mut g = Vec::with_capacity(flat.len());
    for k in 0..flat.len() {
        let mut f = flat.clone();
        f[k] = flat[k] + step;
        probe.set_flat(&f)?;
        let plus = total(&probe)?;
        f[k] = flat[k] - step;
        probe.set_flat(&f)?;
        let minus = total(&probe)?;
        g.push((plus - minus) / (2.0 * step));
    }
    Ok(g)
}

/// `(‖D₂F(x + t h)‖₂ − ‖D₂F(x − t h)‖₂) / 2t`.
pub fn fd_spectral_derivative(arch: &Architecture, ws: &WeightSet, x: &[f64], h: &[f64], step: f64) -> Result<f64> {
    let norm_at = |p: &[f64]| -> Result<f64> {
        let t = forward(arch, ws, p)?;
        spectral_norm(&input_jacobian(&t, ws)?)
    };
    let xp: Vec<f64> = x.iter().zip(h).map(|(a, b)| a + step * b).collect();
    let xm: Vec<f64> = x.iter().zip(h).map(|(a, b)| a - step * b).collect();
    Ok((norm_at(&xp)? - norm_at(&xm)?) / (2.0 * step))
}

/// A random tiny network with its samples and a unit direction.
#[derive(Debug, Clone)]
pub struct TinyInstance {
    pub arch: Architecture,
    pub weights: WeightSet,
    pub data: Dataset,
    pub direction: Vec<f64>,
    pub loss: LossKind,
}

/// Widths in `1..=max_width`, `1..=max_depth` layers, `1..=max_samples`
/// samples; hidden activations drawn from the smooth family, linear output.
pub fn random_instance(rng: &mut ChaCha8Rng, max_width: usize, max_depth: usize, max_samples: usize) -> Result<TinyInstance> {
    let depth = rng.random_range(1..=max_depth);
    let widths: Vec<usize> = (0..=depth).map(|_| rng.random_range(1..=max_width)).collect();
    let mut acts: Vec<Activation> = (0..depth)
        .map(|_| match rng.random_range(0..4) {
            0 => Activation::Tanh,
            1 => Activation::Softplus,
            _ => Activation::sigmoid(rng.random_range(0.5..4.0)),
        })
        .collect();
    *acts.last_mut().unwrap() = Activation::Identity;
    let arch = Architecture::new(widths.clone(), acts)?;
    let weights = init_weights_with(
        &arch,
        rng.random(),
        InitOptions {
            scale: rng.random_range(0.7..1.8),
            bias_scale: 0.3,
        },
    )?;
    let t = rng.random_range(1..=max_samples);
    let mut gauss = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|_| {
                let g: f64 = StandardNormal.sample(rng);
                g
            })
            .collect()
    };
    let inputs: Vec<Vec<f64>> = (0..t).map(|_| gauss(widths[0])).collect();
    let targets: Vec<Vec<f64>> = (0..t).map(|_| gauss(widths[depth])).collect();
    let mut direction = gauss(widths[0]);
    let n = crate::linalg::norm2(&direction).max(1e-12);
    direction.iter_mut().for_each(|v| *v /= n);
    let loss = match rng.random_range(0..3) {
        0 => LossKind::Squared,
        1 => LossKind::SmoothedL1 { beta: 0.1 },
        _ => LossKind::Cauchy { scale: 1.0 },
    };
    Ok(TinyInstance {
        arch,
        weights,
        data: Dataset::new(inputs, targets)?,
        direction,
        loss,
    })
}

/// Which analytic derivative to corrupt, for negative-control runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultInjection {
    WeightJacobian,
    LossGradient,
    InputJacobian,
    SpectralDerivative,
    ZetaEta,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSuiteConfig {
    pub seed: u64,
    pub instances: usize,
    pub max_width: usize,
    pub max_depth: usize,
    pub max_samples: usize,
    pub step: f64,
    pub derivative_tol: f64,
    pub spectral_abs_tol: f64,
    /// Spectral checks only run where `σ₁ − σ₂ > spectral_gap·σ₁`.
    pub spectral_gap: f64,
    pub form_abs_tol: f64,
    pub fault: Option<FaultInjection>,
}

impl Default for OracleSuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            instances: 100,
            max_width: 5,
            max_depth: 4,
            max_samples: 5,
            step: DEFAULT_STEP,
            derivative_tol: 1e-5,
            spectral_abs_tol: 1e-4,
            spectral_gap: 1e-3,
            form_abs_tol: 1e-8,
            fault: None,
        }
    }
}

impl OracleSuiteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.instances == 0 || self.max_width == 0 || self.max_depth == 0 || self.max_samples == 0 {
            return Err(Error::InvalidArgument(
                "oracle suite needs at least one instance, width, layer and sample".into(),
            ));
        }
        let positive = [
            self.step,
            self.derivative_tol,
            self.spectral_abs_tol,
            self.spectral_gap,
            self.form_abs_tol,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument("oracle step and tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleResult {
    pub name: String,
    /// Instances that were actually checked.
    pub checked: usize,
    /// Maximum error observed; relative for derivatives, absolute otherwise.
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub seed: u64,
    pub instances: usize,
    pub results: Vec<OracleResult>,
}

impl OracleReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn get(&self, name: &str) -> Option<&OracleResult> {
        self.results.iter().find(|r| r.name == name)
    }
}

struct Tally {
    name: &'static str,
    checked: usize,
    max_error: f64,
    tolerance: f64,
}

impl Tally {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self { name, checked: 0, max_error: 0.0, tolerance }
    }

    fn record(&mut self, err: f64) {
        self.checked += 1;
        // NaN must fail, so it wins over any finite max.
        if err.is_nan() || err > self.max_error {
            self.max_error = err;
        }
    }

    fn finish(self) -> OracleResult {
        OracleResult {
            name: self.name.to_string(),
            checked: self.checked,
            max_error: self.max_error,
            tolerance: self.tolerance,
            passed: self.checked > 0 && self.max_error < self.tolerance,
        }
    }
}

const CORRUPTION: f64 = 1e-3;

/// Runs every analytic-vs-oracle comparison on `cfg.instances` random tiny
/// networks.
pub fn run_oracle_suite(cfg: &OracleSuiteConfig) -> Result<OracleReport> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut d1f = Tally::new("weight_jacobian", cfg.derivative_tol);
    let mut grad = Tally::new("loss_gradient", cfg.derivative_tol);
    let mut d2f = Tally::new("input_jacobian", cfg.derivative_tol);
    let mut spec = Tally::new("spectral_derivative", cfg.spectral_abs_tol);
    let mut form = Tally::new("zeta_eta_form", cfg.form_abs_tol);
    let fault = |which: FaultInjection| if cfg.fault == Some(which) { CORRUPTION } else { 0.0 };

    for _ in 0..cfg.instances {
        let inst = random_instance(&mut rng, cfg.max_width, cfg.max_depth, cfg.max_samples)?;
        let (arch, ws) = (&inst.arch, &inst.weights);

        for x in &inst.data.inputs {
            let trace = forward(arch, ws, x)?;
            let chain = psi_chain(&trace, ws)?;
            let mut j = weight_jacobian(&trace, &chain)?;
            j.as_mut_slice()[0] += fault(FaultInjection::WeightJacobian);
            let fd = fd_weight_jacobian(arch, ws, x, cfg.step)?;
            d1f.record(max_relative_error(j.as_slice(), fd.as_slice()));

            let mut j2 = input_jacobian(&trace, ws)?;
            j2.as_mut_slice()[0] += fault(FaultInjection::InputJacobian);
            let fd2 = fd_input_jacobian(arch, ws, x, cfg.step)?;
            d2f.record(max_relative_error(j2.as_slice(), fd2.as_slice()));
        }

        let mut g = loss_gradient(arch, ws, &inst.data, inst.loss)?.gradient;
        g[0] += fault(FaultInjection::LossGradient);
        let fd = fd_loss_gradient(arch, ws, &inst.data, inst.loss, cfg.step)?;
        grad.record(max_relative_error(&g, &fd));

        let x = &inst.data.inputs[0];
        let trace = forward(arch, ws, x)?;
        let sv = crate::linalg::svd(&input_jacobian(&trace, ws)?)?;
        let (s1, s2) = (sv.sigma_max(), sv.sigma_second());
        if s1 - s2 > cfg.spectral_gap * s1 {
            let r = spectral_norm_directional_derivative(&trace, ws, &inst.direction, DEFAULT_GAP_TOL)?;
            let analytic = r.directional_derivative + fault(FaultInjection::SpectralDerivative);
            let fd = fd_spectral_derivative(arch, ws, x, &inst.direction, cfg.step)?;
            spec.record((analytic - fd).abs());

            let len: usize = arch.widths()[1..arch.depth()].iter().product();
            if len <= KRONECKER_CAP {
                let z = zeta_eta_form(&trace, ws, &inst.direction)?;
                form.record((z.inner + fault(FaultInjection::ZetaEta) - r.directional_derivative).abs());
            }
        }
    }

    Ok(OracleReport {
        seed: cfg.seed,
        instances: cfg.instances,
        results: vec![d1f.finish(), grad.finish(), d2f.finish(), spec.finish(), form.finish()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(2.0, 1.0), 0.5);
        assert!((relative_error(1e-6, 0.0) - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn small_suite_passes_and_fault_is_caught() {
        let cfg = OracleSuiteConfig {
            seed: 17,
            instances: 12,
            ..OracleSuiteConfig::default()
        };
        let report = run_oracle_suite(&cfg).unwrap();
        assert!(report.all_passed(), "{report:#?}");
        for which in [
            FaultInjection::WeightJacobian,
            FaultInjection::LossGradient,
            FaultInjection::InputJacobian,
        ] {
            let bad = run_oracle_suite(&OracleSuiteConfig { fault: Some(which), ..cfg.clone() }).unwrap();
            assert!(!bad.all_passed(), "{which:?} not detected");
        }
    }
}
