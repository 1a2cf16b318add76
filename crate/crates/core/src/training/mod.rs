//! Losses, batch trainers and full-rank weight maintenance.

mod full_rank;
mod loss;

pub use full_rank::perturb_to_full_rank;
pub use loss::{loss_eval, LossKind};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::calculus::{assemble_p, jacobian_bundle, loss_gradient, total_loss};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{norm2, numerical_rank, rank_from_singular_values, singular_values, Cholesky, Matrix};
use crate::network::{Architecture, WeightSet};

/// Halvings tried before a step is abandoned.
pub const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_iters: usize,
    /// Gradient-descent step; the Gauss–Newton trainer starts every line search at 1.
    pub step_size: f64,
    pub gradient_tol: f64,
    /// Gauss–Newton damping `λ` in `(PPᵀ/T + λI)δ = −∇𝒥`.
    pub damping: f64,
    pub seed: u64,
    pub log_every: usize,
    /// Record `rank(P(W))` at every logged iterate.
    pub track_rank: bool,
    /// Halve gradient steps until the loss decreases.
    pub line_search: bool,
    pub rank_tol_factor: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            step_size: 0.1,
            gradient_tol: 1e-8,
            damping: 1e-3,
            seed: 0,
            log_every: 10,
            track_rank: false,
            line_search: false,
            rank_tol_factor: crate::linalg::DEFAULT_TOL_FACTOR,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gradient_tol > 0.0) {
            return Err(Error::InvalidArgument("gradient_tol must be positive".into()));
        }
        if !(self.damping >= 0.0 && self.damping.is_finite()) {
            return Err(Error::InvalidArgument("damping must be non-negative".into()));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidArgument("step_size must be positive".into()));
        }
        if self.log_every == 0 {
            return Err(Error::InvalidArgument("log_every must be at least 1".into()));
        }
        if !(self.rank_tol_factor > 0.0) {
            return Err(Error::InvalidArgument("rank_tol_factor must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainRecord {
    pub iter: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub rank_p: Option<usize>,
    pub min_sv: Vec<f64>,
    pub max_sv: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
    /// No loss decrease after `MAX_HALVINGS` halvings.
    LineSearchStalled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainLog {
    pub records: Vec<TrainRecord>,
    pub iterations: usize,
    pub stop_reason: StopReason,
}

impl TrainLog {
    pub fn last(&self) -> &TrainRecord {
        self.records.last().expect("a train log always has a record")
    }

    /// `iter,loss,grad_norm,rank_P,min_sv_1..min_sv_L,max_sv_1..max_sv_L`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let layers = self.records.first().map_or(0, |r| r.min_sv.len());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["iter".to_string(), "loss".into(), "grad_norm".into(), "rank_P".into()];
        header.extend((1..=layers).map(|l| format!("min_sv_{l}")));
        header.extend((1..=layers).map(|l| format!("max_sv_{l}")));
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![
                r.iter.to_string(),
                r.loss.to_string(),
                r.grad_norm.to_string(),
                r.rank_p.map(|v| v.to_string()).unwrap_or_default(),
            ];
            row.extend(r.min_sv.iter().map(f64::to_string));
            row.extend(r.max_sv.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

fn record(
    arch: &Architecture,
    ws: &WeightSet,
    data: &Dataset,
    cfg: &TrainConfig,
    iter: usize,
    loss: f64,
    grad_norm: f64,
    p: Option<&Matrix>,
) -> Result<TrainRecord> {
    let rank_p = if cfg.track_rank {
        Some(match p {
            Some(p) => numerical_rank(p, cfg.rank_tol_factor)?,
            None => numerical_rank(&assemble_p(arch, ws, &data.inputs)?, cfg.rank_tol_factor)?,
        })
    } else {
        None
    };
    let mut min_sv = Vec::with_capacity(ws.depth());
    let mut max_sv = Vec::with_capacity(ws.depth());
    for w in &ws.weights {
        let sv = singular_values(w)?;
        max_sv.push(sv[0]);
        min_sv.push(*sv.last().unwrap());
    }
    Ok(TrainRecord {
        iter,
        loss,
        grad_norm,
        rank_p,
        min_sv,
        max_sv,
    })
}

fn should_log(iter: usize, cfg: &TrainConfig) -> bool {
    iter % cfg.log_every == 0
}

fn at_iter(iter: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonFinite(_) => Error::NonFiniteLoss { iter },
        other => other,
    }
}

/// Candidate loss for a line search; a blown-up forward pass counts as no decrease.
fn candidate_loss(arch: &Architecture, ws: &WeightSet, data: &Dataset, loss: LossKind) -> Result<f64> {
    match total_loss(arch, ws, data, loss) {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) | Err(Error::NonFinite(_)) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

fn finite_or_fail(loss: f64, grad: &[f64], iter: usize) -> Result<()> {
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteLoss { iter });
    }
    Ok(())
}

/// Batch gradient descent `w ← w − step·∇𝒥`.
pub fn train_gd(
    arch: &Architecture,
    ws0: &WeightSet,
    data: &Dataset,
    loss: LossKind,
    cfg: &TrainConfig,
) -> Result<(WeightSet, TrainLog)> {
    cfg.validate()?;
    loss.validate()?;
    ws0.check(arch)?;
    data.check_dims(arch.input_dim(), arch.output_dim())?;
    let mut ws = ws0.clone();
    let mut records = Vec::new();
    let mut iter = 0;
    let stop_reason = loop {
        let lg = loss_gradient(arch, &ws, data, loss).map_err(at_iter(iter))?;
        finite_or_fail(lg.total_loss, &lg.gradient, iter)?;
        let gn = norm2(&lg.gradient);
        let converged = gn <= cfg.gradient_tol;
        let last = converged || iter == cfg.max_iters;
        if should_log(iter, cfg) || last {
            records.push(record(arch, &ws, data, cfg, iter, lg.total_loss, gn, None)?);
        }
        if converged {
            break StopReason::GradientTolerance;
        }
        if iter == cfg.max_iters {
            break StopReason::MaxIterations;
        }
        let mut step = cfg.step_size;
        let mut next = ws.add_flat(&lg.gradient, -step)?;
        if cfg.line_search {
            let mut halvings = 0;
            while !(candidate_loss(arch, &next, data, loss)? < lg.total_loss) {
                halvings += 1;
                if halvings > MAX_HALVINGS {
                    records.push(record(arch, &ws, data, cfg, iter, lg.total_loss, gn, None)?);
                    return finish(ws, records, iter, StopReason::LineSearchStalled);
                }
                step *= 0.5;
                next = ws.add_flat(&lg.gradient, -step)?;
            }
        }
        ws = next;
        iter += 1;
    };
    finish(ws, records, iter, stop_reason)
}

fn finish(ws: WeightSet, mut records: Vec<TrainRecord>, iterations: usize, stop_reason: StopReason) -> Result<(WeightSet, TrainLog)> {
    records.dedup_by(|b, a| a.iter == b.iter);
    Ok((
        ws,
        TrainLog {
            records,
            iterations,
            stop_reason,
        },
    ))
}

/// Solves `(PPᵀ/T + λI)δ = −g`.
pub fn gauss_newton_step(p: &Matrix, gradient: &[f64], samples: usize, damping: f64) -> Result<Vec<f64>> {
    let mut a = p.gram_rows();
    let inv_t = 1.0 / samples as f64;
    a.as_mut_slice().iter_mut().for_each(|v| *v *= inv_t);
    for i in 0..a.rows() {
        a[(i, i)] += damping;
    }
    let rhs: Vec<f64> = gradient.iter().map(|g| -g).collect();
    match Cholesky::new(&a) {
        Some(ch) => Ok(ch.solve(&rhs)),
        None => {
            let sv = singular_values(&a)?;
            let smin = *sv.last().unwrap();
            let condition = if smin > 0.0 { sv[0] / smin } else { f64::INFINITY };
            Err(Error::LinearSolve { damping, condition })
        }
    }
}

/// Damped Gauss–Newton on the assembled `P(W)` with step halving.
pub fn train_gauss_newton(
    arch: &Architecture,
    ws0: &WeightSet,
    data: &Dataset,
    loss: LossKind,
    cfg: &TrainConfig,
) -> Result<(WeightSet, TrainLog)> {
    cfg.validate()?;
    loss.validate()?;
    ws0.check(arch)?;
    data.check_dims(arch.input_dim(), arch.output_dim())?;
    let mut ws = ws0.clone();
    let mut records = Vec::new();
    let mut iter = 0;
    let stop_reason = loop {
        let b = jacobian_bundle(arch, &ws, data, loss).map_err(at_iter(iter))?;
        finite_or_fail(b.total_loss, &b.gradient, iter)?;
        let gn = norm2(&b.gradient);
        let converged = gn <= cfg.gradient_tol;
        let last = converged || iter == cfg.max_iters;
        if should_log(iter, cfg) || last {
            records.push(record(arch, &ws, data, cfg, iter, b.total_loss, gn, Some(&b.p_matrix))?);
        }
        if converged {
            break StopReason::GradientTolerance;
        }
        if iter == cfg.max_iters {
            break StopReason::MaxIterations;
        }
        let delta = gauss_newton_step(&b.p_matrix, &b.gradient, data.len(), cfg.damping)?;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand = ws.add_flat(&delta, t)?;
            if candidate_loss(arch, &cand, data, loss)? < b.total_loss {
                accepted = Some(cand);
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some(next) => ws = next,
            None => {
                if !should_log(iter, cfg) {
                    records.push(record(arch, &ws, data, cfg, iter, b.total_loss, gn, Some(&b.p_matrix))?);
                }
                break StopReason::LineSearchStalled;
            }
        }
        iter += 1;
    };
    finish(ws, records, iter, stop_reason)
}

/// Trainer selector used by configs and experiment runners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainerKind {
    GradientDescent,
    GaussNewton,
}

pub fn train(
    kind: TrainerKind,
    arch: &Architecture,
    ws0: &WeightSet,
    data: &Dataset,
    loss: LossKind,
    cfg: &TrainConfig,
) -> Result<(WeightSet, TrainLog)> {
    match kind {
        TrainerKind::GradientDescent => train_gd(arch, ws0, data, loss, cfg),
        TrainerKind::GaussNewton => train_gauss_newton(arch, ws0, data, loss, cfg),
    }
}

/// `rank(P)` from precomputed singular values, exposed for log consumers.
pub fn rank_of(sv: &[f64], rows: usize, cols: usize, tol_factor: f64) -> usize {
    rank_from_singular_values(sv, rows, cols, tol_factor)
}
