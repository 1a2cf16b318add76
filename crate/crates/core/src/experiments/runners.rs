use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::datasets::{figure_eight_point, gen_figure_eight, gen_four_region, gen_swiss_roll, LabelTable};
use super::svg::{BoxGroup, Plot, Series};
use super::{fmt_f64, trace_diagonal, DiagonalTrace, ExperimentName, ExperimentReport};
use crate::diagnostics::{width_advisory, WidthAdvisory};
use crate::error::{Error, Result};
use crate::network::{init_weights_with, output, Activation, Architecture, InitOptions, WeightSet};
use crate::training::{train, LossKind, StopReason, TrainConfig, TrainLog, TrainerKind};

/// Trainer, loss, iteration budget and initialization shared by the runners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSetup {
    pub trainer: TrainerKind,
    pub loss: LossKind,
    pub train: TrainConfig,
    pub init_scale: f64,
    /// Standard deviation of the frozen random biases; 0 keeps them at zero.
    pub bias_scale: f64,
}

impl Default for TrainingSetup {
    fn default() -> Self {
        Self {
            trainer: TrainerKind::GaussNewton,
            loss: LossKind::smoothed_l1(),
            train: TrainConfig {
                log_every: 50,
                ..TrainConfig::default()
            },
            init_scale: 1.0,
            bias_scale: 0.0,
        }
    }
}

impl TrainingSetup {
    fn with_iters(max_iters: usize) -> Self {
        let mut s = Self::default();
        s.train.max_iters = max_iters;
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.loss.validate()?;
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::Config("init_scale must be positive".into()));
        }
        if !(self.bias_scale >= 0.0 && self.bias_scale.is_finite()) {
            return Err(Error::Config("bias_scale must be non-negative".into()));
        }
        Ok(())
    }

    fn fit(
        &self,
        arch: &Architecture,
        init_seed: u64,
        data: &crate::data::Dataset,
    ) -> Result<(WeightSet, WeightSet, TrainLog)> {
        let ws0 = init_weights_with(
            arch,
            init_seed,
            InitOptions {
                scale: self.init_scale,
                bias_scale: self.bias_scale,
            },
        )?;
        let (ws, log) = train(self.trainer, arch, &ws0, data, self.loss, &self.train)?;
        Ok((ws0, ws, log))
    }
}

/// Independent per-purpose seed streams derived from one experiment seed.
fn derive_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stream)
}

fn run_cells<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync + Send) -> Result<Vec<R>> {
    if jobs <= 1 {
        return Ok(items.iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(f).collect()))
}

fn check_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    Ok(())
}

fn stop_name(s: StopReason) -> &'static str {
    match s {
        StopReason::GradientTolerance => "gradient_tolerance",
        StopReason::MaxIterations => "max_iterations",
        StopReason::LineSearchStalled => "line_search_stalled",
    }
}

fn sequence_string(seq: &[u8]) -> String {
    seq.iter().map(u8::to_string).collect::<Vec<_>>().join("-")
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len())
        .max_by(|&a, &b| v[a].total_cmp(&v[b]).then(b.cmp(&a)))
        .expect("non-empty output")
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FourRegionConfig {
    pub n_samples: usize,
    pub seeds: Vec<u64>,
    pub table: LabelTable,
    pub widths: Vec<usize>,
    pub hidden: Activation,
    pub setup: TrainingSetup,
    /// Diagonal samples; the refinement check also uses a half and a quarter of it.
    pub resolution: usize,
}

impl Default for FourRegionConfig {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            seeds: vec![0],
            table: LabelTable::default(),
            widths: vec![2, 10, 10, 10, 4],
            hidden: Activation::sigmoid(1.0),
            setup: TrainingSetup::with_iters(300),
            resolution: 512,
        }
    }
}

impl FourRegionConfig {
    pub fn validate(&self) -> Result<()> {
        check_seeds(&self.seeds)?;
        self.table.validate()?;
        self.setup.validate()?;
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be at least 1".into()));
        }
        if self.resolution < 8 {
            return Err(Error::Config("resolution must be at least 8".into()));
        }
        if self.widths.first() != Some(&2) || self.widths.last() != Some(&4) {
            return Err(Error::Config(format!(
                "four-region widths must start at 2 and end at 4, got {:?}",
                self.widths
            )));
        }
        self.architecture().map(|_| ())
    }

    fn architecture(&self) -> Result<Architecture> {
        Architecture::with_hidden(self.widths.clone(), self.hidden)
    }
}

#[derive(Debug, Clone)]
pub struct FourRegionMetrics {
    pub accuracy: f64,
    pub final_loss: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub before: DiagonalTrace,
    pub after: DiagonalTrace,
    /// `max_jump` of the trained curves at a quarter, a half and the full resolution.
    pub refinement_jumps: [f64; 3],
    pub refinement_jumps_before: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct FourRegionCell {
    pub seed: u64,
    pub outcome: std::result::Result<FourRegionMetrics, String>,
}

#[derive(Debug, Clone)]
pub struct FourRegionOutcome {
    pub expected_sequence: Vec<u8>,
    pub cells: Vec<FourRegionCell>,
    pub report: ExperimentReport,
}

fn refinement(arch: &Architecture, ws: &WeightSet, resolution: usize) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for (o, r) in out.iter_mut().zip([resolution / 4, resolution / 2, resolution]) {
        *o = trace_diagonal(arch, ws, r)?.max_jump();
    }
    Ok(out)
}

fn four_region_cell(cfg: &FourRegionConfig, seed: u64) -> Result<FourRegionMetrics> {
    let arch = cfg.architecture()?;
    let labeled = gen_four_region(cfg.n_samples, derive_seed(seed, 1), &cfg.table)?;
    let data = labeled.to_dataset()?;
    let (ws0, ws, log) = cfg.setup.fit(&arch, derive_seed(seed, 2), &data)?;
    let mut correct = 0usize;
    for (x, y) in data.inputs.iter().zip(&data.targets) {
        if y[argmax(&output(&arch, &ws, x)?)] == 1.0 {
            correct += 1;
        }
    }
    let last = log.last();
    Ok(FourRegionMetrics {
        accuracy: correct as f64 / data.len() as f64,
        final_loss: last.loss,
        iterations: log.iterations,
        stop_reason: log.stop_reason,
        before: trace_diagonal(&arch, &ws0, cfg.resolution)?,
        after: trace_diagonal(&arch, &ws, cfg.resolution)?,
        refinement_jumps: refinement(&arch, &ws, cfg.resolution)?,
        refinement_jumps_before: refinement(&arch, &ws0, cfg.resolution)?,
    })
}

fn diagonal_plot(name: &str, title: &str, trace: &DiagonalTrace) -> Plot {
    Plot::Lines {
        name: name.into(),
        title: title.into(),
        x_label: "s, point (s, s)".into(),
        y_label: "network output".into(),
        series: trace
            .curves
            .iter()
            .enumerate()
            .map(|(k, c)| Series {
                label: format!("output {}", k + 1),
                x: trace.positions.clone(),
                y: c.clone(),
                dashed: false,
            })
            .collect(),
        equal_aspect: false,
    }
}

/// Trains the four-class network per seed and tracks its outputs along the diagonal.
pub fn run_four_region(cfg: &FourRegionConfig, jobs: usize) -> Result<FourRegionOutcome> {
    cfg.validate()?;
    let expected_sequence = cfg.table.diagonal_sequence();
    let cells = run_cells(&cfg.seeds, jobs, |&seed| {
        let outcome = four_region_cell(cfg, seed).map_err(|e| e.to_string());
        match &outcome {
            Ok(m) => log::info!("four-region seed {seed}: accuracy {:.4}", m.accuracy),
            Err(e) => log::warn!("four-region seed {seed} failed: {e}"),
        }
        FourRegionCell { seed, outcome }
    })?;

    let columns = [
        "seed",
        "status",
        "accuracy",
        "final_loss",
        "iterations",
        "stop_reason",
        "sequence_before",
        "sequence_after",
        "expected_sequence",
        "sequence_match",
        "max_jump_quarter",
        "max_jump_half",
        "max_jump_full",
    ];
    let expected = sequence_string(&expected_sequence);
    let mut rows = Vec::new();
    let mut plots = Vec::new();
    for c in &cells {
        match &c.outcome {
            Ok(m) => {
                let after = m.after.argmax_sequence();
                rows.push(vec![
                    c.seed.to_string(),
                    "ok".into(),
                    fmt_f64(m.accuracy),
                    fmt_f64(m.final_loss),
                    m.iterations.to_string(),
                    stop_name(m.stop_reason).into(),
                    sequence_string(&m.before.argmax_sequence()),
                    sequence_string(&after),
                    expected.clone(),
                    (after == expected_sequence).to_string(),
                    fmt_f64(m.refinement_jumps[0]),
                    fmt_f64(m.refinement_jumps[1]),
                    fmt_f64(m.refinement_jumps[2]),
                ]);
                if plots.is_empty() {
                    plots.push(diagonal_plot(
                        "diagonal_before",
                        &format!("Outputs along the diagonal at initialization (seed {})", c.seed),
                        &m.before,
                    ));
                    plots.push(diagonal_plot(
                        "diagonal_after",
                        &format!("Outputs along the diagonal after training (seed {})", c.seed),
                        &m.after,
                    ));
                }
            }
            Err(e) => {
                let mut row = vec![c.seed.to_string(), format!("failed: {e}")];
                row.resize(columns.len(), String::new());
                row[8] = expected.clone();
                rows.push(row);
            }
        }
    }
    let report = ExperimentReport {
        experiment: ExperimentName::FourRegion,
        seeds: cfg.seeds.clone(),
        columns: columns.iter().map(|s| s.to_string()).collect(),
        rows,
        plots,
        config: serde_json::to_value(cfg)?,
    };
    Ok(FourRegionOutcome {
        expected_sequence,
        cells,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FigureEightConfig {
    pub n_points: usize,
    pub noise_halfwidth: f64,
    pub slopes: Vec<f64>,
    pub seeds: Vec<u64>,
    pub widths: Vec<usize>,
    /// Clean circle points used for the generalization error.
    pub probe_points: usize,
    pub setup: TrainingSetup,
}

impl Default for FigureEightConfig {
    fn default() -> Self {
        Self {
            n_points: 51,
            noise_halfwidth: 0.05,
            slopes: vec![1.0, 5.0, 10.0],
            seeds: (0..5).collect(),
            widths: vec![2, 10, 10, 2],
            probe_points: 512,
            setup: TrainingSetup::with_iters(1000),
        }
    }
}

impl FigureEightConfig {
    pub fn validate(&self) -> Result<()> {
        check_seeds(&self.seeds)?;
        self.setup.validate()?;
        if self.slopes.is_empty() {
            return Err(Error::Config("at least one slope is required".into()));
        }
        if let Some(a) = self.slopes.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(Error::Config(format!("slopes must be positive, got {a}")));
        }
        if self.n_points < 2 || self.probe_points == 0 {
            return Err(Error::Config("n_points must be ≥ 2 and probe_points ≥ 1".into()));
        }
        if self.widths.first() != Some(&2) || self.widths.last() != Some(&2) {
            return Err(Error::Config(format!(
                "figure-eight widths must start and end at 2, got {:?}",
                self.widths
            )));
        }
        for &a in &self.slopes {
            self.architecture(a)?;
        }
        Ok(())
    }

    fn architecture(&self, slope: f64) -> Result<Architecture> {
        Architecture::with_hidden(self.widths.clone(), Activation::sigmoid(slope))
    }
}

/// Mean distance between `map(cos t, sin t)` and the figure-eight point at
/// `t`, over `probe_points` equally spaced clean angles.
pub fn figure_eight_error(map: impl Fn(&[f64]) -> Result<Vec<f64>>, probe_points: usize) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..probe_points {
        let t = 2.0 * std::f64::consts::PI * i as f64 / probe_points as f64;
        let y = map(&[t.cos(), t.sin()])?;
        total += dist2(&y, &figure_eight_point(t));
    }
    Ok(total / probe_points as f64)
}

#[derive(Debug, Clone)]
pub struct FigureEightMetrics {
    pub gen_error: f64,
    pub final_loss: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
    /// Network image of the clean probe circle.
    pub curve: Vec<[f64; 2]>,
}

#[derive(Debug, Clone)]
pub struct FigureEightCell {
    pub seed: u64,
    pub slope: f64,
    pub outcome: std::result::Result<FigureEightMetrics, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeSummary {
    pub slope: f64,
    pub mean: f64,
    pub variance: f64,
    pub cells: usize,
}

#[derive(Debug, Clone)]
pub struct FigureEightOutcome {
    pub cells: Vec<FigureEightCell>,
    pub summaries: Vec<SlopeSummary>,
    pub report: ExperimentReport,
}

impl FigureEightOutcome {
    /// Seeds whose error is strictly increasing along the configured slope
    /// order, and the number of seeds.
    pub fn increasing_seeds(&self, seeds: &[u64]) -> (usize, usize) {
        let hits = seeds
            .iter()
            .filter(|&&s| {
                let errs: Option<Vec<f64>> = self
                    .cells
                    .iter()
                    .filter(|c| c.seed == s)
                    .map(|c| c.outcome.as_ref().ok().map(|m| m.gen_error))
                    .collect();
                errs.is_some_and(|e| e.windows(2).all(|w| w[0] < w[1]))
            })
            .count();
        (hits, seeds.len())
    }
}

fn figure_eight_cell(cfg: &FigureEightConfig, seed: u64, slope: f64) -> Result<FigureEightMetrics> {
    let arch = cfg.architecture(slope)?;
    let data = gen_figure_eight(cfg.n_points, cfg.noise_halfwidth, derive_seed(seed, 1))?.to_dataset()?;
    let (_, ws, log) = cfg.setup.fit(&arch, derive_seed(seed, 2), &data)?;
    let gen_error = figure_eight_error(|x| output(&arch, &ws, x), cfg.probe_points)?;
    let mut curve = Vec::with_capacity(cfg.probe_points + 1);
    for i in 0..=cfg.probe_points {
        let t = 2.0 * std::f64::consts::PI * i as f64 / cfg.probe_points as f64;
        let y = output(&arch, &ws, &[t.cos(), t.sin()])?;
        curve.push([y[0], y[1]]);
    }
    Ok(FigureEightMetrics {
        gen_error,
        final_loss: log.last().loss,
        iterations: log.iterations,
        stop_reason: log.stop_reason,
        curve,
    })
}

/// Trains `F(2,10,10,2)` with sigmoid slope `a` for every (seed, slope) cell.
/// Within a seed all slopes share the dataset and the initial weights.
pub fn run_slope_sweep(cfg: &FigureEightConfig, jobs: usize) -> Result<FigureEightOutcome> {
    cfg.validate()?;
    let grid: Vec<(u64, f64)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| cfg.slopes.iter().map(move |&a| (s, a)))
        .collect();
    let cells = run_cells(&grid, jobs, |&(seed, slope)| {
        let outcome = figure_eight_cell(cfg, seed, slope).map_err(|e| e.to_string());
        match &outcome {
            Ok(m) => log::info!("figure-eight seed {seed} slope {slope}: error {:.5}", m.gen_error),
            Err(e) => log::warn!("figure-eight seed {seed} slope {slope} failed: {e}"),
        }
        FigureEightCell { seed, slope, outcome }
    })?;

    let summaries: Vec<SlopeSummary> = cfg
        .slopes
        .iter()
        .map(|&a| {
            let errs: Vec<f64> = cells
                .iter()
                .filter(|c| c.slope == a)
                .filter_map(|c| c.outcome.as_ref().ok().map(|m| m.gen_error))
                .collect();
            let n = errs.len();
            let mean = if n > 0 { errs.iter().sum::<f64>() / n as f64 } else { f64::NAN };
            let variance = if n > 1 {
                errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            SlopeSummary {
                slope: a,
                mean,
                variance,
                cells: n,
            }
        })
        .collect();

    let columns = ["seed", "slope", "status", "gen_error", "final_loss", "iterations", "stop_reason"];
    let rows = cells
        .iter()
        .map(|c| match &c.outcome {
            Ok(m) => vec![
                c.seed.to_string(),
                fmt_f64(c.slope),
                "ok".into(),
                fmt_f64(m.gen_error),
                fmt_f64(m.final_loss),
                m.iterations.to_string(),
                stop_name(m.stop_reason).into(),
            ],
            Err(e) => vec![
                c.seed.to_string(),
                fmt_f64(c.slope),
                format!("failed: {e}"),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ],
        })
        .collect();

    let mut plots = Vec::new();
    let first = cfg.seeds[0];
    let probe = cfg.probe_points;
    let truth: Vec<[f64; 2]> = (0..=probe)
        .map(|i| figure_eight_point(2.0 * std::f64::consts::PI * i as f64 / probe as f64))
        .collect();
    let mut overlay = vec![Series {
        label: "target".into(),
        x: truth.iter().map(|p| p[0]).collect(),
        y: truth.iter().map(|p| p[1]).collect(),
        dashed: true,
    }];
    for c in cells.iter().filter(|c| c.seed == first) {
        if let Ok(m) = &c.outcome {
            overlay.push(Series {
                label: format!("a = {}", c.slope),
                x: m.curve.iter().map(|p| p[0]).collect(),
                y: m.curve.iter().map(|p| p[1]).collect(),
                dashed: false,
            });
        }
    }
    plots.push(Plot::Lines {
        name: "overlay".into(),
        title: format!("Learned curves against the figure eight (seed {first})"),
        x_label: "y1".into(),
        y_label: "y2".into(),
        series: overlay,
        equal_aspect: true,
    });
    let mut per_seed: Vec<Series> = cfg
        .seeds
        .iter()
        .map(|&s| {
            let pts: Vec<(f64, f64)> = cells
                .iter()
                .filter(|c| c.seed == s)
                .filter_map(|c| c.outcome.as_ref().ok().map(|m| (c.slope, m.gen_error)))
                .collect();
            Series {
                label: format!("seed {s}"),
                x: pts.iter().map(|p| p.0).collect(),
                y: pts.iter().map(|p| p.1).collect(),
                dashed: false,
            }
        })
        .collect();
    per_seed.push(Series {
        label: "mean".into(),
        x: summaries.iter().map(|s| s.slope).collect(),
        y: summaries.iter().map(|s| s.mean).collect(),
        dashed: true,
    });
    plots.push(Plot::Lines {
        name: "error_vs_slope".into(),
        title: "Generalization error against sigmoid slope".into(),
        x_label: "slope a".into(),
        y_label: "mean distance to target".into(),
        series: per_seed,
        equal_aspect: false,
    });

    let report = ExperimentReport {
        experiment: ExperimentName::FigureEight,
        seeds: cfg.seeds.clone(),
        columns: columns.iter().map(|s| s.to_string()).collect(),
        rows,
        plots,
        config: serde_json::to_value(cfg)?,
    };
    Ok(FigureEightOutcome {
        cells,
        summaries,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwissRollConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub seeds: Vec<u64>,
    pub shallow: Vec<usize>,
    pub bottleneck: Vec<usize>,
    pub hidden: Activation,
    /// Intrinsic dimension passed to the width advisory.
    pub data_dim: usize,
    pub setup: TrainingSetup,
}

impl Default for SwissRollConfig {
    fn default() -> Self {
        Self {
            n_train: 500,
            n_test: 1000,
            seeds: (0..5).collect(),
            shallow: vec![3, 10, 10, 10, 2],
            bottleneck: vec![3, 10, 10, 1, 10, 2],
            hidden: Activation::sigmoid(1.0),
            data_dim: 2,
            setup: TrainingSetup::with_iters(200),
        }
    }
}

impl SwissRollConfig {
    pub fn validate(&self) -> Result<()> {
        check_seeds(&self.seeds)?;
        self.setup.validate()?;
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::Config("n_train and n_test must be at least 1".into()));
        }
        if self.data_dim == 0 {
            return Err(Error::Config("data_dim must be at least 1".into()));
        }
        for w in [&self.shallow, &self.bottleneck] {
            if w.first() != Some(&3) || w.last() != Some(&2) {
                return Err(Error::Config(format!("swiss-roll widths must start at 3 and end at 2, got {w:?}")));
            }
            Architecture::with_hidden(w.clone(), self.hidden)?;
        }
        Ok(())
    }
}

/// Five-number summary plus mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

impl BoxStats {
    /// Quartiles by linear interpolation between order statistics.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("box statistics need finite, non-empty data".into()));
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Ok(Self {
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SwissRollMetrics {
    pub stats: BoxStats,
    pub errors: Vec<f64>,
    pub final_loss: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
}

#[derive(Debug, Clone)]
pub struct SwissRollCell {
    pub seed: u64,
    pub widths: Vec<usize>,
    pub outcome: std::result::Result<SwissRollMetrics, String>,
}

#[derive(Debug, Clone)]
pub struct SwissRollOutcome {
    pub cells: Vec<SwissRollCell>,
    pub shallow_advisory: WidthAdvisory,
    pub bottleneck_advisory: WidthAdvisory,
    pub report: ExperimentReport,
}

impl SwissRollOutcome {
    /// Seeds where the shallow median error is at most the bottleneck one,
    /// and the number of seeds where both cells finished.
    pub fn shallow_wins(&self) -> (usize, usize) {
        let mut wins = 0;
        let mut both = 0;
        for pair in self.cells.chunks(2) {
            if let [a, b] = pair {
                if let (Ok(s), Ok(n)) = (&a.outcome, &b.outcome) {
                    both += 1;
                    if s.stats.median <= n.stats.median {
                        wins += 1;
                    }
                }
            }
        }
        (wins, both)
    }
}

fn widths_label(w: &[usize]) -> String {
    format!("F({})", w.iter().map(usize::to_string).collect::<Vec<_>>().join(","))
}

/// Trains the shallow and bottleneck networks on the same data per seed and
/// compares their test error distributions.
pub fn run_representation_compare(cfg: &SwissRollConfig, jobs: usize) -> Result<SwissRollOutcome> {
    cfg.validate()?;
    let shallow_advisory = width_advisory(&Architecture::with_hidden(cfg.shallow.clone(), cfg.hidden)?, cfg.data_dim)?;
    let bottleneck_advisory =
        width_advisory(&Architecture::with_hidden(cfg.bottleneck.clone(), cfg.hidden)?, cfg.data_dim)?;

    let grid: Vec<(u64, &Vec<usize>)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| [(s, &cfg.shallow), (s, &cfg.bottleneck)])
        .collect();
    let cells = run_cells(&grid, jobs, |&(seed, widths)| {
        let outcome = swiss_cell(cfg, seed, widths).map_err(|e| e.to_string());
        match &outcome {
            Ok(m) => log::info!("swiss-roll seed {seed} {}: median {:.5}", widths_label(widths), m.stats.median),
            Err(e) => log::warn!("swiss-roll seed {seed} {} failed: {e}", widths_label(widths)),
        }
        SwissRollCell {
            seed,
            widths: widths.clone(),
            outcome,
        }
    })?;

    let columns = [
        "seed",
        "architecture",
        "status",
        "min",
        "q1",
        "median",
        "q3",
        "max",
        "mean",
        "final_loss",
        "iterations",
        "stop_reason",
    ];
    let rows = cells
        .iter()
        .map(|c| {
            let mut row = vec![c.seed.to_string(), widths_label(&c.widths)];
            match &c.outcome {
                Ok(m) => {
                    let s = m.stats;
                    row.push("ok".into());
                    row.extend([s.min, s.q1, s.median, s.q3, s.max, s.mean, m.final_loss].map(fmt_f64));
                    row.push(m.iterations.to_string());
                    row.push(stop_name(m.stop_reason).into());
                }
                Err(e) => {
                    row.push(format!("failed: {e}"));
                    row.resize(columns.len(), String::new());
                }
            }
            row
        })
        .collect();

    let mut groups = Vec::new();
    for widths in [&cfg.shallow, &cfg.bottleneck] {
        let pooled: Vec<f64> = cells
            .iter()
            .filter(|c| &c.widths == widths)
            .filter_map(|c| c.outcome.as_ref().ok())
            .flat_map(|m| m.errors.iter().copied())
            .collect();
        if let Ok(s) = BoxStats::from_values(&pooled) {
            groups.push(BoxGroup {
                label: widths_label(widths),
                min: s.min,
                q1: s.q1,
                median: s.median,
                q3: s.q3,
                max: s.max,
            });
        }
    }
    let report = ExperimentReport {
        experiment: ExperimentName::SwissRoll,
        seeds: cfg.seeds.clone(),
        columns: columns.iter().map(|s| s.to_string()).collect(),
        rows,
        plots: vec![Plot::Boxes {
            name: "test_error_box".into(),
            title: "Test prediction error, all seeds pooled".into(),
            y_label: "l2 prediction error".into(),
            groups,
        }],
        config: serde_json::to_value(cfg)?,
    };
    Ok(SwissRollOutcome {
        cells,
        shallow_advisory,
        bottleneck_advisory,
        report,
    })
}

fn swiss_cell(cfg: &SwissRollConfig, seed: u64, widths: &[usize]) -> Result<SwissRollMetrics> {
    let q_seed = derive_seed(seed, 1);
    let train_set = gen_swiss_roll(cfg.n_train, derive_seed(seed, 2), q_seed)?.to_dataset()?;
    let test_set = gen_swiss_roll(cfg.n_test, derive_seed(seed, 3), q_seed)?;
    let arch = Architecture::with_hidden(widths.to_vec(), cfg.hidden)?;
    let (_, ws, log) = cfg.setup.fit(&arch, derive_seed(seed, 4), &train_set)?;
    let mut errors = Vec::with_capacity(test_set.len());
    for (x, y) in test_set.inputs.iter().zip(&test_set.targets) {
        errors.push(dist2(&output(&arch, &ws, x)?, y));
    }
    Ok(SwissRollMetrics {
        stats: BoxStats::from_values(&errors)?,
        errors,
        final_loss: log.last().loss,
        iterations: log.iterations,
        stop_reason: log.stop_reason,
    })
}
