//! Dataset generators, experiment runners and their on-disk artifacts.

mod datasets;
mod runners;
pub mod svg;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{output, Architecture, WeightSet};

pub use datasets::{
    figure_eight_point, gen_figure_eight, gen_four_region, gen_swiss_roll, one_hot, random_orthogonal,
    swiss_roll_point, DatasetMeta, LabelTable, LabeledDataset, FOUR_REGION_CLASSES, FOUR_REGION_HALF_WIDTH,
    FOUR_REGION_RADII,
};
pub use runners::{
    figure_eight_error, run_four_region, run_representation_compare, run_slope_sweep, BoxStats, FigureEightCell,
    FigureEightConfig, FigureEightMetrics, FigureEightOutcome, FourRegionCell, FourRegionConfig, FourRegionMetrics,
    FourRegionOutcome, SlopeSummary, SwissRollCell, SwissRollConfig, SwissRollMetrics, SwissRollOutcome,
    TrainingSetup,
};
pub use svg::{BoxGroup, Plot, Series};

/// Experiment names accepted by the command line.
pub const EXPERIMENT_NAMES: [&str; 3] = ["four-region", "figure-eight", "swiss-roll"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentName {
    FourRegion,
    FigureEight,
    SwissRoll,
}

impl ExperimentName {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "four-region" => Ok(Self::FourRegion),
            "figure-eight" => Ok(Self::FigureEight),
            "swiss-roll" => Ok(Self::SwissRoll),
            other => Err(Error::InvalidArgument(format!(
                "unknown experiment {other:?}; valid names: {}",
                EXPERIMENT_NAMES.join(", ")
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::FourRegion => "four-region",
            Self::FigureEight => "figure-eight",
            Self::SwissRoll => "swiss-roll",
        }
    }
}

/// Network outputs sampled along the diagonal from `(−h,−h)` to `(h,h)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagonalTrace {
    /// Shared coordinate `s` of the points `(s, s)`.
    pub positions: Vec<f64>,
    /// One curve per output dimension.
    pub curves: Vec<Vec<f64>>,
}

impl DiagonalTrace {
    /// Argmax class (1-based) at every position, repeats collapsed.
    pub fn argmax_sequence(&self) -> Vec<u8> {
        let mut seq: Vec<u8> = Vec::new();
        for i in 0..self.positions.len() {
            let best = (0..self.curves.len())
                .max_by(|&a, &b| self.curves[a][i].total_cmp(&self.curves[b][i]).then(b.cmp(&a)))
                .expect("at least one curve");
            let class = best as u8 + 1;
            if seq.last() != Some(&class) {
                seq.push(class);
            }
        }
        seq
    }

    /// Largest change between neighbouring samples over all curves.
    pub fn max_jump(&self) -> f64 {
        self.curves
            .iter()
            .flat_map(|c| c.windows(2).map(|w| (w[1] - w[0]).abs()))
            .fold(0.0, f64::max)
    }
}

pub fn trace_diagonal(arch: &Architecture, ws: &WeightSet, resolution: usize) -> Result<DiagonalTrace> {
    if arch.input_dim() != 2 || arch.output_dim() != FOUR_REGION_CLASSES {
        return Err(Error::Architecture(format!(
            "diagonal trace needs a 2-input, {FOUR_REGION_CLASSES}-output network, got widths {:?}",
            arch.widths()
        )));
    }
    if resolution < 2 {
        return Err(Error::InvalidArgument("diagonal resolution must be at least 2".into()));
    }
    let h = FOUR_REGION_HALF_WIDTH;
    let positions: Vec<f64> = (0..resolution)
        .map(|i| -h + 2.0 * h * i as f64 / (resolution - 1) as f64)
        .collect();
    let mut curves = vec![Vec::with_capacity(resolution); arch.output_dim()];
    for &s in &positions {
        let y = output(arch, ws, &[s, s])?;
        for (c, v) in curves.iter_mut().zip(y) {
            c.push(v);
        }
    }
    Ok(DiagonalTrace { positions, curves })
}

/// Metric table, plots and config echo of one experiment run.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentName,
    pub seeds: Vec<u64>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub plots: Vec<Plot>,
    pub config: serde_json::Value,
}

impl ExperimentReport {
    pub fn metrics_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Writes `metrics.csv`, `plot_*.svg` and `config.json` under
    /// `root/<experiment>/<timestamp>/` and returns that directory.
    pub fn write_artifacts(&self, root: &Path) -> Result<PathBuf> {
        let base = root.join(self.experiment.as_str());
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ").to_string();
        let mut dir = base.join(&stamp);
        let mut n = 1;
        while dir.exists() {
            dir = base.join(format!("{stamp}-{n}"));
            n += 1;
        }
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("metrics.csv"), self.metrics_csv()?)?;
        for plot in &self.plots {
            std::fs::write(dir.join(format!("plot_{}.svg", plot.name())), plot.render())?;
        }
        let mut cfg = serde_json::to_string_pretty(&self.config)?;
        cfg.push('\n');
        std::fs::write(dir.join("config.json"), cfg)?;
        Ok(dir)
    }
}

/// Shortest round-trip decimal form, so metric files compare byte-for-byte.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}
