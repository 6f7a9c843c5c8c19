//! One-axis sweeps: a captioning run and an evaluation per value, collected
//! into a table and a metric-vs-value plot.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use plotters::prelude::*;
use serde::{Deserialize, Serialize};

use retcap::keyframes::Reanchor;
use retcap::metrics::MetricReport;

use crate::config::{CorpusConfig, RetrievalMode, RunConfig};
use crate::error::{Error, Result};
use crate::evaluate::run_evaluate;
use crate::manifest::DatasetManifest;
use crate::run::{run_caption, write_json};

pub const ABLATION_JSON: &str = "ablation.json";
pub const ABLATION_TABLE: &str = "ablation.md";
pub const ABLATION_PLOT: &str = "ablation.svg";

/// Values of the `losses` axis.
pub const LOSS_SETTINGS: [&str; 5] = ["none", "S", "W", "S+W", "prefix"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    K,
    L,
    P,
    Corpus,
    Losses,
    ClipThreshold,
    Reanchor,
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "K" | "k" => Axis::K,
            "L" | "l" => Axis::L,
            "P" | "p" => Axis::P,
            "corpus" => Axis::Corpus,
            "losses" => Axis::Losses,
            "clip_threshold" | "lambda_clip" => Axis::ClipThreshold,
            "reanchor" => Axis::Reanchor,
            other => {
                return Err(Error::Config(format!(
                    "unknown axis {other:?} (K, L, P, corpus, losses, clip_threshold, reanchor)"
                )))
            }
        })
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::K => "K",
            Axis::L => "L",
            Axis::P => "P",
            Axis::Corpus => "corpus",
            Axis::Losses => "losses",
            Axis::ClipThreshold => "clip_threshold",
            Axis::Reanchor => "reanchor",
        })
    }
}

impl Axis {
    fn numeric(self) -> bool {
        matches!(self, Axis::K | Axis::L | Axis::P | Axis::ClipThreshold)
    }

    /// `base` with this axis set to `value`.
    pub fn apply(self, base: &RunConfig, value: &str) -> Result<RunConfig> {
        let bad = || Error::Config(format!("invalid value {value:?} for axis {self}"));
        let count = || value.parse::<usize>().map_err(|_| bad());
        let mut cfg = base.clone();
        match self {
            Axis::K => cfg.retrieval.k = count()?,
            Axis::L => cfg.retrieval.l = count()?,
            Axis::P => cfg.decode.soft_tokens = count()?,
            Axis::ClipThreshold => cfg.keyframes.clip_threshold = value.parse().map_err(|_| bad())?,
            Axis::Corpus => cfg.corpus = CorpusConfig::parse(value),
            Axis::Reanchor => {
                cfg.keyframes.reanchor = match value {
                    "admitted" => Reanchor::Admitted,
                    "every" => Reanchor::Every,
                    _ => return Err(bad()),
                }
            }
            Axis::Losses => {
                let w = &mut cfg.decode.weights;
                let (s, wd) = (base.decode.weights.sentences, base.decode.weights.words);
                cfg.mode = RetrievalMode::Loss;
                match value {
                    "none" => (w.sentences, w.words) = (0.0, 0.0),
                    "S" => (w.sentences, w.words) = (s, 0.0),
                    "W" => (w.sentences, w.words) = (0.0, wd),
                    "S+W" => (w.sentences, w.words) = (s, wd),
                    "prefix" => cfg.mode = RetrievalMode::Prefix,
                    _ => return Err(bad()),
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub value: String,
    pub fingerprint: String,
    pub videos: usize,
    pub failed: usize,
    pub metrics: MetricReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub axis: Axis,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    /// Markdown table with scores ×100.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "| {} | B4 | M | R | C |", self.axis);
        let _ = writeln!(s, "|---|---|---|---|---|");
        for r in &self.rows {
            let m = &r.metrics;
            let _ = writeln!(
                s,
                "| {} | {:.1} | - | {:.1} | {:.1} |",
                r.value,
                100.0 * m.bleu4,
                100.0 * m.rouge_l,
                100.0 * m.cider
            );
        }
        s
    }

    /// Line chart of B4, R and C (×100) against the axis values.
    pub fn plot(&self, path: &Path) -> Result<()> {
        let plot_err = |e: String| Error::Data(format!("plotting {}: {e}", path.display()));
        let xs: Vec<f64> = if self.axis.numeric() {
            self.rows.iter().map(|r| r.value.parse().unwrap_or(f64::NAN)).collect()
        } else {
            (0..self.rows.len()).map(|i| i as f64).collect()
        };
        let series: [(&str, RGBColor, Vec<f64>); 3] = [
            ("B4", BLUE, self.rows.iter().map(|r| 100.0 * r.metrics.bleu4).collect()),
            ("R", GREEN, self.rows.iter().map(|r| 100.0 * r.metrics.rouge_l).collect()),
            ("C", RED, self.rows.iter().map(|r| 100.0 * r.metrics.cider).collect()),
        ];
        let (x0, x1) = min_max(&xs);
        let (_, y1) = min_max(series.iter().flat_map(|s| s.2.iter()).copied().collect::<Vec<_>>().as_slice());
        let pad = ((x1 - x0) * 0.05).max(0.5);
        let labels: Vec<String> = self.rows.iter().map(|r| r.value.clone()).collect();

        let root = SVGBackend::new(path, (640, 400)).into_drawing_area();
        root.fill(&WHITE).map_err(|e| plot_err(e.to_string()))?;
        let mut chart = ChartBuilder::on(&root)
            .caption(format!("metrics vs {}", self.axis), ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(36)
            .y_label_area_size(44)
            .build_cartesian_2d(x0 - pad..x1 + pad, 0.0..(y1 * 1.15).max(1.0))
            .map_err(|e| plot_err(e.to_string()))?;
        let numeric = self.axis.numeric();
        chart
            .configure_mesh()
            .x_desc(self.axis.to_string())
            .y_desc("score ×100")
            .x_labels(if numeric { 10 } else { labels.len() })
            .x_label_formatter(&|x| {
                if numeric {
                    format!("{x}")
                } else {
                    let i = x.round();
                    if (x - i).abs() < 1e-6 && i >= 0.0 {
                        labels.get(i as usize).cloned().unwrap_or_default()
                    } else {
                        String::new()
                    }
                }
            })
            .draw()
            .map_err(|e| plot_err(e.to_string()))?;
        for (name, color, ys) in &series {
            let pts: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
            let c = *color;
            chart
                .draw_series(LineSeries::new(pts.clone(), c.stroke_width(2)))
                .map_err(|e| plot_err(e.to_string()))?
                .label(*name)
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], c.stroke_width(2)));
            chart
                .draw_series(pts.iter().map(|&p| Circle::new(p, 3, c.filled())))
                .map_err(|e| plot_err(e.to_string()))?;
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(|e| plot_err(e.to_string()))?;
        root.present().map_err(|e| plot_err(e.to_string()))?;
        Ok(())
    }
}

fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .filter(|x| x.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Runs `run_caption` + `run_evaluate` per value under `<out_dir>/<axis>=<value>/`
/// and writes the report, table and plot into `out_dir`.
pub fn run_ablation(
    base: &RunConfig,
    manifest: &DatasetManifest,
    axis: Axis,
    values: &[String],
) -> Result<AblationReport> {
    if values.len() < 2 {
        return Err(Error::Config("an ablation needs at least two values".into()));
    }
    let configs = values
        .iter()
        .map(|v| axis.apply(base, v))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(values.len());
    for (value, mut cfg) in values.iter().zip(configs) {
        let slug: String = value
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || ".+-_".contains(c) { c } else { '_' })
            .collect();
        cfg.out_dir = base.out_dir.join(format!("{axis}={slug}"));
        log::info!("ablation {axis}={value}");
        let run = run_caption(&cfg, manifest)?;
        let report = run_evaluate(&run, manifest, &cfg.out_dir)?;
        rows.push(AblationRow {
            value: value.clone(),
            fingerprint: run.fingerprint,
            videos: report.videos,
            failed: run.failures.len(),
            metrics: report.metrics,
        });
    }
    let report = AblationReport { axis, rows };
    write_json(&base.out_dir.join(ABLATION_JSON), &report)?;
    std::fs::write(base.out_dir.join(ABLATION_TABLE), report.table())?;
    report.plot(&base.out_dir.join(ABLATION_PLOT))?;
    Ok(report)
}
