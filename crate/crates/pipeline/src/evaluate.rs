//! Scoring a results file against the manifest's references.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use retcap::metrics::{evaluate, EvalCorpus, EvalItem, MetricReport};

use crate::error::{data_err, Result};
use crate::manifest::DatasetManifest;
use crate::run::{write_json, CaptionRun};

pub const METRICS_JSON: &str = "metrics.json";
pub const METRICS_TXT: &str = "metrics.txt";

/// Contents of `metrics.json`. Scores are fractions; the text table shows ×100.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fingerprint: String,
    pub videos: usize,
    #[serde(flatten)]
    pub metrics: MetricReport,
}

impl EvalReport {
    pub fn table(&self) -> String {
        let mut s = String::new();
        let m = &self.metrics;
        let _ = writeln!(s, "| videos | B4 | M | R | C |");
        let _ = writeln!(s, "|---|---|---|---|---|");
        let _ = writeln!(
            s,
            "| {} | {:.1} | - | {:.1} | {:.1} |",
            self.videos,
            100.0 * m.bleu4,
            100.0 * m.rouge_l,
            100.0 * m.cider
        );
        s
    }
}

/// Pairs every record's best caption with its references.
pub fn eval_corpus(run: &CaptionRun, manifest: &DatasetManifest) -> Result<EvalCorpus> {
    if run.records.is_empty() {
        return data_err("results contain no captioned videos");
    }
    let mut missing = Vec::new();
    let mut items = BTreeMap::new();
    for r in &run.records {
        match manifest.get(&r.video_id) {
            Some(e) if e.references.iter().any(|x| !x.trim().is_empty()) => {
                items.insert(
                    r.video_id.clone(),
                    EvalItem {
                        candidate: r.best_caption.clone(),
                        references: e.references.clone(),
                    },
                );
            }
            _ => missing.push(r.video_id.as_str()),
        }
    }
    if !missing.is_empty() {
        return data_err(format!("no references for: {}", missing.join(", ")));
    }
    Ok(EvalCorpus::new(items)?)
}

/// Scores `run` and writes `metrics.json` and `metrics.txt` into `out_dir`.
pub fn run_evaluate(run: &CaptionRun, manifest: &DatasetManifest, out_dir: &Path) -> Result<EvalReport> {
    let corpus = eval_corpus(run, manifest)?;
    let report = EvalReport {
        fingerprint: run.fingerprint.clone(),
        videos: corpus.len(),
        metrics: evaluate(&corpus)?,
    };
    write_json(&out_dir.join(METRICS_JSON), &report)?;
    std::fs::write(out_dir.join(METRICS_TXT), report.table())?;
    Ok(report)
}
