//! File-backed steps behind the CLI subcommands.
//!
//! Layout under `out_dir`:
//!
//! ```text
//! data/dataset.csv, data/dataset.json
//! splits/splits.csv, splits/splits.json
//! models/<kind>.json, models/lstm_history.csv
//! reports/comparison.csv, reports/comparison.txt, reports/timings.csv,
//! reports/<model>_{confusion,roc,pr}.csv, reports/<model>_metrics.json
//! ```

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::checkpoint::{Checkpoint, ModelKind};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::experiment;
use crate::io;
use crate::metrics::{
    comparison_csv, comparison_table, curves_to_csv, timings_csv, ClassMetrics, ComparisonRow, ModelReport,
};
use crate::mode::{DegradationMode, NUM_CLASSES};
use crate::neural::EpochRecord;

pub const HISTORY_FILE: &str = "lstm_history.csv";
pub const COMPARISON_FILE: &str = "comparison.csv";

/// Reads (or defaults) the config, applies overrides, fans out seeds and
/// validates, all before any file is written.
pub fn load_config(path: Option<&Path>, seed: Option<u64>, out: Option<&Path>) -> Result<RunConfig> {
    let mut config = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(o) = out {
        config.out_dir = o.to_path_buf();
    }
    config.resolve_seeds();
    config.validate()?;
    Ok(config)
}

pub fn checkpoint_path(config: &RunConfig, kind: ModelKind) -> PathBuf {
    config.model_dir().join(format!("{kind}.json"))
}

pub fn cmd_generate(config: &RunConfig) -> Result<[usize; NUM_CLASSES]> {
    let samples = experiment::generate(config)?;
    io::write_dataset(&config.dataset_dir(), &samples, &config.generation, config.seed)?;
    let mut counts = [0; NUM_CLASSES];
    for s in &samples {
        counts[s.mode.index()] += 1;
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSummary {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub mutated: usize,
}

pub fn cmd_preprocess(config: &RunConfig) -> Result<SplitSummary> {
    let (samples, _) = io::read_dataset(&config.dataset_dir())?;
    let split = experiment::split(config, &samples)?;
    io::write_splits(
        &config.splits_dir(),
        &split,
        config.split,
        &config.partial_failure,
        config.seed,
    )?;
    Ok(SplitSummary {
        train: split.train.len(),
        validation: split.validation.len(),
        test: split.test.len(),
        mutated: split.test.iter().filter(|w| w.mutation.is_some()).count(),
    })
}

fn history_csv(history: &[EpochRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in history {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Argument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Returns the checkpoint path and, for the LSTM, the history path.
pub fn cmd_train(config: &RunConfig, kind: ModelKind) -> Result<(PathBuf, Option<PathBuf>)> {
    let (split, _) = io::read_splits(&config.splits_dir())?;
    let fitted = experiment::fit_model(kind, config, &split)?;
    let path = checkpoint_path(config, kind);
    io::write_text(&path, &fitted.checkpoint.to_json()?)?;
    let history_path = match &fitted.history {
        Some(h) => {
            let p = config.model_dir().join(HISTORY_FILE);
            io::write_text(&p, &history_csv(h)?)?;
            Some(p)
        }
        None => None,
    };
    Ok((path, history_path))
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    model: &'a str,
    classes: [&'static str; NUM_CLASSES],
    metrics: &'a ClassMetrics,
    fault_accuracy: f64,
    roc_auc: Vec<(&'static str, f64)>,
    pr_auc: Vec<(&'static str, f64)>,
    skipped_curves: &'a [String],
}

pub fn write_reports(dir: &Path, results: &[(ComparisonRow, ModelReport)]) -> Result<()> {
    let rows: Vec<ComparisonRow> = results.iter().map(|r| r.0.clone()).collect();
    io::write_text(&dir.join(COMPARISON_FILE), &comparison_csv(&rows)?)?;
    io::write_text(&dir.join("comparison.txt"), &comparison_table(&rows))?;
    io::write_text(&dir.join("timings.csv"), &timings_csv(&rows)?)?;
    for (_, report) in results {
        let name = &report.name;
        io::write_text(&dir.join(format!("{name}_confusion.csv")), &report.confusion.to_csv()?)?;
        io::write_text(&dir.join(format!("{name}_roc.csv")), &curves_to_csv(&report.roc)?)?;
        io::write_text(&dir.join(format!("{name}_pr.csv")), &curves_to_csv(&report.pr)?)?;
        let metrics = MetricsFile {
            model: name,
            classes: DegradationMode::ALL.map(|m| m.name()),
            metrics: &report.metrics,
            fault_accuracy: report.fault_accuracy,
            roc_auc: report.roc.iter().map(|c| (c.class.name(), c.auc)).collect(),
            pr_auc: report.pr.iter().map(|c| (c.class.name(), c.auc)).collect(),
            skipped_curves: &report.skipped_curves,
        };
        io::write_json(&dir.join(format!("{name}_metrics.json")), &metrics)?;
    }
    Ok(())
}

/// Evaluates the given checkpoints, or every checkpoint present when
/// `kinds` is empty.
pub fn cmd_evaluate(config: &RunConfig, kinds: &[ModelKind], include_threshold: bool) -> Result<Vec<ComparisonRow>> {
    let (split, _) = io::read_splits(&config.splits_dir())?;
    let wanted: Vec<ModelKind> = if kinds.is_empty() {
        ModelKind::ALL
            .into_iter()
            .filter(|&k| checkpoint_path(config, k).exists())
            .collect()
    } else {
        kinds.to_vec()
    };
    if wanted.is_empty() && !include_threshold {
        return Err(Error::Argument(format!(
            "no checkpoints in {} and --threshold-baseline not given",
            config.model_dir().display()
        )));
    }
    let checkpoints = wanted
        .iter()
        .map(|&k| Checkpoint::load(&checkpoint_path(config, k)))
        .collect::<Result<Vec<_>>>()?;
    let results = experiment::evaluate(config, &split, &checkpoints, include_threshold)?;
    write_reports(&config.report_dir(), &results)?;
    Ok(results.into_iter().map(|r| r.0).collect())
}

/// Every step in sequence: generate, preprocess, train all models, evaluate
/// them together with the threshold rules.
pub fn cmd_compare(config: &RunConfig) -> Result<Vec<ComparisonRow>> {
    cmd_generate(config)?;
    cmd_preprocess(config)?;
    for kind in ModelKind::ALL {
        cmd_train(config, kind)?;
    }
    cmd_evaluate(config, &ModelKind::ALL, true)
}
