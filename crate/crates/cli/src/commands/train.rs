use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::manifest::{to_json_text, write_text, Manifest};
use crate::pipeline::{evaluate_subset, mean_std, run_once, subset_indices, DataSource, RunRecord, Subset};
use serde::{Deserialize, Serialize};
use splinenet::model::{Checkpoint, History, Metric, SplineNet};
use std::fmt;
use std::path::{Path, PathBuf};

/// The manifest stored inside a trained checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainedManifest {
    pub manifest: Manifest,
    pub run: RunRecord,
}

impl TrainedManifest {
    pub fn config(&self) -> CliResult<RunConfig> {
        serde_json::from_value(self.manifest.config.clone())
            .map_err(|e| CliError::Usage(format!("checkpoint manifest: {e}")))
    }

    pub fn source(&self) -> DataSource {
        DataSource::from_description(self.manifest.inputs.get("data").map_or("synthetic", String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistoryFile {
    pub manifest: Manifest,
    pub history: History,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub test_metric: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub checkpoint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub manifest: Manifest,
    pub metric: Metric,
    pub runs: Vec<RunSummary>,
    pub mean: f64,
    pub std: f64,
}

impl fmt::Display for TrainReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.runs {
            writeln!(
                f,
                "seed {}: test {} {:.4} (best epoch {}, {} epochs) -> {}",
                r.seed, self.metric, r.test_metric, r.best_epoch, r.epochs_run, r.checkpoint
            )?;
        }
        writeln!(
            f,
            "test {}: {:.4} ± {:.4} ({} run{})",
            self.metric,
            self.mean,
            self.std,
            self.runs.len(),
            if self.runs.len() == 1 { "" } else { "s" }
        )
    }
}

/// `ck.json` for a single run, `ck-seed7.json` for run seed 7 otherwise.
pub fn seeded_path(path: &Path, seed: u64, repeated: bool) -> PathBuf {
    if !repeated {
        return path.to_path_buf();
    }
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let name = match path.extension() {
        Some(ext) => format!("{stem}-seed{seed}.{}", ext.to_string_lossy()),
        None => format!("{stem}-seed{seed}"),
    };
    path.with_file_name(name)
}

pub struct TrainOutputs<'a> {
    pub checkpoint: &'a Path,
    pub history: Option<&'a Path>,
    pub report: Option<&'a Path>,
}

/// Trains `cfg.repeats` runs with consecutive seeds and writes one
/// checkpoint (and optionally one history) per run.
pub fn cmd_train(cfg: &RunConfig, source: &DataSource, out: &TrainOutputs<'_>) -> CliResult<TrainReport> {
    let ds = source.load(cfg)?;
    let repeated = cfg.repeats > 1;
    let mut runs = Vec::with_capacity(cfg.repeats);
    for i in 0..cfg.repeats {
        let run_cfg = cfg.for_repeat(i);
        let outcome = run_once(&ds, &run_cfg)?;
        let manifest = Manifest::new("train", &run_cfg).input("data", source.describe());
        let mut ck = Checkpoint::from_model(&outcome.model);
        ck.history = Some(outcome.history.clone());
        ck.manifest = serde_json::to_value(TrainedManifest {
            manifest: manifest.clone(),
            run: outcome.record.clone(),
        })
        .expect("manifest serializes");
        let ck_path = seeded_path(out.checkpoint, run_cfg.seed, repeated);
        write_text(&ck_path, &ck.to_json()?)?;
        if let Some(h) = out.history {
            let file = HistoryFile {
                manifest,
                history: outcome.history.clone(),
            };
            write_text(&seeded_path(h, run_cfg.seed, repeated), &to_json_text(&file))?;
        }
        runs.push(RunSummary {
            seed: run_cfg.seed,
            test_metric: outcome.record.test_metric,
            best_epoch: outcome.history.best_epoch,
            epochs_run: outcome.history.epochs.len(),
            checkpoint: ck_path.display().to_string(),
        });
    }
    let metrics: Vec<f64> = runs.iter().map(|r| r.test_metric).collect();
    let (mean, std) = mean_std(&metrics);
    let report = TrainReport {
        manifest: Manifest::new("train", cfg).input("data", source.describe()),
        metric: cfg.train.metric,
        runs,
        mean,
        std,
    };
    if let Some(p) = out.report {
        write_text(p, &to_json_text(&report))?;
    }
    Ok(report)
}

pub fn load_checkpoint(path: &Path) -> CliResult<(SplineNet, TrainedManifest)> {
    let wrap = |source| CliError::Input {
        path: path.display().to_string(),
        source,
    };
    let ck = Checkpoint::load(path).map_err(wrap)?;
    let manifest: TrainedManifest = serde_json::from_value(ck.manifest.clone())
        .map_err(|e| CliError::Usage(format!("{}: not a training checkpoint: {e}", path.display())))?;
    let model = ck.into_model().map_err(wrap)?;
    Ok((model, manifest))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub manifest: Manifest,
    pub metric: Metric,
    pub subset: String,
    pub samples: usize,
    pub value: f64,
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}: {} ({} samples)", self.subset, self.metric, self.value, self.samples)
    }
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    /// Defaults to the dataset recorded in the checkpoint.
    pub data: Option<PathBuf>,
    pub subset: Subset,
    pub metric: Option<Metric>,
    pub threads: Option<usize>,
}

/// Re-scores a checkpoint with the normalization and split of its run.
pub fn cmd_eval(checkpoint: &Path, opts: &EvalOptions) -> CliResult<EvalReport> {
    let (model, tm) = load_checkpoint(checkpoint)?;
    let mut cfg = tm.config()?;
    if let Some(m) = opts.metric {
        cfg.train.metric = m;
    }
    if let Some(t) = opts.threads {
        cfg.threads = t;
    }
    let cfg = cfg.finish()?;
    let source = opts.data.as_deref().map_or_else(|| tm.source(), |p| DataSource::Jsonl(p.to_path_buf()));
    let ds = source.load(&cfg)?;
    let samples = subset_indices(&ds, &cfg, opts.subset)?.len();
    let value = evaluate_subset(&model, &ds, &cfg, &tm.run, opts.subset)?;
    let subset = format!("{:?}", opts.subset).to_lowercase();
    Ok(EvalReport {
        manifest: Manifest::new("eval", &cfg)
            .input("checkpoint", checkpoint.display().to_string())
            .input("data", source.describe()),
        metric: cfg.train.metric,
        subset,
        samples,
        value,
    })
}
