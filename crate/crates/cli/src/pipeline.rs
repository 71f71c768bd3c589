//! Dataset loading and the split/normalize/fit/train/evaluate run shared by
//! `train`, `eval` and `inspect-kernels`.

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use serde::{Deserialize, Serialize};
use splinenet::data::{apply_normalization, load_jsonl, normalize, split, synth_shapes, Dataset, Normalization, SplitIndices};
use splinenet::model::{evaluate, thread_pool, train, Example, History, SplineNet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Where the samples come from. The synthetic generator is configured by
/// `RunConfig::synth`.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic,
    Jsonl(PathBuf),
}

impl DataSource {
    pub fn from_arg(path: Option<&Path>) -> Self {
        path.map_or(DataSource::Synthetic, |p| DataSource::Jsonl(p.to_path_buf()))
    }

    /// Label stored in manifests.
    pub fn describe(&self) -> String {
        match self {
            DataSource::Synthetic => "synthetic".into(),
            DataSource::Jsonl(p) => p.display().to_string(),
        }
    }

    pub fn from_description(s: &str) -> Self {
        if s == "synthetic" {
            DataSource::Synthetic
        } else {
            DataSource::Jsonl(PathBuf::from(s))
        }
    }

    pub fn load(&self, cfg: &RunConfig) -> CliResult<Dataset> {
        match self {
            DataSource::Synthetic => synth_shapes(&cfg.synth).map_err(|e| CliError::Usage(e.to_string())),
            DataSource::Jsonl(p) => load_jsonl(p).map_err(|source| CliError::Input {
                path: p.display().to_string(),
                source,
            }),
        }
    }
}

/// Which samples of a split to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Subset {
    Train,
    Val,
    #[default]
    Test,
    All,
}

impl FromStr for Subset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Subset::Train),
            "val" => Ok(Subset::Val),
            "test" => Ok(Subset::Test),
            "all" => Ok(Subset::All),
            other => Err(format!("unknown subset `{other}` (train, val, test, all)")),
        }
    }
}

impl Subset {
    pub fn indices(self, s: &SplitIndices, n: usize) -> Vec<usize> {
        match self {
            Subset::Train => s.train.clone(),
            Subset::Val => s.val.clone(),
            Subset::Test => s.test.clone(),
            Subset::All => (0..n).collect(),
        }
    }
}

/// What a trained checkpoint needs to be evaluated again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub seed: u64,
    pub normalization: Normalization,
    pub test_metric: f64,
}

pub struct RunOutcome {
    pub model: SplineNet,
    pub history: History,
    pub record: RunRecord,
}

pub fn split_of(ds: &Dataset, cfg: &RunConfig) -> CliResult<SplitIndices> {
    split(ds, cfg.data.split, cfg.seed, cfg.data.stratified).map_err(CliError::from)
}

pub fn fit_subset(ds: &Dataset, idx: &[usize], cfg: &RunConfig) -> CliResult<Vec<Example>> {
    ds.fit_all(idx, cfg.model.fit_kind).map_err(CliError::from)
}

/// One seeded run: split, normalize on the training part, fit, train with
/// early stopping on validation, score the best model on the test part.
pub fn run_once(ds: &Dataset, cfg: &RunConfig) -> CliResult<RunOutcome> {
    let sp = split_of(ds, cfg)?;
    if sp.train.is_empty() || sp.test.is_empty() {
        return Err(CliError::Usage("split leaves the training or test set empty".into()));
    }
    let normed = normalize(ds, &sp.train)?;
    let model_cfg = splinenet::model::SplineNetConfig {
        input_channels: ds.channels(),
        num_classes: ds.classes(),
        ..cfg.model.clone()
    };
    let pool = thread_pool(cfg.threads)?;
    pool.install(|| {
        let tr = fit_subset(&normed, &sp.train, cfg)?;
        let va = fit_subset(&normed, &sp.val, cfg)?;
        let te = fit_subset(&normed, &sp.test, cfg)?;
        let net = SplineNet::new(model_cfg)?;
        let (model, history) = train(&net, &tr, &va, &cfg.train)?;
        let test_metric = evaluate(&model, &te, cfg.train.metric)?;
        Ok(RunOutcome {
            model,
            history,
            record: RunRecord {
                seed: cfg.seed,
                normalization: normed.normalization().expect("normalized").clone(),
                test_metric,
            },
        })
    })
}

/// Scores `model` on `subset` of `ds` after applying the stored statistics.
pub fn evaluate_subset(
    model: &SplineNet,
    ds: &Dataset,
    cfg: &RunConfig,
    record: &RunRecord,
    subset: Subset,
) -> CliResult<f64> {
    let idx = subset_indices(ds, cfg, subset)?;
    let normed = apply_normalization(ds, record.normalization.clone())?;
    let pool = thread_pool(cfg.threads)?;
    pool.install(|| {
        let data = fit_subset(&normed, &idx, cfg)?;
        Ok(evaluate(model, &data, cfg.train.metric)?)
    })
}

pub fn subset_indices(ds: &Dataset, cfg: &RunConfig, subset: Subset) -> CliResult<Vec<usize>> {
    let idx = match subset {
        Subset::All => (0..ds.len()).collect(),
        s => s.indices(&split_of(ds, cfg)?, ds.len()),
    };
    if idx.is_empty() {
        return Err(CliError::Usage("the selected subset is empty".into()));
    }
    Ok(idx)
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
