//! Run configuration: defaults, an optional TOML file, then command-line
//! flags, in increasing precedence.

use crate::error::{CliError, CliResult};
use clap::Args;
use serde::{Deserialize, Serialize};
use splinenet::data::SynthConfig;
use splinenet::layers::KernelMode;
use splinenet::model::{Aggregator, LayerKind, Metric, SplineNetConfig, TrainSettings};
use splinenet::FitKind;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSettings {
    /// Train/validation/test fractions.
    pub split: [f64; 3],
    pub stratified: bool,
}

impl Default for DataSettings {
    fn default() -> Self {
        DataSettings {
            split: [0.6, 0.2, 0.2],
            stratified: true,
        }
    }
}

/// Everything a training run depends on. The top-level `seed` and
/// `threads` override the copies inside `model` and `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: usize,
    pub repeats: usize,
    pub model: SplineNetConfig,
    pub train: TrainSettings,
    pub data: DataSettings,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            threads: 1,
            repeats: 1,
            model: SplineNetConfig::default(),
            train: TrainSettings::default(),
            data: DataSettings::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config file: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Defaults, overridden by the file if given.
    pub fn base(path: Option<&Path>) -> CliResult<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    /// Copies the top-level seed and thread count into the nested settings
    /// and checks the result.
    pub fn finish(mut self) -> CliResult<Self> {
        self.model.seed = self.seed;
        self.train.seed = self.seed;
        self.train.threads = self.threads;
        if self.threads == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        if self.repeats == 0 {
            return Err(CliError::Usage("--repeats must be at least 1".into()));
        }
        self.model.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(self)
    }

    /// The configuration of run `i` of a repeated experiment.
    pub fn for_repeat(&self, i: usize) -> RunConfig {
        let seed = self.seed + i as u64;
        RunConfig {
            seed,
            repeats: 1,
            model: SplineNetConfig { seed, ..self.model.clone() },
            train: TrainSettings { seed, ..self.train.clone() },
            ..self.clone()
        }
    }
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<T>().map_err(|e| e.to_string()))
        .collect()
}

fn parse_split(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = parse_list(s)?;
    <[f64; 3]>::try_from(v).map_err(|_| "expected three fractions, e.g. 0.6,0.2,0.2".to_string())
}

/// Model hyperparameters as flags.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelFlags {
    /// Spline fit: constant, linear or natural_cubic.
    #[arg(long)]
    pub fit: Option<FitKind>,
    /// Latent channels of each affine layer.
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Layer order inside a block, e.g. affine,integrate,kernel,area_norm.
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<LayerKind>>,
    #[arg(long)]
    pub kernels: Option<usize>,
    /// Knots of the uniform kernel grid.
    #[arg(long)]
    pub kernel_grid: Option<usize>,
    #[arg(long)]
    pub kernel_order: Option<usize>,
    /// distance or multiply.
    #[arg(long)]
    pub kernel_mode: Option<KernelMode>,
    /// Number of segment queries.
    #[arg(long)]
    pub segments: Option<usize>,
    #[arg(long)]
    pub learnable_offsets: bool,
    /// last, mean or gru.
    #[arg(long)]
    pub aggregator: Option<Aggregator>,
    #[arg(long)]
    pub gru_hidden: Option<usize>,
    #[arg(long)]
    pub area_momentum: Option<f64>,
    #[arg(long)]
    pub area_epsilon: Option<f64>,
}

impl ModelFlags {
    pub fn apply(&self, m: &mut SplineNetConfig) {
        macro_rules! set {
            ($($f:ident => $t:ident),*) => {$(
                if let Some(v) = &self.$f {
                    m.$t = v.clone();
                }
            )*};
        }
        set!(fit => fit_kind, hidden => hidden, blocks => blocks, layers => block_layers,
             kernels => kernels, kernel_grid => kernel_grid, kernel_order => kernel_order,
             kernel_mode => kernel_mode, segments => segments, aggregator => aggregator,
             gru_hidden => gru_hidden, area_momentum => area_momentum, area_epsilon => area_epsilon);
        if self.learnable_offsets {
            m.learnable_offsets = true;
        }
    }
}

/// Optimization settings as flags.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Epochs without validation improvement before stopping.
    #[arg(long)]
    pub patience: Option<usize>,
    /// accuracy or auroc.
    #[arg(long)]
    pub metric: Option<Metric>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
}

impl TrainFlags {
    pub fn apply(&self, t: &mut TrainSettings) {
        macro_rules! set {
            ($($f:ident => $t:ident),*) => {$(
                if let Some(v) = self.$f {
                    t.$t = v;
                }
            )*};
        }
        set!(lr => learning_rate, epochs => epochs, batch_size => batch_size, patience => patience,
             metric => metric, weight_decay => weight_decay, dropout => dropout);
    }
}

/// Synthetic generator settings as flags.
#[derive(Debug, Clone, Default, Args)]
pub struct SynthFlags {
    /// Synthetic samples per class.
    #[arg(long)]
    pub n_per_class: Option<usize>,
    #[arg(long)]
    pub synth_channels: Option<usize>,
    #[arg(long)]
    pub min_len: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Standard deviation of the observation noise.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Per-entry missingness.
    #[arg(long)]
    pub drop_rate: Option<f64>,
    #[arg(long)]
    pub synth_seed: Option<u64>,
}

impl SynthFlags {
    pub fn apply(&self, s: &mut SynthConfig) {
        macro_rules! set {
            ($($f:ident => $t:ident),*) => {$(
                if let Some(v) = self.$f {
                    s.$t = v;
                }
            )*};
        }
        set!(n_per_class => n_per_class, synth_channels => channels, min_len => min_len,
             max_len => max_len, noise => noise, drop_rate => drop_rate, synth_seed => seed);
    }
}

/// Splitting flags plus the synthetic generator used when no data file is
/// given.
#[derive(Debug, Clone, Default, Args)]
pub struct DataFlags {
    /// Train/validation/test fractions.
    #[arg(long, value_parser = parse_split)]
    pub split: Option<[f64; 3]>,
    /// Split without per-class stratification.
    #[arg(long)]
    pub no_stratify: bool,
    #[command(flatten)]
    pub synth: SynthFlags,
}

impl DataFlags {
    pub fn apply(&self, d: &mut DataSettings, s: &mut SynthConfig) {
        if let Some(v) = self.split {
            d.split = v;
        }
        if self.no_stratify {
            d.stratified = false;
        }
        self.synth.apply(s);
    }
}
