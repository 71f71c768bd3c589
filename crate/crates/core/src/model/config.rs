use crate::error::{Error, Result};
use crate::layers::{AreaNormState, KernelMode};
use crate::spline::FitKind;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    Last,
    Mean,
    #[default]
    Gru,
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregator::Last => "last",
            Aggregator::Mean => "mean",
            Aggregator::Gru => "gru",
        })
    }
}

impl FromStr for Aggregator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "last" => Ok(Aggregator::Last),
            "mean" => Ok(Aggregator::Mean),
            "gru" => Ok(Aggregator::Gru),
            other => Err(Error::Config(format!("unknown aggregator `{other}`"))),
        }
    }
}

/// One layer inside a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Affine,
    Integrate,
    Kernel,
    AreaNorm,
}

impl FromStr for LayerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "affine" => Ok(LayerKind::Affine),
            "integrate" | "integration" => Ok(LayerKind::Integrate),
            "kernel" => Ok(LayerKind::Kernel),
            "area_norm" | "norm" => Ok(LayerKind::AreaNorm),
            other => Err(Error::Config(format!("unknown layer `{other}`"))),
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LayerKind::Affine => "affine",
            LayerKind::Integrate => "integrate",
            LayerKind::Kernel => "kernel",
            LayerKind::AreaNorm => "area_norm",
        })
    }
}

/// Architecture of a spline-network classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplineNetConfig {
    pub input_channels: usize,
    pub num_classes: usize,
    pub fit_kind: FitKind,
    /// Output channels of every affine layer.
    pub hidden: usize,
    pub blocks: usize,
    /// Layer sequence repeated in every block.
    pub block_layers: Vec<LayerKind>,
    pub kernels: usize,
    /// Knots of the uniform kernel grid (pieces = grid - 1).
    pub kernel_grid: usize,
    pub kernel_order: usize,
    pub kernel_mode: KernelMode,
    pub segments: usize,
    pub learnable_offsets: bool,
    pub aggregator: Aggregator,
    pub gru_hidden: usize,
    pub area_momentum: f64,
    pub area_epsilon: f64,
    pub seed: u64,
}

impl Default for SplineNetConfig {
    fn default() -> Self {
        SplineNetConfig {
            input_channels: 1,
            num_classes: 2,
            fit_kind: FitKind::NaturalCubic,
            hidden: 8,
            blocks: 1,
            block_layers: vec![
                LayerKind::Affine,
                LayerKind::Integrate,
                LayerKind::Kernel,
                LayerKind::AreaNorm,
            ],
            kernels: 8,
            kernel_grid: 8,
            kernel_order: 1,
            kernel_mode: KernelMode::Distance,
            segments: 8,
            learnable_offsets: false,
            aggregator: Aggregator::Gru,
            gru_hidden: 16,
            area_momentum: AreaNormState::DEFAULT_MOMENTUM,
            area_epsilon: AreaNormState::DEFAULT_EPSILON,
            seed: 0,
        }
    }
}

impl SplineNetConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("input_channels", self.input_channels),
            ("num_classes", self.num_classes),
            ("hidden", self.hidden),
            ("blocks", self.blocks),
            ("kernels", self.kernels),
            ("segments", self.segments),
            ("gru_hidden", self.gru_hidden),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.kernel_grid < 2 {
            return Err(Error::Config("kernel_grid must be at least 2".into()));
        }
        if !(self.area_momentum > 0.0 && self.area_momentum < 1.0) {
            return Err(Error::Config("area_momentum must lie in (0, 1)".into()));
        }
        if !(self.area_epsilon >= 0.0) {
            return Err(Error::Config("area_epsilon must be non-negative".into()));
        }
        Ok(())
    }

    /// Same architecture with every integration layer removed.
    pub fn without_integration(&self) -> Self {
        SplineNetConfig {
            block_layers: self
                .block_layers
                .iter()
                .copied()
                .filter(|l| *l != LayerKind::Integrate)
                .collect(),
            ..self.clone()
        }
    }
}
