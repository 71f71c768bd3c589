//! Datasets of labelled irregular series: ingestion, normalization,
//! missingness augmentation, synthetic shapes and splits.

mod io;
mod split;
mod synth;

pub use io::{
    load_csv_long, load_jsonl, parse_csv_long, parse_jsonl, read_records, records_to_jsonl, save_jsonl,
    to_jsonl, Record,
};
pub use split::{split, SplitIndices};
pub use synth::{synth_shapes, SynthConfig, BUMP_WIDTH};

use crate::error::{Error, Result};
use crate::spline::{fit, FitKind, Spline, TimeSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Standard deviations below this are treated as 1 during normalization.
pub const MIN_STD: f64 = 1e-8;

/// Statistics of a normalization, kept for the inverse transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Original time that now maps to 1.0.
    pub time_scale: f64,
}

impl Normalization {
    pub fn apply(&self, c: usize, x: f64) -> f64 {
        (x - self.mean[c]) / self.std[c]
    }

    pub fn invert(&self, c: usize, z: f64) -> f64 {
        z * self.std[c] + self.mean[c]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<(TimeSeries, usize)>,
    classes: usize,
    channels: usize,
    normalization: Option<Normalization>,
}

impl Dataset {
    /// `classes` defaults to one more than the largest label.
    pub fn new(samples: Vec<(TimeSeries, usize)>, classes: Option<usize>) -> Result<Self> {
        let channels = samples.first().map(|s| s.0.channels()).ok_or(Error::EmptyBatch)?;
        if let Some(s) = samples.iter().find(|s| s.0.channels() != channels) {
            return Err(Error::DimensionMismatch {
                expected: channels,
                found: s.0.channels(),
            });
        }
        let max_label = samples.iter().map(|s| s.1).max().unwrap_or(0);
        let classes = classes.unwrap_or(max_label + 1);
        if max_label >= classes {
            return Err(Error::LabelOutOfRange {
                label: max_label,
                classes,
            });
        }
        Ok(Dataset {
            samples,
            classes,
            channels,
            normalization: None,
        })
    }

    pub fn samples(&self) -> &[(TimeSeries, usize)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.1).collect()
    }

    pub fn normalization(&self) -> Option<&Normalization> {
        self.normalization.as_ref()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for (_, y) in &self.samples {
            counts[*y] += 1;
        }
        counts
    }

    /// The samples at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            samples: idx.iter().map(|&i| self.samples[i].clone()).collect(),
            ..self.clone()
        }
    }

    /// Fits every selected sample.
    pub fn fit_all(&self, idx: &[usize], kind: FitKind) -> Result<Vec<(Spline, usize)>> {
        idx.iter()
            .map(|&i| {
                let (ts, y) = &self.samples[i];
                fit(ts, kind).map(|s| (s, *y))
            })
            .collect()
    }
}

/// Per-channel standardization and time rescaling with statistics from the
/// observed entries of the training samples only.
pub fn normalize(ds: &Dataset, train: &[usize]) -> Result<Dataset> {
    if train.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let d = ds.channels;
    let mut sum = vec![0.0; d];
    let mut count = vec![0usize; d];
    let mut time_scale: f64 = 0.0;
    for &i in train {
        let ts = &ds.samples[i].0;
        time_scale = time_scale.max(ts.times().last().copied().unwrap_or(0.0));
        for c in 0..d {
            for (_, v) in ts.observed(c) {
                sum[c] += v;
                count[c] += 1;
            }
        }
    }
    let mean: Vec<f64> = (0..d)
        .map(|c| if count[c] > 0 { sum[c] / count[c] as f64 } else { 0.0 })
        .collect();
    let mut sq = vec![0.0; d];
    for &i in train {
        let ts = &ds.samples[i].0;
        for (c, acc) in sq.iter_mut().enumerate() {
            for (_, v) in ts.observed(c) {
                *acc += (v - mean[c]).powi(2);
            }
        }
    }
    let std: Vec<f64> = (0..d)
        .map(|c| {
            let s = if count[c] > 0 { (sq[c] / count[c] as f64).sqrt() } else { 0.0 };
            if s < MIN_STD { 1.0 } else { s }
        })
        .collect();
    if !(time_scale > 0.0) {
        time_scale = 1.0;
    }
    apply_normalization(
        ds,
        Normalization {
            mean,
            std,
            time_scale,
        },
    )
}

/// Applies stored statistics, e.g. those of a training run, to `ds`.
pub fn apply_normalization(ds: &Dataset, norm: Normalization) -> Result<Dataset> {
    if norm.mean.len() != ds.channels || norm.std.len() != ds.channels {
        return Err(Error::DimensionMismatch {
            expected: norm.mean.len(),
            found: ds.channels,
        });
    }
    let samples = ds
        .samples
        .iter()
        .map(|(ts, y)| {
            ts.map_values(|c, v| norm.apply(c, v))
                .rescale_time(norm.time_scale, 1.0)
                .map(|t| (t, *y))
        })
        .collect::<Result<_>>()?;
    Ok(Dataset {
        samples,
        normalization: Some(norm),
        ..ds.clone()
    })
}

/// Marks each observed entry missing with probability `rate`, redrawing a
/// sample's mask whenever it would lose every observation.
pub fn drop_observations(ds: &Dataset, rate: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("drop rate must lie in [0, 1), got {rate}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = ds
        .samples
        .iter()
        .map(|(ts, y)| {
            let mask = loop {
                let m: Vec<bool> = ts
                    .mask()
                    .iter()
                    .map(|&obs| obs && rng.random::<f64>() >= rate)
                    .collect();
                if m.iter().any(|&k| k) {
                    break m;
                }
            };
            ts.with_mask(mask).map(|t| (t, *y))
        })
        .collect::<Result<_>>()?;
    Ok(Dataset {
        samples,
        ..ds.clone()
    })
}
