use super::{drop_observations, Dataset};
use crate::error::{Error, Result};
use crate::spline::TimeSeries;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Standard deviation of the class-2 Gaussian bump.
pub const BUMP_WIDTH: f64 = 0.15;
const MAX_PHASE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_per_class: usize,
    pub channels: usize,
    /// Inclusive range of observation counts per sample.
    pub min_len: usize,
    pub max_len: usize,
    pub noise: f64,
    pub drop_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_per_class: 200,
            channels: 1,
            min_len: 30,
            max_len: 60,
            noise: 0.3,
            drop_rate: 0.3,
            seed: 0,
        }
    }
}

/// Shape of class `class` on the unit interval. `f`, `phase` and `center`
/// are the per-channel random draws.
pub fn template(class: usize, f: f64, phase: f64, center: f64, t: f64) -> f64 {
    match class {
        0 => (2.0 * PI * f * t + phase).sin(),
        1 => {
            let u = f * t + phase / (2.0 * PI);
            2.0 * (u - u.floor()) - 1.0
        }
        _ => (-(t - center).powi(2) / (2.0 * BUMP_WIDTH * BUMP_WIDTH)).exp(),
    }
}

/// One time per bin of width `1/n`, jittered within the middle half of the
/// bin, so neighbouring times are at least `1/(2n)` apart.
fn sample_times<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|i| (i as f64 + rng.random_range(0.25..0.75)) / n as f64)
        .collect()
}

/// Three shape classes (sine, sawtooth, Gaussian bump) with identical
/// sampling-time distributions, then per-entry missingness.
pub fn synth_shapes(cfg: &SynthConfig) -> Result<Dataset> {
    if cfg.n_per_class == 0 || cfg.channels == 0 {
        return Err(Error::Config("synthetic data needs n ≥ 1 and d ≥ 1".into()));
    }
    if cfg.min_len == 0 || cfg.min_len > cfg.max_len {
        return Err(Error::Config("length range must satisfy 1 ≤ min ≤ max".into()));
    }
    if !(cfg.noise >= 0.0) {
        return Err(Error::Config("noise must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise).map_err(|e| Error::Config(e.to_string()))?;
    let mut samples = Vec::with_capacity(3 * cfg.n_per_class);
    for _ in 0..cfg.n_per_class {
        for class in 0..3 {
            let n = rng.random_range(cfg.min_len..=cfg.max_len);
            let times = sample_times(n, &mut rng);
            let draws: Vec<(f64, f64, f64)> = (0..cfg.channels)
                .map(|_| {
                    (
                        rng.random_range(1.0..=3.0),
                        rng.random_range(-MAX_PHASE..=MAX_PHASE),
                        rng.random_range(0.3..=0.7),
                    )
                })
                .collect();
            let rows = times
                .iter()
                .map(|&t| {
                    draws
                        .iter()
                        .map(|&(f, p, c)| Some(template(class, f, p, c, t) + noise.sample(&mut rng)))
                        .collect()
                })
                .collect();
            samples.push((TimeSeries::new(times, rows, 1.0)?, class));
        }
    }
    let ds = Dataset::new(samples, Some(3))?;
    drop_observations(&ds, cfg.drop_rate, cfg.seed ^ 0x5eed_d809)
}
