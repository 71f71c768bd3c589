use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Relative spacing below which two time stamps are treated as the same knot.
pub const KNOT_TOL: f64 = 1e-9;

/// An irregularly sampled multivariate series with per-entry missingness.
///
/// Values are stored row-major (`n × d`); `mask[i*d + c]` is `false` where
/// channel `c` is missing at `times[i]`. Missing entries hold `0.0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
    mask: Vec<bool>,
    channels: usize,
    horizon: f64,
}

impl TimeSeries {
    /// `rows[i][c]` is `None` for a missing entry.
    pub fn new(times: Vec<f64>, rows: Vec<Vec<Option<f64>>>, horizon: f64) -> Result<Self> {
        let channels = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * channels);
        let mut mask = Vec::with_capacity(rows.len() * channels);
        for row in &rows {
            if row.len() != channels {
                return Err(Error::InvalidSeries(format!(
                    "row has {} channels, expected {channels}",
                    row.len()
                )));
            }
            for v in row {
                values.push(v.unwrap_or(0.0));
                mask.push(v.is_some());
            }
        }
        Self::from_parts(times, values, mask, channels, horizon)
    }

    pub fn from_parts(
        times: Vec<f64>,
        values: Vec<f64>,
        mask: Vec<bool>,
        channels: usize,
        horizon: f64,
    ) -> Result<Self> {
        let ts = TimeSeries {
            times,
            values,
            mask,
            channels,
            horizon,
        };
        ts.validate()?;
        Ok(ts)
    }

    /// Series with every entry observed and horizon equal to the last time.
    pub fn dense(times: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let horizon = times.last().copied().unwrap_or(0.0);
        let rows = rows
            .into_iter()
            .map(|r| r.into_iter().map(Some).collect())
            .collect();
        Self::new(times, rows, horizon)
    }

    fn validate(&self) -> Result<()> {
        let n = self.times.len();
        if self.channels == 0 {
            return Err(Error::InvalidSeries("no channels".into()));
        }
        if self.values.len() != n * self.channels || self.mask.len() != n * self.channels {
            return Err(Error::InvalidSeries(format!(
                "values/mask shape does not match {n} x {}",
                self.channels
            )));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidSeries(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidSeries("non-finite time".into()));
        }
        let min_gap = KNOT_TOL * self.horizon;
        for w in self.times.windows(2) {
            if w[1] - w[0] <= min_gap {
                return Err(Error::InvalidSeries(format!(
                    "times not strictly increasing at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        if let (Some(&first), Some(&last)) = (self.times.first(), self.times.last()) {
            if first < 0.0 || last > self.horizon {
                return Err(Error::InvalidSeries(format!(
                    "times must lie in [0, {}], got [{first}, {last}]",
                    self.horizon
                )));
            }
        }
        if !self.mask.iter().any(|&m| m) {
            return Err(Error::InvalidSeries("no observed values".into()));
        }
        for (v, &m) in self.values.iter().zip(&self.mask) {
            if m && !v.is_finite() {
                return Err(Error::InvalidSeries("non-finite observed value".into()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn value(&self, i: usize, c: usize) -> Option<f64> {
        let k = i * self.channels + c;
        self.mask[k].then(|| self.values[k])
    }

    /// Observed `(time, value)` pairs of one channel.
    pub fn observed(&self, c: usize) -> Vec<(f64, f64)> {
        (0..self.len())
            .filter_map(|i| self.value(i, c).map(|v| (self.times[i], v)))
            .collect()
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Rows as `Option` vectors, the inverse of [`TimeSeries::new`].
    pub fn rows(&self) -> Vec<Vec<Option<f64>>> {
        (0..self.len())
            .map(|i| (0..self.channels).map(|c| self.value(i, c)).collect())
            .collect()
    }

    /// Applies `f(channel, value)` to every observed value.
    pub fn map_values(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        let d = self.channels;
        let values = self
            .values
            .iter()
            .zip(&self.mask)
            .enumerate()
            .map(|(k, (&v, &m))| if m { f(k % d, v) } else { 0.0 })
            .collect();
        TimeSeries {
            values,
            ..self.clone()
        }
    }

    /// Divides all times and the horizon by `scale`, then sets the horizon to
    /// `max(min_horizon, last time)`.
    pub fn rescale_time(&self, scale: f64, min_horizon: f64) -> Result<Self> {
        let times: Vec<f64> = self.times.iter().map(|t| t / scale).collect();
        let last = times.last().copied().unwrap_or(0.0);
        Self::from_parts(
            times,
            self.values.clone(),
            self.mask.clone(),
            self.channels,
            min_horizon.max(last),
        )
    }

    /// Replaces the observed mask. Entries newly marked missing are zeroed.
    pub fn with_mask(&self, mask: Vec<bool>) -> Result<Self> {
        let values = self
            .values
            .iter()
            .zip(&mask)
            .map(|(&v, &m)| if m { v } else { 0.0 })
            .collect();
        Self::from_parts(
            self.times.clone(),
            values,
            mask,
            self.channels,
            self.horizon,
        )
    }
}
