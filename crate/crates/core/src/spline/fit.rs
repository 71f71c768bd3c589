use super::{union_knots, Spline, TimeSeries, KNOT_TOL};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    /// Previous-value hold.
    Constant,
    /// Chords between consecutive observations.
    Linear,
    /// Natural cubic interpolant (zero second derivative at the ends).
    #[default]
    NaturalCubic,
}

impl FitKind {
    pub fn order(self) -> usize {
        match self {
            FitKind::Constant => 0,
            FitKind::Linear => 1,
            FitKind::NaturalCubic => 3,
        }
    }
}

impl fmt::Display for FitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitKind::Constant => "constant",
            FitKind::Linear => "linear",
            FitKind::NaturalCubic => "natural_cubic",
        })
    }
}

impl FromStr for FitKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(FitKind::Constant),
            "linear" => Ok(FitKind::Linear),
            "natural_cubic" | "cubic" => Ok(FitKind::NaturalCubic),
            other => Err(Error::Config(format!("unknown fit kind `{other}`"))),
        }
    }
}

/// Fits each channel on its own observations, then merges all channels onto
/// one knot grid `{0} ∪ observed times ∪ {horizon}`. A constant fit whose
/// last observation lies on the horizon also gets a knot [`END_STEP`]
/// before it, so the final value is reproduced there.
///
/// Channels are held constant outside their observed span; a channel with no
/// observations is the constant 0.
pub fn fit(ts: &TimeSeries, kind: FitKind) -> Result<Spline> {
    if ts.observed_count() == 0 {
        return Err(Error::InvalidSeries("no observed values".into()));
    }
    let horizon = ts.horizon();
    let observed_times: Vec<f64> = (0..ts.len())
        .filter(|&i| (0..ts.channels()).any(|c| ts.value(i, c).is_some()))
        .map(|i| ts.times()[i])
        .collect();
    let mut grid = union_knots(&[0.0, horizon], &observed_times);
    let channels: Vec<Vec<(f64, f64)>> = (0..ts.channels())
        .map(|c| ts.observed(c).into_iter().map(|(t, x)| (snap(&grid, t), x)).collect())
        .collect();

    // A previous-value hold jumps exactly at an observation. At the right end
    // of the span there is no piece to hold the new value, so the step is
    // placed on a sliver piece just before the horizon.
    let sliver = horizon - END_STEP * horizon;
    let needs_sliver = kind == FitKind::Constant
        && channels.iter().any(|o| o.len() > 1 && o[o.len() - 1].0 == horizon)
        && sliver - grid[grid.len() - 2] > KNOT_TOL * horizon;
    if needs_sliver {
        grid.insert(grid.len() - 1, sliver);
    }

    let parts = channels
        .iter()
        .map(|obs| {
            let mut s = fit_channel(obs, kind, horizon)?.refine(&grid);
            if needs_sliver && obs.len() > 1 && obs[obs.len() - 1].0 == horizon {
                let last = s.num_pieces() - 1;
                s.piece_mut(last, 0)[0] = obs[obs.len() - 1].1;
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    Spline::stack(&parts)
}

/// Width of the final step piece of a constant fit, relative to the horizon.
pub const END_STEP: f64 = 4.0 * KNOT_TOL;

/// Moves `t` onto the grid knot it was merged into.
fn snap(grid: &[f64], t: f64) -> f64 {
    let tol = KNOT_TOL * (grid[grid.len() - 1] - grid[0]);
    let i = grid.partition_point(|&k| k < t);
    [i.saturating_sub(1), i.min(grid.len() - 1)]
        .into_iter()
        .map(|j| grid[j])
        .find(|k| (k - t).abs() <= tol)
        .unwrap_or(t)
}

fn fit_channel(obs: &[(f64, f64)], kind: FitKind, horizon: f64) -> Result<Spline> {
    let span = [0.0, horizon];
    match obs.len() {
        0 => return Spline::constant(span.to_vec(), &[0.0]),
        1 => return Spline::constant(span.to_vec(), &[obs[0].1]),
        _ => {}
    }
    let times: Vec<f64> = obs.iter().map(|o| o.0).collect();
    let xs: Vec<f64> = obs.iter().map(|o| o.1).collect();
    let kind = if kind == FitKind::NaturalCubic && obs.len() < 3 {
        FitKind::Linear
    } else {
        kind
    };

    let inner: Vec<Vec<f64>> = match kind {
        FitKind::Constant => xs[..xs.len() - 1].iter().map(|&x| vec![x]).collect(),
        FitKind::Linear => times
            .windows(2)
            .zip(xs.windows(2))
            .map(|(t, x)| vec![x[0], (x[1] - x[0]) / (t[1] - t[0])])
            .collect(),
        FitKind::NaturalCubic => natural_cubic_pieces(&times, &xs),
    };

    let (first, last) = (times[0], times[times.len() - 1]);
    let tol = KNOT_TOL * horizon;
    let mut knots = Vec::with_capacity(times.len() + 2);
    let mut pieces: Vec<Vec<f64>> = Vec::with_capacity(inner.len() + 2);
    if first > tol {
        knots.push(0.0);
        pieces.push(vec![xs[0]]);
    }
    knots.extend_from_slice(&times);
    pieces.extend(inner);
    if horizon - last > tol {
        knots.push(horizon);
        pieces.push(vec![xs[xs.len() - 1]]);
    }

    let order = kind.order();
    let stride = order + 1;
    let mut coeffs = Vec::with_capacity(pieces.len() * stride);
    for mut p in pieces {
        p.resize(stride, 0.0);
        coeffs.extend(p);
    }
    Spline::new(knots, 1, order, coeffs)
}

/// Local-variable cubic pieces `[a, b, c, d]` of the natural interpolant,
/// from the tridiagonal system in the knot second derivatives.
fn natural_cubic_pieces(t: &[f64], y: &[f64]) -> Vec<Vec<f64>> {
    let n = t.len();
    let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    let slope: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();

    // unknowns M_1..M_{n-2}; M_0 = M_{n-1} = 0
    let m = n - 2;
    let mut second = vec![0.0; n];
    if m > 0 {
        let mut diag: Vec<f64> = (1..=m).map(|i| 2.0 * (h[i - 1] + h[i])).collect();
        let mut rhs: Vec<f64> = (1..=m).map(|i| 6.0 * (slope[i] - slope[i - 1])).collect();
        // Thomas algorithm; sub- and super-diagonals are h[i] for row i/i+1
        for k in 1..m {
            let w = h[k] / diag[k - 1];
            diag[k] -= w * h[k];
            rhs[k] -= w * rhs[k - 1];
        }
        second[m] = rhs[m - 1] / diag[m - 1];
        for k in (0..m - 1).rev() {
            second[k + 1] = (rhs[k] - h[k + 1] * second[k + 2]) / diag[k];
        }
    }

    (0..n - 1)
        .map(|i| {
            let (m0, m1) = (second[i], second[i + 1]);
            vec![
                y[i],
                slope[i] - h[i] * (2.0 * m0 + m1) / 6.0,
                0.5 * m0,
                (m1 - m0) / (6.0 * h[i]),
            ]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polynomial::eval_slice;

    fn series(times: &[f64], rows: Vec<Vec<Option<f64>>>, horizon: f64) -> TimeSeries {
        TimeSeries::new(times.to_vec(), rows, horizon).unwrap()
    }

    #[test]
    fn linear_two_points() {
        let ts = series(&[0.0, 2.0], vec![vec![Some(1.0)], vec![Some(5.0)]], 2.0);
        let s = fit(&ts, FitKind::Linear).unwrap();
        assert_eq!(s.knots(), &[0.0, 2.0]);
        assert_eq!(s.piece(0, 0), &[1.0, 2.0]);
        assert_eq!(s.eval(1.0), vec![3.0]);
    }

    #[test]
    fn single_observation_is_constant() {
        let ts = series(&[1.0], vec![vec![Some(3.0)]], 2.0);
        for kind in [FitKind::Constant, FitKind::Linear, FitKind::NaturalCubic] {
            let s = fit(&ts, kind).unwrap();
            for t in [0.0, 0.5, 1.0, 1.7, 2.0] {
                assert_eq!(s.eval(t), vec![3.0]);
            }
        }
    }

    #[test]
    fn channels_share_grid() {
        let ts = series(
            &[0.0, 1.0, 2.0],
            vec![
                vec![Some(0.0), Some(1.0)],
                vec![Some(2.0), None],
                vec![Some(1.0), Some(5.0)],
            ],
            2.0,
        );
        let s = fit(&ts, FitKind::Linear).unwrap();
        assert_eq!(s.knots(), &[0.0, 1.0, 2.0]);
        // B's chord 1 + 2t, shifted by 1 on the right interval
        assert_eq!(s.piece(1, 1), &[3.0, 2.0]);
        for i in 0..100 {
            let t = 2.0 * i as f64 / 99.0;
            let b = 1.0 + 2.0 * t;
            assert!((s.eval(t)[1] - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_holds_previous_and_extends() {
        let ts = series(&[0.2, 0.5, 0.8], vec![vec![Some(1.0)], vec![Some(-1.0)], vec![Some(4.0)]], 1.0);
        let s = fit(&ts, FitKind::Constant).unwrap();
        assert_eq!(s.knots(), &[0.0, 0.2, 0.5, 0.8, 1.0]);
        let expect = [(0.0, 1.0), (0.1, 1.0), (0.2, 1.0), (0.49, 1.0), (0.5, -1.0), (0.79, -1.0), (0.8, 4.0), (1.0, 4.0)];
        for (t, v) in expect {
            assert_eq!(s.eval(t), vec![v], "t={t}");
        }
    }

    #[test]
    fn constant_reproduces_an_observation_on_the_horizon() {
        let ts = series(&[0.0, 1.0, 2.5, 4.0], vec![vec![Some(1.0), None], vec![Some(2.0), Some(7.0)], vec![None, Some(3.0)], vec![Some(0.5), Some(-1.0)]], 4.0);
        let s = fit(&ts, FitKind::Constant).unwrap();
        assert_eq!(s.eval(4.0), vec![0.5, -1.0]);
        assert_eq!(s.eval(3.9), vec![2.0, 3.0]);
        assert_eq!(s.eval(2.5), vec![2.0, 3.0]);
        let k = s.knots();
        assert_eq!(k[k.len() - 2], 4.0 - END_STEP * 4.0);
        // the sliver changes the area by only END_STEP · span · jump
        let a = s.area();
        assert!((a[0] - (1.0 + 2.0 * 3.0)).abs() < 1e-7);
    }

    #[test]
    fn empty_channel_is_zero() {
        let ts = series(&[0.0, 1.0], vec![vec![Some(1.0), None], vec![Some(2.0), None]], 1.0);
        let s = fit(&ts, FitKind::NaturalCubic).unwrap();
        assert!(s.channel(1).coeffs().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn cubic_matches_known_solution() {
        // natural cubic through (0,0),(1,1),(2,0): M1 = -3
        let pieces = natural_cubic_pieces(&[0.0, 1.0, 2.0], &[0.0, 1.0, 0.0]);
        assert_eq!(pieces[0], vec![0.0, 1.5, 0.0, -0.5]);
        assert_eq!(pieces[1], vec![1.0, 0.0, -1.5, 0.5]);
    }

    #[test]
    fn cubic_is_smooth_and_natural() {
        let t = [0.0, 0.13, 0.3, 0.31, 0.55, 0.8, 0.97];
        let y = [0.3, -1.2, 0.8, 0.9, 2.0, -0.4, 0.1];
        let ts = TimeSeries::dense(t.to_vec(), y.iter().map(|&v| vec![v]).collect()).unwrap();
        let s = fit(&ts, FitKind::NaturalCubic).unwrap();
        let d1 = s.derivative();
        let d2 = d1.derivative();
        for i in 1..s.num_pieces() {
            let h = s.width(i - 1);
            for sp in [&s, &d1, &d2] {
                let left = eval_slice(sp.piece(i - 1, 0), h);
                let right = sp.piece(i, 0)[0];
                assert!((left - right).abs() < 1e-9 * (1.0 + right.abs()));
            }
        }
        assert!(d2.eval(0.0)[0].abs() < 1e-9);
        assert!(eval_slice(d2.piece(s.num_pieces() - 1, 0), s.width(s.num_pieces() - 1)).abs() < 1e-9);
        for (ti, yi) in t.iter().zip(y) {
            assert!((s.eval(*ti)[0] - yi).abs() < 1e-12);
        }
    }

    #[test]
    fn cubic_degrades_to_linear() {
        let ts = series(&[0.0, 1.0], vec![vec![Some(0.0)], vec![Some(2.0)]], 1.0);
        let s = fit(&ts, FitKind::NaturalCubic).unwrap();
        assert_eq!(s.order(), 1);
        assert_eq!(s.eval(0.5), vec![1.0]);
    }

    #[test]
    fn parse_kind() {
        assert_eq!("linear".parse::<FitKind>().unwrap(), FitKind::Linear);
        assert_eq!(FitKind::NaturalCubic.to_string(), "natural_cubic");
        assert!("quintic".parse::<FitKind>().is_err());
    }
}
