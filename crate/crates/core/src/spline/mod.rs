//! Multi-channel piecewise polynomials over a shared knot grid.
//!
//! Piece `i`, channel `c` lives on `[knots[i], knots[i+1]]` and is stored in
//! the local variable `τ = t - knots[i]`. All pieces share the stride
//! `order + 1`; lower-degree pieces are zero padded.

mod fit;
mod series;

pub use fit::{fit, FitKind, END_STEP};
pub use series::{TimeSeries, KNOT_TOL};

use crate::error::{Error, Result};
use crate::polynomial::{self, check_degree, Polynomial};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SplineRecord", into = "SplineRecord")]
pub struct Spline {
    knots: Vec<f64>,
    channels: usize,
    order: usize,
    coeffs: Vec<f64>,
}

/// On-disk form: `{channels, order, knots, coeffs}` with `coeffs` row-major
/// over `[piece][channel][power]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplineRecord {
    pub channels: usize,
    pub order: usize,
    pub knots: Vec<f64>,
    pub coeffs: Vec<f64>,
}

impl TryFrom<SplineRecord> for Spline {
    type Error = Error;
    fn try_from(r: SplineRecord) -> Result<Self> {
        Spline::new(r.knots, r.channels, r.order, r.coeffs)
    }
}

impl From<Spline> for SplineRecord {
    fn from(s: Spline) -> Self {
        SplineRecord {
            channels: s.channels,
            order: s.order,
            knots: s.knots,
            coeffs: s.coeffs,
        }
    }
}

/// Maps every interval of a finer knot grid to its source interval and the
/// Taylor-shift offset from the source's left knot.
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub knots: Vec<f64>,
    pub src: Vec<usize>,
    pub shift: Vec<f64>,
}

fn validate_knots(knots: &[f64]) -> Result<()> {
    if knots.len() < 2 {
        return Err(Error::InvalidSpline("need at least two knots".into()));
    }
    if knots.iter().any(|k| !k.is_finite()) {
        return Err(Error::InvalidSpline("non-finite knot".into()));
    }
    let span = knots[knots.len() - 1] - knots[0];
    if !(span > 0.0) {
        return Err(Error::InvalidSpline("empty span".into()));
    }
    let min_gap = KNOT_TOL * span;
    if knots.windows(2).any(|w| w[1] - w[0] < min_gap) {
        return Err(Error::InvalidSpline("knots not strictly increasing".into()));
    }
    Ok(())
}

/// Sorted union of two knot vectors spanning the same interval; knots closer
/// than the tolerance to an already kept knot are dropped.
pub fn union_knots(a: &[f64], b: &[f64]) -> Vec<f64> {
    let span = a[a.len() - 1] - a[0];
    let tol = KNOT_TOL * span;
    let mut all: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    all.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for t in all {
        match out.last() {
            Some(&last) if t - last <= tol => {}
            _ => out.push(t),
        }
    }
    // keep `a`'s exact end points
    let n = out.len();
    out[0] = a[0];
    if n > 1 {
        out[n - 1] = a[a.len() - 1];
    }
    // the end-point overwrite can leave a sliver next to the last knot
    while out.len() > 2 && out[out.len() - 1] - out[out.len() - 2] <= tol {
        let last = out.pop().unwrap();
        *out.last_mut().unwrap() = last;
    }
    out
}

impl Spline {
    pub fn new(knots: Vec<f64>, channels: usize, order: usize, coeffs: Vec<f64>) -> Result<Self> {
        validate_knots(&knots)?;
        if channels == 0 {
            return Err(Error::InvalidSpline("no channels".into()));
        }
        let expected = (knots.len() - 1) * channels * (order + 1);
        if coeffs.len() != expected {
            return Err(Error::InvalidSpline(format!(
                "expected {expected} coefficients, got {}",
                coeffs.len()
            )));
        }
        Ok(Spline {
            knots,
            channels,
            order,
            coeffs,
        })
    }

    /// `pieces[i][c]` on `[knots[i], knots[i+1]]`.
    pub fn from_pieces(knots: Vec<f64>, pieces: Vec<Vec<Polynomial>>) -> Result<Self> {
        validate_knots(&knots)?;
        if pieces.len() != knots.len() - 1 {
            return Err(Error::InvalidSpline(format!(
                "{} pieces for {} intervals",
                pieces.len(),
                knots.len() - 1
            )));
        }
        let channels = pieces[0].len();
        if pieces.iter().any(|row| row.len() != channels) {
            return Err(Error::InvalidSpline("ragged pieces".into()));
        }
        let order = pieces
            .iter()
            .flatten()
            .map(Polynomial::degree)
            .max()
            .unwrap_or(0);
        let stride = order + 1;
        let mut coeffs = vec![0.0; pieces.len() * channels * stride];
        for (i, row) in pieces.iter().enumerate() {
            for (c, p) in row.iter().enumerate() {
                let off = (i * channels + c) * stride;
                coeffs[off..off + p.coeffs().len()].copy_from_slice(p.coeffs());
            }
        }
        Spline::new(knots, channels, order, coeffs)
    }

    pub fn zeros(knots: Vec<f64>, channels: usize, order: usize) -> Result<Self> {
        let n = (knots.len().max(1) - 1) * channels * (order + 1);
        Spline::new(knots, channels, order, vec![0.0; n])
    }

    /// Constant spline with one value per channel.
    pub fn constant(knots: Vec<f64>, values: &[f64]) -> Result<Self> {
        let m = knots.len().max(1) - 1;
        let coeffs = (0..m).flat_map(|_| values.iter().copied()).collect();
        Spline::new(knots, values.len(), 0, coeffs)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn stride(&self) -> usize {
        self.order + 1
    }

    pub fn num_pieces(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn span(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    pub fn span_length(&self) -> f64 {
        let (a, b) = self.span();
        b - a
    }

    pub fn width(&self, i: usize) -> f64 {
        self.knots[i + 1] - self.knots[i]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn piece(&self, i: usize, c: usize) -> &[f64] {
        let s = self.stride();
        let off = (i * self.channels + c) * s;
        &self.coeffs[off..off + s]
    }

    pub fn piece_mut(&mut self, i: usize, c: usize) -> &mut [f64] {
        let s = self.stride();
        let off = (i * self.channels + c) * s;
        &mut self.coeffs[off..off + s]
    }

    pub fn polynomial(&self, i: usize, c: usize) -> Polynomial {
        Polynomial::new(self.piece(i, c).to_vec())
    }

    /// Same knots and channels, all coefficients zero.
    pub fn zeros_like(&self) -> Spline {
        Spline {
            coeffs: vec![0.0; self.coeffs.len()],
            ..self.clone()
        }
    }

    /// Pads (or truncates) every piece to `order + 1` coefficients.
    pub fn with_order(&self, order: usize) -> Spline {
        if order == self.order {
            return self.clone();
        }
        let (old, new) = (self.stride(), order + 1);
        let mut coeffs = vec![0.0; self.num_pieces() * self.channels * new];
        for (dst, src) in coeffs.chunks_mut(new).zip(self.coeffs.chunks(old)) {
            let n = old.min(new);
            dst[..n].copy_from_slice(&src[..n]);
        }
        Spline {
            knots: self.knots.clone(),
            channels: self.channels,
            order,
            coeffs,
        }
    }

    /// Interval index and local offset for `t`, clamped to the span. At an
    /// interior knot the right-hand piece is returned; at the last knot the
    /// last piece at its right end point.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let (a, b) = self.span();
        let t = t.clamp(a, b);
        let m = self.num_pieces();
        let i = self.knots.partition_point(|&k| k <= t).saturating_sub(1).min(m - 1);
        (i, t - self.knots[i])
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let (i, tau) = self.locate(t);
        (0..self.channels)
            .map(|c| polynomial::eval_slice(self.piece(i, c), tau))
            .collect()
    }

    pub fn eval_channel(&self, c: usize, t: f64) -> f64 {
        let (i, tau) = self.locate(t);
        polynomial::eval_slice(self.piece(i, c), tau)
    }

    pub fn derivative(&self) -> Spline {
        let order = self.order.saturating_sub(1);
        let stride = order + 1;
        let mut coeffs = Vec::with_capacity(self.num_pieces() * self.channels * stride);
        for p in self.coeffs.chunks(self.stride()) {
            let mut d = polynomial::derivative_slice(p);
            d.resize(stride, 0.0);
            coeffs.extend(d);
        }
        Spline {
            knots: self.knots.clone(),
            channels: self.channels,
            order,
            coeffs,
        }
    }

    /// One channel as its own spline.
    pub fn channel(&self, c: usize) -> Spline {
        let coeffs = (0..self.num_pieces())
            .flat_map(|i| self.piece(i, c).iter().copied())
            .collect();
        Spline {
            knots: self.knots.clone(),
            channels: 1,
            order: self.order,
            coeffs,
        }
    }

    /// Concatenates channels of splines with identical knots.
    pub fn stack(parts: &[Spline]) -> Result<Spline> {
        let first = parts.first().ok_or(Error::EmptyBatch)?;
        let order = parts.iter().map(|s| s.order).max().unwrap_or(0);
        let channels: usize = parts.iter().map(|s| s.channels).sum();
        for s in parts {
            if s.knots != first.knots {
                return Err(Error::InvalidSpline("stacked splines need identical knots".into()));
            }
        }
        let stride = order + 1;
        let mut coeffs = Vec::with_capacity(first.num_pieces() * channels * stride);
        for i in 0..first.num_pieces() {
            for s in parts {
                for c in 0..s.channels {
                    let p = s.piece(i, c);
                    coeffs.extend_from_slice(p);
                    coeffs.extend(std::iter::repeat_n(0.0, stride - p.len()));
                }
            }
        }
        Spline::new(first.knots.clone(), channels, order, coeffs)
    }

    /// Adds a knot at `t`, splitting the containing interval. The right half
    /// is the original piece Taylor-shifted by `t - knots[i]`.
    pub fn insert_knot(&self, t: f64) -> Result<Spline> {
        let (a, b) = self.span();
        if !(t > a && t < b) {
            return Err(Error::OutOfRange { t, lo: a, hi: b });
        }
        let tol = KNOT_TOL * (b - a);
        let (i, tau) = self.locate(t);
        if tau <= tol || self.knots[i + 1] - t <= tol {
            return Ok(self.clone());
        }
        let mut knots = self.knots.clone();
        knots.insert(i + 1, t);
        Ok(self.refine(&knots))
    }

    /// Plan for re-expressing this spline on `target`, which must cover the
    /// same span and contain (up to tolerance) every current knot.
    pub fn refinement_to(&self, target: &[f64]) -> Refinement {
        let mut src = Vec::with_capacity(target.len() - 1);
        let mut shift = Vec::with_capacity(target.len() - 1);
        for w in target.windows(2) {
            let (i, _) = self.locate(0.5 * (w[0] + w[1]));
            src.push(i);
            shift.push(w[0] - self.knots[i]);
        }
        Refinement {
            knots: target.to_vec(),
            src,
            shift,
        }
    }

    pub fn apply_refinement(&self, r: &Refinement) -> Spline {
        let stride = self.stride();
        let mut coeffs = Vec::with_capacity(r.src.len() * self.channels * stride);
        for (&i, &s) in r.src.iter().zip(&r.shift) {
            for c in 0..self.channels {
                let mut p = self.piece(i, c).to_vec();
                polynomial::shift_in_place(&mut p, s);
                coeffs.extend(p);
            }
        }
        Spline {
            knots: r.knots.clone(),
            channels: self.channels,
            order: self.order,
            coeffs,
        }
    }

    /// Re-expresses the spline on a superset knot grid.
    pub fn refine(&self, target: &[f64]) -> Spline {
        if target == self.knots.as_slice() {
            return self.clone();
        }
        self.apply_refinement(&self.refinement_to(target))
    }

    fn check_span(&self, other: &Spline) -> Result<()> {
        let (a0, a1) = self.span();
        let (b0, b1) = other.span();
        let tol = KNOT_TOL * (a1 - a0).max(b1 - b0);
        if (a0 - b0).abs() > tol || (a1 - b1).abs() > tol {
            return Err(Error::SpanMismatch { a0, a1, b0, b1 });
        }
        Ok(())
    }

    fn check_channels(&self, other: &Spline) -> Result<()> {
        if self.channels != other.channels {
            return Err(Error::DimensionMismatch {
                expected: self.channels,
                found: other.channels,
            });
        }
        Ok(())
    }

    /// Both splines re-expressed on the union of their knots.
    pub fn align(a: &Spline, b: &Spline) -> Result<(Spline, Spline)> {
        a.check_span(b)?;
        if a.knots == b.knots {
            return Ok((a.clone(), b.clone()));
        }
        let u = union_knots(&a.knots, &b.knots);
        Ok((a.refine(&u), b.refine(&u)))
    }

    fn zip_pieces(
        a: &Spline,
        b: &Spline,
        order: usize,
        op: impl Fn(&[f64], &[f64]) -> Vec<f64>,
    ) -> Result<Spline> {
        a.check_channels(b)?;
        let (a, b) = Spline::align(a, b)?;
        let stride = order + 1;
        let mut coeffs = Vec::with_capacity(a.num_pieces() * a.channels * stride);
        for i in 0..a.num_pieces() {
            for c in 0..a.channels {
                let mut r = op(a.piece(i, c), b.piece(i, c));
                r.resize(stride, 0.0);
                coeffs.extend(r);
            }
        }
        Spline::new(a.knots, a.channels, order, coeffs)
    }

    pub fn add(&self, other: &Spline) -> Result<Spline> {
        let order = self.order.max(other.order);
        Spline::zip_pieces(self, other, order, |p, q| {
            let mut r = vec![0.0; p.len().max(q.len())];
            r.iter_mut().zip(p).for_each(|(x, y)| *x += y);
            r.iter_mut().zip(q).for_each(|(x, y)| *x += y);
            r
        })
    }

    pub fn sub(&self, other: &Spline) -> Result<Spline> {
        self.add(&other.scale(-1.0))
    }

    /// Pointwise (channel-wise) product; order is the sum of orders.
    pub fn mul(&self, other: &Spline) -> Result<Spline> {
        let order = self.order + other.order;
        check_degree(order)?;
        Spline::zip_pieces(self, other, order, polynomial::mul_slices)
    }

    pub fn scale(&self, factor: f64) -> Spline {
        Spline {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
            ..self.clone()
        }
    }

    /// Integral of every piece over its own interval, `[piece][channel]`.
    pub fn piece_integrals(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_pieces() * self.channels);
        for i in 0..self.num_pieces() {
            let h = self.width(i);
            for c in 0..self.channels {
                out.push(integrate_local(self.piece(i, c), h));
            }
        }
        out
    }

    /// Running integral from the first knot; order grows by one and the
    /// result is continuous.
    pub fn integrate(&self) -> Result<Spline> {
        let order = self.order + 1;
        check_degree(order)?;
        let stride = order + 1;
        let mut coeffs = Vec::with_capacity(self.num_pieces() * self.channels * stride);
        let mut running = vec![0.0; self.channels];
        for i in 0..self.num_pieces() {
            let h = self.width(i);
            for (c, acc) in running.iter_mut().enumerate() {
                let p = self.piece(i, c);
                coeffs.push(*acc);
                coeffs.extend(p.iter().enumerate().map(|(j, x)| x / (j + 1) as f64));
                *acc += integrate_local(p, h);
            }
        }
        Spline::new(self.knots.clone(), self.channels, order, coeffs)
    }

    fn cumulative(&self, t: f64) -> Vec<f64> {
        let (i, tau) = self.locate(t);
        let mut acc = vec![0.0; self.channels];
        for j in 0..i {
            let h = self.width(j);
            for (c, a) in acc.iter_mut().enumerate() {
                *a += integrate_local(self.piece(j, c), h);
            }
        }
        for (c, a) in acc.iter_mut().enumerate() {
            *a += integrate_local(self.piece(i, c), tau);
        }
        acc
    }

    /// `∫_a^b` per channel.
    pub fn definite_integral(&self, a: f64, b: f64) -> Result<Vec<f64>> {
        let (lo, hi) = self.span();
        if !(lo <= a && a <= hi) {
            return Err(Error::OutOfRange { t: a, lo, hi });
        }
        if !(a <= b && b <= hi) {
            return Err(Error::OutOfRange { t: b, lo: a, hi });
        }
        if a == b {
            return Ok(vec![0.0; self.channels]);
        }
        let fa = self.cumulative(a);
        let fb = self.cumulative(b);
        Ok(fb.iter().zip(&fa).map(|(x, y)| x - y).collect())
    }

    /// Signed area over the whole span, per channel.
    pub fn area(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.channels];
        for i in 0..self.num_pieces() {
            let h = self.width(i);
            for (c, a) in acc.iter_mut().enumerate() {
                *a += integrate_local(self.piece(i, c), h);
            }
        }
        acc
    }

    /// `Σ_c (s_c - k_c)²` as a one-channel spline.
    pub fn squared_distance_curve(&self, kernel: &Spline) -> Result<Spline> {
        self.check_channels(kernel)?;
        let order = 2 * self.order.max(kernel.order);
        check_degree(order)?;
        let (s, k) = Spline::align(self, kernel)?;
        let stride = order + 1;
        let mut coeffs = vec![0.0; s.num_pieces() * stride];
        let mut diff = vec![0.0; s.stride().max(k.stride())];
        for i in 0..s.num_pieces() {
            let out = &mut coeffs[i * stride..(i + 1) * stride];
            for c in 0..s.channels {
                diff.iter_mut().for_each(|x| *x = 0.0);
                diff.iter_mut().zip(s.piece(i, c)).for_each(|(x, y)| *x += y);
                diff.iter_mut().zip(k.piece(i, c)).for_each(|(x, y)| *x -= y);
                for (o, v) in out.iter_mut().zip(polynomial::mul_slices(&diff, &diff)) {
                    *o += v;
                }
            }
        }
        Spline::new(s.knots, 1, order, coeffs)
    }

    /// Exact ReLU: roots become knots, negative pieces become zero.
    pub fn relu(&self) -> Spline {
        let tol = KNOT_TOL * self.span_length();
        let mut extra = Vec::new();
        for i in 0..self.num_pieces() {
            let h = self.width(i);
            for c in 0..self.channels {
                for r in polynomial::real_roots_in(self.piece(i, c), 0.0, h) {
                    if r > tol && h - r > tol {
                        extra.push(self.knots[i] + r);
                    }
                }
            }
        }
        let mut out = if extra.is_empty() {
            self.clone()
        } else {
            self.refine(&union_knots(&self.knots, &extra))
        };
        for i in 0..out.num_pieces() {
            let mid = 0.5 * out.width(i);
            for c in 0..out.channels {
                let p = out.piece_mut(i, c);
                if polynomial::eval_slice(p, mid) < 0.0 {
                    p.iter_mut().for_each(|x| *x = 0.0);
                }
            }
        }
        out
    }

    /// Query times `start + offset·length` for offsets in `[0, 1]`.
    pub fn query_times(&self, offsets: &[f64]) -> Vec<f64> {
        let (a, b) = self.span();
        offsets.iter().map(|o| a + o * (b - a)).collect()
    }

    /// Evaluates the spline at `offsets` along its span; one row per offset.
    pub fn segment_query(&self, offsets: &[f64]) -> Vec<Vec<f64>> {
        self.query_times(offsets).into_iter().map(|t| self.eval(t)).collect()
    }
}

/// `∫_0^h p(τ) dτ`.
pub fn integrate_local(p: &[f64], h: f64) -> f64 {
    let mut acc = 0.0;
    for (j, &x) in p.iter().enumerate().rev() {
        acc = acc * h + x / (j + 1) as f64;
    }
    acc * h
}

/// `d/dp_j ∫_0^h p = h^{j+1}/(j+1)`, for `len` coefficients.
pub fn integral_weights(h: f64, len: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(len);
    let mut hp = h;
    for j in 0..len {
        w.push(hp / (j + 1) as f64);
        hp *= h;
    }
    w
}
