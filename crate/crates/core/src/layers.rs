//! Spline-to-spline layers and their adjoints.
//!
//! Every layer is linear or polynomial in the coefficients of its inputs, so
//! each `*_backward` is the exact transpose (or product-rule transpose) of the
//! forward map. Gradients with respect to a spline are returned as a spline
//! with the same knots and stride, holding `dL/dcoefficient`.

use crate::error::{Error, Result};
use crate::polynomial::{self, check_degree};
use crate::spline::{integral_weights, integrate_local, union_knots, Refinement, Spline};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// `S_y(t) = W S_x(t) + b`; `weight` is `d_out × d_in`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    pub d_in: usize,
    pub d_out: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl AffineParams {
    pub fn new(d_in: usize, d_out: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if d_out == 0 || weight.len() != d_in * d_out || bias.len() != d_out {
            return Err(Error::Config(format!(
                "affine {d_in}->{d_out} needs {} weights and {d_out} biases",
                d_in * d_out
            )));
        }
        if weight.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("affine".into()));
        }
        Ok(AffineParams {
            d_in,
            d_out,
            weight,
            bias,
        })
    }

    pub fn identity(d: usize) -> Self {
        let mut weight = vec![0.0; d * d];
        for i in 0..d {
            weight[i * d + i] = 1.0;
        }
        AffineParams {
            d_in: d,
            d_out: d,
            weight,
            bias: vec![0.0; d],
        }
    }
}

pub fn affine_forward(s: &Spline, p: &AffineParams) -> Result<Spline> {
    affine_raw(s, &p.weight, &p.bias, p.d_out)
}

pub(crate) fn affine_raw(s: &Spline, weight: &[f64], bias: &[f64], d_out: usize) -> Result<Spline> {
    let d_in = s.channels();
    if weight.len() != d_in * d_out {
        return Err(Error::DimensionMismatch {
            expected: weight.len() / d_out.max(1),
            found: d_in,
        });
    }
    let stride = s.stride();
    let mut coeffs = vec![0.0; s.num_pieces() * d_out * stride];
    for i in 0..s.num_pieces() {
        for o in 0..d_out {
            let out = &mut coeffs[(i * d_out + o) * stride..(i * d_out + o + 1) * stride];
            for j in 0..d_in {
                let w = weight[o * d_in + j];
                if w != 0.0 {
                    for (x, y) in out.iter_mut().zip(s.piece(i, j)) {
                        *x += w * y;
                    }
                }
            }
            out[0] += bias[o];
        }
    }
    Spline::new(s.knots().to_vec(), d_out, s.order(), coeffs)
}

/// Returns `(dL/ds, dL/dW, dL/db)`.
pub fn affine_backward(
    s: &Spline,
    weight: &[f64],
    d_out: usize,
    g_out: &Spline,
) -> (Spline, Vec<f64>, Vec<f64>) {
    let d_in = s.channels();
    let mut g_s = s.zeros_like();
    let mut g_w = vec![0.0; d_in * d_out];
    let mut g_b = vec![0.0; d_out];
    for i in 0..s.num_pieces() {
        for o in 0..d_out {
            let g = g_out.piece(i, o);
            g_b[o] += g[0];
            for j in 0..d_in {
                let x = s.piece(i, j);
                g_w[o * d_in + j] += g.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                let w = weight[o * d_in + j];
                for (dst, gv) in g_s.piece_mut(i, j).iter_mut().zip(g) {
                    *dst += w * gv;
                }
            }
        }
    }
    (g_s, g_w, g_b)
}

/// Running integral from the span start (continuous sum-pooling).
pub fn integration_layer(s: &Spline) -> Result<Spline> {
    s.integrate()
}

/// Adjoint of [`integration_layer`] given the input spline's geometry.
pub fn integration_backward(s: &Spline, g_out: &Spline) -> Spline {
    let mut g_s = s.zeros_like();
    let m = s.num_pieces();
    let d = s.channels();
    // suffix[c] = Σ_{i' > i} g_out(i', c)[0]: every later piece's offset
    // depends on this piece's full integral
    let mut suffix = vec![0.0; d];
    for i in (0..m).rev() {
        let w = integral_weights(s.width(i), s.stride());
        for c in 0..d {
            let g = g_out.piece(i, c);
            let dst = g_s.piece_mut(i, c);
            for j in 0..dst.len() {
                dst[j] = g[j + 1] / (j + 1) as f64 + suffix[c] * w[j];
            }
        }
        for (c, acc) in suffix.iter_mut().enumerate() {
            *acc += g_out.piece(i, c)[0];
        }
    }
    g_s
}

/// Transpose of [`Spline::apply_refinement`].
pub fn refine_backward(source: &Spline, r: &Refinement, g_target: &Spline) -> Spline {
    let mut g = source.zeros_like();
    for (j, (&src, &shift)) in r.src.iter().zip(&r.shift).enumerate() {
        for c in 0..source.channels() {
            let adj = polynomial::shift_adjoint(g_target.piece(j, c), shift);
            for (dst, v) in g.piece_mut(src, c).iter_mut().zip(adj) {
                *dst += v;
            }
        }
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KernelMode {
    Multiply,
    #[default]
    Distance,
}

impl fmt::Display for KernelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelMode::Multiply => "multiply",
            KernelMode::Distance => "distance",
        })
    }
}

impl FromStr for KernelMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multiply" => Ok(KernelMode::Multiply),
            "distance" => Ok(KernelMode::Distance),
            other => Err(Error::Config(format!("unknown kernel mode `{other}`"))),
        }
    }
}

/// Learnable spline kernels on a fixed uniform grid over `[0, 1]`.
///
/// `coeffs` is laid out `[kernel][piece][channel][power]`, i.e. the
/// concatenated coefficient buffers of each kernel spline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelBank {
    pub count: usize,
    pub grid_size: usize,
    pub channels: usize,
    pub order: usize,
    pub mode: KernelMode,
    pub coeffs: Vec<f64>,
}

impl KernelBank {
    pub fn zeros(
        count: usize,
        grid_size: usize,
        channels: usize,
        order: usize,
        mode: KernelMode,
    ) -> Result<Self> {
        if count == 0 || grid_size < 2 || channels == 0 {
            return Err(Error::Config(
                "kernel bank needs ≥1 kernel, ≥2 grid knots and ≥1 channel".into(),
            ));
        }
        Ok(KernelBank {
            count,
            grid_size,
            channels,
            order,
            mode,
            coeffs: vec![0.0; count * (grid_size - 1) * channels * (order + 1)],
        })
    }

    /// Coefficients i.i.d. normal with standard deviation `1/√(g·d)`.
    pub fn random<R: Rng + ?Sized>(
        count: usize,
        grid_size: usize,
        channels: usize,
        order: usize,
        mode: KernelMode,
        rng: &mut R,
    ) -> Result<Self> {
        let mut bank = Self::zeros(count, grid_size, channels, order, mode)?;
        let std = 1.0 / ((grid_size * channels) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive std");
        for c in bank.coeffs.iter_mut() {
            *c = normal.sample(rng);
        }
        Ok(bank)
    }

    pub fn grid(&self) -> Vec<f64> {
        let g = self.grid_size;
        (0..g)
            .map(|i| if i == g - 1 { 1.0 } else { i as f64 / (g - 1) as f64 })
            .collect()
    }

    pub fn kernel_len(&self) -> usize {
        (self.grid_size - 1) * self.channels * (self.order + 1)
    }

    /// Kernel `k` on the unit grid.
    pub fn kernel(&self, k: usize) -> Spline {
        let n = self.kernel_len();
        Spline::new(
            self.grid(),
            self.channels,
            self.order,
            self.coeffs[k * n..(k + 1) * n].to_vec(),
        )
        .expect("kernel bank layout is valid")
    }

    pub fn set_kernel(&mut self, k: usize, s: &Spline) -> Result<()> {
        if s.knots() != self.grid().as_slice() || s.channels() != self.channels {
            return Err(Error::InvalidSpline("kernel does not match the bank grid".into()));
        }
        let s = s.with_order(self.order);
        let n = self.kernel_len();
        self.coeffs[k * n..(k + 1) * n].copy_from_slice(s.coeffs());
        Ok(())
    }

    /// Kernel `k` stretched from `[0, 1]` onto `[a, b]`.
    pub fn kernel_on_span(&self, k: usize, a: f64, b: f64) -> Spline {
        rescale_to_span(&self.kernel(k), a, b)
    }

    pub fn output_channels(&self) -> usize {
        match self.mode {
            KernelMode::Distance => self.count,
            KernelMode::Multiply => self.count * self.channels,
        }
    }
}

/// `K'(t) = K((t - a)/(b - a))`: knots are mapped affinely and the local
/// coefficient of `τ^j` is divided by `(b - a)^j`.
fn rescale_to_span(unit: &Spline, a: f64, b: f64) -> Spline {
    let len = b - a;
    let knots: Vec<f64> = unit
        .knots()
        .iter()
        .enumerate()
        .map(|(i, u)| if i == unit.knots().len() - 1 { b } else { a + u * len })
        .collect();
    let factors = power_factors(1.0 / len, unit.stride());
    let coeffs = unit
        .coeffs()
        .chunks(unit.stride())
        .flat_map(|p| p.iter().zip(&factors).map(|(c, f)| c * f).collect::<Vec<_>>())
        .collect();
    Spline::new(knots, unit.channels(), unit.order(), coeffs).expect("rescaled kernel is valid")
}

fn power_factors(x: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut p = 1.0;
    for _ in 0..n {
        out.push(p);
        p *= x;
    }
    out
}

/// Intermediates of one kernel layer application, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct KernelCache {
    pub input_refinement: Refinement,
    pub kernel_refinement: Refinement,
    pub aligned_input: Spline,
    pub aligned_kernels: Vec<Spline>,
    pub span_kernels: Vec<Spline>,
}

/// Multiply mode: channel `k·d + c` is `s_c · K_{k,c}`.
/// Distance mode: channel `k` is `Σ_c (s_c - K_{k,c})²`.
pub fn kernel_apply(s: &Spline, bank: &KernelBank) -> Result<Spline> {
    kernel_apply_cached(s, bank).map(|(out, _)| out)
}

pub fn kernel_apply_cached(s: &Spline, bank: &KernelBank) -> Result<(Spline, KernelCache)> {
    if s.channels() != bank.channels {
        return Err(Error::DimensionMismatch {
            expected: bank.channels,
            found: s.channels(),
        });
    }
    let order = match bank.mode {
        KernelMode::Distance => 2 * s.order().max(bank.order),
        KernelMode::Multiply => s.order() + bank.order,
    };
    check_degree(order)?;

    let (a, b) = s.span();
    let span_kernels: Vec<Spline> = (0..bank.count).map(|k| bank.kernel_on_span(k, a, b)).collect();
    let union = union_knots(s.knots(), span_kernels[0].knots());
    let input_refinement = s.refinement_to(&union);
    let kernel_refinement = span_kernels[0].refinement_to(&union);
    let aligned_input = s.apply_refinement(&input_refinement);
    let aligned_kernels: Vec<Spline> = span_kernels
        .iter()
        .map(|k| k.apply_refinement(&kernel_refinement))
        .collect();

    let d = s.channels();
    let m = aligned_input.num_pieces();
    let stride = order + 1;
    let out_channels = bank.output_channels();
    let mut coeffs = vec![0.0; m * out_channels * stride];
    let width = aligned_input.stride().max(bank.order + 1);
    let mut diff = vec![0.0; width];
    for i in 0..m {
        for (k, ker) in aligned_kernels.iter().enumerate() {
            match bank.mode {
                KernelMode::Distance => {
                    let off = (i * out_channels + k) * stride;
                    for c in 0..d {
                        diff.iter_mut().for_each(|x| *x = 0.0);
                        diff.iter_mut().zip(aligned_input.piece(i, c)).for_each(|(x, y)| *x += y);
                        diff.iter_mut().zip(ker.piece(i, c)).for_each(|(x, y)| *x -= y);
                        let sq = polynomial::mul_slices(&diff, &diff);
                        for (o, v) in coeffs[off..off + stride].iter_mut().zip(sq) {
                            *o += v;
                        }
                    }
                }
                KernelMode::Multiply => {
                    for c in 0..d {
                        let off = (i * out_channels + k * d + c) * stride;
                        let prod = polynomial::mul_slices(aligned_input.piece(i, c), ker.piece(i, c));
                        for (o, v) in coeffs[off..off + stride].iter_mut().zip(prod) {
                            *o += v;
                        }
                    }
                }
            }
        }
    }
    let out = Spline::new(union, out_channels, order, coeffs)?;
    Ok((
        out,
        KernelCache {
            input_refinement,
            kernel_refinement,
            aligned_input,
            aligned_kernels,
            span_kernels,
        },
    ))
}

/// Returns `(dL/ds, dL/dcoeffs)` with the latter laid out like `bank.coeffs`.
pub fn kernel_backward(
    s: &Spline,
    bank: &KernelBank,
    cache: &KernelCache,
    g_out: &Spline,
) -> (Spline, Vec<f64>) {
    let d = s.channels();
    let xs = &cache.aligned_input;
    let m = xs.num_pieces();
    let ks = bank.order + 1;
    let mut g_x = xs.zeros_like();
    let mut g_kernels: Vec<Spline> = cache.aligned_kernels.iter().map(Spline::zeros_like).collect();
    let width = xs.stride().max(ks);
    let mut diff = vec![0.0; width];

    for i in 0..m {
        for (k, ker) in cache.aligned_kernels.iter().enumerate() {
            match bank.mode {
                KernelMode::Distance => {
                    let g = g_out.piece(i, k);
                    for c in 0..d {
                        diff.iter_mut().for_each(|x| *x = 0.0);
                        diff.iter_mut().zip(xs.piece(i, c)).for_each(|(x, y)| *x += y);
                        diff.iter_mut().zip(ker.piece(i, c)).for_each(|(x, y)| *x -= y);
                        let g_diff = polynomial::mul_adjoint(g, &diff, width);
                        for (dst, v) in g_x.piece_mut(i, c).iter_mut().zip(&g_diff) {
                            *dst += 2.0 * v;
                        }
                        for (dst, v) in g_kernels[k].piece_mut(i, c).iter_mut().zip(&g_diff) {
                            *dst -= 2.0 * v;
                        }
                    }
                }
                KernelMode::Multiply => {
                    for c in 0..d {
                        let g = g_out.piece(i, k * d + c);
                        let gx = polynomial::mul_adjoint(g, ker.piece(i, c), xs.stride());
                        let gk = polynomial::mul_adjoint(g, xs.piece(i, c), ks);
                        for (dst, v) in g_x.piece_mut(i, c).iter_mut().zip(gx) {
                            *dst += v;
                        }
                        for (dst, v) in g_kernels[k].piece_mut(i, c).iter_mut().zip(gk) {
                            *dst += v;
                        }
                    }
                }
            }
        }
    }

    let g_s = refine_backward(s, &cache.input_refinement, &g_x);
    let factors = power_factors(1.0 / s.span_length(), ks);
    let mut g_coeffs = Vec::with_capacity(bank.coeffs.len());
    for (k, g_al) in g_kernels.iter().enumerate() {
        let g_span = refine_backward(&cache.span_kernels[k], &cache.kernel_refinement, g_al);
        for p in g_span.coeffs().chunks(ks) {
            g_coeffs.extend(p.iter().zip(&factors).map(|(g, f)| g * f));
        }
    }
    (g_s, g_coeffs)
}

/// Running statistic of the area batch normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaNormState {
    pub running_mean_area: Vec<f64>,
    pub momentum: f64,
    pub epsilon: f64,
}

impl AreaNormState {
    pub const DEFAULT_MOMENTUM: f64 = 0.9;
    pub const DEFAULT_EPSILON: f64 = 1e-5;

    pub fn new(channels: usize) -> Self {
        AreaNormState {
            running_mean_area: vec![1.0; channels],
            momentum: Self::DEFAULT_MOMENTUM,
            epsilon: Self::DEFAULT_EPSILON,
        }
    }

    pub fn update(&mut self, batch_mean: &[f64]) {
        for (r, &m) in self.running_mean_area.iter_mut().zip(batch_mean) {
            *r = self.momentum * *r + (1.0 - self.momentum) * m;
        }
    }

    pub fn inference_scale(&self) -> Vec<f64> {
        self.running_mean_area
            .iter()
            .map(|m| 1.0 / (m + self.epsilon))
            .collect()
    }
}

/// Per-sample signed areas and the per-channel batch mean of their absolute
/// values.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaStats {
    pub areas: Vec<Vec<f64>>,
    pub mean_abs: Vec<f64>,
}

pub fn area_stats(batch: &[Spline]) -> Result<AreaStats> {
    let first = batch.first().ok_or(Error::EmptyBatch)?;
    let d = first.channels();
    let areas: Vec<Vec<f64>> = batch.iter().map(Spline::area).collect();
    if let Some(a) = areas.iter().find(|a| a.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: a.len(),
        });
    }
    let n = batch.len() as f64;
    let mean_abs = (0..d)
        .map(|c| areas.iter().map(|a| a[c].abs()).sum::<f64>() / n)
        .collect();
    Ok(AreaStats { areas, mean_abs })
}

pub fn scale_channels(s: &Spline, scale: &[f64]) -> Spline {
    let mut out = s.clone();
    let d = s.channels();
    let stride = s.stride();
    for (k, p) in out.coeffs_mut().chunks_mut(stride).enumerate() {
        let f = scale[k % d];
        p.iter_mut().for_each(|x| *x *= f);
    }
    out
}

/// Area batch normalization. Training mode rescales each channel by
/// `1/(μ_c + ε)` where `μ_c` is the batch mean of absolute areas, and updates
/// the running statistic; inference mode uses the running statistic.
pub fn area_norm(batch: &[Spline], state: &mut AreaNormState, training: bool) -> Result<Vec<Spline>> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let scale = if training {
        let stats = area_stats(batch)?;
        state.update(&stats.mean_abs);
        stats
            .mean_abs
            .iter()
            .map(|m| 1.0 / (m + state.epsilon))
            .collect()
    } else {
        state.inference_scale()
    };
    Ok(batch.iter().map(|s| scale_channels(s, &scale)).collect())
}

/// Adjoint of training-mode area normalization across the whole batch.
pub fn area_norm_backward_training(
    inputs: &[Spline],
    stats: &AreaStats,
    epsilon: f64,
    g_outs: &[Spline],
) -> Vec<Spline> {
    let d = inputs[0].channels();
    let n = inputs.len() as f64;
    let scale: Vec<f64> = stats.mean_abs.iter().map(|m| 1.0 / (m + epsilon)).collect();
    // dL/dμ_c = -scale_c² Σ_i <g_i,c, s_i,c>
    let mut g_mu = vec![0.0; d];
    for (s, g) in inputs.iter().zip(g_outs) {
        let stride = s.stride();
        for (k, (ps, pg)) in s.coeffs().chunks(stride).zip(g.coeffs().chunks(stride)).enumerate() {
            g_mu[k % d] += ps.iter().zip(pg).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    for (gm, sc) in g_mu.iter_mut().zip(&scale) {
        *gm *= -sc * sc;
    }
    inputs
        .iter()
        .zip(g_outs)
        .zip(&stats.areas)
        .map(|((s, g), area)| {
            let mut g_s = scale_channels(g, &scale);
            for i in 0..s.num_pieces() {
                let w = integral_weights(s.width(i), s.stride());
                for c in 0..d {
                    let coef = g_mu[c] * area[c].signum() / n;
                    for (dst, wj) in g_s.piece_mut(i, c).iter_mut().zip(&w) {
                        *dst += coef * wj;
                    }
                }
            }
            g_s
        })
        .collect()
}

/// Adjoint of segment queries. Returns `(dL/ds, dL/doffset_j)`.
pub fn segment_query_backward(
    s: &Spline,
    offsets: &[f64],
    g_rows: &[Vec<f64>],
) -> (Spline, Vec<f64>) {
    let mut g_s = s.zeros_like();
    let deriv = s.derivative();
    let len = s.span_length();
    let mut g_off = Vec::with_capacity(offsets.len());
    for (t, g) in s.query_times(offsets).into_iter().zip(g_rows) {
        let (i, tau) = s.locate(t);
        let powers = power_factors(tau, s.stride());
        for (c, gv) in g.iter().enumerate() {
            for (dst, p) in g_s.piece_mut(i, c).iter_mut().zip(&powers) {
                *dst += gv * p;
            }
        }
        let slope = deriv.eval(t);
        g_off.push(len * g.iter().zip(&slope).map(|(a, b)| a * b).sum::<f64>());
    }
    (g_s, g_off)
}

/// `∫` of a distance-mode output over the span: the shape distance per kernel.
pub fn integrated_distance(curve: &Spline) -> Vec<f64> {
    let mut acc = vec![0.0; curve.channels()];
    for i in 0..curve.num_pieces() {
        let h = curve.width(i);
        for (c, a) in acc.iter_mut().enumerate() {
            *a += integrate_local(curve.piece(i, c), h);
        }
    }
    acc
}
