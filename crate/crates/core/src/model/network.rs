use super::config::{Aggregator, LayerKind, SplineNetConfig};
use super::gru::{GruCache, GruWeights};
use super::params::{Gradients, ModelParams, Tensor};
use crate::error::{Error, Result};
use crate::layers::{
    affine_backward, affine_raw, area_norm_backward_training, area_stats, integration_backward,
    kernel_apply_cached, kernel_backward, scale_channels, segment_query_backward, AreaNormState,
    AreaStats, KernelBank, KernelCache,
};
use crate::spline::{fit, Spline, TimeSeries};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

#[derive(Debug, Clone)]
enum Layer {
    Affine { w: usize, b: usize, d_out: usize },
    Integrate,
    Kernel { p: usize, channels: usize },
    AreaNorm { state: usize },
}

#[derive(Debug, Clone, Copy)]
struct GruIdx {
    w_ih: usize,
    w_hh: usize,
    b_ih: usize,
    b_hh: usize,
}

/// The spline-network classifier: parameters, running statistics and the
/// layer plan derived from the config.
#[derive(Debug, Clone)]
pub struct SplineNet {
    config: SplineNetConfig,
    params: ModelParams,
    norms: Vec<AreaNormState>,
    plan: Vec<Layer>,
    final_channels: usize,
    offsets: usize,
    gru: Option<GruIdx>,
    head_w: usize,
    head_b: usize,
    head_in: usize,
}

/// Recorded forward intermediates of a batch.
#[derive(Debug, Clone)]
pub struct GradTape {
    training: bool,
    /// `inputs[layer][sample]`: what each layer consumed.
    inputs: Vec<Vec<Spline>>,
    kernel_caches: Vec<Vec<KernelCache>>,
    stats: Vec<Option<AreaStats>>,
    finals: Vec<Spline>,
    tails: Vec<Tail>,
}

impl GradTape {
    pub fn probabilities(&self) -> Vec<Vec<f64>> {
        self.tails.iter().map(|t| t.probs.clone()).collect()
    }

    pub fn logits(&self) -> Vec<Vec<f64>> {
        self.tails.iter().map(|t| t.logits.clone()).collect()
    }

    /// Final latent spline of every sample, before the segment queries.
    pub fn latents(&self) -> &[Spline] {
        &self.finals
    }

    pub fn is_training(&self) -> bool {
        self.training
    }
}

#[derive(Debug, Clone)]
struct Tail {
    rows: Vec<Vec<f64>>,
    gru: Option<GruCache>,
    /// Head input after dropout.
    h: Vec<f64>,
    drop_mask: Option<Vec<f64>>,
    logits: Vec<f64>,
    probs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    pub grads: Gradients,
    /// Batch mean absolute area of every area-norm layer, in layer order.
    pub area_means: Vec<Vec<f64>>,
}

/// Optional training-time noise.
#[derive(Debug, Clone, Copy, Default)]
pub struct Dropout {
    pub rate: f64,
    pub seed: u64,
}

fn log_sum_exp(x: &[f64]) -> f64 {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return x.iter().sum();
    }
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

/// Offsets `o_j = Σ_{i≤j} softmax(θ)_i`, the last pinned to exactly 1.
pub fn offsets_from_logits(theta: &[f64]) -> Vec<f64> {
    let p = softmax(theta);
    let mut acc = 0.0;
    let mut out: Vec<f64> = p
        .iter()
        .map(|x| {
            acc += x;
            acc.min(1.0)
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

fn offsets_backward(theta: &[f64], g_off: &[f64]) -> Vec<f64> {
    let p = softmax(theta);
    let l = p.len();
    // dO_j/dθ_i = p_i [i ≤ j] - p_i P_j
    let mut cum = 0.0;
    let weighted: f64 = p
        .iter()
        .zip(g_off)
        .map(|(pi, g)| {
            cum += pi;
            g * cum
        })
        .sum();
    let mut suffix = vec![0.0; l + 1];
    for j in (0..l).rev() {
        suffix[j] = suffix[j + 1] + g_off[j];
    }
    (0..l).map(|i| p[i] * (suffix[i] - weighted)).collect()
}

/// Orthonormal rows or columns (whichever is shorter) from the QR
/// factorization of a standard normal matrix.
fn orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Vec<f64> {
    let (m, n) = (rows.max(cols), rows.min(cols));
    let a = DMatrix::<f64>::from_fn(m, n, |_, _| StandardNormal.sample(rng));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let mut out = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            out[i * cols + j] = if rows >= cols { q[(i, j)] } else { q[(j, i)] };
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl SplineNet {
    /// Builds the layer plan and draws initial parameters from `config.seed`.
    pub fn new(config: SplineNetConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ModelParams::new();
        let mut plan = Vec::new();
        let mut norms = Vec::new();
        let mut d = config.input_channels;
        for b in 0..config.blocks {
            for kind in &config.block_layers {
                match kind {
                    LayerKind::Affine => {
                        let bound = 1.0 / (d as f64).sqrt();
                        let w: Vec<f64> = (0..config.hidden * d)
                            .map(|_| rng.random_range(-bound..bound))
                            .collect();
                        let wi = params.register(Tensor::new(
                            format!("block{b}.affine.weight"),
                            vec![config.hidden, d],
                            w,
                        ))?;
                        let bi = params.register(Tensor::new(
                            format!("block{b}.affine.bias"),
                            vec![config.hidden],
                            vec![0.0; config.hidden],
                        ))?;
                        plan.push(Layer::Affine { w: wi, b: bi, d_out: config.hidden });
                        d = config.hidden;
                    }
                    LayerKind::Integrate => plan.push(Layer::Integrate),
                    LayerKind::Kernel => {
                        let bank = KernelBank::random(
                            config.kernels,
                            config.kernel_grid,
                            d,
                            config.kernel_order,
                            config.kernel_mode,
                            &mut rng,
                        )?;
                        let p = params.register(Tensor::new(
                            format!("block{b}.kernels"),
                            vec![config.kernels, config.kernel_grid - 1, d, config.kernel_order + 1],
                            bank.coeffs.clone(),
                        ))?;
                        plan.push(Layer::Kernel { p, channels: d });
                        d = bank.output_channels();
                    }
                    LayerKind::AreaNorm => {
                        let mut st = AreaNormState::new(d);
                        st.momentum = config.area_momentum;
                        st.epsilon = config.area_epsilon;
                        norms.push(st);
                        plan.push(Layer::AreaNorm { state: norms.len() - 1 });
                    }
                }
            }
        }
        let l = config.segments;
        let offsets = params.register(Tensor {
            trainable: config.learnable_offsets,
            ..Tensor::new("segment.offset_logits", vec![l], vec![0.0; l])
        })?;
        let gru = if config.aggregator == Aggregator::Gru {
            let hd = config.gru_hidden;
            let mut w_ih = Vec::with_capacity(3 * hd * d);
            let mut w_hh = Vec::with_capacity(3 * hd * hd);
            for _ in 0..3 {
                w_ih.extend(orthogonal(hd, d, &mut rng));
            }
            for _ in 0..3 {
                w_hh.extend(orthogonal(hd, hd, &mut rng));
            }
            Some(GruIdx {
                w_ih: params.register(Tensor::new("gru.w_ih", vec![3 * hd, d], w_ih))?,
                w_hh: params.register(Tensor::new("gru.w_hh", vec![3 * hd, hd], w_hh))?,
                b_ih: params.register(Tensor::new("gru.b_ih", vec![3 * hd], vec![0.0; 3 * hd]))?,
                b_hh: params.register(Tensor::new("gru.b_hh", vec![3 * hd], vec![0.0; 3 * hd]))?,
            })
        } else {
            None
        };
        let head_in = if gru.is_some() { config.gru_hidden } else { d };
        let c = config.num_classes;
        let head_w = params.register(Tensor::new("head.weight", vec![c, head_in], vec![0.0; c * head_in]))?;
        let head_b = params.register(Tensor::new("head.bias", vec![c], vec![0.0; c]))?;
        Ok(SplineNet {
            config,
            params,
            norms,
            plan,
            final_channels: d,
            offsets,
            gru,
            head_w,
            head_b,
            head_in,
        })
    }

    /// Rebuilds a model from stored tensors and running statistics; the
    /// layout must match what `config` would create.
    pub fn from_parts(
        config: SplineNetConfig,
        params: ModelParams,
        norms: Vec<AreaNormState>,
    ) -> Result<Self> {
        let mut net = Self::new(config)?;
        if params.len() != net.params.len() {
            return Err(Error::Config(format!(
                "expected {} tensors, found {}",
                net.params.len(),
                params.len()
            )));
        }
        for (mine, theirs) in net.params.tensors().iter().zip(params.tensors()) {
            if mine.name != theirs.name || mine.shape != theirs.shape {
                return Err(Error::Config(format!(
                    "tensor `{}` {:?} does not match expected `{}` {:?}",
                    theirs.name, theirs.shape, mine.name, mine.shape
                )));
            }
        }
        if norms.len() != net.norms.len()
            || norms
                .iter()
                .zip(&net.norms)
                .any(|(a, b)| a.running_mean_area.len() != b.running_mean_area.len())
        {
            return Err(Error::Config("area-norm statistics do not match the config".into()));
        }
        if let Some(name) = params.first_non_finite() {
            return Err(Error::NonFinite(name.to_string()));
        }
        net.params = params;
        net.norms = norms;
        Ok(net)
    }

    pub fn config(&self) -> &SplineNetConfig {
        &self.config
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ModelParams {
        &mut self.params
    }

    pub fn norm_states(&self) -> &[AreaNormState] {
        &self.norms
    }

    /// Channels of the final latent spline.
    pub fn latent_channels(&self) -> usize {
        self.final_channels
    }

    /// Kernel banks in layer order, built from the current parameters.
    pub fn kernel_banks(&self) -> Vec<KernelBank> {
        self.plan
            .iter()
            .filter_map(|l| match l {
                Layer::Kernel { p, channels } => Some(self.bank(*p, *channels)),
                _ => None,
            })
            .collect()
    }

    fn bank(&self, p: usize, channels: usize) -> KernelBank {
        KernelBank {
            count: self.config.kernels,
            grid_size: self.config.kernel_grid,
            channels,
            order: self.config.kernel_order,
            mode: self.config.kernel_mode,
            coeffs: self.params.data(p).to_vec(),
        }
    }

    pub fn offsets(&self) -> Vec<f64> {
        offsets_from_logits(self.params.data(self.offsets))
    }

    /// Fits the configured spline kind after checking the channel count.
    pub fn prepare(&self, ts: &TimeSeries) -> Result<Spline> {
        if ts.channels() != self.config.input_channels {
            return Err(Error::DimensionMismatch {
                expected: self.config.input_channels,
                found: ts.channels(),
            });
        }
        fit(ts, self.config.fit_kind)
    }

    /// Single-sample forward pass in inference mode.
    pub fn forward(&self, ts: &TimeSeries) -> Result<(Vec<f64>, GradTape)> {
        let s = self.prepare(ts)?;
        let tape = self.run(vec![s], false, None)?;
        Ok((tape.tails[0].probs.clone(), tape))
    }

    /// Inference-mode class probabilities for prepared splines.
    pub fn predict(&self, splines: &[Spline]) -> Result<Vec<Vec<f64>>> {
        if splines.is_empty() {
            return Ok(Vec::new());
        }
        Ok(self.run(splines.to_vec(), false, None)?.probabilities())
    }

    /// Runs the batch through every layer. `training` switches area norm to
    /// batch statistics.
    pub fn run(&self, inputs: Vec<Spline>, training: bool, dropout: Option<Dropout>) -> Result<GradTape> {
        if inputs.is_empty() {
            return Err(Error::EmptyBatch);
        }
        for s in &inputs {
            if s.channels() != self.config.input_channels {
                return Err(Error::DimensionMismatch {
                    expected: self.config.input_channels,
                    found: s.channels(),
                });
            }
        }
        let mut cur = inputs;
        let mut tape = GradTape {
            training,
            inputs: Vec::with_capacity(self.plan.len()),
            kernel_caches: Vec::with_capacity(self.plan.len()),
            stats: Vec::with_capacity(self.plan.len()),
            finals: Vec::new(),
            tails: Vec::new(),
        };
        for layer in &self.plan {
            let mut caches = Vec::new();
            let mut stats = None;
            let next: Vec<Spline> = match layer {
                Layer::Affine { w, b, d_out } => {
                    let (w, b) = (self.params.data(*w), self.params.data(*b));
                    cur.par_iter()
                        .map(|s| affine_raw(s, w, b, *d_out))
                        .collect::<Result<_>>()?
                }
                Layer::Integrate => cur.par_iter().map(Spline::integrate).collect::<Result<_>>()?,
                Layer::Kernel { p, channels } => {
                    let bank = self.bank(*p, *channels);
                    let pairs: Vec<(Spline, KernelCache)> = cur
                        .par_iter()
                        .map(|s| kernel_apply_cached(s, &bank))
                        .collect::<Result<_>>()?;
                    let (outs, cs): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
                    caches = cs;
                    outs
                }
                Layer::AreaNorm { state } => {
                    let st = &self.norms[*state];
                    let scale = if training {
                        let a = area_stats(&cur)?;
                        let scale: Vec<f64> = a.mean_abs.iter().map(|m| 1.0 / (m + st.epsilon)).collect();
                        stats = Some(a);
                        scale
                    } else {
                        st.inference_scale()
                    };
                    cur.par_iter().map(|s| scale_channels(s, &scale)).collect()
                }
            };
            tape.inputs.push(std::mem::replace(&mut cur, next));
            tape.kernel_caches.push(caches);
            tape.stats.push(stats);
        }
        let offsets = self.offsets();
        let drop = dropout.filter(|d| training && d.rate > 0.0);
        tape.tails = cur
            .par_iter()
            .enumerate()
            .map(|(i, s)| self.tail_forward(s, &offsets, drop.map(|d| (d, i))))
            .collect();
        tape.finals = cur;
        Ok(tape)
    }

    /// Inference-mode inputs of every kernel layer, `[kernel layer][sample]`,
    /// in the order of [`SplineNet::kernel_banks`].
    pub fn kernel_layer_inputs(&self, inputs: Vec<Spline>) -> Result<Vec<Vec<Spline>>> {
        let tape = self.run(inputs, false, None)?;
        Ok(self
            .plan
            .iter()
            .zip(tape.inputs)
            .filter_map(|(l, x)| matches!(l, Layer::Kernel { .. }).then_some(x))
            .collect())
    }

    fn gru_weights(&self, g: GruIdx) -> GruWeights<'_> {
        GruWeights {
            input: self.final_channels,
            hidden: self.config.gru_hidden,
            w_ih: self.params.data(g.w_ih),
            w_hh: self.params.data(g.w_hh),
            b_ih: self.params.data(g.b_ih),
            b_hh: self.params.data(g.b_hh),
        }
    }

    fn tail_forward(&self, s: &Spline, offsets: &[f64], dropout: Option<(Dropout, usize)>) -> Tail {
        let rows = s.segment_query(offsets);
        let act: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(|v| v.max(0.0)).collect())
            .collect();
        let (mut h, gru) = match (self.config.aggregator, self.gru) {
            (Aggregator::Gru, Some(g)) => {
                let (h, cache) = self.gru_weights(g).forward(&act);
                (h, Some(cache))
            }
            (Aggregator::Mean, _) => {
                let n = act.len() as f64;
                let h = (0..self.final_channels)
                    .map(|c| act.iter().map(|r| r[c]).sum::<f64>() / n)
                    .collect();
                (h, None)
            }
            _ => (act[act.len() - 1].clone(), None),
        };
        let drop_mask = dropout.map(|(d, i)| {
            let mut rng = ChaCha8Rng::seed_from_u64(d.seed);
            rng.set_stream(i as u64);
            let keep = 1.0 / (1.0 - d.rate);
            (0..h.len())
                .map(|_| if rng.random::<f64>() < d.rate { 0.0 } else { keep })
                .collect::<Vec<f64>>()
        });
        if let Some(m) = &drop_mask {
            h.iter_mut().zip(m).for_each(|(x, k)| *x *= k);
        }
        let w = self.params.data(self.head_w);
        let b = self.params.data(self.head_b);
        let logits: Vec<f64> = b
            .iter()
            .enumerate()
            .map(|(k, bk)| bk + dot(&w[k * self.head_in..(k + 1) * self.head_in], &h))
            .collect();
        let probs = softmax(&logits);
        Tail { rows, gru, h, drop_mask, logits, probs }
    }

    /// Mean softmax cross-entropy of the batch and its gradient with respect
    /// to every registered tensor. Area norm runs in training mode.
    pub fn loss_and_grad(&self, batch: &[(&Spline, usize)]) -> Result<LossGrad> {
        self.loss_and_grad_with(batch, None)
    }

    /// [`SplineNet::loss_and_grad`] on raw series.
    pub fn loss_and_grad_series(&self, batch: &[(TimeSeries, usize)]) -> Result<LossGrad> {
        let splines = batch
            .iter()
            .map(|(ts, _)| self.prepare(ts))
            .collect::<Result<Vec<_>>>()?;
        let pairs: Vec<(&Spline, usize)> = splines.iter().zip(batch.iter().map(|b| b.1)).collect();
        self.loss_and_grad(&pairs)
    }

    pub fn loss_and_grad_with(&self, batch: &[(&Spline, usize)], dropout: Option<Dropout>) -> Result<LossGrad> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let classes = self.config.num_classes;
        if let Some(&(_, label)) = batch.iter().find(|(_, y)| *y >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        let tape = self.run(batch.iter().map(|(s, _)| (*s).clone()).collect(), true, dropout)?;
        let n = batch.len() as f64;
        let loss = tape
            .tails
            .iter()
            .zip(batch)
            .map(|(t, (_, y))| log_sum_exp(&t.logits) - t.logits[*y])
            .sum::<f64>()
            / n;

        let mut grads = self.params.zeros_like();
        let offsets = self.offsets();
        let head_w = self.params.data(self.head_w);

        // tail: head, dropout, aggregator, ReLU, segment queries
        let tails: Vec<(Spline, Vec<f64>, Vec<f64>, Option<[Vec<f64>; 4]>)> = tape
            .tails
            .par_iter()
            .zip(&tape.finals)
            .zip(batch)
            .map(|((t, s), (_, y))| {
                let g_logits: Vec<f64> = t
                    .probs
                    .iter()
                    .enumerate()
                    .map(|(k, p)| (p - if k == *y { 1.0 } else { 0.0 }) / n)
                    .collect();
                let mut g_head = vec![0.0; classes * self.head_in];
                let mut g_h = vec![0.0; self.head_in];
                for (k, gk) in g_logits.iter().enumerate() {
                    for j in 0..self.head_in {
                        g_head[k * self.head_in + j] = gk * t.h[j];
                        g_h[j] += head_w[k * self.head_in + j] * gk;
                    }
                }
                let mut tail_params = g_head;
                tail_params.extend(&g_logits);
                if let Some(m) = &t.drop_mask {
                    g_h.iter_mut().zip(m).for_each(|(g, k)| *g *= k);
                }
                let l = t.rows.len();
                let (g_act, gru_grads) = match (self.config.aggregator, self.gru, &t.gru) {
                    (Aggregator::Gru, Some(g), Some(cache)) => {
                        let (g_xs, gg) = self.gru_weights(g).backward(cache, &g_h);
                        (g_xs, Some([gg.w_ih, gg.w_hh, gg.b_ih, gg.b_hh]))
                    }
                    (Aggregator::Mean, _, _) => {
                        let r: Vec<f64> = g_h.iter().map(|g| g / l as f64).collect();
                        (vec![r; l], None)
                    }
                    _ => {
                        let mut rows = vec![vec![0.0; self.final_channels]; l];
                        rows[l - 1] = g_h;
                        (rows, None)
                    }
                };
                let g_rows: Vec<Vec<f64>> = g_act
                    .iter()
                    .zip(&t.rows)
                    .map(|(g, z)| g.iter().zip(z).map(|(gv, zv)| if *zv > 0.0 { *gv } else { 0.0 }).collect())
                    .collect();
                let (g_s, g_off) = segment_query_backward(s, &offsets, &g_rows);
                (g_s, g_off, tail_params, gru_grads)
            })
            .collect();

        let mut g_off = vec![0.0; offsets.len()];
        let mut g_splines = Vec::with_capacity(tails.len());
        for (g_s, go, tp, gru) in tails {
            g_splines.push(g_s);
            g_off.iter_mut().zip(&go).for_each(|(a, b)| *a += b);
            let (hw, hb) = tp.split_at(classes * self.head_in);
            add_into(&mut grads.data[self.head_w], hw);
            add_into(&mut grads.data[self.head_b], hb);
            if let (Some(g), Some(gg)) = (self.gru, gru) {
                for (idx, v) in [g.w_ih, g.w_hh, g.b_ih, g.b_hh].into_iter().zip(gg) {
                    add_into(&mut grads.data[idx], &v);
                }
            }
        }
        if self.params.tensors()[self.offsets].trainable {
            grads.data[self.offsets] = offsets_backward(self.params.data(self.offsets), &g_off);
        }

        for (li, layer) in self.plan.iter().enumerate().rev() {
            let inputs = &tape.inputs[li];
            g_splines = match layer {
                Layer::Affine { w, b, d_out } => {
                    let wd = self.params.data(*w);
                    let parts: Vec<(Spline, Vec<f64>, Vec<f64>)> = inputs
                        .par_iter()
                        .zip(&g_splines)
                        .map(|(s, g)| affine_backward(s, wd, *d_out, g))
                        .collect();
                    let mut out = Vec::with_capacity(parts.len());
                    for (g_s, g_w, g_b) in parts {
                        add_into(&mut grads.data[*w], &g_w);
                        add_into(&mut grads.data[*b], &g_b);
                        out.push(g_s);
                    }
                    out
                }
                Layer::Integrate => inputs
                    .par_iter()
                    .zip(&g_splines)
                    .map(|(s, g)| integration_backward(s, g))
                    .collect(),
                Layer::Kernel { p, channels } => {
                    let bank = self.bank(*p, *channels);
                    let caches = &tape.kernel_caches[li];
                    let parts: Vec<(Spline, Vec<f64>)> = inputs
                        .par_iter()
                        .zip(caches)
                        .zip(&g_splines)
                        .map(|((s, c), g)| kernel_backward(s, &bank, c, g))
                        .collect();
                    let mut out = Vec::with_capacity(parts.len());
                    for (g_s, g_k) in parts {
                        add_into(&mut grads.data[*p], &g_k);
                        out.push(g_s);
                    }
                    out
                }
                Layer::AreaNorm { state } => {
                    let stats = tape.stats[li].as_ref().expect("training tape has area statistics");
                    area_norm_backward_training(inputs, stats, self.norms[*state].epsilon, &g_splines)
                }
            };
        }

        for (t, g) in self.params.tensors().iter().zip(grads.data.iter_mut()) {
            if !t.trainable {
                g.iter_mut().for_each(|x| *x = 0.0);
            }
        }
        let area_means = tape.stats.iter().flatten().map(|s| s.mean_abs.clone()).collect();
        Ok(LossGrad { loss, grads, area_means })
    }

    /// Folds batch area means into the running statistics.
    pub fn update_running_stats(&mut self, area_means: &[Vec<f64>]) {
        for (st, m) in self.norms.iter_mut().zip(area_means) {
            st.update(m);
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(a, b)| *a += b);
}
