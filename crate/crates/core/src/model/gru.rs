//! Single-layer gated recurrent unit, gates ordered reset, update, candidate:
//!
//! ```text
//! r = σ(W_ir x + b_ir + W_hr h + b_hr)
//! z = σ(W_iz x + b_iz + W_hz h + b_hz)
//! n = tanh(W_in x + b_in + r ⊙ (W_hn h + b_hn))
//! h' = (1 - z) ⊙ n + z ⊙ h
//! ```

/// Borrowed GRU weights: `w_ih` is `3H × D`, `w_hh` is `3H × H`.
#[derive(Debug, Clone, Copy)]
pub struct GruWeights<'a> {
    pub input: usize,
    pub hidden: usize,
    pub w_ih: &'a [f64],
    pub w_hh: &'a [f64],
    pub b_ih: &'a [f64],
    pub b_hh: &'a [f64],
}

#[derive(Debug, Clone)]
struct Step {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    n: Vec<f64>,
    /// `W_hn h + b_hn`, needed for the reset-gate gradient.
    gh_n: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct GruCache {
    steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruGrads {
    pub w_ih: Vec<f64>,
    pub w_hh: Vec<f64>,
    pub b_ih: Vec<f64>,
    pub b_hh: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn matvec(w: &[f64], x: &[f64], b: &[f64]) -> Vec<f64> {
    let cols = x.len();
    b.iter()
        .enumerate()
        .map(|(r, bi)| bi + w[r * cols..(r + 1) * cols].iter().zip(x).map(|(a, c)| a * c).sum::<f64>())
        .collect()
}

impl GruWeights<'_> {
    /// Runs the cell over `xs` from a zero state; returns the final state.
    pub fn forward(&self, xs: &[Vec<f64>]) -> (Vec<f64>, GruCache) {
        let hd = self.hidden;
        let mut h = vec![0.0; hd];
        let mut steps = Vec::with_capacity(xs.len());
        for x in xs {
            let gi = matvec(self.w_ih, x, self.b_ih);
            let gh = matvec(self.w_hh, &h, self.b_hh);
            let r: Vec<f64> = (0..hd).map(|k| sigmoid(gi[k] + gh[k])).collect();
            let z: Vec<f64> = (0..hd).map(|k| sigmoid(gi[hd + k] + gh[hd + k])).collect();
            let gh_n = gh[2 * hd..].to_vec();
            let n: Vec<f64> = (0..hd).map(|k| (gi[2 * hd + k] + r[k] * gh_n[k]).tanh()).collect();
            let next: Vec<f64> = (0..hd).map(|k| (1.0 - z[k]) * n[k] + z[k] * h[k]).collect();
            steps.push(Step {
                x: x.clone(),
                h_prev: std::mem::replace(&mut h, next),
                r,
                z,
                n,
                gh_n,
            });
        }
        (h, GruCache { steps })
    }

    /// Backpropagates `g_h` (gradient of the final state) through the whole
    /// sequence. Returns per-step input gradients and weight gradients.
    pub fn backward(&self, cache: &GruCache, g_h: &[f64]) -> (Vec<Vec<f64>>, GruGrads) {
        let (hd, d) = (self.hidden, self.input);
        let mut grads = GruGrads {
            w_ih: vec![0.0; 3 * hd * d],
            w_hh: vec![0.0; 3 * hd * hd],
            b_ih: vec![0.0; 3 * hd],
            b_hh: vec![0.0; 3 * hd],
        };
        let mut g_xs = vec![Vec::new(); cache.steps.len()];
        let mut g_h = g_h.to_vec();
        for (t, st) in cache.steps.iter().enumerate().rev() {
            let mut g_gi = vec![0.0; 3 * hd];
            let mut g_gh = vec![0.0; 3 * hd];
            let mut g_prev = vec![0.0; hd];
            for k in 0..hd {
                let gh = g_h[k];
                let (r, z, n) = (st.r[k], st.z[k], st.n[k]);
                let g_an = gh * (1.0 - z) * (1.0 - n * n);
                let g_az = gh * (st.h_prev[k] - n) * z * (1.0 - z);
                let g_ar = g_an * st.gh_n[k] * r * (1.0 - r);
                g_prev[k] = gh * z;
                g_gi[k] = g_ar;
                g_gi[hd + k] = g_az;
                g_gi[2 * hd + k] = g_an;
                g_gh[k] = g_ar;
                g_gh[hd + k] = g_az;
                g_gh[2 * hd + k] = g_an * r;
            }
            let mut g_x = vec![0.0; d];
            for (row, &g) in g_gi.iter().enumerate() {
                grads.b_ih[row] += g;
                for j in 0..d {
                    grads.w_ih[row * d + j] += g * st.x[j];
                    g_x[j] += self.w_ih[row * d + j] * g;
                }
            }
            for (row, &g) in g_gh.iter().enumerate() {
                grads.b_hh[row] += g;
                for j in 0..hd {
                    grads.w_hh[row * hd + j] += g * st.h_prev[j];
                    g_prev[j] += self.w_hh[row * hd + j] * g;
                }
            }
            g_xs[t] = g_x;
            g_h = g_prev;
        }
        (g_xs, grads)
    }
}
