//! Dense single-channel polynomials in a local variable τ.
//!
//! Coefficients are stored lowest power first: `coeffs[i]` multiplies τ^i.
//! The free functions working on slices are what the spline code uses on its
//! padded coefficient blocks; [`Polynomial`] is the canonical owned form.

use crate::error::{Error, Result};
use crate::fft;
use serde::{Deserialize, Serialize};

/// Highest degree any spline operation is allowed to produce.
pub const DEGREE_CAP: usize = 64;

/// `mul` switches from the schoolbook product to FFT at this degree sum.
pub const FFT_MUL_THRESHOLD: usize = 16;

/// `taylor_shift` switches to divide-and-conquer at this degree.
pub const FAST_SHIFT_THRESHOLD: usize = 32;

const ZERO_TOL: f64 = 1e-300;

/// Returns `DegreeCap` when `degree` is above [`DEGREE_CAP`].
pub fn check_degree(degree: usize) -> Result<()> {
    if degree > DEGREE_CAP {
        Err(Error::DegreeCap {
            degree,
            cap: DEGREE_CAP,
        })
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds a polynomial in canonical form: trailing exact zeros are removed
    /// and the empty vector becomes `[0]`.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.abs() <= ZERO_TOL) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: vec![0.0] }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new(vec![c])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0].abs() <= ZERO_TOL
    }

    pub fn eval(&self, tau: f64) -> f64 {
        eval_slice(&self.coeffs, tau)
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![0.0; n];
        for (i, c) in self.coeffs.iter().enumerate() {
            out[i] += c;
        }
        for (i, c) in other.coeffs.iter().enumerate() {
            out[i] += c;
        }
        Polynomial::new(out)
    }

    pub fn scale(&self, factor: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| c * factor).collect())
    }

    pub fn mul_naive(&self, other: &Polynomial) -> Polynomial {
        Polynomial::new(mul_naive_slices(&self.coeffs, &other.coeffs))
    }

    pub fn mul_fft(&self, other: &Polynomial) -> Polynomial {
        Polynomial::new(fft::convolve_real(&self.coeffs, &other.coeffs))
    }

    /// Product with the naive/FFT dispatch; no degree cap.
    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        Polynomial::new(mul_slices(&self.coeffs, &other.coeffs))
    }

    /// Product that refuses to exceed [`DEGREE_CAP`].
    pub fn checked_mul(&self, other: &Polynomial) -> Result<Polynomial> {
        check_degree(self.degree() + other.degree())?;
        Ok(self.mul(other))
    }

    /// `q(τ) = p(τ + s)`, dispatching on degree.
    pub fn taylor_shift(&self, s: f64) -> Polynomial {
        let mut c = self.coeffs.clone();
        shift_in_place(&mut c, s);
        Polynomial::new(c)
    }

    pub fn taylor_shift_horner(&self, s: f64) -> Polynomial {
        let mut c = self.coeffs.clone();
        shift_horner_in_place(&mut c, s);
        Polynomial::new(c)
    }

    pub fn taylor_shift_fast(&self, s: f64) -> Polynomial {
        Polynomial::new(shift_divide_conquer(&self.coeffs, s))
    }

    /// `q' = p`, `q(0) = c0`.
    pub fn antiderivative(&self, c0: f64) -> Polynomial {
        let mut out = Vec::with_capacity(self.coeffs.len() + 1);
        out.push(c0);
        out.extend(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c / (i + 1) as f64),
        );
        Polynomial::new(out)
    }

    pub fn derivative(&self) -> Polynomial {
        Polynomial::new(derivative_slice(&self.coeffs))
    }

    /// Real roots strictly inside `(a, b)`, ascending, each once.
    ///
    /// Degrees up to two are solved in closed form. Cubics are bracketed by
    /// their (closed-form) critical points, so every sign-changing root is
    /// found. Higher degrees scan `64·deg` subintervals for sign changes;
    /// even-multiplicity roots and close root pairs inside one subinterval
    /// can be missed there.
    pub fn real_roots_in(&self, a: f64, b: f64) -> Vec<f64> {
        real_roots_in(&self.coeffs, a, b)
    }
}

impl From<Vec<f64>> for Polynomial {
    fn from(c: Vec<f64>) -> Self {
        Polynomial::new(c)
    }
}

pub fn eval_slice(c: &[f64], tau: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &x| acc * tau + x)
}

pub fn derivative_slice(c: &[f64]) -> Vec<f64> {
    if c.len() <= 1 {
        return vec![0.0];
    }
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(i, x)| i as f64 * x)
        .collect()
}

pub fn mul_naive_slices(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return vec![0.0];
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn mul_slices(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.len() + b.len() < FFT_MUL_THRESHOLD + 2 {
        mul_naive_slices(a, b)
    } else {
        fft::convolve_real(a, b)
    }
}

/// Adjoint of the product with a fixed factor: given `g = dL/d(a*b)`,
/// returns `dL/da`, i.e. `out[i] = Σ_j g[i+j] b[j]` for `i < a_len`.
pub fn mul_adjoint(g: &[f64], b: &[f64], a_len: usize) -> Vec<f64> {
    (0..a_len)
        .map(|i| {
            b.iter()
                .enumerate()
                .filter_map(|(j, &bj)| g.get(i + j).map(|gv| gv * bj))
                .sum()
        })
        .collect()
}

pub fn shift_in_place(c: &mut [f64], s: f64) {
    if s == 0.0 || c.len() <= 1 {
        return;
    }
    if c.len() > FAST_SHIFT_THRESHOLD {
        let shifted = shift_divide_conquer(c, s);
        c.copy_from_slice(&shifted);
    } else {
        shift_horner_in_place(c, s);
    }
}

/// Repeated synthetic division, O(k²).
pub fn shift_horner_in_place(c: &mut [f64], s: f64) {
    let n = c.len();
    if n <= 1 || s == 0.0 {
        return;
    }
    for i in 0..n - 1 {
        for j in (i..n - 1).rev() {
            c[j] += s * c[j + 1];
        }
    }
}

/// Divide-and-conquer shift: `p(τ+s) = lo(τ+s) + (τ+s)^h · hi(τ+s)` with the
/// powers `(τ+s)^{2^j}` precomputed. O(M(k) log k) with FFT products.
pub fn shift_divide_conquer(c: &[f64], s: f64) -> Vec<f64> {
    let n = c.len();
    if n <= 1 {
        return c.to_vec();
    }
    let size = n.next_power_of_two();
    let levels = size.trailing_zeros() as usize;
    let mut powers: Vec<Vec<f64>> = Vec::with_capacity(levels);
    powers.push(vec![s, 1.0]);
    for j in 1..levels {
        let prev = &powers[j - 1];
        powers.push(mul_slices(prev, prev));
    }

    let mut padded = c.to_vec();
    padded.resize(size, 0.0);

    fn rec(c: &[f64], powers: &[Vec<f64>]) -> Vec<f64> {
        let m = c.len();
        if m == 1 {
            return vec![c[0]];
        }
        let half = m / 2;
        let lo = rec(&c[..half], powers);
        let hi = rec(&c[half..], powers);
        let level = half.trailing_zeros() as usize;
        let mut out = mul_slices(&powers[level], &hi);
        out.truncate(m);
        for (o, l) in out.iter_mut().zip(&lo) {
            *o += l;
        }
        out
    }

    let mut out = rec(&padded, &powers);
    out.truncate(n);
    out
}

/// Adjoint of `shift_in_place(·, s)`: with `q = T p`, returns `Tᵀ g`.
/// `T[j][m] = C(m, j) s^{m-j}` for `m ≥ j`.
pub fn shift_adjoint(g: &[f64], s: f64) -> Vec<f64> {
    let n = g.len();
    if s == 0.0 {
        return g.to_vec();
    }
    // (Tᵀ g)[m] = Σ_{j≤m} C(m,j) s^{m-j} g[j]
    //           = the m-th coefficient read off reversed-order synthetic division.
    // Evaluate directly; degrees here are small.
    let mut out = vec![0.0; n];
    for (m, slot) in out.iter_mut().enumerate() {
        let mut binom = 1.0;
        let mut acc = 0.0;
        // j = m down to 0: C(m, j) s^{m-j}
        let mut spow = 1.0;
        for j in (0..=m).rev() {
            acc += binom * spow * g[j];
            // advance to j-1: C(m, j-1) = C(m, j) * j / (m - j + 1)
            if j > 0 {
                binom = binom * j as f64 / (m - j + 1) as f64;
                spow *= s;
            }
        }
        *slot = acc;
    }
    out
}

pub fn real_roots_in(c: &[f64], a: f64, b: f64) -> Vec<f64> {
    if !(a < b) {
        return Vec::new();
    }
    let mut len = c.len();
    while len > 1 && c[len - 1] == 0.0 {
        len -= 1;
    }
    let c = &c[..len];
    let inside = |r: f64| r > a && r < b;
    let mut roots: Vec<f64> = match c.len() - 1 {
        0 => Vec::new(),
        1 => vec![-c[0] / c[1]],
        2 => quadratic_roots(c[0], c[1], c[2]),
        3 => {
            let d = derivative_slice(c);
            let mut cuts = vec![a];
            let mut crit = quadratic_roots(d[0], d[1], d[2]);
            crit.retain(|&r| inside(r));
            crit.sort_by(f64::total_cmp);
            cuts.extend(crit);
            cuts.push(b);
            bracket_roots(c, &cuts)
        }
        deg => {
            let pieces = 64 * deg;
            let cuts: Vec<f64> = (0..=pieces)
                .map(|i| {
                    if i == pieces {
                        b
                    } else {
                        a + (b - a) * i as f64 / pieces as f64
                    }
                })
                .collect();
            bracket_roots(c, &cuts)
        }
    };
    roots.retain(|&r| inside(r));
    roots.sort_by(f64::total_cmp);
    let tol = 1e-14 * (b - a);
    roots.dedup_by(|x, y| (*x - *y).abs() <= tol);
    roots
}

fn quadratic_roots(c0: f64, c1: f64, c2: f64) -> Vec<f64> {
    if c2 == 0.0 {
        return if c1 == 0.0 { Vec::new() } else { vec![-c0 / c1] };
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        return Vec::new();
    }
    if disc == 0.0 {
        return vec![-c1 / (2.0 * c2)];
    }
    // cancellation-free form
    let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
    let q = if q == 0.0 { -0.5 * disc.sqrt() } else { q };
    let mut r = vec![q / c2];
    if q != 0.0 {
        r.push(c0 / q);
    }
    r
}

/// Scans consecutive cut points for sign changes and bisects each bracket
/// down to adjacent floats. Exact zeros on interior cut points are reported.
fn bracket_roots(c: &[f64], cuts: &[f64]) -> Vec<f64> {
    let mut roots = Vec::new();
    let vals: Vec<f64> = cuts.iter().map(|&x| eval_slice(c, x)).collect();
    for (i, w) in cuts.windows(2).enumerate() {
        let (f0, f1) = (vals[i], vals[i + 1]);
        if i > 0 && f0 == 0.0 {
            roots.push(w[0]);
        }
        if f0 * f1 < 0.0 {
            roots.push(bisect(c, w[0], w[1], f0));
        }
    }
    roots
}

fn bisect(c: &[f64], mut lo: f64, mut hi: f64, mut flo: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = eval_slice(c, mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
