//! Iterative radix-2 FFT over `Complex64`, used for polynomial products.

use num_complex::Complex64;
use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::rc::Rc;

thread_local! {
    static TWIDDLES: RefCell<HashMap<usize, Rc<Vec<Complex64>>>> = RefCell::new(HashMap::new());
}

/// `exp(-2πik/n)` for `k < n/2`, each computed directly so the error does
/// not accumulate. Cached per thread and size.
fn twiddles(n: usize) -> Rc<Vec<Complex64>> {
    TWIDDLES.with(|cache| {
        cache
            .borrow_mut()
            .entry(n)
            .or_insert_with(|| {
                Rc::new(
                    (0..n / 2)
                        .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
                        .collect(),
                )
            })
            .clone()
    })
}

/// In-place radix-2 transform. `buf.len()` must be a power of two.
/// `inverse` applies the conjugate twiddles and the `1/n` scaling.
pub fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "fft length {n} is not a power of two");
    if n <= 1 {
        return;
    }

    // bit-reversal permutation
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if i < j {
            buf.swap(i, j);
        }
    }

    let table = twiddles(n);
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for block in buf.chunks_exact_mut(len) {
            let (lo, hi) = block.split_at_mut(half);
            for (k, (u, v)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                let w = table[k * stride];
                let w = if inverse { w.conj() } else { w };
                let t = *v * w;
                *v = *u - t;
                *u += t;
            }
        }
        len <<= 1;
    }

    if inverse {
        let scale = 1.0 / n as f64;
        for z in buf.iter_mut() {
            *z *= scale;
        }
    }
}

/// Linear convolution of two real sequences via the convolution theorem.
/// Output length is `a.len() + b.len() - 1`. Both inputs share one complex
/// transform (`a` in the real part, `b` in the imaginary part).
pub fn convolve_real(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();

    let mut z = vec![Complex64::new(0.0, 0.0); n];
    for (dst, &x) in z.iter_mut().zip(a) {
        dst.re = x;
    }
    for (dst, &x) in z.iter_mut().zip(b) {
        dst.im = x;
    }
    fft_in_place(&mut z, false);
    // A_k = (Z_k + conj Z_{n-k}) / 2, B_k = (Z_k - conj Z_{n-k}) / 2i,
    // so A_k B_k = (Z_k² - conj(Z_{n-k})²) / 4i
    let prod: Vec<Complex64> = (0..n)
        .map(|k| {
            let zk = z[k];
            let zn = z[(n - k) % n].conj();
            (zk * zk - zn * zn) * Complex64::new(0.0, -0.25)
        })
        .collect();
    z = prod;
    fft_in_place(&mut z, true);
    z[..out_len].iter().map(|c| c.re).collect()
}
