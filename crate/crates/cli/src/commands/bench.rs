use crate::manifest::Manifest;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use splinenet::Polynomial;
use std::fmt;
use std::hint::black_box;
use std::time::Instant;

/// Outputs of the two multiply paths must agree to this relative tolerance.
pub const AGREEMENT_TOL: f64 = 1e-6;
/// Each timed sample repeats the operation until it takes at least this long.
const MIN_SAMPLE_NS: u128 = 20_000;

pub const ALGORITHMS: [&str; 4] = ["mul_naive", "mul_fft", "shift_horner", "shift_fast"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub degrees: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            degrees: powers_of_two(4, 4096),
            reps: 30,
            seed: 0,
        }
    }
}

/// `lo, 2·lo, 4·lo, …` up to `hi`.
pub fn powers_of_two(lo: usize, hi: usize) -> Vec<usize> {
    std::iter::successors(Some(lo.max(1)), |d| Some(d * 2)).take_while(|&d| d <= hi).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub algorithm: String,
    pub degree: usize,
    pub reps: usize,
    pub median_ns: f64,
    /// Largest coefficient difference to the reference path of the same
    /// operation, relative to the largest reference coefficient.
    pub max_rel_diff: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub manifest: Manifest,
    pub rows: Vec<BenchRow>,
    /// Smallest degree from which the FFT product is faster at every
    /// larger benchmarked degree.
    pub mul_crossover: Option<usize>,
    pub shift_crossover: Option<usize>,
    pub agreement_ok: bool,
}

impl BenchReport {
    pub fn median(&self, algorithm: &str, degree: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.algorithm == algorithm && r.degree == degree)
            .map(|r| r.median_ns)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).expect("in-memory write");
        }
        self.manifest.csv_comment() + &String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |c: Option<usize>| c.map_or("none".to_string(), |d| d.to_string());
        writeln!(f, "multiply crossover degree: {}", show(self.mul_crossover))?;
        writeln!(f, "taylor shift crossover degree: {}", show(self.shift_crossover))?;
        writeln!(
            f,
            "multiply paths agree within {AGREEMENT_TOL:e}: {}",
            if self.agreement_ok { "yes" } else { "NO" }
        )
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Median nanoseconds per call of `op` over `reps` samples.
fn time_op<T>(reps: usize, mut op: impl FnMut() -> T) -> f64 {
    let t = Instant::now();
    black_box(op());
    let once = t.elapsed().as_nanos().max(1);
    let batch = (MIN_SAMPLE_NS / once).max(1) as usize;
    let samples = (0..reps.max(1))
        .map(|_| {
            let t = Instant::now();
            for _ in 0..batch {
                black_box(op());
            }
            t.elapsed().as_nanos() as f64 / batch as f64
        })
        .collect();
    median(samples)
}

fn rel_diff(reference: &[f64], other: &[f64]) -> f64 {
    let scale = reference.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let n = reference.len().max(other.len());
    (0..n)
        .map(|i| {
            let a = reference.get(i).copied().unwrap_or(0.0);
            let b = other.get(i).copied().unwrap_or(0.0);
            (a - b).abs()
        })
        .fold(0.0, f64::max)
        / scale
}

fn crossover(report: &[BenchRow], slow: &str, fast: &str, degrees: &[usize]) -> Option<usize> {
    let med = |a: &str, d: usize| report.iter().find(|r| r.algorithm == a && r.degree == d).map(|r| r.median_ns);
    let mut best = None;
    for &d in degrees.iter().rev() {
        if med(fast, d)? < med(slow, d)? {
            best = Some(d);
        } else {
            break;
        }
    }
    best
}

/// Times both multiplication paths and both Taylor shifts on seeded random
/// polynomials of each degree. Shifts use `s = 1/degree`, which keeps the
/// shifted coefficients within a factor `e` of the input.
pub fn cmd_bench(cfg: &BenchConfig) -> BenchReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(4 * cfg.degrees.len());
    let mut degrees = cfg.degrees.clone();
    degrees.sort_unstable();
    degrees.dedup();
    for &d in &degrees {
        let mut random = || Polynomial::new((0..=d).map(|_| rng.random_range(-1.0..1.0)).collect());
        let (p, q) = (random(), random());
        let s = 1.0 / d as f64;

        let mul_diff = rel_diff(p.mul_naive(&q).coeffs(), p.mul_fft(&q).coeffs());
        let shift_diff = rel_diff(p.taylor_shift_horner(s).coeffs(), p.taylor_shift_fast(s).coeffs());

        let mut push = |algorithm: &str, median_ns: f64, max_rel_diff: f64| {
            rows.push(BenchRow {
                algorithm: algorithm.into(),
                degree: d,
                reps: cfg.reps,
                median_ns,
                max_rel_diff,
            })
        };
        push("mul_naive", time_op(cfg.reps, || black_box(&p).mul_naive(black_box(&q))), 0.0);
        push("mul_fft", time_op(cfg.reps, || black_box(&p).mul_fft(black_box(&q))), mul_diff);
        push("shift_horner", time_op(cfg.reps, || black_box(&p).taylor_shift_horner(black_box(s))), 0.0);
        push("shift_fast", time_op(cfg.reps, || black_box(&p).taylor_shift_fast(black_box(s))), shift_diff);
    }
    let agreement_ok = rows
        .iter()
        .filter(|r| r.algorithm == "mul_fft")
        .all(|r| r.max_rel_diff <= AGREEMENT_TOL);
    BenchReport {
        manifest: Manifest::new("bench", cfg),
        mul_crossover: crossover(&rows, "mul_naive", "mul_fft", &degrees),
        shift_crossover: crossover(&rows, "shift_horner", "shift_fast", &degrees),
        rows,
        agreement_ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_list() {
        let d = powers_of_two(4, 4096);
        assert_eq!(d.len(), 11);
        assert_eq!((d[0], d[10]), (4, 4096));
    }

    #[test]
    fn every_degree_once_per_algorithm() {
        let cfg = BenchConfig { degrees: vec![4, 8, 8, 16], reps: 3, seed: 1 };
        let r = cmd_bench(&cfg);
        for a in ALGORITHMS {
            for d in [4, 8, 16] {
                assert_eq!(r.rows.iter().filter(|x| x.algorithm == a && x.degree == d).count(), 1);
            }
        }
        assert_eq!(r.rows.len(), 12);
        assert!(r.agreement_ok);
        let csv = r.to_csv();
        assert!(csv.starts_with("# manifest: "));
        assert!(csv.lines().nth(1).unwrap().starts_with("algorithm,degree,reps,median_ns,max_rel_diff"));
    }

    #[test]
    fn crossover_is_the_start_of_the_final_winning_run() {
        let row = |a: &str, d, m| BenchRow { algorithm: a.into(), degree: d, reps: 1, median_ns: m, max_rel_diff: 0.0 };
        let rows = vec![
            row("slow", 1, 1.0), row("fast", 1, 0.5),
            row("slow", 2, 1.0), row("fast", 2, 2.0),
            row("slow", 4, 3.0), row("fast", 4, 2.0),
            row("slow", 8, 9.0), row("fast", 8, 4.0),
        ];
        assert_eq!(crossover(&rows, "slow", "fast", &[1, 2, 4, 8]), Some(4));
        assert_eq!(crossover(&rows[..4], "slow", "fast", &[1, 2]), None);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
