use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use splinenet::data::{drop_observations, load_jsonl, normalize, save_jsonl, split, synth_shapes, SynthConfig};
use splinenet::layers::{
    affine_forward, area_norm, area_stats, integration_layer, kernel_apply, AffineParams, AreaNormState, KernelBank,
    KernelMode,
};
use splinenet::Spline;

fn spline_on(d: usize, len: f64) -> impl Strategy<Value = Spline> {
    (prop::collection::vec(0.05f64..1.0, 1..10), 0usize..=3).prop_flat_map(move |(gaps, order)| {
        let total: f64 = gaps.iter().sum();
        let mut knots = vec![0.0];
        let mut acc = 0.0;
        for g in &gaps[..gaps.len() - 1] {
            acc += g;
            knots.push(acc / total * len);
        }
        knots.push(len);
        let n = gaps.len() * d * (order + 1);
        prop::collection::vec(-2.0f64..2.0, n).prop_map(move |c| Spline::new(knots.clone(), d, order, c).unwrap())
    })
}

fn spline(d: usize) -> impl Strategy<Value = Spline> {
    (0.5f64..3.0).prop_flat_map(move |len| spline_on(d, len))
}

fn same_span(d: usize) -> impl Strategy<Value = (Spline, Spline)> {
    (0.5f64..3.0).prop_flat_map(move |len| (spline_on(d, len), spline_on(d, len)))
}

fn affine(d_in: usize, d_out: usize) -> impl Strategy<Value = AffineParams> {
    (prop::collection::vec(-1.0f64..1.0, d_in * d_out), prop::collection::vec(-1.0f64..1.0, d_out))
        .prop_map(move |(w, b)| AffineParams::new(d_in, d_out, w, b).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn affine_keeps_knots_and_is_linear((s1, s2) in same_span(3), p in affine(3, 2)) {
        let y = affine_forward(&s1, &p).unwrap();
        prop_assert_eq!(y.knots(), s1.knots());
        prop_assert_eq!(y.order(), s1.order());
        prop_assert_eq!(y.channels(), 2);

        let p0 = AffineParams { bias: vec![0.0; 2], ..p };
        let lhs = affine_forward(&s1.add(&s2).unwrap(), &p0).unwrap();
        let rhs = affine_forward(&s1, &p0).unwrap().add(&affine_forward(&s2, &p0).unwrap()).unwrap();
        let (a, b) = s1.span();
        for i in 0..50 {
            let t = a + (b - a) * (i as f64 + 0.5) / 50.0;
            for (x, y) in lhs.eval(t).iter().zip(rhs.eval(t)) {
                prop_assert!((x - y).abs() <= 1e-9 * (1.0 + y.abs()));
            }
        }
    }

    #[test]
    fn integration_raises_order(s in spline(2)) {
        prop_assert_eq!(integration_layer(&s).unwrap().order(), s.order() + 1);
    }

    #[test]
    fn distance_kernels_are_nonnegative(s in spline(2), seed in any::<u64>(), order in 0usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bank = KernelBank::random(3, 5, 2, order, KernelMode::Distance, &mut rng).unwrap();
        let out = kernel_apply(&s, &bank).unwrap();
        prop_assert_eq!(out.channels(), 3);
        let (a, b) = s.span();
        for i in 0..200 {
            let t = a + (b - a) * i as f64 / 199.0;
            prop_assert!(out.eval(t).iter().all(|&v| v >= -1e-9));
        }
    }

    #[test]
    fn multiply_kernels_add_orders(s in spline(2), seed in any::<u64>(), order in 0usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bank = KernelBank::random(2, 4, 2, order, KernelMode::Multiply, &mut rng).unwrap();
        let out = kernel_apply(&s, &bank).unwrap();
        prop_assert_eq!(out.order(), s.order() + order);
        prop_assert_eq!(out.channels(), 4);
    }

    #[test]
    fn area_norm_gives_unit_mean_area(batch in prop::collection::vec(spline(2), 2..8), factor in 0.1f64..10.0) {
        let mut state = AreaNormState { epsilon: 0.0, ..AreaNormState::new(2) };
        prop_assume!(area_stats(&batch).unwrap().mean_abs.iter().all(|&m| m > 1e-6));
        let out = area_norm(&batch, &mut state, true).unwrap();
        for m in area_stats(&out).unwrap().mean_abs {
            prop_assert!((m - 1.0).abs() <= 1e-9);
        }
        prop_assert!(state.running_mean_area.iter().all(|&m| m > 0.0));

        let scaled: Vec<Spline> = batch.iter().map(|s| s.scale(factor)).collect();
        let mut state = AreaNormState { epsilon: 0.0, ..AreaNormState::new(2) };
        let out2 = area_norm(&scaled, &mut state, true).unwrap();
        for (x, y) in out.iter().zip(&out2) {
            for (a, b) in x.coeffs().iter().zip(y.coeffs()) {
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
            }
        }
    }
}

fn small_synth(seed: u64) -> SynthConfig {
    SynthConfig {
        n_per_class: 12,
        channels: 2,
        min_len: 5,
        max_len: 15,
        seed,
        ..SynthConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn dataset_operations_keep_series_valid(seed in any::<u64>(), rate in 0.0f64..0.9) {
        let ds = synth_shapes(&small_synth(seed)).unwrap();
        let dropped = drop_observations(&ds, rate, seed).unwrap();
        prop_assert_eq!(dropped.len(), ds.len());
        for ((a, ya), (b, yb)) in ds.samples().iter().zip(dropped.samples()) {
            prop_assert_eq!(ya, yb);
            prop_assert_eq!(a.times(), b.times());
            prop_assert_eq!(a.mask().len(), b.mask().len());
            prop_assert!(b.observed_count() >= 1 && b.observed_count() <= a.observed_count());
            prop_assert!(b.times().windows(2).all(|w| w[0] < w[1]));
        }

        let parts = split(&ds, [0.6, 0.2, 0.2], seed, true).unwrap();
        let mut all: Vec<usize> = parts.train.iter().chain(&parts.val).chain(&parts.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..ds.len()).collect::<Vec<_>>());

        let norm = normalize(&ds, &parts.train).unwrap();
        let stats = norm.normalization().unwrap();
        for c in 0..2 {
            let xs: Vec<f64> = parts
                .train
                .iter()
                .flat_map(|&i| norm.samples()[i].0.observed(c))
                .map(|(_, x)| x)
                .collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            prop_assert!(mean.abs() < 1e-9, "channel {c} train mean {mean}");
            prop_assert!(stats.std[c] > 0.0);
        }
    }
}

#[test]
fn jsonl_file_roundtrip() {
    let ds = synth_shapes(&small_synth(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    save_jsonl(&ds, &path).unwrap();
    let back = load_jsonl(&path).unwrap();
    assert_eq!(back.samples(), ds.samples());
    let (a, b) = (&ds.samples()[0].0, &back.samples()[0].0);
    assert_relative_eq!(a.horizon(), b.horizon());
}
