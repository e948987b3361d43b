mod common;

use common::{apply_dense, dense_h, dense_upsample, max_abs_diff};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use refesr::corpus::synthetic_corpus;
use refesr::resample::{apply_h, downsample, upsample_bicubic, Contributions, DegradationModel, Filter};
use refesr::Image;

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Image {
    Image::from_fn(w, h, |_, _| rng.random::<f64>()).unwrap()
}

/// Output indices whose kernel support lies strictly inside the input.
fn interior(in_len: usize, out_len: usize, factor: f64) -> Vec<usize> {
    let reach = if factor < 1.0 { 2.0 / factor } else { 2.0 };
    (0..out_len)
        .filter(|&u| {
            let center = (u as f64 + 0.5) / factor - 0.5;
            center - reach >= 0.0 && center + reach <= (in_len - 1) as f64
        })
        .collect()
}

#[test]
fn separable_matches_dense_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..40 {
        let scale = rng.random_range(2..=4usize);
        let w = rng.random_range(2 * scale..=32);
        let h = rng.random_range(2 * scale..=32);
        let img = random_image(&mut rng, w, h);
        let model = DegradationModel::bicubic(scale as u32).unwrap();
        let fast = downsample(&img, &model).unwrap();
        let dense = apply_dense(&dense_h(w, h, scale), &img);
        assert!(max_abs_diff(fast.data(), &dense) < 1e-10, "{w}x{h} /{scale}");
    }
}

#[test]
fn upsample_matches_dense_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let scale = rng.random_range(2..=4usize);
        let (w, h) = (rng.random_range(2..=12), rng.random_range(2..=12));
        let img = random_image(&mut rng, w, h);
        let fast = upsample_bicubic(&img, scale as u32).unwrap();
        let dense = apply_dense(&dense_upsample(w, h, scale), &img);
        assert!(max_abs_diff(fast.data(), &dense) < 1e-10);
    }
}

#[test]
fn ramp_is_reproduced_in_the_interior() {
    let n = 40;
    let ramp = Image::from_fn(n, 8, |x, _| x as f64 / (n - 1) as f64).unwrap();
    for scale in 2..=4u32 {
        let model = DegradationModel::bicubic(scale).unwrap();
        let lr = downsample(&ramp, &model).unwrap();
        let inner = interior(n, n / scale as usize, 1.0 / f64::from(scale));
        assert!(!inner.is_empty());
        for u in inner {
            let mapped = (u as f64 + 0.5) * f64::from(scale) - 0.5;
            let expected = mapped / (n - 1) as f64;
            assert!((lr.get(u, 0, 0) - expected).abs() < 1e-9, "scale {scale} u {u}");
        }
    }
    // x2 upsampling of a ramp
    let small = Image::from_fn(20, 4, |x, _| x as f64 / 19.0).unwrap();
    let up = upsample_bicubic(&small, 2).unwrap();
    for u in interior(20, 40, 2.0) {
        let mapped = (u as f64 + 0.5) / 2.0 - 0.5;
        assert!((up.get(u, 1, 0) - mapped / 19.0).abs() < 1e-9);
    }
}

#[test]
fn checkerboard_averages_to_half() {
    // On 8x8 at scale 2 every output touches the border, so also check
    // larger boards where an interior exists.
    for n in [8usize, 16, 32] {
        let board = Image::from_fn(n, n, |x, y| ((x + y) % 2) as f64).unwrap();
        let model = DegradationModel::bicubic(2).unwrap();
        let lr = downsample(&board, &model).unwrap();
        let dense = apply_dense(&dense_h(n, n, 2), &board);
        assert!(max_abs_diff(lr.data(), &dense) < 1e-12);
        let ix = interior(n, n / 2, 0.5);
        let iy = ix.clone();
        if n > 8 {
            assert!(!ix.is_empty());
        }
        for &y in &iy {
            for &x in &ix {
                assert!((lr.get(x, y, 0) - 0.5).abs() < 1e-9, "n={n} ({x},{y})");
            }
        }
    }
}

#[test]
fn upsample_then_downsample_recovers_low_frequencies() {
    let c = Image::filled(10, 10, 1, 0.3).unwrap();
    let ramp = Image::from_fn(30, 5, |x, _| x as f64 / 29.0).unwrap();
    for s in 2..=4u32 {
        let model = DegradationModel::bicubic(s).unwrap();
        let back = downsample(&upsample_bicubic(&c, s).unwrap(), &model).unwrap();
        assert!(back.data().iter().all(|v| (v - 0.3).abs() < 1e-12));

        let back = downsample(&upsample_bicubic(&ramp, s).unwrap(), &model).unwrap();
        // interior: away from both the upsampling and the downsampling borders
        for x in 4..26 {
            assert!((back.get(x, 2, 0) - x as f64 / 29.0).abs() < 1e-9, "s={s} x={x}");
        }
    }
}

#[test]
fn degraded_bicubic_is_close_to_lr() {
    // H(U(x)) for x = H(y): relative L2 residual on the synthetic corpus.
    let corpus = synthetic_corpus(101, 12, 96);
    let mut worst: f64 = 0.0;
    for item in &corpus {
        for s in 2..=4u32 {
            let model = DegradationModel::bicubic(s).unwrap();
            let lr = downsample(&item.image, &model).unwrap();
            let again = apply_h(&upsample_bicubic(&lr, s).unwrap(), &model).unwrap();
            let num: f64 = lr.data().iter().zip(again.data()).map(|(a, b)| (a - b).powi(2)).sum();
            let den: f64 = lr.data().iter().map(|a| a * a).sum();
            worst = worst.max((num / den).sqrt());
        }
    }
    // measured worst case on this corpus: 0.0315
    assert!(worst < 0.05, "worst relative residual {worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_rows_sum_to_one(len in 12usize..200, scale in 2u32..=6, up in any::<bool>()) {
        let c = if up {
            Contributions::new(len, len * scale as usize, f64::from(scale), Filter::Cubic, false)
        } else {
            Contributions::new(len, len / scale as usize, 1.0 / f64::from(scale), Filter::Cubic, true)
        };
        for u in 0..c.out_len() {
            let s: f64 = c.row(u).1.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn downsample_is_linear(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0, scale in 2u32..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, h) = (rng.random_range(8..=24), rng.random_range(8..=24));
        let p = random_image(&mut rng, w, h);
        let q = random_image(&mut rng, w, h);
        let model = DegradationModel::bicubic(scale).unwrap();
        let lhs = apply_h(&p.lin_comb(a, &q, b).unwrap(), &model).unwrap();
        let rhs = apply_h(&p, &model).unwrap().lin_comb(a, &apply_h(&q, &model).unwrap(), b).unwrap();
        prop_assert!(max_abs_diff(lhs.data(), rhs.data()) < 1e-12);
    }

    #[test]
    fn constants_pass_through(c in -2.0f64..=2.0, scale in 2u32..=4, w in 8usize..40, h in 8usize..40) {
        let img = Image::filled(w, h, 1, c).unwrap();
        let lr = apply_h(&img, &DegradationModel::bicubic(scale).unwrap()).unwrap();
        prop_assert!(lr.data().iter().all(|&x| x == c));
        let up = upsample_bicubic(&img, scale).unwrap();
        prop_assert!(up.data().iter().all(|&x| x == c));
    }
}

#[test]
fn parallelism_does_not_change_bits() {
    let img = synthetic_corpus(7, 1, 96).remove(0).image;
    let model = DegradationModel::bicubic(3).unwrap();
    let par = downsample(&img, &model).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let single = pool.install(|| downsample(&img, &model).unwrap());
    assert_eq!(par, single);
}
