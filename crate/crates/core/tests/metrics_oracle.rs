mod common;

use common::ssim_brute;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use refesr::corpus::synthetic_corpus;
use refesr::metrics::{psnr, ssim};
use refesr::resample::add_gaussian_noise;
use refesr::Image;

#[test]
fn ssim_matches_brute_force_on_corpus() {
    let corpus = synthetic_corpus(11, 6, 48);
    for pair in corpus.windows(2) {
        let (a, b) = (&pair[0].image, &pair[1].image);
        for shave in [0, 3] {
            let fast = ssim(a, b, shave).unwrap();
            let slow = ssim_brute(a, b, shave);
            assert!((fast - slow).abs() < 1e-6, "{fast} vs {slow}");
        }
    }
    // a corrupted copy gives values near 1, where cancellation is worst
    let a = &corpus[0].image;
    let b = add_gaussian_noise(a, 3.0, 1).unwrap();
    assert!((ssim(a, &b, 2).unwrap() - ssim_brute(a, &b, 2)).abs() < 1e-6);
}

#[test]
fn ssim_of_binary_complement() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = Image::from_fn(24, 20, |_, _| f64::from(u8::from(rng.random::<bool>()))).unwrap();
    let b = a.map(|v| 1.0 - v);
    let fast = ssim(&a, &b, 0).unwrap();
    assert!((fast - ssim_brute(&a, &b, 0)).abs() < 1e-6);
    assert!(fast < 0.0);
}

#[test]
fn psnr_decreases_with_noise() {
    let img = synthetic_corpus(12, 1, 64).remove(0).image;
    for seed in 0..8 {
        let mut last = f64::INFINITY;
        for sigma in [1.0, 2.0, 4.0, 8.0, 16.0] {
            let noisy = add_gaussian_noise(&img, sigma, seed).unwrap();
            let p = psnr(&img, &noisy, 0).unwrap().value();
            assert!(p < last, "seed {seed} sigma {sigma}");
            last = p;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn metrics_are_symmetric(seed in any::<u64>(), w in 11usize..30, h in 11usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Image::from_fn(w, h, |_, _| rng.random::<f64>()).unwrap();
        let b = Image::from_fn(w, h, |_, _| rng.random::<f64>()).unwrap();
        prop_assert_eq!(ssim(&a, &b, 0).unwrap(), ssim(&b, &a, 0).unwrap());
        prop_assert_eq!(psnr(&a, &b, 0).unwrap(), psnr(&b, &a, 0).unwrap());
        prop_assert_eq!(ssim(&a, &a, 0).unwrap(), 1.0);
        let s = ssim(&a, &b, 0).unwrap();
        prop_assert!(s <= 1.0 && s >= -1.0);
    }
}
