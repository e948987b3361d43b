mod common;

use std::path::PathBuf;

use proptest::prelude::*;
use refesr::corpus::synthetic_corpus;
use refesr::image::BitDepth;
use refesr::io::{load_image, save_image};
use refesr::metrics::psnr;
use refesr::prior::{
    build_score_table, entropy, reference_weights, weights_from_scores, NamedImage, PriorFile, RhoMode, ScoreTable,
    DEFAULT_SCALES,
};
use refesr::resolvers::{external_path, make_lr, resolve, ResolverKind, ResolverSet, ResolverSpec};
use serde_json::json;

fn fixture() -> Vec<NamedImage> {
    synthetic_corpus(31, 3, 48)
}

#[test]
fn ground_truth_resolver_scores_three_hundred() {
    let dir = tempfile::tempdir().unwrap();
    // Reference images go through 16-bit PNG so the external copies are
    // bit-identical after loading.
    let mut refset = Vec::new();
    for item in fixture() {
        let path = dir.path().join(format!("{}.png", item.name));
        save_image(&item.image, BitDepth::Sixteen, &path).unwrap();
        let (img, _) = load_image(&path).unwrap();
        for s in DEFAULT_SCALES {
            save_image(&img, BitDepth::Sixteen, external_path(dir.path(), "png", &item.name, s)).unwrap();
        }
        refset.push(NamedImage::new(item.name, img));
    }
    let set = ResolverSet::new(vec![
        ResolverSpec::new("truth", ResolverKind::ExternalDir { dir: dir.path().to_path_buf(), ext: "png".into() }),
        ResolverSpec::new("bicubic", ResolverKind::Bicubic),
    ])
    .unwrap();
    let table = build_score_table(&refset, &set, &DEFAULT_SCALES).unwrap();
    assert_eq!(table.scores[0], 300.0);
    assert!(table.scores[1] < 300.0);
    for k in 0..3 {
        assert_eq!(table.cell(0, k).mean_psnr, 100.0);
        assert_eq!(table.cell(0, k).mean_ssim, 1.0);
    }
    let w = reference_weights(&table, 0.07, RhoMode::Normalized).unwrap();
    assert!(w.weights[0] > 0.999);
}

#[test]
fn strictly_better_resolver_scores_higher() {
    let refset = fixture();
    let set = ResolverSet::new(vec![
        ResolverSpec::new("nearest", ResolverKind::Nearest),
        ResolverSpec::new("bicubic", ResolverKind::Bicubic),
    ])
    .unwrap();
    // precondition: bicubic wins on every image at every scale
    for item in &refset {
        for s in DEFAULT_SCALES {
            let lr = make_lr(&item.image, s).unwrap();
            let shave = s as usize;
            let near = psnr(&resolve(set.iter().next().unwrap(), &lr, s, None).unwrap(), &item.image, shave).unwrap();
            let bic = psnr(&resolve(set.iter().nth(1).unwrap(), &lr, s, None).unwrap(), &item.image, shave).unwrap();
            assert!(bic.value() > near.value());
        }
    }
    let table = build_score_table(&refset, &set, &DEFAULT_SCALES).unwrap();
    assert!(table.scores[1] > table.scores[0]);
    let w = reference_weights(&table, 1.0, RhoMode::Raw).unwrap();
    assert!(w.weights[1] > w.weights[0]);
}

#[test]
fn cells_agree_with_metric_oracle() {
    let refset = fixture();
    let set = ResolverSet::builtin();
    let table = build_score_table(&refset, &set, &DEFAULT_SCALES).unwrap();
    table.validate().unwrap();
    for (i, spec) in set.iter().enumerate() {
        for (k, &s) in DEFAULT_SCALES.iter().enumerate() {
            let mut ssim_sum = 0.0;
            for item in &refset {
                let out = resolve(spec, &make_lr(&item.image, s).unwrap(), s, None).unwrap();
                ssim_sum += common::ssim_brute(&out, &item.image, s as usize);
            }
            let oracle = ssim_sum / refset.len() as f64;
            assert!((table.cell(i, k).mean_ssim - oracle).abs() < 1e-6);
        }
    }
}

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/score_table.json")
}

#[test]
fn score_table_matches_golden() {
    let table = build_score_table(&fixture(), &ResolverSet::builtin(), &DEFAULT_SCALES).unwrap();
    let path = golden_path();
    if std::env::var_os("REFESR_UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, serde_json::to_string_pretty(&table).unwrap() + "\n").unwrap();
    }
    let golden: ScoreTable = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(golden.resolver_ids, table.resolver_ids);
    assert_eq!(golden.scales, table.scales);
    for (g, t) in golden.cells.iter().zip(&table.cells) {
        assert_eq!(g.image_count, t.image_count);
        assert!((g.mean_psnr - t.mean_psnr).abs() < 1e-9 * g.mean_psnr.abs());
        assert!((g.mean_ssim - t.mean_ssim).abs() < 1e-9);
    }
    for (g, t) in golden.scores.iter().zip(&table.scores) {
        assert!((g - t).abs() < 1e-9 * g.abs());
    }
}

#[test]
fn entropy_grows_with_rho() {
    let table = build_score_table(&fixture(), &ResolverSet::builtin(), &DEFAULT_SCALES).unwrap();
    let h: Vec<f64> = [0.001, 0.07, 100.0]
        .iter()
        .map(|&rho| reference_weights(&table, rho, RhoMode::Normalized).unwrap().entropy())
        .collect();
    assert!(h[0] < h[1] && h[1] < h[2], "{h:?}");
    assert!((h[2] - (table.scores.len() as f64).ln()).abs() < 1e-3);
}

#[test]
fn prior_file_round_trip() {
    let table = build_score_table(&fixture(), &ResolverSet::builtin(), &DEFAULT_SCALES).unwrap();
    let w = reference_weights(&table, 0.07, RhoMode::Normalized).unwrap();
    let prior = PriorFile::new(json!({"rho": 0.07}), table, w);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("prior.json");
    prior.save(&path).unwrap();
    let back = PriorFile::load(&path).unwrap();
    for (a, b) in back.reference_weights.weights.iter().zip(&prior.reference_weights.weights) {
        assert!((a - b).abs() <= 1e-15);
    }
    assert_eq!(back, prior);
}

#[test]
fn tampered_prior_is_rejected() {
    let table = build_score_table(&fixture()[..1], &ResolverSet::builtin(), &[2]).unwrap();
    let w = reference_weights(&table, 0.07, RhoMode::Normalized).unwrap();
    let mut prior = PriorFile::new(json!({}), table, w);
    prior.score_table.scores[0] += 1.0;
    let text = prior.to_json().unwrap();
    assert_eq!(PriorFile::from_json(&text).unwrap_err().code(), "E_SERDE");
}

fn scores() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..300.0, 1..10)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn shift_invariance(s in scores(), c in -100.0f64..100.0, rho in 0.5f64..50.0) {
        let shifted: Vec<f64> = s.iter().map(|v| v + c).collect();
        let a = weights_from_scores(&s, rho).unwrap();
        let b = weights_from_scores(&shifted, rho).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_follow_scores(s in scores(), rho in 0.5f64..500.0) {
        let w = weights_from_scores(&s, rho).unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..s.len() {
            for j in 0..s.len() {
                if s[i] > s[j] {
                    prop_assert!(w[i] >= w[j]);
                }
                if s[i] == s[j] {
                    prop_assert_eq!(w[i], w[j]);
                }
            }
        }
        prop_assert!(entropy(&w) <= (s.len() as f64).ln() + 1e-12);
    }
}
