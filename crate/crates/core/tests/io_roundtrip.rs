use proptest::prelude::*;
use refesr::image::BitDepth;
use refesr::io::{load_image, quantize, save_image};
use refesr::Image;

fn quantized(img: &Image, depth: BitDepth) -> Image {
    img.map(|v| f64::from(quantize(v, depth)) / depth.max_value())
}

fn arb_image() -> impl Strategy<Value = Image> {
    (1usize..12, 1usize..12, prop_oneof![Just(1usize), Just(3usize)]).prop_flat_map(|(w, h, c)| {
        prop::collection::vec(0.0f64..=1.0, w * h * c).prop_map(move |d| Image::new(w, h, c, d).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn save_then_load_is_quantization(img in arb_image(), sixteen in any::<bool>(), png in any::<bool>()) {
        let depth = if sixteen { BitDepth::Sixteen } else { BitDepth::Eight };
        let ext = match (png, img.channels()) {
            (true, _) => "png",
            (false, 1) => "pgm",
            _ => "ppm",
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(format!("x.{ext}"));
        save_image(&img, depth, &path).unwrap();
        let (back, meta) = load_image(&path).unwrap();
        prop_assert_eq!(meta.bit_depth, depth);
        prop_assert_eq!(back, quantized(&img, depth));

        // a second round trip is lossless
        let again = dir.path().join(format!("y.{ext}"));
        let (first, _) = load_image(&path).unwrap();
        save_image(&first, depth, &again).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }
}

#[test]
fn pnm_and_png_agree() {
    let img = Image::from_fn(7, 5, |x, y| (x * 5 + y) as f64 / 40.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for depth in [BitDepth::Eight, BitDepth::Sixteen] {
        save_image(&img, depth, dir.path().join("a.pgm")).unwrap();
        save_image(&img, depth, dir.path().join("a.png")).unwrap();
        let (p, _) = load_image(dir.path().join("a.pgm")).unwrap();
        let (q, _) = load_image(dir.path().join("a.png")).unwrap();
        assert_eq!(p, q);
    }
}
