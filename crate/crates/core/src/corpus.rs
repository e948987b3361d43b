//! Deterministic synthetic test images.
//!
//! Each image layers a smooth illumination field, soft-edged shapes, an
//! oriented grating and band-limited noise texture, which gives the mix of
//! flat regions, edges and fine detail that super-resolution is judged on.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::Image;
use crate::prior::NamedImage;
use crate::resample::gaussian_blur;

fn smoothstep(edge: f64, x: f64) -> f64 {
    // signed distance `x` to an edge, softened over `edge` pixels
    let t = (0.5 + x / edge).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// One `size x size` gray image from `seed`.
pub fn synthetic_image(seed: u64, size: usize) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = size as f64;

    // illumination: low-order polynomial plus two broad blobs
    let (ax, ay, axy) = (rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.2..0.2));
    let blobs: Vec<(f64, f64, f64, f64)> = (0..2)
        .map(|_| {
            (
                rng.random_range(0.0..n),
                rng.random_range(0.0..n),
                rng.random_range(0.15 * n..0.4 * n),
                rng.random_range(-0.25..0.25),
            )
        })
        .collect();

    // soft shapes: discs and rotated rectangles
    enum Shape {
        Disc { cx: f64, cy: f64, r: f64 },
        Rect { cx: f64, cy: f64, hw: f64, hh: f64, cos: f64, sin: f64 },
    }
    let shapes: Vec<(Shape, f64, f64)> = (0..rng.random_range(3..7))
        .map(|_| {
            let cx = rng.random_range(0.1 * n..0.9 * n);
            let cy = rng.random_range(0.1 * n..0.9 * n);
            let shape = if rng.random_bool(0.5) {
                Shape::Disc {
                    cx,
                    cy,
                    r: rng.random_range(0.05 * n..0.2 * n),
                }
            } else {
                let a: f64 = rng.random_range(0.0..std::f64::consts::PI);
                Shape::Rect {
                    cx,
                    cy,
                    hw: rng.random_range(0.04 * n..0.2 * n),
                    hh: rng.random_range(0.04 * n..0.2 * n),
                    cos: a.cos(),
                    sin: a.sin(),
                }
            };
            (shape, rng.random_range(-0.35..0.35), rng.random_range(0.8..2.0))
        })
        .collect();

    // grating inside a disc
    let (gx, gy, gr) = (rng.random_range(0.2 * n..0.8 * n), rng.random_range(0.2 * n..0.8 * n), rng.random_range(0.12 * n..0.3 * n));
    let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
    let period = rng.random_range(6.0..16.0);
    let gamp = rng.random_range(0.05..0.15);

    let base = rng.random_range(0.35..0.65);
    let mut img = Image::from_fn(size, size, |x, y| {
        let (u, v) = (x as f64 / n - 0.5, y as f64 / n - 0.5);
        let mut val = base + ax * u + ay * v + axy * u * v;
        for &(bx, by, br, amp) in &blobs {
            let d2 = (x as f64 - bx).powi(2) + (y as f64 - by).powi(2);
            val += amp * (-d2 / (2.0 * br * br)).exp();
        }
        for (shape, amp, edge) in &shapes {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let inside = match *shape {
                Shape::Disc { cx, cy, r } => r - ((px - cx).powi(2) + (py - cy).powi(2)).sqrt(),
                Shape::Rect { cx, cy, hw, hh, cos, sin } => {
                    let (dx, dy) = (px - cx, py - cy);
                    let (lx, ly) = (dx * cos + dy * sin, -dx * sin + dy * cos);
                    (hw - lx.abs()).min(hh - ly.abs())
                }
            };
            val += amp * smoothstep(*edge, inside);
        }
        let d = ((x as f64 - gx).powi(2) + (y as f64 - gy).powi(2)).sqrt();
        let phase = (x as f64 * theta.cos() + y as f64 * theta.sin()) * std::f64::consts::TAU / period;
        val += gamp * phase.sin() * smoothstep(2.0, gr - d);
        val
    })
    .expect("positive size");

    // band-limited texture
    let noise = Image::from_fn(size, size, |_, _| rng.random_range(-1.0..1.0)).expect("positive size");
    let texture = gaussian_blur(&noise, rng.random_range(0.8..1.6)).expect("positive sigma");
    let tamp = rng.random_range(0.05..0.15);
    for (v, t) in img.data_mut().iter_mut().zip(texture.data()) {
        *v = (*v + tamp * t).clamp(0.02, 0.98);
    }
    img
}

/// `count` images named `synth<seed>_<index>`, seeded from `seed`.
pub fn synthetic_corpus(seed: u64, count: usize, size: usize) -> Vec<NamedImage> {
    (0..count)
        .map(|i| {
            let s = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i as u64);
            NamedImage::new(format!("synth{seed}_{i:02}"), synthetic_image(s, size))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let a = synthetic_image(11, 48);
        assert_eq!(a, synthetic_image(11, 48));
        assert_ne!(a, synthetic_image(12, 48));
        assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn corpus_names() {
        let c = synthetic_corpus(3, 2, 24);
        assert_eq!(c[1].name, "synth3_01");
    }
}
