//! Independent reference implementations used as test oracles. Nothing
//! here calls into the optimized code paths it is compared against.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use refesr::Image;

/// Keys cubic kernel, a = -0.5, written out from the piecewise formula.
pub fn keys_cubic(x: f64) -> f64 {
    let t = x.abs();
    let (t2, t3) = (t * t, t * t * t);
    if t <= 1.0 {
        1.5 * t3 - 2.5 * t2 + 1.0
    } else if t < 2.0 {
        -0.5 * t3 + 2.5 * t2 - 4.0 * t + 2.0
    } else {
        0.0
    }
}

/// Dense `out_len x in_len` 1-D resampling matrix. Every input position
/// `j` in a window wide enough to cover the kernel is visited, its weight
/// is accumulated onto the border-clamped column, and the row is
/// normalized.
pub fn dense_1d(in_len: usize, out_len: usize, factor: f64, antialias: bool) -> DMatrix<f64> {
    let stretch = if antialias && factor < 1.0 { factor } else { 1.0 };
    let reach = (2.0 / stretch).ceil() as i64 + 2;
    let mut m = DMatrix::zeros(out_len, in_len);
    for u in 0..out_len {
        let center = (u as f64 + 0.5) / factor - 0.5;
        let c = center.floor() as i64;
        for j in c - reach..=c + reach {
            let w = stretch * keys_cubic(stretch * (center - j as f64));
            let col = j.clamp(0, in_len as i64 - 1) as usize;
            m[(u, col)] += w;
        }
        let s: f64 = m.row(u).sum();
        for j in 0..in_len {
            m[(u, j)] /= s;
        }
    }
    m
}

/// Dense `H` for a `w x h` single-channel image in row-major order:
/// `kron(V, Hx)`.
pub fn dense_h(w: usize, h: usize, scale: usize) -> DMatrix<f64> {
    let f = 1.0 / scale as f64;
    let hx = dense_1d(w, w / scale, f, true);
    let hy = dense_1d(h, h / scale, f, true);
    hy.kronecker(&hx)
}

pub fn dense_upsample(w: usize, h: usize, scale: usize) -> DMatrix<f64> {
    let f = scale as f64;
    let ux = dense_1d(w, w * scale, f, false);
    let uy = dense_1d(h, h * scale, f, false);
    uy.kronecker(&ux)
}

pub fn apply_dense(m: &DMatrix<f64>, img: &Image) -> Vec<f64> {
    (m * DVector::from_column_slice(img.data())).as_slice().to_vec()
}

/// SSIM by direct summation over every 11x11 window, with variances and
/// covariance from centered sums.
pub fn ssim_brute(a: &Image, b: &Image, shave: usize) -> f64 {
    let sigma = 1.5f64;
    let mut g = [[0.0f64; 11]; 11];
    let mut total = 0.0;
    for (i, row) in g.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp();
            total += *v;
        }
    }
    for row in g.iter_mut() {
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    let (w, h) = a.dims();
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut sum = 0.0;
    let mut count = 0usize;
    for y0 in shave..=h - shave - 11 {
        for x0 in shave..=w - shave - 11 {
            let (mut ma, mut mb) = (0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    ma += g[i][j] * a.get(x0 + j, y0 + i, 0);
                    mb += g[i][j] * b.get(x0 + j, y0 + i, 0);
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let da = a.get(x0 + j, y0 + i, 0) - ma;
                    let db = b.get(x0 + j, y0 + i, 0) - mb;
                    va += g[i][j] * da * da;
                    vb += g[i][j] * db * db;
                    cov += g[i][j] * da * db;
                }
            }
            sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    sum / count as f64
}

/// Equality-constrained least squares through its KKT system:
/// `[Y'^T Y', 1; 1^T, 0] [w; mu] = [Y'^T x'; 1]` with `Y'^T Y' = Y^T Y + lambda I`
/// and `Y'^T x' = Y^T x + lambda w_ref`.
pub fn kkt_weights(x: &[f64], columns: &[Vec<f64>], w_ref: &[f64], lambda: f64) -> Vec<f64> {
    let n = columns.len();
    let m = x.len();
    let y = DMatrix::from_fn(m, n, |i, j| columns[j][i]);
    let xv = DVector::from_column_slice(x);
    let yty = y.transpose() * &y + DMatrix::identity(n, n) * lambda;
    let ytx = y.transpose() * xv + DVector::from_column_slice(w_ref) * lambda;
    let mut k = DMatrix::zeros(n + 1, n + 1);
    k.view_mut((0, 0), (n, n)).copy_from(&yty);
    for i in 0..n {
        k[(i, n)] = 1.0;
        k[(n, i)] = 1.0;
    }
    let mut rhs = DVector::zeros(n + 1);
    rhs.rows_mut(0, n).copy_from(&ytx);
    rhs[n] = 1.0;
    let sol = k.lu().solve(&rhs).expect("KKT system is nonsingular");
    sol.rows(0, n).iter().copied().collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

/// A random ensemble instance: `x`, columns of `Y`, and a normalized
/// positive `w_ref`. Columns are either perturbations of `x` (like real
/// resolver outputs) or independent, all with entries in `[0, 1]`.
pub struct Instance {
    pub x: Vec<f64>,
    pub columns: Vec<Vec<f64>>,
    pub w_ref: Vec<f64>,
}

pub fn random_instance(seed: u64, n: usize, m: usize) -> Instance {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    let columns = (0..n)
        .map(|_| {
            if rng.random_bool(0.5) {
                let amp = rng.random_range(0.01..0.3);
                x.iter()
                    .map(|v| (v + amp * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0))
                    .collect()
            } else {
                (0..m).map(|_| rng.random::<f64>()).collect()
            }
        })
        .collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    Instance {
        x,
        columns,
        w_ref: raw.iter().map(|v| v / total).collect(),
    }
}

pub fn rel_inf_error(got: &[f64], want: &[f64]) -> f64 {
    let scale = want.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    max_abs_diff(got, want) / scale
}
