#![allow(dead_code)]

use corosa::{ImageGrid, VectorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_grid(w: usize, h: usize, rng: &mut ChaCha8Rng) -> ImageGrid<f64> {
    ImageGrid::from_fn(w, h, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_field(w: usize, h: usize, channels: usize, rng: &mut ChaCha8Rng) -> VectorField<f64> {
    VectorField::new((0..channels).map(|_| random_grid(w, h, rng)).collect()).unwrap()
}

/// `|a - b| <= tol * max(|a|, |b|, 1)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Dense matrix of a linear map on `w x h` grids, one column per impulse.
pub fn dense_columns(
    w: usize,
    h: usize,
    apply: impl Fn(&ImageGrid<f64>) -> Vec<f64>,
) -> Vec<Vec<f64>> {
    let mut cols = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            cols.push(apply(&ImageGrid::impulse(w, h, x, y)));
        }
    }
    cols
}

pub fn dense_apply(cols: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; cols[0].len()];
    for (c, &xi) in cols.iter().zip(x) {
        for (o, &v) in out.iter_mut().zip(c) {
            *o += v * xi;
        }
    }
    out
}

/// Golden-section minimizer of a unimodal function on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Per-pixel weight objective shifted so the barrier is centred at one half:
/// `(beta - 1/2) d - tau log(1 - (1 - 2 beta)^2)`, which equals
/// `beta d - tau log(beta (1 - beta))` up to a constant.
pub fn weight_objective(beta: f64, d: f64, tau: f64) -> f64 {
    let t = 1.0 - 2.0 * beta;
    (beta - 0.5) * d - tau * (-t * t).ln_1p()
}

/// Minimizer of [`weight_objective`] by golden section in the centred variable
/// `t = 1 - 2 beta`, which keeps precision near the endpoints.
pub fn weight_oracle(d: f64, tau: f64) -> f64 {
    let obj = |t: f64| -0.5 * t * d - tau * (-t * t).ln_1p();
    let lim = 1.0 - 1e-15;
    let t = golden_section(obj, -lim, lim, 1e-13);
    0.5 * (1.0 - t)
}
