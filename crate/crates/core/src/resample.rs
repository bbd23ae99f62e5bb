//! Dyadic interpolation `E^(j)` and its adjoint.
//!
//! A 2-fold stage inserts a zero after every sample along both axes and filters with
//! the binomial kernel `[1 4 6 4 1]^T [1 4 6 4 1] / 64`. The `1/64` normalization
//! makes every polyphase component sum to one, so constants are preserved and
//! `E^(j)` maps `[0, u]` into `[0, u]`.

use crate::grid::{wrap, ImageGrid, StencilKernel};
use crate::scalar::Real;

const BINOMIAL: [f64; 5] = [1.0, 4.0, 6.0, 4.0, 1.0];

/// One-axis interpolation taps `[1 4 6 4 1] / 8`.
pub fn interp_taps_1d<T: Real>() -> Vec<T> {
    BINOMIAL.iter().map(|&v| T::lit(v / 8.0)).collect()
}

/// The 2D interpolation filter `u(r)`, normalized, origin at the centre tap.
pub fn interp_kernel<T: Real>() -> StencilKernel<T> {
    let t = interp_taps_1d::<T>();
    StencilKernel::separable(&t, &t, (2, 2)).expect("5x5 kernel")
}

/// One-axis taps of the equivalent single-stage filter `u_j` for a `2^j`-fold
/// expansion: `prod_{i<j} u(z^(2^i))`. The returned vector is centred.
pub fn interp_taps_1d_level<T: Real>(j: usize) -> Vec<T> {
    let base = interp_taps_1d::<T>();
    let mut acc = vec![T::one()];
    for i in 0..j {
        let step = 1usize << i;
        let mut dilated = vec![T::zero(); 4 * step + 1];
        for (k, &v) in base.iter().enumerate() {
            dilated[k * step] = v;
        }
        let mut next = vec![T::zero(); acc.len() + dilated.len() - 1];
        for (a, &x) in acc.iter().enumerate() {
            for (b, &y) in dilated.iter().enumerate() {
                next[a + b] = next[a + b] + x * y;
            }
        }
        acc = next;
    }
    acc
}

/// 2D single-stage filter `u_j`, origin at the centre.
pub fn interp_kernel_level<T: Real>(j: usize) -> StencilKernel<T> {
    let t = interp_taps_1d_level::<T>(j);
    let c = t.len() / 2;
    StencilKernel::separable(&t, &t, (c, c)).expect("nonempty kernel")
}

/// Zero-insertion by `factor` along both axes: `out(f x, f y) = img(x, y)`.
pub fn expand<T: Real>(img: &ImageGrid<T>, factor: usize) -> ImageGrid<T> {
    let (w, h) = img.dims();
    let mut out = ImageGrid::zeros(w * factor, h * factor);
    for y in 0..h {
        for x in 0..w {
            out.set(x * factor, y * factor, img.get(x, y));
        }
    }
    out
}

/// Keeps every `factor`-th sample along both axes.
pub fn decimate<T: Real>(img: &ImageGrid<T>, factor: usize) -> ImageGrid<T> {
    let (w, h) = img.dims();
    ImageGrid::from_fn(w / factor, h / factor, |x, y| img.get(x * factor, y * factor))
}

// 1D periodic 2-fold interpolation: even outputs take (1, 6, 1)/8, odd (4, 4)/8.
fn up_line<T: Real>(src: &[T], dst: &mut [T]) {
    let n = src.len();
    let (one, four, six) = (T::lit(0.125), T::lit(0.5), T::lit(0.75));
    for k in 0..n {
        let prev = src[wrap(k as isize - 1, n)];
        let cur = src[k];
        let nxt = src[wrap(k as isize + 1, n)];
        dst[2 * k] = one * prev + six * cur + one * nxt;
        dst[2 * k + 1] = four * cur + four * nxt;
    }
}

// Transpose of `up_line`: filter by u(-r) (= u) then keep even samples.
fn up_line_adjoint<T: Real>(src: &[T], dst: &mut [T]) {
    let n2 = src.len();
    let (one, four, six) = (T::lit(0.125), T::lit(0.5), T::lit(0.75));
    for (k, d) in dst.iter_mut().enumerate() {
        let at = |o: isize| src[wrap(2 * k as isize + o, n2)];
        *d = one * at(-2) + four * at(-1) + six * at(0) + four * at(1) + one * at(2);
    }
}

/// Two-fold interpolation: `w x h -> 2w x 2h`.
pub fn upsample2<T: Real>(img: &ImageGrid<T>) -> ImageGrid<T> {
    let (w, h) = img.dims();
    let (w2, h2) = (2 * w, 2 * h);
    // rows first: h x w2
    let mut rows = vec![T::zero(); w2 * h];
    for y in 0..h {
        up_line(&img.data()[y * w..(y + 1) * w], &mut rows[y * w2..(y + 1) * w2]);
    }
    let mut out = vec![T::zero(); w2 * h2];
    let mut col = vec![T::zero(); h];
    let mut col_out = vec![T::zero(); h2];
    for x in 0..w2 {
        for y in 0..h {
            col[y] = rows[y * w2 + x];
        }
        up_line(&col, &mut col_out);
        for y in 0..h2 {
            out[y * w2 + x] = col_out[y];
        }
    }
    ImageGrid::new(w2, h2, out).expect("finite")
}

/// Adjoint of [`upsample2`]: `2w x 2h -> w x h`.
///
/// # Panics
/// If either dimension is odd.
pub fn upsample2_adjoint<T: Real>(img: &ImageGrid<T>) -> ImageGrid<T> {
    let (w2, h2) = img.dims();
    assert!(w2 % 2 == 0 && h2 % 2 == 0, "adjoint of 2-fold interpolation needs even dims");
    let (w, h) = (w2 / 2, h2 / 2);
    let mut cols = vec![T::zero(); w2 * h];
    let mut col = vec![T::zero(); h2];
    let mut col_out = vec![T::zero(); h];
    for x in 0..w2 {
        for (y, v) in col.iter_mut().enumerate() {
            *v = img.data()[y * w2 + x];
        }
        up_line_adjoint(&col, &mut col_out);
        for y in 0..h {
            cols[y * w2 + x] = col_out[y];
        }
    }
    let mut out = vec![T::zero(); w * h];
    for y in 0..h {
        up_line_adjoint(&cols[y * w2..(y + 1) * w2], &mut out[y * w..(y + 1) * w]);
    }
    ImageGrid::new(w, h, out).expect("finite")
}

/// `E^(j)`: `j` cascaded 2-fold stages. `j = 0` is the identity.
pub fn upsample_j<T: Real>(img: &ImageGrid<T>, j: usize) -> ImageGrid<T> {
    let mut cur = img.clone();
    for _ in 0..j {
        cur = upsample2(&cur);
    }
    cur
}

/// `E^(j)^T`.
pub fn upsample_j_adjoint<T: Real>(img: &ImageGrid<T>, j: usize) -> ImageGrid<T> {
    let mut cur = img.clone();
    for _ in 0..j {
        cur = upsample2_adjoint(&cur);
    }
    cur
}
