//! Periodic gradient and Hessian operators with their exact adjoints.
//!
//! Gradient channels are `(d_x * s, d_y * s)` with forward differences. Hessian
//! channels are `(d_xx * s, d_yy * s, d_xy * s)`: centred second differences and
//! the composition of the two forward differences for the mixed term.

use crate::error::{Error, Result};
use crate::grid::{ImageGrid, VectorField};
use crate::scalar::Real;

#[inline]
fn next(i: usize, n: usize) -> usize {
    if i + 1 == n {
        0
    } else {
        i + 1
    }
}

#[inline]
fn prev(i: usize, n: usize) -> usize {
    if i == 0 {
        n - 1
    } else {
        i - 1
    }
}

pub fn grad<T: Real>(img: &ImageGrid<T>) -> VectorField<T> {
    let (w, h) = img.dims();
    let s = img.data();
    let mut gx = vec![T::zero(); w * h];
    let mut gy = vec![T::zero(); w * h];
    for y in 0..h {
        let yn = next(y, h);
        for x in 0..w {
            let xn = next(x, w);
            let c = s[y * w + x];
            gx[y * w + x] = s[y * w + xn] - c;
            gy[y * w + x] = s[yn * w + x] - c;
        }
    }
    VectorField::new(vec![
        ImageGrid::new(w, h, gx).expect("finite"),
        ImageGrid::new(w, h, gy).expect("finite"),
    ])
    .expect("consistent channels")
}

pub fn grad_adjoint<T: Real>(v: &VectorField<T>) -> Result<ImageGrid<T>> {
    if v.num_channels() != 2 {
        return Err(Error::InvalidField(format!(
            "gradient adjoint expects 2 channels, got {}",
            v.num_channels()
        )));
    }
    let (w, h) = v.dims();
    let a = v.channel(0).data();
    let b = v.channel(1).data();
    Ok(ImageGrid::from_fn(w, h, |x, y| {
        let xp = prev(x, w);
        let yp = prev(y, h);
        (a[y * w + xp] - a[y * w + x]) + (b[yp * w + x] - b[y * w + x])
    }))
}

pub fn hess<T: Real>(img: &ImageGrid<T>) -> VectorField<T> {
    let (w, h) = img.dims();
    let s = img.data();
    let two = T::lit(2.0);
    let mut hxx = vec![T::zero(); w * h];
    let mut hyy = vec![T::zero(); w * h];
    let mut hxy = vec![T::zero(); w * h];
    for y in 0..h {
        let (yn, yp) = (next(y, h), prev(y, h));
        for x in 0..w {
            let (xn, xp) = (next(x, w), prev(x, w));
            let c = s[y * w + x];
            hxx[y * w + x] = s[y * w + xn] - two * c + s[y * w + xp];
            hyy[y * w + x] = s[yn * w + x] - two * c + s[yp * w + x];
            hxy[y * w + x] = s[yn * w + xn] - s[y * w + xn] - s[yn * w + x] + c;
        }
    }
    VectorField::new(vec![
        ImageGrid::new(w, h, hxx).expect("finite"),
        ImageGrid::new(w, h, hyy).expect("finite"),
        ImageGrid::new(w, h, hxy).expect("finite"),
    ])
    .expect("consistent channels")
}

pub fn hess_adjoint<T: Real>(v: &VectorField<T>) -> Result<ImageGrid<T>> {
    if v.num_channels() != 3 {
        return Err(Error::InvalidField(format!(
            "Hessian adjoint expects 3 channels, got {}",
            v.num_channels()
        )));
    }
    let (w, h) = v.dims();
    let a = v.channel(0).data();
    let b = v.channel(1).data();
    let c = v.channel(2).data();
    let two = T::lit(2.0);
    Ok(ImageGrid::from_fn(w, h, |x, y| {
        let (xn, xp) = (next(x, w), prev(x, w));
        let (yn, yp) = (next(y, h), prev(y, h));
        let i = y * w + x;
        let txx = a[y * w + xn] - two * a[i] + a[y * w + xp];
        let tyy = b[yn * w + x] - two * b[i] + b[yp * w + x];
        let txy = c[yp * w + xp] - c[y * w + xp] - c[yp * w + x] + c[i];
        txx + tyy + txy
    }))
}
