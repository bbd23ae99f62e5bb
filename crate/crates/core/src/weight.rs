//! Exact minimization over the adaptive weight and the spatial barrier strength.
//!
//! For fixed image `f`, each pixel's weight minimizes
//! `beta * v1 + (1 - beta) * v2 - tau * log(beta (1 - beta))` where `v1` is the
//! gradient magnitude and `v2` the Hessian Schatten norm. The minimizer depends only
//! on `sign(d)` and `zeta = 2 tau / |d|` with `d = v1 - v2`.

use crate::diff::{grad, hess};
use crate::error::{check_dims, Error, Result};
use crate::grid::ImageGrid;
use crate::prox::{schatten_norm, SchattenOrder};
use crate::scalar::Real;

/// Lower end of the barrier-strength range.
pub const TAU_MIN: f64 = 0.01;
/// Upper end of the barrier-strength range.
pub const TAU_MAX: f64 = 100.0;
/// Intensity sensitivity of the barrier-strength map, `exp(-100 f^2)`.
pub const TAU_INTENSITY_GAIN: f64 = 100.0;

/// Per-pixel blend between the first-order (`beta`) and second-order (`1 - beta`)
/// regularizers. Values lie in `[0, 1]`; maps produced by [`beta_solve`] are strictly
/// inside `(0, 1)`, the closed endpoints are kept for the fixed-weight presets.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMap<T>(ImageGrid<T>);

impl<T: Real> WeightMap<T> {
    pub fn new(grid: ImageGrid<T>) -> Result<Self> {
        if let Some(v) = grid.data().iter().find(|&&v| !(v >= T::zero() && v <= T::one())) {
            return Err(Error::Parameter(format!("weight {v} outside [0, 1]")));
        }
        Ok(Self(grid))
    }

    pub fn constant(width: usize, height: usize, value: T) -> Result<Self> {
        Self::new(ImageGrid::filled(width, height, value))
    }

    pub fn grid(&self) -> &ImageGrid<T> {
        &self.0
    }

    pub fn into_grid(self) -> ImageGrid<T> {
        self.0
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    /// True when every weight is strictly inside `(0, 1)`.
    pub fn is_interior(&self) -> bool {
        self.0.data().iter().all(|&v| v > T::zero() && v < T::one())
    }
}

/// Positive per-pixel barrier strength.
#[derive(Clone, Debug, PartialEq)]
pub struct TauMap<T>(ImageGrid<T>);

impl<T: Real> TauMap<T> {
    pub fn new(grid: ImageGrid<T>) -> Result<Self> {
        if let Some(v) = grid.data().iter().find(|&&v| !(v > T::zero())) {
            return Err(Error::Parameter(format!("barrier strength must be > 0, got {v}")));
        }
        Ok(Self(grid))
    }

    pub fn constant(width: usize, height: usize, tau: T) -> Result<Self> {
        Self::new(ImageGrid::filled(width, height, tau))
    }

    pub fn grid(&self) -> &ImageGrid<T> {
        &self.0
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }
}

/// Gradient magnitude minus Hessian Schatten `p`-norm at every pixel.
pub fn d_map<T: Real>(f: &ImageGrid<T>, p: SchattenOrder) -> ImageGrid<T> {
    let (v1, v2) = derivative_magnitudes(f, p);
    v1.zip_map(&v2, |a, b| a - b).expect("same dims")
}

/// `(|grad f|_2, |eig(Hess f)|_p)` per pixel.
pub fn derivative_magnitudes<T: Real>(
    f: &ImageGrid<T>,
    p: SchattenOrder,
) -> (ImageGrid<T>, ImageGrid<T>) {
    let g = grad(f);
    let h = hess(f);
    let (w, ht) = f.dims();
    let gx = g.channel(0).data();
    let gy = g.channel(1).data();
    let (hxx, hyy, hxy) = (h.channel(0).data(), h.channel(1).data(), h.channel(2).data());
    let v1 = ImageGrid::from_fn(w, ht, |x, y| {
        let i = y * w + x;
        gx[i].hypot(gy[i])
    });
    let v2 = ImageGrid::from_fn(w, ht, |x, y| {
        let i = y * w + x;
        schatten_norm([hxx[i], hyy[i], hxy[i]], p)
    });
    (v1, v2)
}

/// Closed-form minimizer for one pixel.
///
/// `sqrt(zeta^2 + 1) - zeta` is evaluated as `1 / (sqrt(zeta^2 + 1) + zeta)`, and the
/// weight on the losing side is formed without subtracting from one half so it keeps
/// full relative precision when `tau << |d|`.
pub fn beta_scalar<T: Real>(d: T, tau: T) -> T {
    let half = T::lit(0.5);
    if d.abs() < T::lit(1e-300) {
        return half;
    }
    let zeta = T::lit(2.0) * tau / d.abs();
    if !zeta.is_finite() {
        return half;
    }
    let q = zeta.hypot(T::one());
    // 1/2 - 1/(2 (q + zeta)) = (zeta + zeta^2 / (q + 1)) / (2 (q + zeta))
    let small = half * (zeta + zeta * zeta / (q + T::one())) / (q + zeta);
    let beta = if d > T::zero() { small } else { T::one() - small };
    let lo = T::min_positive_value();
    let hi = T::one() - T::epsilon() * half;
    beta.max(lo).min(hi)
}

/// Exact per-pixel weight update.
pub fn beta_solve<T: Real>(d: &ImageGrid<T>, tau: &TauMap<T>) -> Result<WeightMap<T>> {
    check_dims(d.dims(), tau.dims())?;
    let beta = d.zip_map(tau.grid(), beta_scalar)?;
    Ok(WeightMap(beta))
}

/// Barrier strength from an intensity estimate normalized to `[0, 1]`:
/// `exp(-100 f^2)` affinely rescaled to `[0.01, 100]`. A grid with no dynamic range
/// maps to the constant `100`.
pub fn tau_map<T: Real>(f_bar: &ImageGrid<T>) -> TauMap<T> {
    let gain = T::lit(TAU_INTENSITY_GAIN);
    let e = f_bar.map(|v| (-gain * v * v).exp());
    let (lo, hi) = (e.min(), e.max());
    let (tmin, tmax) = (T::lit(TAU_MIN), T::lit(TAU_MAX));
    if !(hi > lo) {
        return TauMap(ImageGrid::filled(f_bar.width(), f_bar.height(), tmax));
    }
    let span = hi - lo;
    TauMap(e.map(|v| (tmin + (v - lo) / span * (tmax - tmin)).max(tmin).min(tmax)))
}

/// `-sum tau log(beta (1 - beta))`; infinite when any weight touches 0 or 1.
pub fn barrier<T: Real>(beta: &WeightMap<T>, tau: &TauMap<T>) -> Result<T> {
    check_dims(beta.dims(), tau.dims())?;
    let mut acc = T::zero();
    for (&b, &t) in beta.grid().data().iter().zip(tau.grid().data()) {
        if !(b > T::zero() && b < T::one()) {
            return Ok(T::infinity());
        }
        acc = acc - t * (b * (T::one() - b)).ln();
    }
    Ok(acc)
}
