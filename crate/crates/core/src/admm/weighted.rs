//! Pixelwise-weighted derivative operators: `beta * grad` and `(1 - beta) * hess`.
//!
//! The Hessian block is measured in the metric of the symmetric-matrix embedding,
//! which counts the mixed channel twice; [`apply_hessian_metric`] applies it.

use crate::diff::{grad, grad_adjoint, hess, hess_adjoint};
use crate::error::{check_dims, Result};
use crate::grid::{ImageGrid, VectorField};
use crate::scalar::Real;
use crate::weight::WeightMap;

pub fn weighted_grad<T: Real>(s_up: &ImageGrid<T>, beta: &WeightMap<T>) -> Result<VectorField<T>> {
    check_dims(beta.dims(), s_up.dims())?;
    grad(s_up).weighted(beta.grid())
}

pub fn weighted_grad_adjoint<T: Real>(
    v: &VectorField<T>,
    beta: &WeightMap<T>,
) -> Result<ImageGrid<T>> {
    check_dims(beta.dims(), v.dims())?;
    grad_adjoint(&v.weighted(beta.grid())?)
}

pub fn weighted_hess<T: Real>(s_up: &ImageGrid<T>, beta: &WeightMap<T>) -> Result<VectorField<T>> {
    check_dims(beta.dims(), s_up.dims())?;
    hess(s_up).weighted(&complement(beta))
}

pub fn weighted_hess_adjoint<T: Real>(
    v: &VectorField<T>,
    beta: &WeightMap<T>,
) -> Result<ImageGrid<T>> {
    check_dims(beta.dims(), v.dims())?;
    hess_adjoint(&v.weighted(&complement(beta))?)
}

/// `1 - beta`.
pub fn complement<T: Real>(beta: &WeightMap<T>) -> ImageGrid<T> {
    beta.grid().map(|b| T::one() - b)
}

/// Doubles the mixed channel of a Hessian field in place.
pub fn apply_hessian_metric<T: Real>(v: &mut VectorField<T>) {
    let two = T::lit(2.0);
    v.channel_mut(2).data_mut().iter_mut().for_each(|x| *x = *x * two);
}

/// `<a, b>` in the embedding metric.
pub fn hessian_metric_dot<T: Real>(a: &VectorField<T>, b: &VectorField<T>) -> T {
    a.channel(0).dot(b.channel(0))
        + a.channel(1).dot(b.channel(1))
        + T::lit(2.0) * a.channel(2).dot(b.channel(2))
}
