//! (Preconditioned) conjugate gradient on image-shaped vectors.

use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::scalar::Real;

/// Consecutive residual increases tolerated before CG is declared divergent.
pub const DIVERGENCE_WINDOW: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    /// `|b - A x| / |b|` at exit.
    pub rel_residual: f64,
    pub converged: bool,
}

/// Solves `A x = b` from `x0` for a symmetric positive definite `A`.
///
/// `precond`, when given, applies an approximation of `A^{-1}`. Stops when
/// `|r| <= rel_tol |b|` or after `max_iters` iterations.
pub fn pcg<T, A, P>(
    apply_a: A,
    precond: Option<P>,
    b: &ImageGrid<T>,
    x0: &ImageGrid<T>,
    max_iters: usize,
    rel_tol: T,
) -> Result<(ImageGrid<T>, CgStats)>
where
    T: Real,
    A: Fn(&ImageGrid<T>) -> ImageGrid<T>,
    P: Fn(&ImageGrid<T>) -> ImageGrid<T>,
{
    let b_norm = b.norm();
    if b_norm == T::zero() {
        let stats = CgStats { iterations: 0, rel_residual: 0.0, converged: true };
        return Ok((ImageGrid::zeros(b.width(), b.height()), stats));
    }
    let mut x = x0.clone();
    let mut r = b.clone();
    r.axpy(-T::one(), &apply_a(&x));
    let mut r_norm = r.norm();
    let initial = r_norm;
    let target = rel_tol * b_norm;
    let precondition = |r: &ImageGrid<T>| match &precond {
        Some(p) => p(r),
        None => r.clone(),
    };
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let mut growth = 0usize;
    let mut iterations = 0usize;

    while r_norm > target && iterations < max_iters {
        let ap = apply_a(&p);
        let pap = p.dot(&ap);
        if !(pap > T::zero()) {
            break;
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        iterations += 1;

        let new_norm = r.norm();
        growth = if new_norm > r_norm { growth + 1 } else { 0 };
        r_norm = new_norm;
        if growth >= DIVERGENCE_WINDOW || !r_norm.is_finite() {
            return Err(Error::CgDivergence {
                iterations,
                initial_residual: initial.as_f64(),
                last_residual: r_norm.as_f64(),
            });
        }

        z = precondition(&r);
        let rz_new = r.dot(&z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.scale(beta);
        p.axpy(T::one(), &z);
    }

    let stats = CgStats {
        iterations,
        rel_residual: (r_norm / b_norm).as_f64(),
        converged: r_norm <= target,
    };
    Ok((x, stats))
}
