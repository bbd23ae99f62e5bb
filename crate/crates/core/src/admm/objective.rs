//! The adaptive cost `F + lambda (R + L) + box indicator` and its pieces.
//!
//! The barrier `L` is scaled by `lambda` together with `R`, so the weight update
//! (which minimizes `R + L` per pixel) and the image update (which minimizes
//! `F + lambda R`) are exact block minimizations of one function.

use crate::diff::{grad, hess};
use crate::error::{check_dims, Result};
use crate::forward::{DataOperator, Measurement};
use crate::grid::ImageGrid;
use crate::prox::{schatten_norm, SchattenOrder};
use crate::resample::upsample_j;
use crate::scalar::Real;
use crate::weight::{barrier, TauMap, WeightMap};

/// Slack allowed on the box constraint before the indicator fires, relative to `u`.
pub const BOX_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostBreakdown<T> {
    /// `sum |H s - m|^2`.
    pub data: T,
    /// Unscaled regularizer `R`.
    pub reg: T,
    pub lambda_reg: T,
    /// Unscaled log-barrier; zero when no barrier strength was given, infinite on
    /// the boundary.
    pub barrier: T,
    pub lambda: T,
    pub feasible: bool,
}

impl<T: Real> CostBreakdown<T> {
    /// `F + lambda R`, the part that depends on the image.
    pub fn smooth(&self) -> T {
        self.data + self.lambda_reg
    }

    /// `lambda L`; zero when `lambda = 0` regardless of the weights.
    pub fn lambda_barrier(&self) -> T {
        if self.lambda == T::zero() {
            T::zero()
        } else {
            self.lambda * self.barrier
        }
    }

    /// Full cost, infinite outside the box.
    pub fn total(&self) -> T {
        if self.feasible {
            self.data + self.lambda_reg + self.lambda_barrier()
        } else {
            T::infinity()
        }
    }

    /// `F + lambda R` with the box indicator.
    pub fn constrained(&self) -> T {
        if self.feasible {
            self.smooth()
        } else {
            T::infinity()
        }
    }
}

/// `sum beta |grad s|_2 + sum (1 - beta) |eig(Hess s)|_p` on a fine-grid image.
pub fn regularizer<T: Real>(s_up: &ImageGrid<T>, beta: &WeightMap<T>, p: SchattenOrder) -> Result<T> {
    check_dims(beta.dims(), s_up.dims())?;
    let g = grad(s_up);
    let h = hess(s_up);
    let (gx, gy) = (g.channel(0).data(), g.channel(1).data());
    let (hxx, hyy, hxy) = (h.channel(0).data(), h.channel(1).data(), h.channel(2).data());
    let mut acc = T::zero();
    for (i, &b) in beta.grid().data().iter().enumerate() {
        let first = gx[i].hypot(gy[i]);
        let second = schatten_norm([hxx[i], hyy[i], hxy[i]], p);
        acc = acc + b * first + (T::one() - b) * second;
    }
    Ok(acc)
}

/// Cost of a fine-grid image.
#[allow(clippy::too_many_arguments)]
pub fn cost_at<T: Real>(
    op: &DataOperator<T>,
    m: &Measurement<T>,
    s_up: &ImageGrid<T>,
    beta: &WeightMap<T>,
    tau: Option<&TauMap<T>>,
    lambda: T,
    p: SchattenOrder,
    u: T,
) -> Result<CostBreakdown<T>> {
    check_dims(op.dims(), s_up.dims())?;
    check_dims(op.dims(), m.dims())?;
    let data = op.misfit(s_up, m);
    let reg = regularizer(s_up, beta, p)?;
    let barrier = match tau {
        Some(t) => barrier(beta, t)?,
        None => T::zero(),
    };
    let slack = T::lit(BOX_SLACK) * u.max(T::one());
    let feasible = s_up.data().iter().all(|&v| v >= -slack && v <= u + slack);
    Ok(CostBreakdown { data, reg, lambda_reg: lambda * reg, barrier, lambda, feasible })
}

/// Cost of a level-`level` image, evaluated after interpolation to the fine grid.
#[allow(clippy::too_many_arguments)]
pub fn objective_eval<T: Real>(
    op: &DataOperator<T>,
    m: &Measurement<T>,
    s: &ImageGrid<T>,
    beta: &WeightMap<T>,
    tau: Option<&TauMap<T>>,
    level: usize,
    lambda: T,
    p: SchattenOrder,
    u: T,
) -> Result<CostBreakdown<T>> {
    cost_at(op, m, &upsample_j(s, level), beta, tau, lambda, p, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::ForwardModel;

    #[test]
    fn hand_computed_two_by_two() {
        // s = [[1, 0], [0, 0]], m = 0, H = I, beta = 1/2, tau = 1
        let s = ImageGrid::new(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let op = DataOperator::new(&ForwardModel::identity(), 2, 2).unwrap();
        let m = Measurement::Real(ImageGrid::zeros(2, 2));
        let beta = WeightMap::constant(2, 2, 0.5).unwrap();
        let tau = TauMap::constant(2, 2, 1.0).unwrap();
        let c = objective_eval(&op, &m, &s, &beta, Some(&tau), 0, 2.0f64, SchattenOrder::Two, 1.0)
            .unwrap();
        assert!((c.data - 1.0).abs() < 1e-15);
        // gradient magnitudes: sqrt(2), 1, 1, 0
        // Hessian (hxx, hyy, hxy) at each pixel, periodic on 2x2:
        //   (0,0): (-2, -2, 1)  (1,0): (2, 0, -1)  (0,1): (0, 2, -1)  (1,1): (0, 0, 1)
        let tv = 2f64.sqrt() + 2.0;
        let fro = |a: f64, b: f64, c: f64| (a * a + b * b + 2.0 * c * c).sqrt();
        let hs = fro(-2.0, -2.0, 1.0) + 2.0 * fro(2.0, 0.0, -1.0) + fro(0.0, 0.0, 1.0);
        assert!((c.reg - 0.5 * (tv + hs)).abs() < 1e-12);
        assert!((c.lambda_reg - 2.0 * c.reg).abs() < 1e-12);
        assert!((c.barrier - 4.0 * 4f64.ln()).abs() < 1e-12);
        assert!(c.feasible);
        assert!((c.total() - (1.0 + 2.0 * c.reg + 2.0 * c.barrier)).abs() < 1e-12);
    }

    #[test]
    fn indicator_and_barrier_limits() {
        let s = ImageGrid::new(2, 1, vec![0.5, 2.0]).unwrap();
        let op = DataOperator::new(&ForwardModel::identity(), 2, 1).unwrap();
        let m = Measurement::Real(ImageGrid::zeros(2, 1));
        let beta = WeightMap::new(ImageGrid::new(2, 1, vec![0.5, 1.0]).unwrap()).unwrap();
        let tau = TauMap::constant(2, 1, 1.0).unwrap();
        let c = objective_eval(&op, &m, &s, &beta, Some(&tau), 0, 1.0, SchattenOrder::One, 1.0)
            .unwrap();
        assert!(!c.feasible);
        assert_eq!(c.total(), f64::INFINITY);
        let c = objective_eval(&op, &m, &s, &beta, Some(&tau), 0, 1.0, SchattenOrder::One, 3.0)
            .unwrap();
        assert_eq!(c.barrier, f64::INFINITY);
    }

    #[test]
    fn unit_weight_gives_plain_total_variation() {
        let s = ImageGrid::from_fn(5, 4, |x, y| ((x * 3 + y * 7) % 5) as f64);
        let beta = WeightMap::constant(5, 4, 1.0).unwrap();
        let r = regularizer(&s, &beta, SchattenOrder::One).unwrap();
        let g = grad(&s);
        let tv: f64 = (0..20)
            .map(|i| g.channel(0).data()[i].hypot(g.channel(1).data()[i]))
            .sum();
        assert!((r - tv).abs() < 1e-12);
    }
}
