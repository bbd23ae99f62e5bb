//! Circulant approximation of the s-update system, inverted in the DFT domain.
//!
//! At level `j` the operator `E^T C E`, with `C` circulant on the fine grid, is
//! itself circulant on the coarse grid: its kernel is the `2^j`-fold decimation of
//! `u_j * u_j(-r) * c`. With `C = I + sum_k D_k^T D_k` (mixed Hessian term counted
//! twice) this is the unweighted approximation; [`PrecondWeights`] also lets the
//! identity, derivative and data blocks carry the scalings used by the solver.

use num_complex::Complex;

use crate::fft::Fft2;
use crate::forward::DataOperator;
use crate::grid::{stencils, ImageGrid, StencilKernel};
use crate::resample::interp_kernel_level;
use crate::scalar::Real;
use crate::weight::WeightMap;

/// Floor added to the eigenvalues before division.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Which circulant approximation the solver inverts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrecondKind {
    /// Plain conjugate gradient.
    None,
    /// `E^T (I + sum D^T D) E`, no weights and no data term.
    Unweighted,
    /// Same structure with the penalty, mean squared weights and data term folded in.
    Matched,
}

/// Block scalings of the fine-grid circulant `C`.
#[derive(Clone, Debug)]
pub struct PrecondWeights<T> {
    pub identity: T,
    pub gradient: T,
    pub hessian: T,
    /// `H^T H` eigenvalues in unnormalized DFT layout, scaled by `data`.
    pub data_spectrum: Option<Vec<T>>,
    pub data: T,
}

impl<T: Real> PrecondWeights<T> {
    pub fn unweighted() -> Self {
        Self {
            identity: T::one(),
            gradient: T::one(),
            hessian: T::one(),
            data_spectrum: None,
            data: T::zero(),
        }
    }

    /// Mirrors `2 H^T H + gamma (D_f'^T D_f' + D_s'^T W D_s' + I)` with the weights
    /// replaced by their mean squares.
    pub fn matched(op: &DataOperator<T>, beta: &WeightMap<T>, gamma: T) -> Self {
        let n = T::lit(beta.grid().len() as f64);
        let b2 = beta.grid().data().iter().fold(T::zero(), |a, &b| a + b * b) / n;
        let c2 = beta
            .grid()
            .data()
            .iter()
            .fold(T::zero(), |a, &b| a + (T::one() - b) * (T::one() - b))
            / n;
        Self {
            identity: gamma,
            gradient: gamma * b2,
            hessian: gamma * c2,
            data_spectrum: Some(op.normal_spectrum()),
            data: T::lit(2.0),
        }
    }
}

fn spectrum<T: Real>(fft: &Fft2<T>, k: &StencilKernel<T>, w: usize, h: usize) -> Vec<Complex<T>> {
    let mut buf = k.to_periodic_grid(w, h).to_complex().data().to_vec();
    fft.forward_raw(&mut buf);
    buf
}

/// Eigen-decomposition of the coarse circulant and its inverse.
pub struct Preconditioner<T: Real> {
    level: usize,
    fft: Fft2<T>,
    eigenvalues: Vec<T>,
    inv_n: T,
}

impl<T: Real> Preconditioner<T> {
    /// `full` are the fine-grid dimensions, which must be divisible by `2^level`.
    pub fn new(full: (usize, usize), level: usize, weights: &PrecondWeights<T>) -> Self {
        let (w, h) = full;
        let f = 1usize << level;
        assert!(w % f == 0 && h % f == 0, "grid not divisible by 2^level");
        let fine = Fft2::new(w, h);

        let power = |k: StencilKernel<T>| -> Vec<T> {
            spectrum(&fine, &k, w, h).iter().map(|c| c.norm_sqr()).collect()
        };
        let gx = power(stencils::dx());
        let gy = power(stencils::dy());
        let hxx = power(stencils::dxx());
        let hyy = power(stencils::dyy());
        let hxy = power(stencils::dxy());
        let u = power(interp_kernel_level(level));
        let two = T::lit(2.0);

        let mut b: Vec<Complex<T>> = (0..w * h)
            .map(|i| {
                let mut c = weights.identity
                    + weights.gradient * (gx[i] + gy[i])
                    + weights.hessian * (hxx[i] + hyy[i] + two * hxy[i]);
                if let Some(d) = &weights.data_spectrum {
                    c = c + weights.data * d[i];
                }
                Complex::new(c * u[i], T::zero())
            })
            .collect();
        fine.inverse_raw(&mut b);
        let inv_fine = T::one() / T::lit((w * h) as f64);

        let (cw, ch) = (w / f, h / f);
        let mut coarse: Vec<Complex<T>> = (0..cw * ch)
            .map(|i| {
                let (x, y) = (i % cw, i / cw);
                Complex::new(b[y * f * w + x * f].re * inv_fine, T::zero())
            })
            .collect();
        let fft = Fft2::new(cw, ch);
        fft.forward_raw(&mut coarse);
        let eigenvalues = coarse.iter().map(|c| c.re).collect();
        Self { level, fft, eigenvalues, inv_n: T::one() / T::lit((cw * ch) as f64) }
    }

    pub fn unweighted(full: (usize, usize), level: usize) -> Self {
        Self::new(full, level, &PrecondWeights::unweighted())
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    fn filter(&self, x: &ImageGrid<T>, f: impl Fn(T) -> T) -> ImageGrid<T> {
        assert_eq!(x.dims(), self.fft.dims(), "preconditioner size mismatch");
        let mut buf: Vec<Complex<T>> =
            x.data().iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.fft.forward_raw(&mut buf);
        for (c, &e) in buf.iter_mut().zip(&self.eigenvalues) {
            *c = *c * (f(e) * self.inv_n);
        }
        self.fft.inverse_raw(&mut buf);
        ImageGrid::new(x.width(), x.height(), buf.iter().map(|c| c.re).collect())
            .expect("finite")
    }

    /// The circulant operator itself.
    pub fn apply_operator(&self, x: &ImageGrid<T>) -> ImageGrid<T> {
        self.filter(x, |e| e)
    }

    /// Its inverse, with [`EIGEN_FLOOR`] added to the eigenvalue magnitudes.
    pub fn apply_inverse(&self, x: &ImageGrid<T>) -> ImageGrid<T> {
        let floor = T::lit(EIGEN_FLOOR);
        self.filter(x, |e| T::one() / (e.abs() + floor))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dc_gain_at_level_zero_is_one() {
        let p = Preconditioner::<f64>::unweighted((8, 8), 0);
        assert!((p.eigenvalues()[0] - 1.0).abs() < 1e-12);
        let x = ImageGrid::filled(8, 8, 3.0);
        let back = p.apply_inverse(&p.apply_operator(&x));
        for v in back.data() {
            assert!((v - 3.0).abs() < 1e-12 * 3.0 + 1e-15);
        }
    }

    #[test]
    fn dc_gain_grows_with_level() {
        // E^T E on constants multiplies by 4^j
        let p = Preconditioner::<f64>::unweighted((16, 16), 2);
        assert!((p.eigenvalues()[0] - 16.0).abs() < 1e-9);
    }
}
