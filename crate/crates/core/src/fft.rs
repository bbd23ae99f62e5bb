//! Two-dimensional DFT built on `rustfft`, with unitary normalization.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::grid::ComplexGrid;
use crate::scalar::Real;

/// Planned row and column transforms for a fixed grid size.
pub struct Fft2<T: Real> {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<T>>,
    row_inv: Arc<dyn Fft<T>>,
    col_fwd: Arc<dyn Fft<T>>,
    col_inv: Arc<dyn Fft<T>>,
}

impl<T: Real> Fft2<T> {
    pub fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn run(&self, data: &mut [Complex<T>], rows: &Arc<dyn Fft<T>>, cols: &Arc<dyn Fft<T>>) {
        let (w, h) = (self.width, self.height);
        debug_assert_eq!(data.len(), w * h);
        rows.process(data);
        let mut col = vec![Complex::new(T::zero(), T::zero()); h];
        for x in 0..w {
            for y in 0..h {
                col[y] = data[y * w + x];
            }
            cols.process(&mut col);
            for y in 0..h {
                data[y * w + x] = col[y];
            }
        }
    }

    /// Unnormalized forward transform in place.
    pub fn forward_raw(&self, data: &mut [Complex<T>]) {
        self.run(data, &self.row_fwd, &self.col_fwd);
    }

    /// Unnormalized inverse transform in place (no `1/(NM)` factor).
    pub fn inverse_raw(&self, data: &mut [Complex<T>]) {
        self.run(data, &self.row_inv, &self.col_inv);
    }

    fn unitary_scale(&self) -> T {
        T::one() / T::lit((self.width * self.height) as f64).sqrt()
    }

    /// Unitary forward transform.
    pub fn forward(&self, grid: &ComplexGrid<T>) -> ComplexGrid<T> {
        assert_eq!(grid.dims(), self.dims(), "FFT plan size mismatch");
        let mut out = grid.clone();
        self.forward_raw(out.data_mut());
        let s = self.unitary_scale();
        out.data_mut().iter_mut().for_each(|c| *c = *c * s);
        out
    }

    /// Unitary inverse transform.
    pub fn inverse(&self, grid: &ComplexGrid<T>) -> ComplexGrid<T> {
        assert_eq!(grid.dims(), self.dims(), "FFT plan size mismatch");
        let mut out = grid.clone();
        self.inverse_raw(out.data_mut());
        let s = self.unitary_scale();
        out.data_mut().iter_mut().for_each(|c| *c = *c * s);
        out
    }
}

/// Unitary 2D DFT.
pub fn fft2<T: Real>(grid: &ComplexGrid<T>) -> ComplexGrid<T> {
    Fft2::new(grid.width(), grid.height()).forward(grid)
}

/// Unitary inverse 2D DFT.
pub fn ifft2<T: Real>(grid: &ComplexGrid<T>) -> ComplexGrid<T> {
    Fft2::new(grid.width(), grid.height()).inverse(grid)
}
