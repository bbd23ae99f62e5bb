//! Pixel grids, vector fields and small periodic stencils.
//!
//! All grids are row-major: pixel `(x, y)` lives at `data[y * width + x]`, with `x`
//! the column and `y` the row. Every spatial operator in the crate treats the grid
//! as periodic, so convolution by a stencil is a circulant linear map.

use num_complex::Complex;

use crate::error::{check_dims, Error, Result};
use crate::scalar::Real;

#[inline]
pub(crate) fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

/// Real-valued `width x height` image.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageGrid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Real> ImageGrid<T> {
    /// Builds a grid from row-major data, rejecting length mismatches and non-finite values.
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter(format!(
                "grid must be nonempty, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::Parameter(format!(
                "grid data has {} values, expected {}x{}={}",
                data.len(),
                width,
                height,
                width * height
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!(
                "non-finite value at pixel ({}, {})",
                pos % width,
                pos / width
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, T::zero())
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        assert!(width > 0 && height > 0, "grid must be nonempty");
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(width > 0 && height > 0, "grid must be nonempty");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    /// Unit impulse at `(x, y)`.
    pub fn impulse(width: usize, height: usize, x: usize, y: usize) -> Self {
        let mut g = Self::zeros(width, height);
        g.set(x, y, T::one());
        g
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    /// `(width, height)`.
    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    /// Periodic access with signed coordinates.
    #[inline]
    pub fn get_wrapped(&self, x: isize, y: isize) -> T {
        self.data[wrap(y, self.height) * self.width + wrap(x, self.width)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.data[y * self.width + x] = v;
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two equally sized grids.
    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        check_dims(self.dims(), other.dims())?;
        Ok(Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: T, other: &Self) {
        debug_assert_eq!(self.dims(), other.dims());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: T) {
        for v in &mut self.data {
            *v = *v * alpha;
        }
    }

    pub fn scaled(&self, alpha: T) -> Self {
        self.map(|v| v * alpha)
    }

    pub fn dot(&self, other: &Self) -> T {
        debug_assert_eq!(self.dims(), other.dims());
        self.data.iter().zip(&other.data).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    }

    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn sum(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc + v)
    }

    pub fn mean(&self) -> T {
        self.sum() / T::lit(self.len() as f64)
    }

    pub fn min(&self) -> T {
        self.data.iter().fold(T::infinity(), |m, &v| m.min(v))
    }

    pub fn max(&self) -> T {
        self.data.iter().fold(T::neg_infinity(), |m, &v| m.max(v))
    }

    /// Circular shift: `out(x, y) = self(x - dx, y - dy)`.
    pub fn shifted(&self, dx: isize, dy: isize) -> Self {
        Self::from_fn(self.width, self.height, |x, y| {
            self.get_wrapped(x as isize - dx, y as isize - dy)
        })
    }

    /// Sub-image with top-left corner `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Self> {
        if x0 + width > self.width || y0 + height > self.height || width == 0 || height == 0 {
            return Err(Error::Parameter(format!(
                "crop {width}x{height}+{x0}+{y0} outside {}x{} grid",
                self.width, self.height
            )));
        }
        Ok(Self::from_fn(width, height, |x, y| self.get(x0 + x, y0 + y)))
    }

    /// Pads on the right and bottom by replicating the last column and row.
    pub fn pad_edge(&self, width: usize, height: usize) -> Result<Self> {
        if width < self.width || height < self.height {
            return Err(Error::Parameter(format!(
                "cannot pad {}x{} grid down to {width}x{height}",
                self.width, self.height
            )));
        }
        Ok(Self::from_fn(width, height, |x, y| {
            self.get(x.min(self.width - 1), y.min(self.height - 1))
        }))
    }

    pub fn to_complex(&self) -> ComplexGrid<T> {
        ComplexGrid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| Complex::new(v, T::zero())).collect(),
        }
    }
}

/// Smallest dimensions `>= (width, height)` divisible by `2^levels`.
pub fn padded_dims(width: usize, height: usize, levels: usize) -> (usize, usize) {
    let f = 1usize << levels;
    (width.div_ceil(f) * f, height.div_ceil(f) * f)
}

/// Complex-valued grid, used for Fourier-domain measurements.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexGrid<T> {
    width: usize,
    height: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> ComplexGrid<T> {
    pub fn new(width: usize, height: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::Parameter(format!(
                "complex grid data has {} values, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "grid must be nonempty");
        Self { width, height, data: vec![Complex::new(T::zero(), T::zero()); width * height] }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Complex<T> {
        self.data[y * self.width + x]
    }

    pub fn re(&self) -> ImageGrid<T> {
        ImageGrid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|c| c.re).collect(),
        }
    }

    pub fn abs(&self) -> ImageGrid<T> {
        ImageGrid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|c| c.norm()).collect(),
        }
    }

    /// Real part of the Hermitian inner product, `Re <self, other>`.
    pub fn dot_re(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (a, b)| acc + a.re * b.re + a.im * b.im)
    }

    pub fn norm_sq(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, c| acc + c.norm_sqr())
    }
}

/// Per-pixel 2-vector (gradient) or 3-vector (Hessian `xx, yy, xy`) field.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField<T> {
    channels: Vec<ImageGrid<T>>,
}

impl<T: Real> VectorField<T> {
    pub fn new(channels: Vec<ImageGrid<T>>) -> Result<Self> {
        if !(channels.len() == 2 || channels.len() == 3) {
            return Err(Error::InvalidField(format!(
                "expected 2 or 3 channels, got {}",
                channels.len()
            )));
        }
        let dims = channels[0].dims();
        if let Some(bad) = channels.iter().find(|c| c.dims() != dims) {
            return Err(Error::InvalidField(format!(
                "channel dims {:?} differ from {:?}",
                bad.dims(),
                dims
            )));
        }
        Ok(Self { channels })
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        assert!(channels == 2 || channels == 3, "vector fields have 2 or 3 channels");
        Self { channels: vec![ImageGrid::zeros(width, height); channels] }
    }

    #[inline]
    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        self.channels[0].dims()
    }

    #[inline]
    pub fn channel(&self, c: usize) -> &ImageGrid<T> {
        &self.channels[c]
    }

    #[inline]
    pub fn channel_mut(&mut self, c: usize) -> &mut ImageGrid<T> {
        &mut self.channels[c]
    }

    pub fn channels(&self) -> &[ImageGrid<T>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<ImageGrid<T>> {
        self.channels
    }

    pub fn dot(&self, other: &Self) -> T {
        debug_assert_eq!(self.num_channels(), other.num_channels());
        self.channels
            .iter()
            .zip(&other.channels)
            .fold(T::zero(), |acc, (a, b)| acc + a.dot(b))
    }

    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }

    pub fn axpy(&mut self, alpha: T, other: &Self) {
        for (a, b) in self.channels.iter_mut().zip(&other.channels) {
            a.axpy(alpha, b);
        }
    }

    /// Every channel multiplied pixelwise by `weight`.
    pub fn weighted(&self, weight: &ImageGrid<T>) -> Result<Self> {
        let channels = self
            .channels
            .iter()
            .map(|c| c.zip_map(weight, |a, w| a * w))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { channels })
    }
}

/// Small 2D filter with an explicit zero-offset tap.
///
/// `taps` is row-major `rows x cols`; tap `(i, j)` sits at spatial offset
/// `(dx, dy) = (j - origin.1, i - origin.0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StencilKernel<T> {
    rows: usize,
    cols: usize,
    taps: Vec<T>,
    origin: (usize, usize),
}

impl<T: Real> StencilKernel<T> {
    pub fn new(rows: usize, cols: usize, taps: Vec<T>, origin: (usize, usize)) -> Result<Self> {
        if rows == 0 || cols == 0 || taps.len() != rows * cols {
            return Err(Error::Parameter(format!(
                "stencil needs {rows}x{cols} taps, got {}",
                taps.len()
            )));
        }
        if origin.0 >= rows || origin.1 >= cols {
            return Err(Error::Parameter(format!(
                "stencil origin {origin:?} outside {rows}x{cols} extent"
            )));
        }
        Ok(Self { rows, cols, taps, origin })
    }

    /// Builds from nested rows of `f64` values.
    pub fn from_rows(rows: &[&[f64]], origin: (usize, usize)) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Parameter("ragged stencil rows".into()));
        }
        let taps = rows.iter().flat_map(|r| r.iter().map(|&v| T::lit(v))).collect();
        Self::new(rows.len(), cols, taps, origin)
    }

    /// Outer product `column^T row`, origin at the given indices.
    pub fn separable(column: &[T], row: &[T], origin: (usize, usize)) -> Result<Self> {
        let taps = column.iter().flat_map(|&c| row.iter().map(move |&r| c * r)).collect();
        Self::new(column.len(), row.len(), taps, origin)
    }

    pub fn impulse() -> Self {
        Self { rows: 1, cols: 1, taps: vec![T::one()], origin: (0, 0) }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn origin(&self) -> (usize, usize) {
        self.origin
    }

    pub fn taps(&self) -> &[T] {
        &self.taps
    }

    pub fn sum(&self) -> T {
        self.taps.iter().fold(T::zero(), |a, &b| a + b)
    }

    /// Iterates over `(dx, dy, value)` for every tap.
    pub fn offsets(&self) -> impl Iterator<Item = (isize, isize, T)> + '_ {
        (0..self.rows).flat_map(move |i| {
            (0..self.cols).map(move |j| {
                (
                    j as isize - self.origin.1 as isize,
                    i as isize - self.origin.0 as isize,
                    self.taps[i * self.cols + j],
                )
            })
        })
    }

    /// Value at spatial offset `(dx, dy)`, zero outside the support.
    pub fn at(&self, dx: isize, dy: isize) -> T {
        let i = dy + self.origin.0 as isize;
        let j = dx + self.origin.1 as isize;
        if i < 0 || j < 0 || i >= self.rows as isize || j >= self.cols as isize {
            T::zero()
        } else {
            self.taps[i as usize * self.cols + j as usize]
        }
    }

    /// Point reflection `k(-r)`.
    pub fn flipped(&self) -> Self {
        let taps = self.taps.iter().rev().copied().collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            taps,
            origin: (self.rows - 1 - self.origin.0, self.cols - 1 - self.origin.1),
        }
    }

    /// Full (non-periodic) convolution of two stencils.
    pub fn convolve(&self, other: &Self) -> Self {
        let rows = self.rows + other.rows - 1;
        let cols = self.cols + other.cols - 1;
        let mut taps = vec![T::zero(); rows * cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.taps[i * self.cols + j];
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        taps[(i + k) * cols + j + l] =
                            taps[(i + k) * cols + j + l] + a * other.taps[k * other.cols + l];
                    }
                }
            }
        }
        Self {
            rows,
            cols,
            taps,
            origin: (self.origin.0 + other.origin.0, self.origin.1 + other.origin.1),
        }
    }

    /// `k * k(-r)`.
    pub fn autocorrelation(&self) -> Self {
        self.convolve(&self.flipped())
    }

    pub fn scaled(&self, alpha: T) -> Self {
        Self { taps: self.taps.iter().map(|&v| v * alpha).collect(), ..self.clone() }
    }

    /// Lays the kernel onto a periodic `width x height` grid with its origin at pixel
    /// `(0, 0)`; taps that alias under the wrap are accumulated.
    pub fn to_periodic_grid(&self, width: usize, height: usize) -> ImageGrid<T> {
        let mut g = ImageGrid::zeros(width, height);
        for (dx, dy, v) in self.offsets() {
            let x = wrap(dx, width);
            let y = wrap(dy, height);
            let cur = g.get(x, y);
            g.set(x, y, cur + v);
        }
        g
    }
}

/// Periodic convolution `(k * img)(r) = sum_q k(q) img(r - q)`.
///
/// Summation order is fixed (kernel rows, then columns) so results are reproducible.
pub fn conv2_periodic<T: Real>(img: &ImageGrid<T>, k: &StencilKernel<T>) -> ImageGrid<T> {
    let (w, h) = img.dims();
    let taps: Vec<(isize, isize, T)> = k.offsets().filter(|t| t.2 != T::zero()).collect();
    ImageGrid::from_fn(w, h, |x, y| {
        taps.iter().fold(T::zero(), |acc, &(dx, dy, v)| {
            acc + v * img.get_wrapped(x as isize - dx, y as isize - dy)
        })
    })
}

/// Derivative stencils used throughout: forward first differences and centred second
/// differences, expressed as convolution kernels.
pub mod stencils {
    use super::StencilKernel;
    use crate::scalar::Real;

    /// `(d_x * s)(x, y) = s(x + 1, y) - s(x, y)`.
    pub fn dx<T: Real>() -> StencilKernel<T> {
        StencilKernel::from_rows(&[&[1.0, -1.0]], (0, 1)).unwrap()
    }

    /// `(d_y * s)(x, y) = s(x, y + 1) - s(x, y)`.
    pub fn dy<T: Real>() -> StencilKernel<T> {
        StencilKernel::from_rows(&[&[1.0], &[-1.0]], (1, 0)).unwrap()
    }

    pub fn dxx<T: Real>() -> StencilKernel<T> {
        StencilKernel::from_rows(&[&[1.0, -2.0, 1.0]], (0, 1)).unwrap()
    }

    pub fn dyy<T: Real>() -> StencilKernel<T> {
        StencilKernel::from_rows(&[&[1.0], &[-2.0], &[1.0]], (1, 0)).unwrap()
    }

    /// `d_x * d_y`.
    pub fn dxy<T: Real>() -> StencilKernel<T> {
        dx::<T>().convolve(&dy())
    }
}
