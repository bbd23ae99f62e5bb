//! Measurement operators and simulators for the two acquisition models: periodic
//! convolution with a point-spread function (fluorescence microscopy) and masked
//! unitary Fourier sampling (MRI).

use std::f64::consts::PI;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{check_dims, Error, Result};
use crate::fft::Fft2;
use crate::grid::{ComplexGrid, ImageGrid, StencilKernel};
use crate::scalar::Real;

/// Linear measurement model `H`.
#[derive(Clone, Debug, PartialEq)]
pub enum ForwardModel<T> {
    /// Periodic convolution with a nonnegative point-spread function.
    Convolution { psf: StencilKernel<T> },
    /// Unitary DFT followed by a binary sampling mask (DC at pixel `(0, 0)`).
    FourierMask { mask: ImageGrid<T> },
}

impl<T: Real> ForwardModel<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Convolution { psf } => {
                if !(psf.sum() > T::zero()) {
                    return Err(Error::Parameter("PSF taps must have positive sum".into()));
                }
            }
            Self::FourierMask { mask } => {
                if mask.data().iter().any(|&v| v != T::zero() && v != T::one()) {
                    return Err(Error::Parameter("mask entries must be 0 or 1".into()));
                }
                if !mask.data().iter().any(|&v| v == T::one()) {
                    return Err(Error::Parameter("mask has no samples".into()));
                }
            }
        }
        Ok(())
    }

    /// Identity measurement (denoising).
    pub fn identity() -> Self {
        Self::Convolution { psf: StencilKernel::impulse() }
    }
}

/// Noise added by the simulators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseSpec {
    /// `m = Poisson(gamma_p (h * s)) + N(0, sigma_eta^2)`.
    MixedPoissonGaussian { gamma_p: f64, sigma_eta: f64 },
    /// Complex white k-space noise calibrated to a PSNR of the fully sampled inverse.
    CalibratedComplexGaussian { target_psnr_db: f64 },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::MixedPoissonGaussian { gamma_p, sigma_eta } => {
                if !(gamma_p > 0.0 && gamma_p.is_finite()) {
                    return Err(Error::Parameter(format!("gamma_p must be > 0, got {gamma_p}")));
                }
                if !(sigma_eta >= 0.0 && sigma_eta.is_finite()) {
                    return Err(Error::Parameter(format!(
                        "sigma_eta must be >= 0, got {sigma_eta}"
                    )));
                }
            }
            Self::CalibratedComplexGaussian { target_psnr_db } => {
                if !target_psnr_db.is_finite() {
                    return Err(Error::Parameter("target PSNR must be finite".into()));
                }
            }
        }
        Ok(())
    }
}

/// Data in the range of `H`.
#[derive(Clone, Debug, PartialEq)]
pub enum Measurement<T> {
    Real(ImageGrid<T>),
    Complex(ComplexGrid<T>),
}

impl<T: Real> Measurement<T> {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            Self::Real(g) => g.dims(),
            Self::Complex(g) => g.dims(),
        }
    }

    /// Real inner product (`Re <a, b>` for complex data).
    pub fn dot(&self, other: &Self) -> T {
        match (self, other) {
            (Self::Real(a), Self::Real(b)) => a.dot(b),
            (Self::Complex(a), Self::Complex(b)) => a.dot_re(b),
            _ => panic!("measurement kinds differ"),
        }
    }

    /// `sum |a - b|^2`.
    pub fn distance_sq(&self, other: &Self) -> T {
        match (self, other) {
            (Self::Real(a), Self::Real(b)) => a
                .data()
                .iter()
                .zip(b.data())
                .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y)),
            (Self::Complex(a), Self::Complex(b)) => a
                .data()
                .iter()
                .zip(b.data())
                .fold(T::zero(), |acc, (x, y)| acc + (*x - *y).norm_sqr()),
            _ => panic!("measurement kinds differ"),
        }
    }

    pub fn max_abs(&self) -> T {
        match self {
            Self::Real(g) => g.data().iter().fold(T::zero(), |m, v| m.max(v.abs())),
            Self::Complex(g) => g.data().iter().fold(T::zero(), |m, c| m.max(c.norm())),
        }
    }
}

enum Kind<T> {
    Convolution { transfer: Vec<Complex<T>>, inv_n: T },
    Fourier { mask: Vec<T>, inv_sqrt_n: T },
}

/// `H`, `H^T` and `H^T H` for a fixed grid size, evaluated in the Fourier domain.
pub struct DataOperator<T: Real> {
    width: usize,
    height: usize,
    fft: Fft2<T>,
    kind: Kind<T>,
}

impl<T: Real> DataOperator<T> {
    pub fn new(model: &ForwardModel<T>, width: usize, height: usize) -> Result<Self> {
        model.validate()?;
        let fft = Fft2::new(width, height);
        let n = T::lit((width * height) as f64);
        let kind = match model {
            ForwardModel::Convolution { psf } => {
                let mut transfer = psf.to_periodic_grid(width, height).to_complex().data().to_vec();
                fft.forward_raw(&mut transfer);
                Kind::Convolution { transfer, inv_n: T::one() / n }
            }
            ForwardModel::FourierMask { mask } => {
                check_dims((width, height), mask.dims())?;
                Kind::Fourier { mask: mask.data().to_vec(), inv_sqrt_n: T::one() / n.sqrt() }
            }
        };
        Ok(Self { width, height, fft, kind })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn is_fourier(&self) -> bool {
        matches!(self.kind, Kind::Fourier { .. })
    }

    fn spectrum(&self, s: &ImageGrid<T>) -> Vec<Complex<T>> {
        let mut buf: Vec<Complex<T>> =
            s.data().iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.fft.forward_raw(&mut buf);
        buf
    }

    fn real_of_inverse(&self, mut buf: Vec<Complex<T>>, scale: T) -> ImageGrid<T> {
        self.fft.inverse_raw(&mut buf);
        ImageGrid::new(self.width, self.height, buf.iter().map(|c| c.re * scale).collect())
            .expect("finite")
    }

    pub fn apply(&self, s: &ImageGrid<T>) -> Measurement<T> {
        assert_eq!(s.dims(), self.dims(), "data operator size mismatch");
        let mut buf = self.spectrum(s);
        match &self.kind {
            Kind::Convolution { transfer, inv_n } => {
                for (b, &t) in buf.iter_mut().zip(transfer) {
                    *b = *b * t;
                }
                Measurement::Real(self.real_of_inverse(buf, *inv_n))
            }
            Kind::Fourier { mask, inv_sqrt_n } => {
                for (b, &m) in buf.iter_mut().zip(mask) {
                    *b = *b * (m * *inv_sqrt_n);
                }
                Measurement::Complex(
                    ComplexGrid::new(self.width, self.height, buf).expect("sized"),
                )
            }
        }
    }

    pub fn adjoint(&self, y: &Measurement<T>) -> Result<ImageGrid<T>> {
        check_dims(self.dims(), y.dims())?;
        match (&self.kind, y) {
            (Kind::Convolution { transfer, inv_n }, Measurement::Real(g)) => {
                let mut buf = self.spectrum(g);
                for (b, t) in buf.iter_mut().zip(transfer) {
                    *b = *b * t.conj();
                }
                Ok(self.real_of_inverse(buf, *inv_n))
            }
            (Kind::Fourier { mask, inv_sqrt_n }, Measurement::Complex(g)) => {
                let buf = g.data().iter().zip(mask).map(|(c, &m)| *c * m).collect();
                Ok(self.real_of_inverse(buf, *inv_sqrt_n))
            }
            _ => Err(Error::Parameter("measurement kind does not match the model".into())),
        }
    }

    /// `H^T H s`.
    pub fn normal(&self, s: &ImageGrid<T>) -> ImageGrid<T> {
        let mut buf = self.spectrum(s);
        match &self.kind {
            Kind::Convolution { transfer, inv_n } => {
                for (b, t) in buf.iter_mut().zip(transfer) {
                    *b = *b * t.norm_sqr();
                }
                self.real_of_inverse(buf, *inv_n)
            }
            Kind::Fourier { mask, .. } => {
                for (b, &m) in buf.iter_mut().zip(mask) {
                    *b = *b * m;
                }
                let inv_n = T::one() / T::lit((self.width * self.height) as f64);
                self.real_of_inverse(buf, inv_n)
            }
        }
    }

    /// Eigenvalues of `H^T H` indexed like the unnormalized DFT of the grid.
    pub fn normal_spectrum(&self) -> Vec<T> {
        match &self.kind {
            Kind::Convolution { transfer, .. } => transfer.iter().map(|t| t.norm_sqr()).collect(),
            Kind::Fourier { mask, .. } => mask.clone(),
        }
    }

    /// `sum |H s - m|^2`.
    pub fn misfit(&self, s: &ImageGrid<T>, m: &Measurement<T>) -> T {
        self.apply(s).distance_sq(m)
    }

    /// True when `H 1 = 0`, i.e. constants are invisible to the data term.
    pub fn annihilates_constants(&self) -> bool {
        let one = ImageGrid::filled(self.width, self.height, T::one());
        let h1 = self.apply(&one);
        let n = T::lit((self.width * self.height) as f64);
        h1.dot(&h1) <= T::lit(1e-24) * n
    }
}

/// `H s`.
pub fn apply_h<T: Real>(s: &ImageGrid<T>, model: &ForwardModel<T>) -> Result<Measurement<T>> {
    let op = DataOperator::new(model, s.width(), s.height())?;
    Ok(op.apply(s))
}

/// `H^T y`; for Fourier data, the real part of the masked inverse transform.
pub fn apply_ht<T: Real>(y: &Measurement<T>, model: &ForwardModel<T>) -> Result<ImageGrid<T>> {
    let (w, h) = y.dims();
    DataOperator::new(model, w, h)?.adjoint(y)
}

/// Truncated, unit-sum Gaussian PSF on a `(2 radius + 1)^2` support.
pub fn make_gaussian_psf<T: Real>(sigma: f64, radius: usize) -> Result<StencilKernel<T>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Parameter(format!("PSF sigma must be > 0, got {sigma}")));
    }
    if (radius as f64) < 2.0 * sigma {
        log::warn!("PSF radius {radius} < 2 sigma ({sigma}); kernel is truncated");
    }
    let n = 2 * radius + 1;
    let mut taps = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (dy, dx) = (i as f64 - radius as f64, j as f64 - radius as f64);
            taps.push((-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp());
        }
    }
    let total: f64 = taps.iter().sum();
    let taps = taps.into_iter().map(|v| T::lit(v / total)).collect();
    StencilKernel::new(n, n, taps, (radius, radius))
}

/// Poisson-Gaussian blurred measurement, deterministic in `seed`.
pub fn tirf_simulate<T: Real>(
    s: &ImageGrid<T>,
    psf: &StencilKernel<T>,
    gamma_p: f64,
    sigma_eta: f64,
    seed: u64,
) -> Result<ImageGrid<T>> {
    NoiseSpec::MixedPoissonGaussian { gamma_p, sigma_eta }.validate()?;
    if s.data().iter().any(|&v| v < T::zero()) {
        return Err(Error::Parameter("ground truth must be nonnegative".into()));
    }
    let model = ForwardModel::Convolution { psf: psf.clone() };
    let blurred = match apply_h(s, &model)? {
        Measurement::Real(g) => g,
        Measurement::Complex(_) => unreachable!("convolution data is real"),
    };
    let gaussian = Normal::new(0.0, sigma_eta).expect("validated sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = blurred
        .data()
        .iter()
        .map(|&v| {
            // FFT round-off can leave tiny negative means on a nonnegative blur
            let mean = (gamma_p * v.as_f64()).max(0.0);
            let count = if mean > 0.0 {
                Poisson::new(mean).expect("positive mean").sample(&mut rng)
            } else {
                0.0
            };
            let eta = if sigma_eta > 0.0 { gaussian.sample(&mut rng) } else { 0.0 };
            T::lit(count + eta)
        })
        .collect();
    ImageGrid::new(s.width(), s.height(), out)
}

/// k-space trajectory family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskKind {
    /// Random samples without replacement, density decaying away from DC.
    VariableDensityRandom,
    /// Archimedean spiral plus a fully sampled disk around DC.
    SpiralWithCenterFill,
}

/// Fraction of the sample budget spent on the central disk of the spiral mask.
pub const SPIRAL_CENTER_FRACTION: f64 = 0.2;

#[inline]
fn signed_freq(k: usize, n: usize) -> f64 {
    if k < n.div_ceil(2) {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Number of samples a mask of this density carries.
pub fn mask_budget(width: usize, height: usize, density: f64) -> usize {
    ((density * (width * height) as f64).round() as usize).clamp(1, width * height)
}

/// Radius (in frequency pixels) of the fully sampled disk of the spiral mask.
pub fn spiral_center_radius(width: usize, height: usize, density: f64) -> f64 {
    let budget = mask_budget(width, height, density) as f64;
    (SPIRAL_CENTER_FRACTION * budget / PI).sqrt()
}

/// Binary sampling mask in unshifted DFT layout (DC at pixel `(0, 0)`).
pub fn make_mask<T: Real>(
    kind: MaskKind,
    width: usize,
    height: usize,
    density: f64,
    seed: u64,
) -> Result<ImageGrid<T>> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::Parameter(format!("mask density must be in (0, 1], got {density}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Parameter("mask must be nonempty".into()));
    }
    let budget = mask_budget(width, height, density);
    let mut taken = vec![false; width * height];
    let mut count = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    if kind == MaskKind::SpiralWithCenterFill {
        let r0 = spiral_center_radius(width, height, density);
        for y in 0..height {
            for x in 0..width {
                let (fx, fy) = (signed_freq(x, width), signed_freq(y, height));
                if fx.hypot(fy) <= r0 && count < budget {
                    taken[y * width + x] = true;
                    count += 1;
                }
            }
        }
        let remaining = budget - count;
        if remaining > 0 {
            let order = spiral_fill(width, height, &taken, remaining);
            for idx in order {
                taken[idx] = true;
                count += 1;
            }
        }
    }

    if count < budget {
        fill_variable_density(width, height, &mut taken, budget - count, &mut rng);
    }

    let data = taken.iter().map(|&t| if t { T::one() } else { T::zero() }).collect();
    ImageGrid::new(width, height, data)
}

// Unique new grid points along an Archimedean spiral with the given number of turns,
// in order of increasing angle.
fn spiral_points(width: usize, height: usize, taken: &[bool], turns: f64) -> Vec<usize> {
    let r_max = (width as f64 / 2.0).hypot(height as f64 / 2.0);
    let theta_max = 2.0 * PI * turns;
    let a = r_max / theta_max;
    let mut seen = vec![false; width * height];
    let mut out = Vec::new();
    let mut theta = 0.0f64;
    while theta <= theta_max {
        let r = a * theta;
        let fx = (r * theta.cos()).round();
        let fy = (r * theta.sin()).round();
        if fx.abs() <= width as f64 / 2.0 && fy.abs() <= height as f64 / 2.0 {
            let x = (fx as isize).rem_euclid(width as isize) as usize;
            let y = (fy as isize).rem_euclid(height as isize) as usize;
            let idx = y * width + x;
            if !taken[idx] && !seen[idx] {
                seen[idx] = true;
                out.push(idx);
            }
        }
        // arc-length step of a quarter pixel
        let speed = a.hypot(r).max(1e-3);
        theta += 0.25 / speed;
    }
    out
}

fn spiral_fill(width: usize, height: usize, taken: &[bool], remaining: usize) -> Vec<usize> {
    let max_turns = width.max(height) as f64;
    let enough = |t: f64| spiral_points(width, height, taken, t).len() >= remaining;
    let turns = if !enough(max_turns) {
        max_turns
    } else {
        let (mut lo, mut hi) = (0.5f64, max_turns);
        if enough(lo) {
            hi = lo;
        }
        while hi - lo > 0.05 {
            let mid = 0.5 * (lo + hi);
            if enough(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let mut pts = spiral_points(width, height, taken, turns);
    pts.truncate(remaining);
    pts
}

// Weighted sampling without replacement (exponential keys), weights decaying with
// the distance from DC.
fn fill_variable_density(
    width: usize,
    height: usize,
    taken: &mut [bool],
    count: usize,
    rng: &mut ChaCha8Rng,
) {
    let scale = 0.1 * width.max(height) as f64;
    let mut keys: Vec<(f64, usize)> = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let idx = y * width + x;
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            if taken[idx] {
                continue;
            }
            let r = signed_freq(x, width).hypot(signed_freq(y, height));
            let weight = 1.0 / (1.0 + (r / scale).powi(2));
            keys.push((u.ln() / weight, idx));
        }
    }
    keys.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, idx) in keys.iter().take(count) {
        taken[idx] = true;
    }
}

/// Per-component standard deviation of k-space noise that yields `target_psnr_db`
/// after a fully sampled unitary inverse transform (peak = `max(s)`).
pub fn kspace_noise_sigma(peak: f64, target_psnr_db: f64) -> f64 {
    peak * 10f64.powf(-target_psnr_db / 20.0) / 2f64.sqrt()
}

/// `mask * (F s + noise)`, deterministic in `seed`.
pub fn mri_simulate<T: Real>(
    s: &ImageGrid<T>,
    mask: &ImageGrid<T>,
    target_psnr_db: f64,
    seed: u64,
) -> Result<ComplexGrid<T>> {
    NoiseSpec::CalibratedComplexGaussian { target_psnr_db }.validate()?;
    check_dims(s.dims(), mask.dims())?;
    let sigma = kspace_noise_sigma(s.max().as_f64(), target_psnr_db);
    let fft = Fft2::new(s.width(), s.height());
    let spectrum = fft.forward(&s.to_complex());
    let normal = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = spectrum
        .data()
        .iter()
        .zip(mask.data())
        .map(|(c, &m)| {
            let (nr, ni) = (normal.sample(&mut rng), normal.sample(&mut rng));
            if m == T::zero() {
                Complex::new(T::zero(), T::zero())
            } else {
                Complex::new(c.re + T::lit(nr), c.im + T::lit(ni))
            }
        })
        .collect();
    ComplexGrid::new(s.width(), s.height(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(w: usize, h: usize, seed: u64) -> ImageGrid<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageGrid::from_fn(w, h, |_, _| rng.random::<f64>())
    }

    #[test]
    fn psf_properties() {
        let k = make_gaussian_psf::<f64>(2.0, 8).unwrap();
        assert!((k.sum() - 1.0).abs() < 1e-12);
        for (dx, dy, v) in k.offsets() {
            assert_eq!(v, k.at(-dx, -dy));
        }
        let tiny = make_gaussian_psf::<f64>(0.05, 2).unwrap();
        assert!((tiny.at(0, 0) - 1.0).abs() < 1e-12);
        assert!(make_gaussian_psf::<f64>(0.0, 3).is_err());
    }

    #[test]
    fn fft_convolution_matches_direct() {
        let s = sample(12, 10, 1);
        let psf = make_gaussian_psf::<f64>(1.3, 3).unwrap();
        let Measurement::Real(fast) =
            apply_h(&s, &ForwardModel::Convolution { psf: psf.clone() }).unwrap()
        else {
            panic!()
        };
        let direct = crate::grid::conv2_periodic(&s, &psf);
        for (a, b) in fast.data().iter().zip(direct.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn impulse_psf_is_identity() {
        let s = sample(8, 8, 2);
        let Measurement::Real(out) = apply_h(&s, &ForwardModel::identity()).unwrap() else {
            panic!()
        };
        for (a, b) in out.data().iter().zip(s.data()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn full_mask_normal_operator_is_identity() {
        let s = sample(8, 6, 3);
        let model = ForwardModel::FourierMask { mask: ImageGrid::filled(8, 6, 1.0) };
        let op = DataOperator::new(&model, 8, 6).unwrap();
        let back = op.normal(&s);
        for (a, b) in back.data().iter().zip(s.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn masks_respect_budget() {
        let m = make_mask::<f64>(MaskKind::VariableDensityRandom, 16, 16, 1.0, 0).unwrap();
        assert!(m.data().iter().all(|&v| v == 1.0));
        for kind in [MaskKind::VariableDensityRandom, MaskKind::SpiralWithCenterFill] {
            let m = make_mask::<f64>(kind, 64, 64, 0.2, 5).unwrap();
            assert_eq!(m.sum() as usize, mask_budget(64, 64, 0.2));
        }
        assert!(make_mask::<f64>(MaskKind::VariableDensityRandom, 8, 8, 0.0, 0).is_err());
        assert!(make_mask::<f64>(MaskKind::VariableDensityRandom, 8, 8, 1.5, 0).is_err());
    }

    #[test]
    fn tirf_zero_signal_gives_zero() {
        let s = ImageGrid::<f64>::zeros(8, 8);
        let psf = make_gaussian_psf(1.0, 2).unwrap();
        let m = tirf_simulate(&s, &psf, 10.0, 0.0, 3).unwrap();
        assert!(m.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn noise_sigma_formula() {
        let s = kspace_noise_sigma(1.0, 20.0);
        assert!((s - 0.1 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn detects_null_space_on_constants() {
        let mut mask = ImageGrid::filled(8, 8, 1.0);
        mask.set(0, 0, 0.0);
        let op = DataOperator::new(&ForwardModel::FourierMask { mask }, 8, 8).unwrap();
        assert!(op.annihilates_constants());
        let op = DataOperator::new(&ForwardModel::<f64>::identity(), 8, 8).unwrap();
        assert!(!op.annihilates_constants());
    }
}
