//! Signal-to-noise ratio and windowed structural similarity.

use crate::error::{check_dims, Error, Result};
use crate::grid::ImageGrid;
use crate::scalar::Real;

/// Value returned by [`snr_db`] for an exact reconstruction.
pub const SNR_CAP_DB: f64 = 300.0;

/// `10 log10(|ref|^2 / |ref - est|^2)`, capped at [`SNR_CAP_DB`].
pub fn snr_db<T: Real>(reference: &ImageGrid<T>, estimate: &ImageGrid<T>) -> Result<f64> {
    check_dims(reference.dims(), estimate.dims())?;
    let signal = reference.norm_sq().as_f64();
    if signal == 0.0 {
        return Err(Error::Parameter("SNR reference image is all zero".into()));
    }
    let err: f64 = reference
        .data()
        .iter()
        .zip(estimate.data())
        .map(|(&a, &b)| (a - b).as_f64().powi(2))
        .sum();
    if err == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((10.0 * (signal / err).log10()).min(SNR_CAP_DB))
}

/// Peak signal-to-noise ratio with the peak taken as `max(reference)`.
pub fn psnr_db<T: Real>(reference: &ImageGrid<T>, estimate: &ImageGrid<T>) -> Result<f64> {
    check_dims(reference.dims(), estimate.dims())?;
    let peak = reference.max().as_f64();
    let n = reference.len() as f64;
    let mse: f64 = reference
        .data()
        .iter()
        .zip(estimate.data())
        .map(|(&a, &b)| (a - b).as_f64().powi(2))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(SNR_CAP_DB))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimParams {
    pub k1: f64,
    pub k2: f64,
    pub sigma: f64,
    /// Window radius; the window is `(2 radius + 1)^2`.
    pub radius: usize,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self { k1: 0.01, k2: 0.03, sigma: 1.5, radius: 5, dynamic_range: 1.0 }
    }
}

/// Mean SSIM over all windows that fit inside the image (Gaussian window,
/// `sigma = 1.5`, `11 x 11`). Images smaller than the window use the largest
/// radius that fits.
pub fn ssim<T: Real>(reference: &ImageGrid<T>, estimate: &ImageGrid<T>) -> Result<f64> {
    ssim_with(reference, estimate, &SsimParams::default())
}

pub fn ssim_with<T: Real>(
    reference: &ImageGrid<T>,
    estimate: &ImageGrid<T>,
    params: &SsimParams,
) -> Result<f64> {
    check_dims(reference.dims(), estimate.dims())?;
    let (w, h) = reference.dims();
    let radius = params.radius.min((w.min(h) - 1) / 2);
    let size = 2 * radius + 1;
    let mut window = Vec::with_capacity(size * size);
    for i in 0..size {
        for j in 0..size {
            let (dy, dx) = (i as f64 - radius as f64, j as f64 - radius as f64);
            window.push((-(dx * dx + dy * dy) / (2.0 * params.sigma * params.sigma)).exp());
        }
    }
    let total: f64 = window.iter().sum();
    window.iter_mut().for_each(|v| *v /= total);

    let c1 = (params.k1 * params.dynamic_range).powi(2);
    let c2 = (params.k2 * params.dynamic_range).powi(2);
    let a: Vec<f64> = reference.data().iter().map(|v| v.as_f64()).collect();
    let b: Vec<f64> = estimate.data().iter().map(|v| v.as_f64()).collect();

    let mut acc = 0.0;
    let mut count = 0usize;
    for y0 in 0..=(h - size) {
        for x0 in 0..=(w - size) {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..size {
                let row = (y0 + i) * w + x0;
                for j in 0..size {
                    let g = window[i * size + j];
                    let (va, vb) = (a[row + j], b[row + j]);
                    ma += g * va;
                    mb += g * vb;
                    saa += g * va * va;
                    sbb += g * vb * vb;
                    sab += g * va * vb;
                }
            }
            let var_a = (saa - ma * ma).max(0.0);
            let var_b = (sbb - mb * mb).max(0.0);
            let cov = sab - ma * mb;
            let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
            let den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
            acc += num / den;
            count += 1;
        }
    }
    Ok((acc / count as f64).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_examples() {
        let r = ImageGrid::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(snr_db(&r, &ImageGrid::zeros(2, 2)).unwrap().abs() < 1e-12);
        assert!(snr_db(&r, &r.scaled(2.0)).unwrap().abs() < 1e-12);
        assert_eq!(snr_db(&r, &r).unwrap(), SNR_CAP_DB);
        // error (0.1, 0, 0, -0.2): 10 log10(30 / 0.05)
        let e = ImageGrid::new(2, 2, vec![1.1, 2.0, 3.0, 3.8]).unwrap();
        assert!((snr_db(&r, &e).unwrap() - 10.0 * 600f64.log10()).abs() < 1e-9);
        assert!(snr_db(&ImageGrid::zeros(2, 2), &r).is_err());
    }

    #[test]
    fn ssim_self_and_inverse() {
        let r = ImageGrid::from_fn(16, 16, |x, y| ((x / 4 + y / 4) % 2) as f64);
        assert!((ssim(&r, &r).unwrap() - 1.0).abs() < 1e-12);
        let inv = r.map(|v| 1.0 - v);
        assert!(ssim(&r, &inv).unwrap() < 0.0);
    }

    #[test]
    fn ssim_constant_pair_is_luminance_term() {
        let a = ImageGrid::filled(12, 12, 0.3);
        let b = ImageGrid::filled(12, 12, 0.5);
        let c1 = 0.01f64 * 0.01;
        let expected = (2.0 * 0.3 * 0.5 + c1) / (0.09 + 0.25 + c1);
        assert!((ssim(&a, &b).unwrap() - expected).abs() < 1e-12);
    }
}
