mod common;

use common::{random_grid, rng};
use corosa::fft::{fft2, ifft2};
use corosa::forward::{
    kspace_noise_sigma, make_gaussian_psf, make_mask, mask_budget, mri_simulate, spiral_center_radius,
    tirf_simulate, DataOperator,
};
use corosa::grid::conv2_periodic;
use corosa::phantom::mixed_phantom;
use corosa::{ComplexGrid, ForwardModel, ImageGrid, MaskKind, Measurement};

#[test]
fn gaussian_psf_shape() {
    for &(sigma, radius) in &[(0.5, 2usize), (2.0, 8), (3.3, 4)] {
        let k = make_gaussian_psf::<f64>(sigma, radius).unwrap();
        assert!((k.sum() - 1.0).abs() < 1e-12);
        let r = radius as isize;
        for dy in -r..=r {
            for dx in -r..=r {
                assert_eq!(k.at(dx, dy), k.at(-dx, -dy));
                assert_eq!(k.at(dx, dy), k.at(dy, dx));
            }
        }
    }
    let tiny = make_gaussian_psf::<f64>(0.05, 2).unwrap();
    assert!(tiny.at(0, 0) > 1.0 - 1e-12);
    assert!(make_gaussian_psf::<f64>(0.0, 2).is_err());
}

#[test]
fn photon_average_converges_to_blurred_image() {
    let n = 16;
    let s = mixed_phantom::<f64>(n).map(|v| v + 0.05);
    let psf = make_gaussian_psf(1.0, 3).unwrap();
    let blurred = conv2_periodic(&s, &psf);
    let (gamma_p, sigma_eta, trials) = (400.0, 2.0, 50);
    let mut acc = ImageGrid::zeros(n, n);
    for t in 0..trials {
        acc.axpy(1.0 / gamma_p, &tirf_simulate(&s, &psf, gamma_p, sigma_eta, 1000 + t).unwrap());
    }
    acc.scale(1.0 / trials as f64);
    let mut total_z = 0.0;
    for i in 0..n * n {
        let mean = blurred.data()[i];
        let var = (gamma_p * mean + sigma_eta * sigma_eta) / (gamma_p * gamma_p) / trials as f64;
        let z = (acc.data()[i] - mean) / var.sqrt();
        assert!(z.abs() < 5.0, "pixel {i}: z = {z}");
        total_z += z;
    }
    // the pixel-averaged error is within three standard deviations
    assert!((total_z / (n * n) as f64).abs() * ((n * n) as f64).sqrt() < 3.0);
}

#[test]
fn photon_simulation_edge_cases() {
    let psf = make_gaussian_psf(2.0, 8).unwrap();
    let zero = ImageGrid::zeros(16, 16);
    assert_eq!(tirf_simulate(&zero, &psf, 10.0, 0.0, 3).unwrap(), zero);
    let s = mixed_phantom::<f64>(32);
    let a = tirf_simulate(&s, &psf, 10.0, 1.0, 7).unwrap();
    let b = tirf_simulate(&s, &psf, 10.0, 1.0, 7).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, tirf_simulate(&s, &psf, 10.0, 1.0, 8).unwrap());
    assert!(tirf_simulate(&s, &psf, 0.0, 1.0, 7).is_err());
    assert!(tirf_simulate(&s, &psf, 10.0, -1.0, 7).is_err());
    assert!(tirf_simulate(&s.map(|v| v - 0.5), &psf, 10.0, 1.0, 7).is_err());
}

fn ones(mask: &ImageGrid<f64>) -> usize {
    mask.data().iter().filter(|&&v| v == 1.0).count()
}

#[test]
fn mask_sample_counts() {
    for kind in [MaskKind::VariableDensityRandom, MaskKind::SpiralWithCenterFill] {
        let m = make_mask::<f64>(kind, 256, 256, 0.1, 5).unwrap();
        assert!(m.data().iter().all(|&v| v == 0.0 || v == 1.0));
        assert!(ones(&m).abs_diff(6554) <= 1, "{kind:?}: {}", ones(&m));
        for &(w, h, d) in &[(64usize, 64usize, 0.25), (48, 80, 0.05), (32, 32, 0.5)] {
            let m = make_mask::<f64>(kind, w, h, d, 9).unwrap();
            assert!(ones(&m).abs_diff(mask_budget(w, h, d)) <= 1);
        }
        let full = make_mask::<f64>(kind, 32, 32, 1.0, 1).unwrap();
        assert!(full.data().iter().all(|&v| v == 1.0));
        assert!(make_mask::<f64>(kind, 32, 32, 0.0, 1).is_err());
        assert!(make_mask::<f64>(kind, 32, 32, 1.5, 1).is_err());
        assert_eq!(make_mask::<f64>(kind, 64, 64, 0.1, 4).unwrap(), make_mask::<f64>(kind, 64, 64, 0.1, 4).unwrap());
    }
}

#[test]
fn spiral_mask_fills_the_centre() {
    for &(n, d) in &[(256usize, 0.1), (128, 0.2), (64, 0.3)] {
        let m = make_mask::<f64>(MaskKind::SpiralWithCenterFill, n, n, d, 2).unwrap();
        let r0 = spiral_center_radius(n, n, d);
        for y in 0..n {
            for x in 0..n {
                let fx = if x < n / 2 { x as f64 } else { x as f64 - n as f64 };
                let fy = if y < n / 2 { y as f64 } else { y as f64 - n as f64 };
                if fx.hypot(fy) <= r0 {
                    assert_eq!(m.get(x, y), 1.0, "({x},{y}) r0={r0}");
                }
            }
        }
    }
}

fn complex_psnr(truth: &ImageGrid<f64>, est: &ComplexGrid<f64>) -> f64 {
    let mse = truth
        .data()
        .iter()
        .zip(est.data())
        .map(|(&s, c)| (c.re - s).powi(2) + c.im * c.im)
        .sum::<f64>()
        / truth.len() as f64;
    10.0 * (truth.max().powi(2) / mse).log10()
}

#[test]
fn kspace_noise_hits_target_psnr() {
    let s = mixed_phantom::<f64>(64);
    let full = ImageGrid::filled(64, 64, 1.0);
    for target in [10.0, 20.0] {
        for t in 0..20 {
            let m = mri_simulate(&s, &full, target, 100 + t).unwrap();
            let psnr = complex_psnr(&s, &ifft2(&m));
            assert!((psnr - target).abs() < 0.2, "target {target}: {psnr}");
        }
    }
    assert!((kspace_noise_sigma(1.0, 20.0) - 0.1 / 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn kspace_masking_and_noise_free_round_trip() {
    let s = mixed_phantom::<f64>(32);
    let full = ImageGrid::filled(32, 32, 1.0);
    let m = mri_simulate(&s, &full, f64::MAX, 1).unwrap();
    let back = ifft2(&m);
    for (c, &v) in back.data().iter().zip(s.data()) {
        assert!((c.re - v).abs() < 1e-12 && c.im.abs() < 1e-12);
    }
    let mask = make_mask::<f64>(MaskKind::VariableDensityRandom, 32, 32, 0.3, 3).unwrap();
    let m = mri_simulate(&s, &mask, 20.0, 1).unwrap();
    for (c, &k) in m.data().iter().zip(mask.data()) {
        if k == 0.0 {
            assert!(c.re == 0.0 && c.im == 0.0);
        }
    }
    assert_eq!(m, mri_simulate(&s, &mask, 20.0, 1).unwrap());
}

#[test]
fn operator_identities() {
    let mut r = rng(31);
    let x = random_grid(16, 16, &mut r);
    let full = ImageGrid::filled(16, 16, 1.0);
    let op = DataOperator::new(&ForwardModel::FourierMask { mask: full }, 16, 16).unwrap();
    for (a, b) in op.normal(&x).data().iter().zip(x.data()) {
        assert!((a - b).abs() < 1e-12);
    }
    let Measurement::Complex(y) = op.apply(&x) else { panic!("complex data expected") };
    let f = fft2(&x.to_complex());
    for (a, b) in y.data().iter().zip(f.data()) {
        assert!((a - b).norm() < 1e-12);
    }

    let id = DataOperator::new(&ForwardModel::identity(), 16, 16).unwrap();
    let Measurement::Real(y) = id.apply(&x) else { panic!("real data expected") };
    for (a, b) in y.data().iter().zip(x.data()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn model_validation() {
    let bad = ImageGrid::filled(4, 4, 0.5);
    assert!(ForwardModel::FourierMask { mask: bad }.validate().is_err());
    assert!(ForwardModel::FourierMask { mask: ImageGrid::<f64>::zeros(4, 4) }.validate().is_err());
    let neg = corosa::StencilKernel::from_rows(&[&[1.0, -1.0]], (0, 0)).unwrap();
    assert!(ForwardModel::<f64>::Convolution { psf: neg }.validate().is_err());

    // a mask without DC cannot see constants
    let mut mask = ImageGrid::filled(8, 8, 1.0);
    mask.set(0, 0, 0.0);
    let op = DataOperator::new(&ForwardModel::FourierMask { mask }, 8, 8).unwrap();
    assert!(op.annihilates_constants());
    assert!(!DataOperator::<f64>::new(&ForwardModel::identity(), 8, 8).unwrap().annihilates_constants());
}
