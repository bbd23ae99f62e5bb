mod common;

use common::{close, dense_apply, dense_columns, random_field, random_grid, rng};
use corosa::admm::{weighted_grad, weighted_grad_adjoint, weighted_hess, weighted_hess_adjoint, Preconditioner};
use corosa::diff::{grad, grad_adjoint, hess, hess_adjoint};
use corosa::forward::{make_gaussian_psf, make_mask, DataOperator};
use corosa::grid::{conv2_periodic, stencils};
use corosa::resample::{expand, interp_kernel_level, upsample_j, upsample_j_adjoint};
use corosa::{ForwardModel, ImageGrid, MaskKind, Measurement, StencilKernel, WeightMap};
use proptest::prelude::*;
use rand::Rng;

const TRIALS: u64 = 20;

#[test]
fn derivative_adjoints() {
    let mut r = rng(1);
    for _ in 0..TRIALS {
        let (w, h) = (r.random_range(3..20), r.random_range(3..20));
        let x = random_grid(w, h, &mut r);
        let g = random_field(w, h, 2, &mut r);
        assert!(close(grad(&x).dot(&g), x.dot(&grad_adjoint(&g).unwrap()), 1e-10));
        let hf = random_field(w, h, 3, &mut r);
        assert!(close(hess(&x).dot(&hf), x.dot(&hess_adjoint(&hf).unwrap()), 1e-10));
    }
}

#[test]
fn weighted_adjoints() {
    let mut r = rng(2);
    for _ in 0..TRIALS {
        let (w, h) = (r.random_range(3..20), r.random_range(3..20));
        let beta = WeightMap::new(ImageGrid::from_fn(w, h, |_, _| r.random_range(0.0..1.0))).unwrap();
        let x = random_grid(w, h, &mut r);
        let g = random_field(w, h, 2, &mut r);
        let hf = random_field(w, h, 3, &mut r);
        let lhs = weighted_grad(&x, &beta).unwrap().dot(&g);
        assert!(close(lhs, x.dot(&weighted_grad_adjoint(&g, &beta).unwrap()), 1e-10));
        let lhs = weighted_hess(&x, &beta).unwrap().dot(&hf);
        assert!(close(lhs, x.dot(&weighted_hess_adjoint(&hf, &beta).unwrap()), 1e-10));
    }
}

#[test]
fn interpolation_adjoints() {
    let mut r = rng(3);
    for t in 0..TRIALS {
        let j = (t % 4) as usize;
        let (w, h) = (r.random_range(2..9), r.random_range(2..9));
        let x = random_grid(w, h, &mut r);
        let y = random_grid(w << j, h << j, &mut r);
        let lhs = upsample_j(&x, j).dot(&y);
        assert!(close(lhs, x.dot(&upsample_j_adjoint(&y, j)), 1e-10), "j={j}");
    }
}

fn random_kernel(r: &mut rand_chacha::ChaCha8Rng) -> StencilKernel<f64> {
    let (rows, cols) = (r.random_range(1..6), r.random_range(1..6));
    let taps = (0..rows * cols).map(|_| r.random_range(-1.0..1.0)).collect();
    let origin = (r.random_range(0..rows), r.random_range(0..cols));
    StencilKernel::new(rows, cols, taps, origin).unwrap()
}

#[test]
fn convolution_adjoint_is_flipped_kernel() {
    let mut r = rng(4);
    for _ in 0..TRIALS {
        let (w, h) = (r.random_range(5..16), r.random_range(5..16));
        let k = random_kernel(&mut r);
        let x = random_grid(w, h, &mut r);
        let y = random_grid(w, h, &mut r);
        let lhs = conv2_periodic(&x, &k).dot(&y);
        assert!(close(lhs, x.dot(&conv2_periodic(&y, &k.flipped())), 1e-10));
    }
}

#[test]
fn forward_model_adjoints() {
    let mut r = rng(5);
    for t in 0..TRIALS {
        let n = 8 + 2 * (t as usize % 5);
        let x = random_grid(n, n, &mut r);

        let psf = make_gaussian_psf::<f64>(r.random_range(0.5..2.5), 4).unwrap();
        let op = DataOperator::new(&ForwardModel::Convolution { psf }, n, n).unwrap();
        let y = Measurement::Real(random_grid(n, n, &mut r));
        assert!(close(op.apply(&x).dot(&y), x.dot(&op.adjoint(&y).unwrap()), 1e-10));

        let mask = make_mask(MaskKind::VariableDensityRandom, n, n, 0.3, t).unwrap();
        let op = DataOperator::new(&ForwardModel::FourierMask { mask }, n, n).unwrap();
        let re = random_grid(n, n, &mut r);
        let im = random_grid(n, n, &mut r);
        let data = re.data().iter().zip(im.data()).map(|(&a, &b)| num_complex::Complex::new(a, b)).collect();
        let y = Measurement::Complex(corosa::ComplexGrid::new(n, n, data).unwrap());
        assert!(close(op.apply(&x).dot(&y), x.dot(&op.adjoint(&y).unwrap()), 1e-10));
    }
}

#[test]
fn convolution_matches_dense_operator() {
    let mut r = rng(6);
    let x = random_grid(8, 8, &mut r);
    let k = stencils::dx::<f64>();
    let cols = dense_columns(8, 8, |e| conv2_periodic(e, &k).into_data());
    let dense = dense_apply(&cols, x.data());
    for (a, b) in dense.iter().zip(conv2_periodic(&x, &k).data()) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn cascaded_interpolation_matches_single_stage_filter() {
    let mut r = rng(7);
    for j in 0..4 {
        let x = random_grid(4, 3, &mut r);
        let single = conv2_periodic(&expand(&x, 1 << j), &interp_kernel_level(j));
        let cascade = upsample_j(&x, j);
        for (a, b) in single.data().iter().zip(cascade.data()) {
            assert!((a - b).abs() < 1e-10, "j={j}");
        }
    }
}

#[test]
fn interpolation_matches_dense_matrix() {
    let mut r = rng(8);
    for &(n, j) in &[(4usize, 1usize), (4, 2), (8, 1), (2, 3)] {
        let cols = dense_columns(n, n, |e| upsample_j(e, j).into_data());
        let x = random_grid(n, n, &mut r);
        let dense = dense_apply(&cols, x.data());
        for (a, b) in dense.iter().zip(upsample_j(&x, j).data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

/// `E^T (I + D_f^T D_f + D_s^T W D_s) E` assembled from the library's separate
/// operators, one impulse at a time.
fn dense_penalty_operator(n: usize, j: usize) -> Vec<Vec<f64>> {
    let c = n >> j;
    dense_columns(c, c, |e| {
        let x = upsample_j(e, j);
        let mut acc = grad_adjoint(&grad(&x)).unwrap();
        let mut hx = hess(&x);
        corosa::admm::apply_hessian_metric(&mut hx);
        acc.axpy(1.0, &hess_adjoint(&hx).unwrap());
        acc.axpy(1.0, &x);
        upsample_j_adjoint(&acc, j).into_data()
    })
}

#[test]
fn preconditioner_matches_dense_operator() {
    let n = 32;
    let mut r = rng(9);
    for j in 0..3 {
        let cols = dense_penalty_operator(n, j);
        let p = Preconditioner::<f64>::unweighted((n, n), j);
        let c = n >> j;
        for _ in 0..3 {
            let x = random_grid(c, c, &mut r);
            let dense = dense_apply(&cols, x.data());
            let filt = p.apply_operator(&x);
            for (a, b) in dense.iter().zip(filt.data()) {
                assert!((a - b).abs() < 1e-9, "j={j}: {a} vs {b}");
            }
            let back = p.apply_inverse(&filt);
            for (a, b) in back.data().iter().zip(x.data()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn convolution_commutes_with_shift(seed in any::<u64>(), dx in -7isize..7, dy in -7isize..7) {
        let mut r = rng(seed);
        let x = random_grid(9, 7, &mut r);
        let k = random_kernel(&mut r);
        let a = conv2_periodic(&x.shifted(dx, dy), &k);
        let b = conv2_periodic(&x, &k).shifted(dx, dy);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn derivatives_annihilate_constants(c in -10.0f64..10.0, w in 2usize..12, h in 2usize..12) {
        let img = ImageGrid::filled(w, h, c);
        prop_assert_eq!(grad(&img).norm_sq(), 0.0);
        prop_assert_eq!(hess(&img).norm_sq(), 0.0);
    }

    #[test]
    fn interpolation_preserves_constants_and_range(c in 0.0f64..5.0, j in 0usize..4) {
        let up = upsample_j(&ImageGrid::filled(3, 2, c), j);
        for &v in up.data() {
            prop_assert!((v - c).abs() <= 1e-12 * c.max(1.0));
        }
    }
}
