//! Closed-form proximal maps for the ADMM splitting.
//!
//! Hessian 3-vectors `(v1, v2, v3) = (hxx, hyy, hxy)` are embedded as the symmetric
//! matrix `[[v1, v3], [v3, v2]]`. The Hessian prox is exact with respect to the
//! Frobenius metric of that embedding, `|v1|^2 + |v2|^2 + 2|v3|^2`, which is also the
//! metric the ADMM penalty uses for the Hessian block.

use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::scalar::Real;

/// Order `p` of the Schatten norm on the Hessian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchattenOrder {
    /// Nuclear norm: sum of absolute eigenvalues.
    One,
    /// Frobenius norm.
    Two,
}

impl SchattenOrder {
    pub fn new(p: u32) -> Result<Self> {
        match p {
            1 => Ok(Self::One),
            2 => Ok(Self::Two),
            _ => Err(Error::Parameter(format!("Schatten order must be 1 or 2, got {p}"))),
        }
    }

    pub fn as_u32(self) -> u32 {
        match self {
            Self::One => 1,
            Self::Two => 2,
        }
    }
}

/// Symmetric 2x2 matrix `[[a, b], [b, c]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sym2<T> {
    pub a: T,
    pub c: T,
    pub b: T,
}

impl<T: Real> Sym2<T> {
    /// Embeds a Hessian 3-vector `(hxx, hyy, hxy)`.
    #[inline]
    pub fn from_vec3(v: [T; 3]) -> Self {
        Self { a: v[0], c: v[1], b: v[2] }
    }

    #[inline]
    pub fn to_vec3(self) -> [T; 3] {
        [self.a, self.c, self.b]
    }

    #[inline]
    pub fn frobenius(self) -> T {
        (self.a * self.a + self.c * self.c + T::lit(2.0) * self.b * self.b).sqrt()
    }
}

/// Eigen-decomposition of a [`Sym2`]: `values.0 >= values.1`, and `(cos, sin)` of
/// the eigenvector belonging to `values.0`. The second eigenvector is `(-sin, cos)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eigen2<T> {
    pub values: (T, T),
    pub basis: (T, T),
}

pub fn eig2_sym<T: Real>(m: Sym2<T>) -> Eigen2<T> {
    let half = T::lit(0.5);
    let mean = (m.a + m.c) * half;
    let dev = (m.a - m.c) * half;
    let radius = dev.hypot(m.b);
    let theta = half * (T::lit(2.0) * m.b).atan2(m.a - m.c);
    Eigen2 {
        values: (mean + radius, mean - radius),
        basis: (theta.cos(), theta.sin()),
    }
}

pub fn recompose<T: Real>(l1: T, l2: T, basis: (T, T)) -> Sym2<T> {
    let (co, si) = basis;
    Sym2 {
        a: l1 * co * co + l2 * si * si,
        c: l1 * si * si + l2 * co * co,
        b: (l1 - l2) * co * si,
    }
}

/// Schatten `p`-norm of the embedded Hessian, i.e. the `l_p` norm of its eigenvalues.
pub fn schatten_norm<T: Real>(v: [T; 3], p: SchattenOrder) -> T {
    let m = Sym2::from_vec3(v);
    match p {
        SchattenOrder::Two => m.frobenius(),
        SchattenOrder::One => {
            let e = eig2_sym(m);
            e.values.0.abs() + e.values.1.abs()
        }
    }
}

#[inline]
fn shrink_scalar<T: Real>(x: T, t: T) -> T {
    let mag = x.abs() - t;
    if mag > T::zero() {
        mag.copysign(x)
    } else {
        T::zero()
    }
}

#[inline]
pub(crate) fn shrink_vec2<T: Real>(x: [T; 2], t: T) -> [T; 2] {
    let n = x[0].hypot(x[1]);
    if n <= t || n == T::zero() {
        return [T::zero(), T::zero()];
    }
    let f = (n - t) / n;
    [x[0] * f, x[1] * f]
}

#[inline]
pub(crate) fn shrink_hessian<T: Real>(v: [T; 3], t: T, p: SchattenOrder) -> [T; 3] {
    match p {
        SchattenOrder::Two => {
            let n = Sym2::from_vec3(v).frobenius();
            if n <= t || n == T::zero() {
                return [T::zero(); 3];
            }
            let f = (n - t) / n;
            [v[0] * f, v[1] * f, v[2] * f]
        }
        SchattenOrder::One => {
            let m = Sym2::from_vec3(v);
            if m.b == T::zero() && m.a == m.c {
                // repeated eigenvalue: the matrix is a multiple of the identity
                let s = shrink_scalar(m.a, t);
                return [s, s, T::zero()];
            }
            let e = eig2_sym(m);
            let l1 = shrink_scalar(e.values.0, t);
            let l2 = shrink_scalar(e.values.1, t);
            recompose(l1, l2, e.basis).to_vec3()
        }
    }
}

fn check_threshold<T: Real>(t: T) -> Result<()> {
    if t >= T::zero() && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("threshold must be finite and >= 0, got {t}")))
    }
}

/// `max(0, |x| - t) x / |x|`; the zero vector maps to zero.
pub fn vec_soft_threshold<T: Real>(x: [T; 2], t: T) -> Result<[T; 2]> {
    check_threshold(t)?;
    Ok(shrink_vec2(x, t))
}

/// Prox of `t * ||eig(S(v))||_p`: Frobenius shrinkage for `p = 2`, eigenvalue
/// soft-thresholding for `p = 1`.
pub fn hs_prox<T: Real>(v: [T; 3], t: T, p: SchattenOrder) -> Result<[T; 3]> {
    check_threshold(t)?;
    Ok(shrink_hessian(v, t, p))
}

/// Clamps every pixel to `[0, u]`.
pub fn box_project<T: Real>(x: &ImageGrid<T>, u: T) -> Result<ImageGrid<T>> {
    if !(u > T::zero()) || !u.is_finite() {
        return Err(Error::Parameter(format!("box upper bound must be > 0, got {u}")));
    }
    Ok(x.map(|v| v.max(T::zero()).min(u)))
}
