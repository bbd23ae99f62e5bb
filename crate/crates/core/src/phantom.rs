//! Synthetic test image with piecewise-constant, linear and quadratic regions.

use crate::grid::ImageGrid;
use crate::scalar::Real;

/// Which part of the mixed phantom a pixel belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Background,
    Flat,
    Ramp,
    Bump,
}

const BUMP_CENTRE: (f64, f64) = (0.72, 0.72);
const BUMP_RADIUS: f64 = 0.22;

/// Region label at `(x, y)` on an `n x n` phantom.
pub fn region(n: usize, x: usize, y: usize) -> Region {
    let (u, v) = ((x as f64 + 0.5) / n as f64, (y as f64 + 0.5) / n as f64);
    let (bu, bv) = (u - BUMP_CENTRE.0, v - BUMP_CENTRE.1);
    if bu * bu + bv * bv < BUMP_RADIUS * BUMP_RADIUS {
        Region::Bump
    } else if (0.08..0.42).contains(&u) && (0.08..0.42).contains(&v) {
        Region::Flat
    } else if (0.55..0.92).contains(&u) && (0.08..0.4).contains(&v) {
        Region::Ramp
    } else if (0.1..0.4).contains(&u) && (0.55..0.9).contains(&v) {
        Region::Flat
    } else {
        Region::Background
    }
}

/// `n x n` phantom with values in `[0, 1]`: two flat plateaus, a linear ramp and a
/// smooth quadratic bump on a dark background.
pub fn mixed_phantom<T: Real>(n: usize) -> ImageGrid<T> {
    ImageGrid::from_fn(n, n, |x, y| {
        let (u, v) = ((x as f64 + 0.5) / n as f64, (y as f64 + 0.5) / n as f64);
        let value = match region(n, x, y) {
            Region::Background => 0.0,
            Region::Flat if v < 0.5 => 0.7,
            Region::Flat => 0.4,
            Region::Ramp => 0.1 + 0.8 * (u - 0.55) / 0.37,
            Region::Bump => {
                let r2 = ((u - BUMP_CENTRE.0).powi(2) + (v - BUMP_CENTRE.1).powi(2))
                    / (BUMP_RADIUS * BUMP_RADIUS);
                0.9 * (1.0 - r2)
            }
        };
        T::lit(value)
    })
}

/// Mask of pixels in `region` at least `margin` pixels away from any other region.
pub fn region_interior(n: usize, which: Region, margin: usize) -> Vec<(usize, usize)> {
    let m = margin as isize;
    let mut out = Vec::new();
    for y in 0..n {
        for x in 0..n {
            let inside = (-m..=m).all(|dy| {
                (-m..=m).all(|dx| {
                    let (xx, yy) = (x as isize + dx, y as isize + dy);
                    xx >= 0
                        && yy >= 0
                        && (xx as usize) < n
                        && (yy as usize) < n
                        && region(n, xx as usize, yy as usize) == which
                })
            });
            if inside {
                out.push((x, y));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_in_unit_range_and_regions_present() {
        let p = mixed_phantom::<f64>(64);
        assert!(p.min() >= 0.0 && p.max() <= 1.0);
        for r in [Region::Flat, Region::Ramp, Region::Bump] {
            assert!(!region_interior(64, r, 2).is_empty(), "{r:?}");
        }
    }
}
