use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RationalMap;
use crate::sphere::SpherePoint;

/// Value and derivative of a polynomial, ascending coefficients.
fn horner1(c: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &ck in c.iter().rev() {
        dp = dp * z + p;
        p = p * z + ck;
    }
    (p, dp)
}

/// `|W|(1 + |z|²) / (|P|² + |Q|²)` in one chart.
fn sharp_in_chart(p: &[Complex64], q: &[Complex64], z: Complex64) -> f64 {
    let (pv, dp) = horner1(p, z);
    let (qv, dq) = horner1(q, z);
    let w = dp * qv - pv * dq;
    w.norm() * (1.0 + z.norm_sqr()) / (pv.norm_sqr() + qv.norm_sqr())
}

/// Coefficient lists of `f` in the chart `z = 1/u` on both sides.
struct Charts {
    p: Vec<Complex64>,
    q: Vec<Complex64>,
    p_rev: Vec<Complex64>,
    q_rev: Vec<Complex64>,
}

impl Charts {
    fn new(f: &RationalMap) -> Self {
        let (p, q) = f.padded();
        // f(1/u) = P~(u)/Q~(u) with reversed coefficients; the spherical
        // derivative is invariant under the isometry z ↦ 1/z.
        let p_rev = p.iter().rev().copied().collect();
        let q_rev = q.iter().rev().copied().collect();
        Charts { p, q, p_rev, q_rev }
    }

    /// Spherical derivative at chart coordinate `u`, in the inner chart
    /// (`outer = false`) or the `1/z` chart.
    fn at(&self, u: Complex64, outer: bool) -> f64 {
        if outer {
            sharp_in_chart(&self.p_rev, &self.q_rev, u)
        } else {
            sharp_in_chart(&self.p, &self.q, u)
        }
    }
}

/// `f^#(z) = |f'(z)| (1 + |z|²) / (1 + |f(z)|²)`, finite everywhere on the
/// sphere.
pub fn spherical_derivative(f: &RationalMap, z: SpherePoint) -> f64 {
    let charts = Charts::new(f);
    match z {
        SpherePoint::Infinity => charts.at(Complex64::new(0.0, 0.0), true),
        SpherePoint::Finite { re, im } => {
            let z = Complex64::new(re, im);
            if z.norm() <= 1.0 {
                charts.at(z, false)
            } else {
                charts.at(z.inv(), true)
            }
        }
    }
}

/// `L = sup f^#` and `C_f = L²`, with the change of the estimate during the
/// last refinement step as `tolerance`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub lipschitz: f64,
    pub c_f: f64,
    pub tolerance: f64,
}

const RADII: usize = 160;
const ANGLES: usize = 320;

/// Grid search over the closed unit disk in both charts followed by
/// pattern-search refinement of the best grid points.
pub fn sup_spherical_derivative(f: &RationalMap) -> LipschitzEstimate {
    let charts = Charts::new(f);
    let dr = 1.0 / RADII as f64;
    let dt = std::f64::consts::TAU / ANGLES as f64;
    let mut grid: Vec<(f64, Complex64, bool)> = [false, true]
        .par_iter()
        .flat_map_iter(|&outer| {
            let charts = &charts;
            (0..=RADII).flat_map(move |i| {
                let r = i as f64 * dr;
                (0..ANGLES).map(move |j| {
                    let u = Complex64::from_polar(r, j as f64 * dt);
                    (charts.at(u, outer), u, outer)
                })
            })
        })
        .collect();
    grid.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = grid[0].0;
    let mut tolerance = f64::INFINITY;
    for &(v0, u0, outer) in grid.iter().take(8) {
        let (v, tol) = refine(&charts, u0, v0, outer, dr.max(dt));
        if v > best {
            best = v;
        }
        tolerance = tolerance.min(tol.max(v - v0));
    }
    tolerance = tolerance.max(1e-12 * best);
    LipschitzEstimate {
        lipschitz: best,
        c_f: best * best,
        tolerance,
    }
}

/// Compass search from `u` with initial step `h`; returns the maximum and
/// the last improvement.
fn refine(charts: &Charts, mut u: Complex64, mut v: f64, outer: bool, mut h: f64) -> (f64, f64) {
    let dirs = [
        Complex64::new(1.0, 0.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(0.0, -1.0),
    ];
    let mut last_gain = v;
    while h > 1e-12 {
        let mut moved = false;
        for d in dirs {
            let w = u + d * h;
            // Stay in the closed unit disk of this chart; the other chart
            // covers the rest.
            if w.norm() > 1.0 + 1e-12 {
                continue;
            }
            let x = charts.at(w, outer);
            if x > v {
                last_gain = x - v;
                v = x;
                u = w;
                moved = true;
                break;
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    (v, last_gain)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn z_squared_has_lipschitz_two() {
        let e = sup_spherical_derivative(&RationalMap::quadratic(0.0));
        assert!((e.lipschitz - 2.0).abs() < 1e-9, "{e:?}");
        assert!((e.c_f - 4.0).abs() < 1e-8);
    }

    #[test]
    fn z_to_the_d() {
        for d in 3..6 {
            let f = RationalMap::unicritical(d, c(0.0)).unwrap();
            let e = sup_spherical_derivative(&f);
            assert!((e.lipschitz - d as f64).abs() < 1e-9, "d = {d}: {e:?}");
        }
    }

    #[test]
    fn spherical_derivative_is_chart_independent() {
        let f = RationalMap::quadratic(-1.0);
        // Near |z| = 1 both formulas apply.
        let z = Complex64::from_polar(1.0, 0.7);
        let charts = Charts::new(&f);
        assert!((charts.at(z, false) - charts.at(z.inv(), true)).abs() < 1e-12);
        // Direct definition at a generic point.
        let z = Complex64::new(0.4, 0.2);
        let fz = f.eval_complex(z);
        let direct = (2.0 * z).norm() * (1.0 + z.norm_sqr()) / (1.0 + fz.norm_sqr());
        assert!((spherical_derivative(&f, z.into()) - direct).abs() < 1e-14);
    }

    #[test]
    fn superattracting_infinity_has_zero_derivative() {
        assert_eq!(spherical_derivative(&RationalMap::quadratic(-1.0), SpherePoint::Infinity), 0.0);
    }
}
