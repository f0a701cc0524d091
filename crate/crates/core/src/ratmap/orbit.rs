use num_complex::Complex64;

use super::RationalMap;
use crate::roots::Poly;
use crate::sphere::{log_chordal_distance, SpherePoint};

/// Moduli outside `[TINY, HUGE]` switch to the logarithmic chart.
const LN_TINY: f64 = -46.051_701_859_880_914; // ln 1e-20
const LN_HUGE: f64 = 46.051_701_859_880_914;

/// A point of an orbit. Points very close to `0` or `∞` are kept as their
/// complex logarithm so that superattracting orbits neither underflow nor
/// overflow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OrbitPoint {
    Plain(Complex64),
    Infinity,
    /// `exp(L)` with `Re L < ln 1e-20`.
    Tiny(Complex64),
    /// `exp(L)` with `Re L > ln 1e20`.
    Huge(Complex64),
}

impl From<SpherePoint> for OrbitPoint {
    fn from(z: SpherePoint) -> Self {
        match z.to_complex() {
            None => OrbitPoint::Infinity,
            Some(v) => OrbitPoint::classify_plain(v),
        }
    }
}

impl OrbitPoint {
    fn classify_plain(v: Complex64) -> Self {
        if !(v.re.is_finite() && v.im.is_finite()) {
            return OrbitPoint::Infinity;
        }
        let r = v.norm();
        if r == 0.0 {
            OrbitPoint::Plain(v)
        } else if r.ln() > LN_HUGE {
            OrbitPoint::Huge(v.ln())
        } else if r.ln() < LN_TINY {
            OrbitPoint::Tiny(v.ln())
        } else {
            OrbitPoint::Plain(v)
        }
    }

    fn from_log(l: Complex64) -> Self {
        if l.re.is_nan() {
            return OrbitPoint::Infinity;
        }
        if l.re == f64::INFINITY {
            OrbitPoint::Infinity
        } else if l.re == f64::NEG_INFINITY {
            OrbitPoint::Plain(Complex64::new(0.0, 0.0))
        } else if l.re > LN_HUGE {
            OrbitPoint::Huge(l)
        } else if l.re < LN_TINY {
            OrbitPoint::Tiny(l)
        } else {
            OrbitPoint::Plain(l.exp())
        }
    }

    /// Nearest representable sphere point.
    pub fn to_sphere_point(&self) -> SpherePoint {
        match *self {
            OrbitPoint::Plain(v) => SpherePoint::from_complex(v),
            OrbitPoint::Infinity | OrbitPoint::Huge(_) => SpherePoint::Infinity,
            OrbitPoint::Tiny(l) => SpherePoint::from_complex(l.exp()),
        }
    }

    /// `ln |z|`, `+∞` at infinity.
    pub fn ln_abs(&self) -> f64 {
        match *self {
            OrbitPoint::Plain(v) => v.norm().ln(),
            OrbitPoint::Infinity => f64::INFINITY,
            OrbitPoint::Tiny(l) | OrbitPoint::Huge(l) => l.re,
        }
    }

    /// `log [z, a]` including the asymptotic regimes.
    pub fn log_chordal_to(&self, a: SpherePoint) -> f64 {
        match *self {
            OrbitPoint::Plain(v) => log_chordal_distance(SpherePoint::from_complex(v), a),
            OrbitPoint::Infinity => log_chordal_distance(SpherePoint::Infinity, a),
            OrbitPoint::Tiny(l) => match a.to_complex() {
                Some(c) if c.norm_sqr() == 0.0 => l.re,
                _ => log_chordal_distance(SpherePoint::ZERO, a),
            },
            OrbitPoint::Huge(l) => match a {
                SpherePoint::Infinity => -l.re,
                _ => log_chordal_distance(SpherePoint::Infinity, a),
            },
        }
    }
}

/// Index and value of the lowest nonzero coefficient.
fn lowest(p: &Poly) -> (usize, Complex64) {
    p.coeffs
        .iter()
        .enumerate()
        .find(|(_, c)| c.norm_sqr() > 0.0)
        .map(|(k, &c)| (k, c))
        .unwrap_or((0, Complex64::new(0.0, 0.0)))
}

fn highest(p: &Poly) -> (usize, Complex64) {
    (p.degree(), p.coeffs[p.degree()])
}

/// `ln p(u)` for `|u| > 1`, via the reversed polynomial in `w = 1/u`.
fn ln_eval_large(p: &Poly, ln_u: Complex64, w: Complex64) -> Complex64 {
    let rev = p.coeffs.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * w + c);
    ln_u * p.degree() as f64 + rev.ln()
}

fn ln_asymptotic(term: (usize, Complex64), l: Complex64) -> Complex64 {
    term.1.ln() + l * term.0 as f64
}

impl RationalMap {
    /// Largest modulus for which `P` and `Q` are evaluated directly.
    fn direct_limit(&self) -> f64 {
        (250.0 / self.degree as f64 * std::f64::consts::LN_10).exp()
    }

    /// One application of the map to an orbit point.
    pub fn step(&self, z: OrbitPoint) -> OrbitPoint {
        let (num, den) = (&self.num, &self.den);
        match z {
            OrbitPoint::Infinity => {
                let (dp, p) = highest(num);
                let (dq, q) = highest(den);
                if dp > dq {
                    OrbitPoint::Infinity
                } else if dp == dq {
                    OrbitPoint::classify_plain(p / q)
                } else {
                    OrbitPoint::Plain(Complex64::new(0.0, 0.0))
                }
            }
            OrbitPoint::Plain(u) => {
                if u.norm() <= self.direct_limit() {
                    let a = num.eval(u);
                    let b = den.eval(u);
                    if b.norm_sqr() == 0.0 {
                        return OrbitPoint::Infinity;
                    }
                    let v = a / b;
                    if v.re.is_finite() && v.im.is_finite() && v.norm_sqr() > 0.0 && v.norm_sqr().is_normal() {
                        OrbitPoint::classify_plain(v)
                    } else if a.norm_sqr() == 0.0 {
                        OrbitPoint::Plain(Complex64::new(0.0, 0.0))
                    } else {
                        OrbitPoint::from_log(a.ln() - b.ln())
                    }
                } else {
                    let lu = u.ln();
                    let w = u.inv();
                    OrbitPoint::from_log(ln_eval_large(num, lu, w) - ln_eval_large(den, lu, w))
                }
            }
            OrbitPoint::Tiny(l) => {
                let (kp, p) = lowest(num);
                let (kq, q) = lowest(den);
                if kp == kq {
                    OrbitPoint::classify_plain(p / q)
                } else {
                    OrbitPoint::from_log(ln_asymptotic((kp, p), l) - ln_asymptotic((kq, q), l))
                }
            }
            OrbitPoint::Huge(l) => {
                let (dp, p) = highest(num);
                let (dq, q) = highest(den);
                if dp == dq {
                    OrbitPoint::classify_plain(p / q)
                } else {
                    OrbitPoint::from_log(ln_asymptotic((dp, p), l) - ln_asymptotic((dq, q), l))
                }
            }
        }
    }

    /// `ln |f'(z)|` in the Euclidean coordinate, `+∞` at poles and at `∞`
    /// unless the map is regular there.
    pub fn ln_abs_derivative(&self, z: OrbitPoint) -> f64 {
        let w = &self.wronskian;
        let q = &self.den;
        if w.is_zero() {
            return f64::NEG_INFINITY;
        }
        match z {
            OrbitPoint::Infinity => {
                // f'(z) ~ c z^(deg W - 2 deg Q) as z → ∞.
                let e = w.degree() as i64 - 2 * q.degree() as i64;
                match e.cmp(&0) {
                    std::cmp::Ordering::Greater => f64::INFINITY,
                    std::cmp::Ordering::Less => f64::NEG_INFINITY,
                    std::cmp::Ordering::Equal => {
                        (highest(w).1 / (highest(q).1 * highest(q).1)).norm().ln()
                    }
                }
            }
            OrbitPoint::Plain(u) => {
                if u.norm() <= 1.0 {
                    w.eval(u).norm().ln() - 2.0 * q.eval(u).norm().ln()
                } else {
                    let lu = u.ln();
                    let iu = u.inv();
                    ln_eval_large(w, lu, iu).re - 2.0 * ln_eval_large(q, lu, iu).re
                }
            }
            OrbitPoint::Tiny(l) => ln_asymptotic(lowest(w), l).re - 2.0 * ln_asymptotic(lowest(q), l).re,
            OrbitPoint::Huge(l) => {
                ln_asymptotic(highest(w), l).re - 2.0 * ln_asymptotic(highest(q), l).re
            }
        }
    }

    /// The orbit `z, f(z), ..., f^n(z)`.
    pub fn orbit(&self, z: SpherePoint, n: usize) -> Vec<OrbitPoint> {
        let mut out = Vec::with_capacity(n + 1);
        let mut p = OrbitPoint::from(z);
        out.push(p);
        for _ in 0..n {
            p = self.step(p);
            out.push(p);
        }
        out
    }

    /// `f^n(z)` as an orbit point.
    pub fn iterate(&self, z: OrbitPoint, n: usize) -> OrbitPoint {
        (0..n).fold(z, |p, _| self.step(p))
    }
}

/// Result of [`evaluate_iterate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterateValue {
    pub value: SpherePoint,
    /// `log |(f^n)'(z)|`; `-∞` when the orbit meets a critical point and
    /// `+∞` when it meets a pole.
    pub derivative_log_modulus: Option<f64>,
}

/// `f^n(z)` and optionally `log |(f^n)'(z)| = Σ log |f'(f^j z)|`.
pub fn evaluate_iterate(f: &RationalMap, z: SpherePoint, n: usize, with_derivative: bool) -> IterateValue {
    let mut p = OrbitPoint::from(z);
    let mut acc = 0.0;
    for _ in 0..n {
        if with_derivative {
            acc += f.ln_abs_derivative(p);
        }
        p = f.step(p);
    }
    IterateValue {
        value: p.to_sphere_point(),
        derivative_log_modulus: with_derivative.then_some(acc),
    }
}
