//! Rational maps of the sphere, their iterates, and the divisors built from
//! them: critical points, iterated preimages, periodic points and level sets
//! of the derivative of iterates.

mod divisors;
mod lipschitz;
mod measure;
mod orbit;

pub use divisors::{
    critical_points, derivative_level_set, exceptional_points, parameter_derivative_roots,
    periodic_divisor, preimage_measure, preimage_tree, preimages_one_step, repelling_fixed_point,
    DerivativeLevel, FixedPointEquation, ParameterDerivative, PreimageNode, PreimageTree,
};
pub use lipschitz::{spherical_derivative, sup_spherical_derivative, LipschitzEstimate};
pub use measure::{Atom, AtomicMeasure, DivisorKind};
pub use orbit::{evaluate_iterate, IterateValue, OrbitPoint};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::roots::{poly_roots, Poly, SolveOptions};
use crate::sphere::SpherePoint;

/// Relative tolerance of the coprimality test.
const COPRIME_TOL: f64 = 1e-10;

/// A rational map `P/Q` of degree `d = max(deg P, deg Q) > 1` with coprime
/// numerator and denominator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MapCoefficients", into = "MapCoefficients")]
pub struct RationalMap {
    num: Poly,
    den: Poly,
    degree: usize,
    wronskian: Poly,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct MapCoefficients {
    numerator: Vec<[f64; 2]>,
    denominator: Vec<[f64; 2]>,
}

impl TryFrom<MapCoefficients> for RationalMap {
    type Error = Error;
    fn try_from(m: MapCoefficients) -> Result<Self> {
        let conv = |v: Vec<[f64; 2]>| v.into_iter().map(|[a, b]| Complex64::new(a, b)).collect();
        RationalMap::new(conv(m.numerator), conv(m.denominator))
    }
}

impl From<RationalMap> for MapCoefficients {
    fn from(f: RationalMap) -> Self {
        let conv = |p: &Poly| p.coeffs.iter().map(|c| [c.re, c.im]).collect();
        MapCoefficients {
            numerator: conv(&f.num),
            denominator: conv(&f.den),
        }
    }
}

impl RationalMap {
    /// Builds `P/Q` from ascending coefficient lists.
    pub fn new(numerator: Vec<Complex64>, denominator: Vec<Complex64>) -> Result<Self> {
        if numerator
            .iter()
            .chain(&denominator)
            .any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::Invalid("non-finite coefficient".into()));
        }
        let num = Poly::new(numerator);
        let den = Poly::new(denominator);
        if den.is_zero() {
            return Err(Error::Invalid("denominator is identically zero".into()));
        }
        if num.is_zero() {
            return Err(Error::Degree { degree: 0 });
        }
        let degree = num.degree().max(den.degree());
        if degree < 2 {
            return Err(Error::Degree { degree });
        }
        let resultant = coprimality(&num, &den);
        if resultant < COPRIME_TOL {
            return Err(Error::NotCoprime { resultant });
        }
        let wronskian = wronskian(&num, &den);
        Ok(RationalMap {
            num,
            den,
            degree,
            wronskian,
        })
    }

    /// A polynomial map from ascending coefficients.
    pub fn polynomial(coeffs: Vec<Complex64>) -> Result<Self> {
        RationalMap::new(coeffs, vec![Complex64::new(1.0, 0.0)])
    }

    /// `z^d + λ`.
    pub fn unicritical(d: usize, lambda: Complex64) -> Result<Self> {
        if d < 2 {
            return Err(Error::Degree { degree: d });
        }
        let mut c = vec![Complex64::new(0.0, 0.0); d + 1];
        c[0] = lambda;
        c[d] = Complex64::new(1.0, 0.0);
        RationalMap::polynomial(c)
    }

    /// `z² + c` with real `c`, the family used throughout the tests.
    pub fn quadratic(c: f64) -> Self {
        RationalMap::unicritical(2, Complex64::new(c, 0.0)).expect("degree 2 is valid")
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.degree() == 0
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn denominator(&self) -> &Poly {
        &self.den
    }

    /// `P'Q - PQ'`, whose zeros are the finite critical points.
    pub fn wronskian(&self) -> &Poly {
        &self.wronskian
    }

    /// Leading coefficient `a_d` of a polynomial map (numerator leading
    /// coefficient over the constant denominator).
    pub fn leading_coefficient(&self) -> Result<Complex64> {
        if !self.is_polynomial() {
            return Err(Error::NotPolynomial);
        }
        Ok(self.num.coeffs[self.degree] / self.den.coeffs[0])
    }

    /// Coefficients of the polynomial `P/Q` when `Q` is constant.
    pub fn polynomial_coefficients(&self) -> Result<Vec<Complex64>> {
        if !self.is_polynomial() {
            return Err(Error::NotPolynomial);
        }
        let q = self.den.coeffs[0];
        Ok(self.num.coeffs.iter().map(|&c| c / q).collect())
    }

    /// `P` and `Q` padded to length `d + 1`.
    pub(crate) fn padded(&self) -> (Vec<Complex64>, Vec<Complex64>) {
        let pad = |p: &Poly| {
            let mut v = p.coeffs.clone();
            v.resize(self.degree + 1, Complex64::new(0.0, 0.0));
            v
        };
        (pad(&self.num), pad(&self.den))
    }

    /// The conjugate `ι ∘ f ∘ ι` by the chordal isometry `ι(z) = 1/z`.
    pub fn conjugate_by_inversion(&self) -> RationalMap {
        let (p, q) = self.padded();
        let rev = |v: Vec<Complex64>| v.into_iter().rev().collect::<Vec<_>>();
        RationalMap::new(rev(q), rev(p)).expect("conjugate of a valid map is valid")
    }

    /// `f(z)` on the sphere.
    pub fn eval(&self, z: SpherePoint) -> SpherePoint {
        self.step(OrbitPoint::from(z)).to_sphere_point()
    }

    /// `f(z)` for finite `z` as a complex number (`∞` as non-finite).
    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.num.eval(z) / self.den.eval(z)
    }

    /// The fixed points of `f` in `ℂ` (roots of `P - zQ`), with multiplicity.
    pub fn finite_fixed_points(&self) -> Result<Vec<(Complex64, usize)>> {
        let id = Poly::new(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
        let g = self.num.sub(&id.mul(&self.den));
        Ok(poly_roots(&g, &SolveOptions::default())?
            .into_iter()
            .map(|r| (r.z, r.multiplicity))
            .collect())
    }

    /// Parses `poly C0 C1 ...`, `unicritical D L` or
    /// `rational C0 ... / D0 ...`, where each coefficient is `re` or `re,im`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (kind, rest) = spec.split_once(char::is_whitespace).unwrap_or((spec, ""));
        let coeffs = |s: &str| -> Result<Vec<Complex64>> {
            s.split_whitespace().map(parse_complex).collect()
        };
        match kind {
            "poly" => RationalMap::polynomial(coeffs(rest)?),
            "unicritical" => {
                let mut it = rest.split_whitespace();
                let d: usize = it
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::Parse(format!("bad degree in {spec:?}")))?;
                let lambda = parse_complex(it.next().unwrap_or("0"))?;
                if it.next().is_some() {
                    return Err(Error::Parse(format!("trailing tokens in {spec:?}")));
                }
                RationalMap::unicritical(d, lambda)
            }
            "rational" => {
                let (n, d) = rest
                    .split_once('/')
                    .ok_or_else(|| Error::Parse(format!("missing '/' in {spec:?}")))?;
                RationalMap::new(coeffs(n)?, coeffs(d)?)
            }
            _ => Err(Error::Parse(format!("unknown map kind in {spec:?}"))),
        }
    }

    /// Canonical text form accepted by [`RationalMap::parse`].
    pub fn to_spec(&self) -> String {
        let fmt = |p: &Poly| {
            p.coeffs
                .iter()
                .map(|c| format_complex(*c))
                .collect::<Vec<_>>()
                .join(" ")
        };
        if self.is_polynomial() && self.den.coeffs[0] == Complex64::new(1.0, 0.0) {
            format!("poly {}", fmt(&self.num))
        } else {
            format!("rational {} / {}", fmt(&self.num), fmt(&self.den))
        }
    }
}

impl fmt::Display for RationalMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_spec())
    }
}

pub(crate) fn parse_complex(s: &str) -> Result<Complex64> {
    let bad = || Error::Parse(format!("cannot parse complex number {s:?}"));
    let mut it = s.split(',');
    let re: f64 = it.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
    let im: f64 = match it.next() {
        Some(t) => t.trim().parse().map_err(|_| bad())?,
        None => 0.0,
    };
    if it.next().is_some() || !re.is_finite() || !im.is_finite() {
        return Err(bad());
    }
    Ok(Complex64::new(re, im))
}

pub(crate) fn format_complex(c: Complex64) -> String {
    if c.im == 0.0 {
        format!("{:?}", c.re)
    } else {
        format!("{:?},{:?}", c.re, c.im)
    }
}

fn wronskian(p: &Poly, q: &Poly) -> Poly {
    let w = p.derivative().mul(q).sub(&p.mul(&q.derivative()));
    let scale = w.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    Poly::new(
        w.coeffs
            .into_iter()
            .map(|c| {
                if c.norm() <= 1e-14 * scale {
                    Complex64::new(0.0, 0.0)
                } else {
                    c
                }
            })
            .collect(),
    )
}

/// Smallest relative size of one polynomial at the roots of the other; zero
/// exactly when they share a root.
fn coprimality(p: &Poly, q: &Poly) -> f64 {
    let (small, other) = if p.degree() <= q.degree() { (p, q) } else { (q, p) };
    if small.degree() == 0 {
        return 1.0;
    }
    let roots = match poly_roots(small, &SolveOptions { verify_clusters: false, ..Default::default() }) {
        Ok(r) => r,
        Err(_) => return 1.0,
    };
    roots
        .iter()
        .map(|r| {
            let mag: f64 = other
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c.norm() * r.z.norm().powi(k as i32))
                .sum();
            other.eval(r.z).norm() / mag.max(f64::MIN_POSITIVE)
        })
        .fold(f64::INFINITY, f64::min)
}
