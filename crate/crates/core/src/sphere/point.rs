use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// A point of `ℂ ⊔ {∞}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpherePoint {
    Finite { re: f64, im: f64 },
    Infinity,
}

impl SpherePoint {
    pub const ZERO: SpherePoint = SpherePoint::Finite { re: 0.0, im: 0.0 };
    pub const ONE: SpherePoint = SpherePoint::Finite { re: 1.0, im: 0.0 };

    /// Finite point; rejects NaN and infinite coordinates.
    pub fn finite(re: f64, im: f64) -> Result<Self> {
        if re.is_finite() && im.is_finite() {
            Ok(SpherePoint::Finite { re, im })
        } else {
            Err(Error::Invalid(format!("non-finite coordinates ({re}, {im})")))
        }
    }

    /// Converts a complex number, mapping overflowed or NaN values to `∞`.
    pub fn from_complex(z: Complex64) -> Self {
        if z.re.is_finite() && z.im.is_finite() {
            SpherePoint::Finite { re: z.re, im: z.im }
        } else {
            SpherePoint::Infinity
        }
    }

    pub fn real(x: f64) -> Self {
        SpherePoint::from_complex(Complex64::new(x, 0.0))
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, SpherePoint::Infinity)
    }

    pub fn to_complex(&self) -> Option<Complex64> {
        match *self {
            SpherePoint::Finite { re, im } => Some(Complex64::new(re, im)),
            SpherePoint::Infinity => None,
        }
    }

    /// The isometric involution `z ↦ 1/z`.
    pub fn inverse(&self) -> Self {
        match *self {
            SpherePoint::Infinity => SpherePoint::ZERO,
            SpherePoint::Finite { re, im } => {
                if re == 0.0 && im == 0.0 {
                    SpherePoint::Infinity
                } else {
                    SpherePoint::from_complex(Complex64::new(re, im).inv())
                }
            }
        }
    }

    pub fn conj(&self) -> Self {
        match *self {
            SpherePoint::Finite { re, im } => SpherePoint::Finite { re, im: -im },
            SpherePoint::Infinity => SpherePoint::Infinity,
        }
    }

    /// Modulus, `+∞` at infinity.
    pub fn modulus(&self) -> f64 {
        self.to_complex().map_or(f64::INFINITY, |z| z.norm())
    }

    /// Position on the unit sphere of `ℝ³` under inverse stereographic
    /// projection from the north pole (`∞ ↦ (0, 0, 1)`).
    pub fn to_unit_sphere(&self) -> [f64; 3] {
        match self.to_complex() {
            None => [0.0, 0.0, 1.0],
            Some(z) => {
                let r2 = z.norm_sqr();
                if r2 <= 1.0 {
                    let s = 1.0 + r2;
                    [2.0 * z.re / s, 2.0 * z.im / s, (r2 - 1.0) / s]
                } else {
                    let w = z.inv();
                    let q = w.norm_sqr();
                    let s = 1.0 + q;
                    [2.0 * w.re / s, -2.0 * w.im / s, (1.0 - q) / s]
                }
            }
        }
    }
}

impl From<Complex64> for SpherePoint {
    fn from(z: Complex64) -> Self {
        SpherePoint::from_complex(z)
    }
}

impl fmt::Display for SpherePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SpherePoint::Infinity => write!(f, "inf"),
            SpherePoint::Finite { re, im } => {
                if im == 0.0 {
                    write!(f, "{re:?}")
                } else if im < 0.0 {
                    write!(f, "{re:?}-{:?}i", -im)
                } else {
                    write!(f, "{re:?}+{im:?}i")
                }
            }
        }
    }
}

/// The chordal distance `|z - w| / (√(1+|z|²) √(1+|w|²))`, valued in `[0, 1]`.
pub fn chordal_distance(z: SpherePoint, w: SpherePoint) -> f64 {
    match (z.to_complex(), w.to_complex()) {
        (None, None) => 0.0,
        (None, Some(w)) | (Some(w), None) => 1.0 / w.norm().hypot(1.0),
        (Some(a), Some(b)) => {
            let (a, b) = if a.norm_sqr() > 1.0 && b.norm_sqr() > 1.0 {
                (a.inv(), b.inv())
            } else {
                (a, b)
            };
            let d = (a - b).norm() / (a.norm().hypot(1.0) * b.norm().hypot(1.0));
            d.min(1.0)
        }
    }
}

/// `log [z, w]`, computed without forming the distance when it underflows.
pub fn log_chordal_distance(z: SpherePoint, w: SpherePoint) -> f64 {
    match (z.to_complex(), w.to_complex()) {
        (None, None) => f64::NEG_INFINITY,
        (None, Some(w)) | (Some(w), None) => -half_log_1p_sq(w.norm()),
        (Some(a), Some(b)) => {
            let (a, b) = if a.norm_sqr() > 1.0 && b.norm_sqr() > 1.0 {
                (a.inv(), b.inv())
            } else {
                (a, b)
            };
            (a - b).norm().ln() - half_log_1p_sq(a.norm()) - half_log_1p_sq(b.norm())
        }
    }
}

/// `½ log(1 + r²)` without overflow.
pub(crate) fn half_log_1p_sq(r: f64) -> f64 {
    if r > 1.0 {
        r.ln() + 0.5 * (r * r).recip().ln_1p()
    } else {
        0.5 * (r * r).ln_1p()
    }
}
