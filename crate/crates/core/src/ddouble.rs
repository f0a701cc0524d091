//! Double-double arithmetic and the scalar abstraction used by the implicit
//! root finders.
//!
//! A [`Dd`] carries an unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`,
//! giving roughly 106 bits of mantissa. Only the operations needed to
//! evaluate polynomial iterates are provided.

use num_complex::Complex64;
use num_traits::{Num, One, Zero};
use std::ops::{Add, Div, Mul, Neg, Rem, Sub};

#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const fn new(hi: f64) -> Self {
        Dd { hi, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    /// Exact multiplication by `2^k`.
    pub fn ldexp(self, k: i32) -> Self {
        Dd {
            hi: ldexp(self.hi, k),
            lo: ldexp(self.lo, k),
        }
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd::new(x)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * Dd::new(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Dd::new(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::new(q3)
    }
}

impl Rem for Dd {
    type Output = Dd;
    fn rem(self, b: Dd) -> Dd {
        let q = (self / b).to_f64().trunc();
        self - b * Dd::new(q)
    }
}

impl Zero for Dd {
    fn zero() -> Self {
        Dd::new(0.0)
    }
    fn is_zero(&self) -> bool {
        self.hi == 0.0 && self.lo == 0.0
    }
}

impl One for Dd {
    fn one() -> Self {
        Dd::new(1.0)
    }
}

impl Num for Dd {
    type FromStrRadixErr = std::num::ParseFloatError;
    fn from_str_radix(s: &str, _radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        s.parse::<f64>().map(Dd::new)
    }
}

/// Complex double-double.
pub type ComplexDd = num_complex::Complex<Dd>;

/// The arithmetic needed by the implicit evaluators, implemented for
/// `Complex64` and [`ComplexDd`].
pub trait Scalar:
    Copy
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_c64(z: Complex64) -> Self;
    fn to_c64(self) -> Complex64;
    fn zero() -> Self {
        Self::from_c64(Complex64::new(0.0, 0.0))
    }
    fn one() -> Self {
        Self::from_c64(Complex64::new(1.0, 0.0))
    }
    /// `max(|re|, |im|)` in double precision.
    fn mag(self) -> f64;
    /// Exact multiplication by `2^k`.
    fn ldexp(self, k: i32) -> Self;
}

impl Scalar for Complex64 {
    fn from_c64(z: Complex64) -> Self {
        z
    }
    fn to_c64(self) -> Complex64 {
        self
    }
    fn mag(self) -> f64 {
        self.re.abs().max(self.im.abs())
    }
    fn ldexp(self, k: i32) -> Self {
        Complex64::new(ldexp(self.re, k), ldexp(self.im, k))
    }
}

impl Scalar for ComplexDd {
    fn from_c64(z: Complex64) -> Self {
        ComplexDd::new(Dd::new(z.re), Dd::new(z.im))
    }
    fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }
    fn mag(self) -> f64 {
        self.re.hi.abs().max(self.im.hi.abs())
    }
    fn ldexp(self, k: i32) -> Self {
        ComplexDd::new(self.re.ldexp(k), self.im.ldexp(k))
    }
}

/// `x * 2^k` without intermediate overflow for `|k| <= 2000`.
pub fn ldexp(x: f64, k: i32) -> f64 {
    if (-1000..=1000).contains(&k) {
        x * pow2(k)
    } else {
        let half = k / 2;
        x * pow2(half) * pow2(k - half)
    }
}

/// `2^k` for `|k| <= 1022`, built from the exponent bits.
#[inline]
fn pow2(k: i32) -> f64 {
    f64::from_bits(((k + 1023) as u64) << 52)
}

/// Power-of-two exponent that brings `m` into `[0.5, 1)`.
pub fn normalizing_exponent(m: f64) -> i32 {
    if m == 0.0 || !m.is_finite() {
        return 0;
    }
    let bits = m.abs().to_bits();
    let e = ((bits >> 52) & 0x7ff) as i32;
    if e == 0 {
        // Subnormal input.
        return -(m.abs().log2().floor() as i32) - 1;
    }
    1022 - e
}
