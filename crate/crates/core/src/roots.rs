//! Simultaneous root finding for polynomials that are only available through
//! an evaluator.
//!
//! The Ehrlich–Aberth iteration needs nothing but the Newton correction
//! `H/H'` at each approximation, so iterates of a map can be solved without
//! ever expanding coefficients. Values are carried as [`Ext`] numbers, which
//! keep a separate binary exponent and therefore never overflow.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::{PI, TAU};
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::ddouble::{normalizing_exponent, ComplexDd, Scalar};
use crate::error::{Error, Result};

/// `m · 2^e` with `max(|re m|, |im m|)` in `[0.5, 1)` (or `m = 0`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ext<S> {
    pub m: S,
    pub e: i64,
}

/// Exponent gaps beyond this make the smaller addend irrelevant even in
/// double-double.
const EXT_GAP: i64 = 1100;

impl<S: Scalar> Ext<S> {
    pub fn new(m: S) -> Self {
        Ext { m, e: 0 }.norm()
    }

    pub fn zero() -> Self {
        Ext { m: S::zero(), e: 0 }
    }

    pub fn is_zero(&self) -> bool {
        self.m.mag() == 0.0
    }

    pub fn is_finite(&self) -> bool {
        let c = self.m.to_c64();
        c.re.is_finite() && c.im.is_finite()
    }

    fn norm(self) -> Self {
        let g = self.m.mag();
        if g == 0.0 || !g.is_finite() {
            return Ext { m: self.m, e: if g == 0.0 { 0 } else { self.e } };
        }
        let k = normalizing_exponent(g);
        Ext {
            m: self.m.ldexp(k),
            e: self.e - k as i64,
        }
    }

    /// `log2 |value|`.
    pub fn log2_abs(&self) -> f64 {
        self.m.to_c64().norm().log2() + self.e as f64
    }

    pub fn ln_abs(&self) -> f64 {
        self.m.to_c64().norm().ln() + self.e as f64 * std::f64::consts::LN_2
    }

    pub fn arg(&self) -> f64 {
        self.m.to_c64().arg()
    }

    /// Back to an ordinary scalar, saturating to zero or infinity.
    pub fn to_scalar(&self) -> S {
        if self.is_zero() {
            return S::zero();
        }
        if self.e > 1100 {
            return S::from_c64(self.m.to_c64() * f64::INFINITY);
        }
        if self.e < -1100 {
            return S::zero();
        }
        self.m.ldexp(self.e as i32)
    }

    pub fn to_c64(&self) -> Complex64 {
        self.to_scalar().to_c64()
    }

    pub fn scale(self, s: S) -> Self {
        (Ext { m: self.m * s, e: self.e }).norm()
    }

    pub fn powu(self, k: u32) -> Self {
        let mut acc = Ext::new(S::one());
        let mut base = self;
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            k >>= 1;
        }
        acc
    }
}

impl<S: Scalar> Mul for Ext<S> {
    type Output = Ext<S>;
    fn mul(self, b: Ext<S>) -> Ext<S> {
        Ext {
            m: self.m * b.m,
            e: self.e + b.e,
        }
        .norm()
    }
}

impl<S: Scalar> Div for Ext<S> {
    type Output = Ext<S>;
    fn div(self, b: Ext<S>) -> Ext<S> {
        Ext {
            m: self.m / b.m,
            e: self.e - b.e,
        }
        .norm()
    }
}

impl<S: Scalar> Add for Ext<S> {
    type Output = Ext<S>;
    fn add(self, b: Ext<S>) -> Ext<S> {
        if self.is_zero() {
            return b;
        }
        if b.is_zero() {
            return self;
        }
        let (big, small) = if self.e >= b.e { (self, b) } else { (b, self) };
        let gap = big.e - small.e;
        if gap > EXT_GAP {
            return big;
        }
        Ext {
            m: big.m + small.m.ldexp(-(gap as i32)),
            e: big.e,
        }
        .norm()
    }
}

impl<S: Scalar> Neg for Ext<S> {
    type Output = Ext<S>;
    fn neg(self) -> Ext<S> {
        Ext {
            m: -self.m,
            e: self.e,
        }
    }
}

impl<S: Scalar> Sub for Ext<S> {
    type Output = Ext<S>;
    fn sub(self, b: Ext<S>) -> Ext<S> {
        self + (-b)
    }
}

/// Value and derivative of the function whose zeros are sought.
#[derive(Clone, Copy, Debug)]
pub struct Eval<S> {
    pub value: Ext<S>,
    pub deriv: Ext<S>,
    /// `|value|` divided by the magnitude of the terms that produced it, an
    /// estimate of the backward error.
    pub rel_residual: f64,
}

impl<S: Scalar> Eval<S> {
    pub fn newton(&self) -> Complex64 {
        (self.value / self.deriv).to_c64()
    }
}

/// A polynomial of known degree available through evaluation only.
pub trait Implicit: Sync {
    /// Number of roots in `ℂ`, counted with multiplicity.
    fn degree(&self) -> usize;
    fn eval<S: Scalar>(&self, z: S) -> Eval<S>;
}

/// A polynomial with explicit coefficients, ascending order.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    pub coeffs: Vec<Complex64>,
}

impl Poly {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        let mut p = Poly { coeffs };
        p.trim();
        p
    }

    fn trim(&mut self) {
        while self.coeffs.len() > 1 && *self.coeffs.last().unwrap() == Complex64::new(0.0, 0.0) {
            self.coeffs.pop();
        }
        if self.coeffs.is_empty() {
            self.coeffs.push(Complex64::new(0.0, 0.0));
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.norm_sqr() == 0.0)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::new(vec![Complex64::new(0.0, 0.0)]);
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let get = |p: &Poly, k: usize| p.coeffs.get(k).copied().unwrap_or_default();
        Poly::new((0..n).map(|k| get(self, k) - get(other, k)).collect())
    }

    pub fn scale(&self, s: Complex64) -> Poly {
        Poly::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    /// Radii `(lo, hi)` bracketing all nonzero roots (Fujiwara-type bounds).
    pub fn root_annulus(&self) -> (f64, f64) {
        let n = self.degree();
        if n == 0 {
            return (1.0, 1.0);
        }
        let lead = self.coeffs[n].norm();
        let hi = (1..=n)
            .map(|k| (self.coeffs[n - k].norm() / lead).powf(1.0 / k as f64))
            .fold(0.0, f64::max)
            * 2.0;
        let low_idx = self.coeffs.iter().position(|c| c.norm_sqr() > 0.0).unwrap_or(0);
        let c0 = self.coeffs[low_idx].norm();
        let inv_hi = (1..=(n - low_idx))
            .map(|k| (self.coeffs[low_idx + k].norm() / c0).powf(1.0 / k as f64))
            .fold(0.0, f64::max)
            * 2.0;
        let lo = if inv_hi > 0.0 { 1.0 / inv_hi } else { hi };
        (lo.min(hi).max(f64::MIN_POSITIVE), hi.max(f64::MIN_POSITIVE))
    }
}

impl Implicit for Poly {
    fn degree(&self) -> usize {
        Poly::degree(self)
    }

    fn eval<S: Scalar>(&self, z: S) -> Eval<S> {
        let zc = z.to_c64();
        let big = zc.norm() > 1.0;
        // Horner on the reversed polynomial for |z| > 1 keeps values bounded.
        let n = Poly::degree(self);
        let (mut p, mut dp) = (S::zero(), S::zero());
        let mut mag = 0.0;
        if !big {
            for &c in self.coeffs.iter().rev() {
                dp = dp * z + p;
                p = p * z + S::from_c64(c);
                mag = mag * zc.norm() + c.norm();
            }
            return Eval {
                value: Ext::new(p),
                deriv: Ext::new(dp),
                rel_residual: p.to_c64().norm() / mag.max(f64::MIN_POSITIVE),
            };
        }
        // p(z) = z^n r(w), p'(z) = z^(n-1) (n r(w) - w r'(w)), w = 1/z.
        let w = S::one() / z;
        let wn = w.to_c64().norm();
        for &c in self.coeffs.iter() {
            dp = dp * w + p;
            p = p * w + S::from_c64(c);
            mag = mag * wn + c.norm();
        }
        let zn = Ext::new(z).powu(n as u32);
        let value = zn * Ext::new(p);
        let inner = p * S::from_c64(Complex64::new(n as f64, 0.0)) - w * dp;
        let deriv = (zn / Ext::new(z)) * Ext::new(inner);
        Eval {
            value,
            deriv,
            rel_residual: p.to_c64().norm() / mag.max(f64::MIN_POSITIVE),
        }
    }
}

/// Floating-point format used for function evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Precision {
    Double,
    DoubleDouble,
    /// Double-double once the degree exceeds 2¹⁰ or polishing stalls.
    Auto,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub max_iter: usize,
    pub precision: Precision,
    /// Check each merged cluster with the argument principle.
    pub verify_clusters: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iter: 600,
            precision: Precision::Auto,
            verify_clusters: true,
        }
    }
}

/// A root with its multiplicity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root {
    pub z: Complex64,
    pub multiplicity: usize,
    /// Relative backward error at the final approximation.
    pub residual: f64,
}

/// Approximations on three concentric circles with radii spanning
/// `[lo, hi]`, golden-angle spaced.
pub fn circle_guesses(count: usize, lo: f64, hi: f64) -> Vec<Complex64> {
    let golden = PI * (3.0 - 5f64.sqrt());
    let mid = (lo * hi).sqrt();
    let radii = [lo, mid, hi];
    (0..count)
        .map(|k| {
            let r = radii[k % 3];
            Complex64::from_polar(r, 0.4 + golden * k as f64)
        })
        .collect()
}

const REL_TOL: f64 = 4e-15;

struct AberthState {
    z: Vec<Complex64>,
    done: Vec<bool>,
    last_step: Vec<f64>,
}

fn aberth_sweep<S: Scalar, F: Implicit>(f: &F, st: &mut AberthState) -> usize {
    let z = &st.z;
    let m = z.len();
    let updates: Vec<Option<(Complex64, f64)>> = (0..m)
        .into_par_iter()
        .map(|i| {
            if st.done[i] {
                return None;
            }
            let zi = z[i];
            let n = f.eval::<S>(S::from_c64(zi)).newton();
            let mut s = Complex64::new(0.0, 0.0);
            for (j, &zj) in z.iter().enumerate() {
                if j != i {
                    let d = zi - zj;
                    if d.norm_sqr() > 0.0 {
                        s += d.inv();
                    }
                }
            }
            let w = n / (Complex64::new(1.0, 0.0) - n * s);
            if !(w.re.is_finite() && w.im.is_finite()) {
                // Zero derivative or overflow: nudge deterministically.
                let nudge = Complex64::from_polar(1e-3 * (1.0 + zi.norm()), 1.0 + i as f64);
                return Some((zi + nudge, f64::INFINITY));
            }
            Some((zi - w, w.norm()))
        })
        .collect();
    let mut active = 0;
    for (i, u) in updates.into_iter().enumerate() {
        if let Some((znew, step)) = u {
            let scale = st.z[i].norm().max(znew.norm());
            let converged = step <= REL_TOL * scale
                || step == 0.0
                || (step < 1e-9 * (1.0 + scale) && step >= 0.9 * st.last_step[i]);
            st.z[i] = znew;
            st.last_step[i] = step;
            if converged {
                st.done[i] = true;
            } else {
                active += 1;
            }
        }
    }
    active
}

/// Runs the Ehrlich–Aberth iteration from `init` and returns the
/// approximations and a convergence mask.
pub fn aberth<F: Implicit>(
    f: &F,
    init: Vec<Complex64>,
    max_iter: usize,
    precision: Precision,
) -> (Vec<Complex64>, Vec<bool>) {
    let m = init.len();
    let mut st = AberthState {
        z: init,
        done: vec![false; m],
        last_step: vec![f64::INFINITY; m],
    };
    let dd = match precision {
        Precision::Double => false,
        Precision::DoubleDouble => true,
        Precision::Auto => m > 1024,
    };
    for _ in 0..max_iter {
        let active = if dd {
            aberth_sweep::<ComplexDd, F>(f, &mut st)
        } else {
            aberth_sweep::<Complex64, F>(f, &mut st)
        };
        if active == 0 {
            break;
        }
    }
    (st.z, st.done)
}

/// Number of zeros of `f` inside the circle `|z - c| = r`.
pub fn winding_number<F: Implicit>(f: &F, c: Complex64, r: f64) -> i64 {
    fn arg_at<F: Implicit>(f: &F, c: Complex64, r: f64, t: f64) -> f64 {
        let z = c + Complex64::from_polar(r, t);
        let e = f.eval::<ComplexDd>(ComplexDd::from_c64(z));
        e.value.arg()
    }
    fn wrap(d: f64) -> f64 {
        let mut d = d % TAU;
        if d > PI {
            d -= TAU;
        } else if d < -PI {
            d += TAU;
        }
        d
    }
    fn segment<F: Implicit>(f: &F, c: Complex64, r: f64, t0: f64, a0: f64, t1: f64, a1: f64, depth: u32) -> f64 {
        let d = wrap(a1 - a0);
        if d.abs() < PI / 4.0 || depth > 24 {
            return d;
        }
        let tm = 0.5 * (t0 + t1);
        let am = arg_at(f, c, r, tm);
        segment(f, c, r, t0, a0, tm, am, depth + 1) + segment(f, c, r, tm, am, t1, a1, depth + 1)
    }
    let k = 64;
    let ts: Vec<f64> = (0..=k).map(|j| TAU * j as f64 / k as f64).collect();
    let args: Vec<f64> = ts.iter().map(|&t| arg_at(f, c, r, t)).collect();
    let total: f64 = (0..k)
        .map(|j| segment(f, c, r, ts[j], args[j], ts[j + 1], args[j + 1], 0))
        .sum();
    (total / TAU).round() as i64
}

/// Groups approximations of one multiple root. Two approximations are linked
/// when they are closer than `1e-6` times the local spacing or when their
/// Newton inclusion disks overlap.
fn cluster(z: &[Complex64], radius: &[f64]) -> Vec<Vec<usize>> {
    let m = z.len();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    // Second-nearest distance serves as the local spacing.
    let nn: Vec<(f64, f64)> = (0..m)
        .into_par_iter()
        .map(|i| {
            let (mut d1, mut d2) = (f64::INFINITY, f64::INFINITY);
            for j in 0..m {
                if j != i {
                    let d = (z[i] - z[j]).norm();
                    if d < d1 {
                        d2 = d1;
                        d1 = d;
                    } else if d < d2 {
                        d2 = d;
                    }
                }
            }
            (d1, d2)
        })
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| z[a].re.total_cmp(&z[b].re));
    let reach: Vec<f64> = (0..m)
        .map(|i| {
            let spacing = if nn[i].1.is_finite() { nn[i].1 } else { 1.0 + z[i].norm() };
            radius[i].max(1e-6 * spacing)
        })
        .collect();
    let max_reach = reach.iter().cloned().fold(0.0, f64::max);
    for (oi, &i) in order.iter().enumerate() {
        for &j in &order[oi + 1..] {
            if z[j].re - z[i].re > 2.0 * max_reach {
                break;
            }
            let d = (z[i] - z[j]).norm();
            if d <= reach[i] + reach[j] {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..m {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

fn polish<S: Scalar, F: Implicit>(f: &F, z: Complex64, guard: f64) -> (Complex64, f64) {
    let mut x = S::from_c64(z);
    let mut res = f64::INFINITY;
    for _ in 0..8 {
        let e = f.eval::<S>(x);
        res = e.rel_residual;
        let n = (e.value / e.deriv).to_scalar();
        let nc = n.to_c64();
        if !(nc.re.is_finite() && nc.im.is_finite()) {
            break;
        }
        let cand = x - n;
        if (cand.to_c64() - z).norm() > guard {
            break;
        }
        x = cand;
        if nc.norm() <= 1e-17 * (1.0 + x.to_c64().norm()) {
            res = f.eval::<S>(x).rel_residual;
            break;
        }
    }
    (x.to_c64(), res)
}

/// Finds all `f.degree()` roots, merges multiple roots and polishes simple
/// ones. `init` is padded with circle guesses or truncated as needed.
pub fn solve<F: Implicit>(f: &F, init: Vec<Complex64>, opts: &SolveOptions) -> Result<Vec<Root>> {
    let m = f.degree();
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut init = init;
    if init.len() < m {
        let extra = circle_guesses(m - init.len(), 0.5, 2.0);
        init.extend(extra);
    }
    init.truncate(m);
    // Coincident starting points stall the deflation sum.
    let golden = PI * (3.0 - 5f64.sqrt());
    for i in 1..init.len() {
        let copies = init[..i].iter().filter(|&&w| w == init[i]).count();
        if copies > 0 {
            let nudge = Complex64::from_polar(1e-4 * (1.0 + init[i].norm()), golden * copies as f64);
            init[i] += nudge;
        }
    }
    let (lo, hi) = init
        .iter()
        .map(|z| z.norm())
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r), hi.max(r)));
    let (lo, hi) = (lo.max(1e-3).min(0.5), hi.max(1.0));

    let attempts: [(Precision, f64); 3] = match opts.precision {
        Precision::DoubleDouble => [
            (Precision::DoubleDouble, 0.0),
            (Precision::DoubleDouble, 1.0),
            (Precision::DoubleDouble, 2.0),
        ],
        p => [(p, 0.0), (p, 1.0), (Precision::DoubleDouble, 2.0)],
    };
    let mut last_err = None;
    for (k, &(prec, twist)) in attempts.iter().enumerate() {
        let start: Vec<Complex64> = match k {
            0 => init.clone(),
            // Restart from rotated, inflated and jittered guesses.
            1 => init
                .iter()
                .enumerate()
                .map(|(i, &z)| {
                    z * Complex64::from_polar(1.05, 0.1 * twist)
                        + Complex64::from_polar(1e-2 * (1.0 + z.norm()), golden * i as f64)
                })
                .collect(),
            // Finally forget the supplied guesses.
            _ => circle_guesses(m, lo, hi),
        };
        let (z, done) = aberth(f, start, opts.max_iter, prec);
        let unresolved = done.iter().filter(|&&d| !d).count();
        if unresolved == 0 {
            match finish(f, z, opts) {
                Ok(r) => return Ok(r),
                Err(e) => last_err = Some(e),
            }
            continue;
        }
        let residual = z
            .iter()
            .map(|&x| f.eval::<Complex64>(x).rel_residual)
            .fold(0.0, f64::max);
        last_err = Some(Error::RootFinding {
            degree: m,
            unresolved,
            residual,
            context: String::new(),
        });
    }
    Err(last_err.expect("at least one attempt was made"))
}

fn finish<F: Implicit>(f: &F, z: Vec<Complex64>, opts: &SolveOptions) -> Result<Vec<Root>> {
    let m = z.len();
    let use_dd = match opts.precision {
        Precision::Double => false,
        _ => true,
    };
    let radius: Vec<f64> = z
        .par_iter()
        .map(|&x| {
            let e = f.eval::<Complex64>(x);
            let n = e.newton().norm();
            if n.is_finite() {
                m as f64 * n + 4.0 * f64::EPSILON * x.norm()
            } else {
                0.0
            }
        })
        .collect();
    let groups = cluster(&z, &radius);
    let centers: Vec<Complex64> = groups
        .iter()
        .map(|g| g.iter().map(|&i| z[i]).sum::<Complex64>() / g.len() as f64)
        .collect();
    let gaps: Vec<f64> = (0..groups.len())
        .into_par_iter()
        .map(|a| {
            (0..groups.len())
                .filter(|&b| b != a)
                .map(|b| (centers[a] - centers[b]).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let roots: Vec<Root> = (0..groups.len())
        .into_par_iter()
        .map(|k| {
            let g = &groups[k];
            let c = centers[k];
            let guard = if gaps[k].is_finite() { 0.1 * gaps[k] } else { 0.1 * (1.0 + c.norm()) };
            if g.len() == 1 {
                let (zp, res) = if use_dd {
                    polish::<ComplexDd, F>(f, c, guard)
                } else {
                    polish::<Complex64, F>(f, c, guard)
                };
                Root { z: zp, multiplicity: 1, residual: res }
            } else {
                let res = f.eval::<ComplexDd>(ComplexDd::from_c64(c)).rel_residual;
                Root { z: c, multiplicity: g.len(), residual: res }
            }
        })
        .collect();
    if opts.verify_clusters {
        for (k, g) in groups.iter().enumerate() {
            if g.len() > 1 {
                let spread = g.iter().map(|&i| (z[i] - centers[k]).norm()).fold(0.0, f64::max);
                let r = if gaps[k].is_finite() {
                    (0.5 * gaps[k]).min((100.0 * spread).max(1e-9 * (1.0 + centers[k].norm())))
                } else {
                    (100.0 * spread).max(1e-9 * (1.0 + centers[k].norm()))
                };
                let w = winding_number(f, centers[k], r);
                if w != g.len() as i64 {
                    return Err(Error::RootFinding {
                        degree: m,
                        unresolved: g.len(),
                        residual: roots[k].residual,
                        context: format!(
                            " (cluster at {} has {} approximations but winding number {w})",
                            centers[k],
                            g.len()
                        ),
                    });
                }
            }
        }
    }
    Ok(roots)
}

/// Roots of an explicit polynomial. Exact zero trailing coefficients are
/// split off as a root at the origin.
pub fn poly_roots(p: &Poly, opts: &SolveOptions) -> Result<Vec<Root>> {
    let zeros = p.coeffs.iter().take_while(|c| c.norm_sqr() == 0.0).count();
    if zeros >= p.coeffs.len() {
        return Err(Error::Invalid("zero polynomial has no isolated roots".into()));
    }
    let q = Poly::new(p.coeffs[zeros..].to_vec());
    let mut roots = Vec::new();
    if zeros > 0 {
        roots.push(Root {
            z: Complex64::new(0.0, 0.0),
            multiplicity: zeros,
            residual: 0.0,
        });
    }
    match q.degree() {
        0 => {}
        1 => roots.push(Root {
            z: -q.coeffs[0] / q.coeffs[1],
            multiplicity: 1,
            residual: 0.0,
        }),
        n => {
            let (lo, hi) = q.root_annulus();
            roots.extend(solve(&q, circle_guesses(n, lo, hi), opts)?);
        }
    }
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn ext_arithmetic_survives_overflow() {
        let a = Ext::new(c(1e300, 0.0));
        let b = a * a * a;
        assert!((b.log2_abs() - 900.0 * 10f64.log2()).abs() < 1e-9);
        let q = (b / a / a).to_c64();
        assert!((q.re - 1e300).abs() / 1e300 < 1e-14);
        let s = (b + Ext::new(c(1.0, 0.0))) - b;
        assert_eq!(s.to_c64(), c(0.0, 0.0));
    }

    #[test]
    fn ext_power() {
        let z = Ext::new(c(0.0, 2.0));
        assert_eq!(z.powu(5).to_c64(), c(0.0, 32.0));
    }

    #[test]
    fn cubic_roots() {
        // 4z³ - 4z
        let p = Poly::new(vec![c(0.0, 0.0), c(-4.0, 0.0), c(0.0, 0.0), c(4.0, 0.0)]);
        let mut r: Vec<f64> = poly_roots(&p, &SolveOptions::default())
            .unwrap()
            .iter()
            .map(|r| r.z.re)
            .collect();
        r.sort_by(f64::total_cmp);
        for (got, want) in r.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-14, "{r:?}");
        }
    }

    #[test]
    fn roots_of_unity_high_degree() {
        let n = 200;
        let mut coeffs = vec![c(0.0, 0.0); n + 1];
        coeffs[0] = c(-1.0, 0.0);
        coeffs[n] = c(1.0, 0.0);
        let p = Poly::new(coeffs);
        let roots = poly_roots(&p, &SolveOptions::default()).unwrap();
        assert_eq!(roots.len(), n);
        for r in roots {
            assert!((r.z.norm() - 1.0).abs() < 1e-13);
            assert!((r.z.powu(n as u32) - 1.0).norm() < 1e-11);
        }
    }

    #[test]
    fn double_root_is_merged() {
        // (z - 1)² (z + 2)
        let p = Poly::new(vec![c(2.0, 0.0), c(-3.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let roots = poly_roots(&p, &SolveOptions::default()).unwrap();
        assert_eq!(roots.len(), 2);
        let dbl = roots.iter().find(|r| r.multiplicity == 2).unwrap();
        assert!((dbl.z - 1.0).norm() < 1e-7, "{dbl:?}");
        let total: usize = roots.iter().map(|r| r.multiplicity).sum();
        assert_eq!(total, 3);
    }

    #[test]
    fn exact_zero_roots() {
        let p = Poly::new(vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let roots = poly_roots(&p, &SolveOptions::default()).unwrap();
        assert_eq!(roots, vec![Root { z: c(0.0, 0.0), multiplicity: 2, residual: 0.0 }]);
    }

    #[test]
    fn winding_counts_zeros() {
        let p = Poly::new(vec![c(2.0, 0.0), c(-3.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(winding_number(&p, c(1.0, 0.0), 0.5), 2);
        assert_eq!(winding_number(&p, c(0.0, 0.0), 5.0), 3);
        assert_eq!(winding_number(&p, c(5.0, 0.0), 1.0), 0);
    }

    #[test]
    fn reversed_horner_matches_direct() {
        let p = Poly::new(vec![c(1.0, 2.0), c(-3.0, 0.5), c(0.2, 0.0), c(1.0, -1.0)]);
        let z = c(3.0, -4.0);
        let e = Implicit::eval::<Complex64>(&p, z);
        assert!((e.value.to_c64() - p.eval(z)).norm() < 1e-12 * p.eval(z).norm());
        let d = p.derivative().eval(z);
        assert!((e.deriv.to_c64() - d).norm() < 1e-12 * d.norm());
    }
}
