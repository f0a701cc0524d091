//! Escape-rate Green functions, pairings against the equilibrium measure
//! `μ_f`, and the Green function and harmonic measure of the connectedness
//! locus of `z^d + λ`.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ratmap::{preimages_one_step, repelling_fixed_point, OrbitPoint, RationalMap};
use crate::sphere::{sample_fs, Accumulator, MeanEstimate, RandomStream, SpherePoint, TestFunction};

/// `ln |w|` beyond which the tail `ln|w| + ln|a_d|/(d-1)` is exact to far
/// below double precision.
const LN_TAIL: f64 = 230.0;

/// Iteration controls for escape-rate computations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeParams {
    pub max_iter: usize,
    /// `None` selects the default radius for the map at hand.
    pub escape_radius: Option<f64>,
    pub tail_tolerance: f64,
}

impl Default for EscapeParams {
    fn default() -> Self {
        EscapeParams {
            max_iter: 200,
            escape_radius: None,
            tail_tolerance: 1e-12,
        }
    }
}

impl EscapeParams {
    /// The escape radius for `f`: the requested one, or the larger of
    /// `1 + Σ|a_k|/|a_d|` and `1 + Σ_{k<d}|a_k|/|a_d| + 2/|a_d|`. Either way
    /// it must guarantee `|f(z)| > 2|z|` beyond it.
    pub fn radius_for(&self, coeffs: &[Complex64]) -> Result<f64> {
        let d = coeffs.len() - 1;
        let ad = coeffs[d].norm();
        let lower: f64 = coeffs[..d].iter().map(|c| c.norm()).sum::<f64>() / ad;
        let safe = 1.0 + lower + 2.0 / ad;
        let r = match self.escape_radius {
            Some(r) => r,
            None => (1.0 + lower + 1.0).max(safe),
        };
        // |f(z)| >= |a_d| r^(d-1) (r - lower) for |z| = r >= 1.
        let grows = r >= 1.0 && ad * r.powi(d as i32 - 1) * (r - lower) > 2.0 * r;
        if !grows {
            return Err(Error::Invalid(format!(
                "escape radius {r} does not force |f(z)| > 2|z| (need at least {safe})"
            )));
        }
        Ok(r)
    }
}

/// A Green function value; `boundary_uncertain` is set when the orbit did
/// not escape but `max_iter` is too small to certify `g < tail_tolerance`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenValue {
    pub value: f64,
    pub boundary_uncertain: bool,
    pub iterations: usize,
}

/// Escape-rate evaluator for a fixed polynomial.
#[derive(Clone, Debug)]
pub struct GreenEvaluator {
    map: RationalMap,
    coeffs: Vec<Complex64>,
    radius: f64,
    /// `ln|a_d| / (d - 1)`, the value of `g - log|z|` at `∞`.
    infinity_offset: f64,
    uncertain: bool,
    max_iter: usize,
}

impl GreenEvaluator {
    pub fn new(f: &RationalMap, params: &EscapeParams) -> Result<Self> {
        let coeffs = f.polynomial_coefficients()?;
        let d = f.degree();
        let radius = params.radius_for(&coeffs)?;
        let infinity_offset = coeffs[d].norm().ln() / (d as f64 - 1.0);
        // Without escape after N steps, g <= d^-N (ln R + offset + 1).
        let worst = (radius.ln() + infinity_offset.abs() + 1.0) * (-(params.max_iter as f64) * (d as f64).ln()).exp();
        Ok(GreenEvaluator {
            map: f.clone(),
            coeffs,
            radius,
            infinity_offset,
            uncertain: worst > params.tail_tolerance,
            max_iter: params.max_iter,
        })
    }

    pub fn infinity_offset(&self) -> f64 {
        self.infinity_offset
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn horner(&self, w: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * w + c)
    }

    pub fn eval(&self, z: SpherePoint) -> GreenValue {
        let Some(mut w) = z.to_complex() else {
            return GreenValue {
                value: f64::INFINITY,
                boundary_uncertain: false,
                iterations: 0,
            };
        };
        for k in 0..self.max_iter {
            if w.norm() > self.radius {
                return self.tail(w, k);
            }
            w = self.horner(w);
        }
        if w.norm() > self.radius {
            return self.tail(w, self.max_iter);
        }
        GreenValue {
            value: 0.0,
            boundary_uncertain: self.uncertain,
            iterations: self.max_iter,
        }
    }

    /// Continues an escaping orbit until the asymptotic formula is exact.
    fn tail(&self, w: Complex64, k: usize) -> GreenValue {
        let d = self.map.degree() as f64;
        let mut p = OrbitPoint::Plain(w);
        let mut k = k;
        while p.ln_abs() < LN_TAIL {
            p = self.map.step(p);
            k += 1;
        }
        let l = p.ln_abs();
        let value = if l.is_finite() {
            (l + self.infinity_offset) * (-(k as f64) * d.ln()).exp()
        } else {
            // Reached ∞ exactly: only possible from an overflowing start.
            f64::INFINITY
        };
        GreenValue {
            value: value.max(0.0),
            boundary_uncertain: false,
            iterations: k,
        }
    }

    /// `g(z) - ½ log(1 + |z|²)`, bounded on the sphere with value
    /// `ln|a_d|/(d-1)` at `∞`.
    pub fn potential_difference(&self, z: SpherePoint) -> f64 {
        match z.to_complex() {
            None => self.infinity_offset,
            Some(c) => {
                let r = c.norm();
                if r > 1e150 {
                    return self.infinity_offset;
                }
                self.eval(z).value - crate::sphere::half_log_1p_sq(r)
            }
        }
    }
}

/// `g_f(z) = lim d^-k log⁺|f^k(z)|` for a polynomial `f`.
pub fn green_escape(f: &RationalMap, z: SpherePoint, params: &EscapeParams) -> Result<GreenValue> {
    Ok(GreenEvaluator::new(f, params)?.eval(z))
}

/// Estimator of `∫ φ dμ_f`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuMethod {
    /// Backward random walks along preimage branches.
    InverseIteration,
    /// `∫ φ ω + ∫ (g_f - ½ log(1+|z|²)) dd^c φ`, polynomials only.
    Potential,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuParams {
    pub walkers: usize,
    pub burn_in: usize,
    pub trajectory: usize,
    /// Monte Carlo samples of the potential method.
    pub samples: u64,
    pub escape: EscapeParams,
}

impl Default for MuParams {
    fn default() -> Self {
        MuParams {
            walkers: 512,
            burn_in: 100,
            trajectory: 2048,
            samples: 1_000_000,
            escape: EscapeParams::default(),
        }
    }
}

/// One random preimage, each branch with probability multiplicity / d.
#[derive(Clone, Debug)]
enum Backward {
    /// `a z^d + c`.
    Unicritical { d: usize, a: Complex64, c: Complex64 },
    /// Degree two: explicit quadratic formula.
    Quadratic { p: Vec<Complex64>, q: Vec<Complex64> },
    General(RationalMap),
}

impl Backward {
    fn new(f: &RationalMap) -> Self {
        let d = f.degree();
        if let Ok(c) = f.polynomial_coefficients() {
            if c[1..d].iter().all(|x| x.norm_sqr() == 0.0) {
                return Backward::Unicritical { d, a: c[d], c: c[0] };
            }
        }
        if d == 2 {
            let (p, q) = f.padded();
            return Backward::Quadratic { p, q };
        }
        Backward::General(f.clone())
    }

    fn sample(&self, w: SpherePoint, rng: &mut ChaCha8Rng) -> SpherePoint {
        match self {
            Backward::Unicritical { d, a, c } => {
                let Some(w) = w.to_complex() else {
                    return SpherePoint::Infinity;
                };
                let k = rng.gen_range(0..*d);
                let base = ((w - c) / a).powf(1.0 / *d as f64);
                let z = base * Complex64::from_polar(1.0, TAU * k as f64 / *d as f64);
                SpherePoint::from_complex(z)
            }
            Backward::Quadratic { p, q } => {
                // A z² + B z + C with (A, B, C) from P - wQ (or Q at ∞).
                let (a, b, c) = match w.to_complex() {
                    None => (q[2], q[1], q[0]),
                    Some(w) => (p[2] - w * q[2], p[1] - w * q[1], p[0] - w * q[0]),
                };
                let first = rng.gen::<bool>();
                let scale = a.norm() + b.norm() + c.norm();
                if a.norm() <= 1e-14 * scale {
                    // One root went to ∞.
                    return if first {
                        SpherePoint::Infinity
                    } else {
                        SpherePoint::from_complex(-c / b)
                    };
                }
                let disc = (b * b - 4.0 * a * c).sqrt();
                let s = if (b.conj() * disc).re >= 0.0 { b + disc } else { b - disc };
                let qq = -0.5 * s;
                if qq.norm_sqr() == 0.0 {
                    return SpherePoint::ZERO;
                }
                SpherePoint::from_complex(if first { qq / a } else { c / qq })
            }
            Backward::General(f) => {
                let m = match preimages_one_step(f, w) {
                    Ok(m) => m,
                    Err(_) => return w,
                };
                let mut t = rng.gen::<f64>() * m.total_weight();
                for atom in &m.atoms {
                    if t < atom.weight {
                        return atom.point;
                    }
                    t -= atom.weight;
                }
                m.atoms.last().expect("preimages are never empty").point
            }
        }
    }
}

/// `∫ φ dμ_f` by the selected method.
pub fn mu_pairing(
    f: &RationalMap,
    phi: &TestFunction,
    method: MuMethod,
    params: &MuParams,
    stream: &RandomStream,
) -> Result<MeanEstimate> {
    match method {
        MuMethod::InverseIteration => inverse_iteration(f, phi, params, stream),
        MuMethod::Potential => {
            let g = GreenEvaluator::new(f, &params.escape)?;
            potential_pairing(|z| g.potential_difference(z), phi, params.samples, stream)
        }
    }
}

fn inverse_iteration(f: &RationalMap, phi: &TestFunction, params: &MuParams, stream: &RandomStream) -> Result<MeanEstimate> {
    if params.walkers < 2 || params.trajectory == 0 {
        return Err(Error::Invalid("inverse iteration needs at least two walkers and one step".into()));
    }
    let back = Backward::new(f);
    let start = repelling_fixed_point(f).ok();
    let means: Vec<f64> = (0..params.walkers)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.child(i as u64).rng();
            let mut z = start.unwrap_or_else(|| sample_fs(&mut rng));
            for _ in 0..params.burn_in {
                z = back.sample(z, &mut rng);
            }
            let mut sum = 0.0;
            for _ in 0..params.trajectory {
                z = back.sample(z, &mut rng);
                sum += phi.eval(z);
            }
            sum / params.trajectory as f64
        })
        .collect();
    let mut acc = Accumulator::default();
    for m in means {
        acc.push(m);
    }
    Ok(acc.estimate())
}

/// `∫ φ ω + ∫ u · (dd^c φ / ω) ω` for a bounded potential `u`.
fn potential_pairing<U>(u: U, phi: &TestFunction, samples: u64, stream: &RandomStream) -> Result<MeanEstimate>
where
    U: Fn(SpherePoint) -> f64 + Sync,
{
    if samples < 2 {
        return Err(Error::Invalid("at least two samples are required".into()));
    }
    let acc = Accumulator::run(samples, stream, |rng, _| {
        let z = sample_fs(rng);
        let rho = phi.density(z);
        let corr = if rho == 0.0 { 0.0 } else { u(z) * rho };
        Some(phi.eval(z) + corr)
    });
    if let Some(index) = acc.first_rejected {
        return Err(Error::NonFiniteSample { index });
    }
    Ok(acc.estimate())
}

/// Both estimators, failing when they disagree beyond five combined
/// standard errors.
pub fn mu_pairing_cross_checked(
    f: &RationalMap,
    phi: &TestFunction,
    params: &MuParams,
    stream: &RandomStream,
) -> Result<(MeanEstimate, MeanEstimate)> {
    let a = mu_pairing(f, phi, MuMethod::InverseIteration, params, &stream.child(0))?;
    let b = mu_pairing(f, phi, MuMethod::Potential, params, &stream.child(1))?;
    let s = a.stderr.hypot(b.stderr);
    if (a.value - b.value).abs() > 5.0 * s + 1e-12 {
        return Err(Error::EstimatorDisagreement {
            first: a.value,
            second: b.value,
            stderr: s,
        });
    }
    Ok((a, b))
}

/// `G(λ) = lim d^-k log⁺|w_k|` with `w_0 = λ`, `w_{k+1} = w_k^d + λ`, so
/// that `G(λ) = log|λ| + o(1)` at `∞`.
pub fn mandelbrot_green(d: usize, lambda: Complex64, params: &EscapeParams) -> Result<GreenValue> {
    if d < 2 {
        return Err(Error::Degree { degree: d });
    }
    if !(lambda.re.is_finite() && lambda.im.is_finite()) {
        return Err(Error::Invalid("parameter must be finite".into()));
    }
    let mut coeffs = vec![Complex64::new(0.0, 0.0); d + 1];
    coeffs[0] = lambda;
    coeffs[d] = Complex64::new(1.0, 0.0);
    let radius = params.radius_for(&coeffs)?;
    let dd = d as f64;
    let power = |w: Complex64| w.powu(d as u32);
    let mut w = lambda;
    let mut k = 0;
    while w.norm() <= radius {
        if k == params.max_iter {
            let worst = (radius.ln() + 1.0) * (-(k as f64) * dd.ln()).exp();
            return Ok(GreenValue {
                value: 0.0,
                boundary_uncertain: worst > params.tail_tolerance,
                iterations: k,
            });
        }
        w = power(w) + lambda;
        k += 1;
    }
    // Escaping: iterate directly while w^d is representable, then in the
    // logarithm, where ln|w^d + λ| = d ln|w| up to |λ| |w|^-d.
    while w.norm().ln() * dd < 690.0 && w.norm().ln() < LN_TAIL {
        w = power(w) + lambda;
        k += 1;
    }
    let mut l = w.norm().ln();
    while l < LN_TAIL {
        l *= dd;
        k += 1;
    }
    Ok(GreenValue {
        value: l * (-(k as f64) * dd.ln()).exp(),
        boundary_uncertain: false,
        iterations: k,
    })
}

/// `∫ φ dμ_{C_d}` through `∫ φ ω + ∫ (G - ½ log(1+|λ|²)) dd^c φ`, with the
/// bracket extended by `0` at `∞`.
pub fn mandelbrot_mu_pairing(
    d: usize,
    phi: &TestFunction,
    samples: u64,
    params: &EscapeParams,
    stream: &RandomStream,
) -> Result<MeanEstimate> {
    if d < 2 {
        return Err(Error::Degree { degree: d });
    }
    let u = |z: SpherePoint| match z.to_complex() {
        None => 0.0,
        Some(l) if l.norm() > 1e150 => 0.0,
        Some(l) => {
            let g = mandelbrot_green(d, l, params).map(|g| g.value).unwrap_or(f64::NAN);
            g - crate::sphere::half_log_1p_sq(l.norm())
        }
    };
    potential_pairing(u, phi, samples, stream)
}

/// A scalar field sampled on a regular grid, stored row by row from the
/// bottom edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    /// `[x_min, x_max, y_min, y_max]`; samples sit at cell centers.
    pub bbox: [f64; 4],
    pub width: usize,
    pub height: usize,
    #[serde(skip)]
    pub values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FieldHeader {
    bbox: [f64; 4],
    width: usize,
    height: usize,
    dtype: String,
    order: String,
}

impl GridField {
    pub fn sample<F>(bbox: [f64; 4], width: usize, height: usize, g: F) -> Self
    where
        F: Fn(Complex64) -> f64 + Sync,
    {
        let hx = (bbox[1] - bbox[0]) / width as f64;
        let hy = (bbox[3] - bbox[2]) / height as f64;
        let values = (0..width * height)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k % width, k / width);
                g(Complex64::new(bbox[0] + (i as f64 + 0.5) * hx, bbox[2] + (j as f64 + 0.5) * hy))
            })
            .collect();
        GridField {
            bbox,
            width,
            height,
            values,
        }
    }

    /// Writes `stem.bin` (little-endian f64) and `stem.json` (header).
    pub fn write(&self, stem: &Path) -> Result<()> {
        let header = FieldHeader {
            bbox: self.bbox,
            width: self.width,
            height: self.height,
            dtype: "f64le".into(),
            order: "row-major, first row at y_min".into(),
        };
        std::fs::write(stem.with_extension("json"), serde_json::to_string_pretty(&header)?)?;
        let bytes: Vec<u8> = self.values.iter().flat_map(|v| v.to_le_bytes()).collect();
        std::fs::write(stem.with_extension("bin"), bytes)?;
        Ok(())
    }

    pub fn read(stem: &Path) -> Result<Self> {
        let header: FieldHeader = serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json"))?)?;
        let bytes = std::fs::read(stem.with_extension("bin"))?;
        if bytes.len() != 8 * header.width * header.height {
            return Err(Error::Parse("field size does not match its header".into()));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunks have eight bytes")))
            .collect();
        Ok(GridField {
            bbox: header.bbox,
            width: header.width,
            height: header.height,
            values,
        })
    }
}
