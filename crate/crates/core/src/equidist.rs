//! Proximity functions and equidistribution errors of preimage, periodic,
//! derivative-level and parameter divisors, with the explicit bounds they
//! are compared against.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{mandelbrot_mu_pairing, mu_pairing, EscapeParams, GreenEvaluator, MuMethod, MuParams};
use crate::ratmap::{
    derivative_level_set, evaluate_iterate, exceptional_points, parameter_derivative_roots, periodic_divisor,
    preimage_measure, sup_spherical_derivative, AtomicMeasure, OrbitPoint, RationalMap,
};
use crate::sphere::{c_omega, sample_fs, Accumulator, MeanEstimate, RandomStream, SpherePoint, TestFunction};

/// Rates `η` tracked by default.
pub const DEFAULT_ETAS: [f64; 3] = [1.1, 1.2, 1.5];

/// Smallest sample count accepted by the proximity estimators.
pub const MIN_PROXIMITY_SAMPLES: u64 = 10_000;

/// Largest tolerated fraction of samples landing on a singularity.
const MAX_REJECTED_FRACTION: f64 = 1e-3;

/// Statistical budget, in standard errors, of every pass flag.
pub const SIGMAS: f64 = 3.0;

/// Absolute allowance for floating-point roundoff in pass flags.
pub const ROUNDOFF: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaRatio {
    pub eta: f64,
    pub ratio: f64,
}

/// The ingredients of `sup|dd^cφ/ω| (|m| + C_f C_ω) / N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundComponents {
    pub laplacian_bound: f64,
    pub c_f: f64,
    pub c_omega: f64,
    pub normalizer: f64,
}

/// A proximity-function estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProximityRecord {
    pub n: usize,
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
    pub rejected: u64,
    /// `|value| / n`, for the linear growth claim.
    pub slope: Option<f64>,
    /// `|value| / η^n`, for the sub-exponential growth claim.
    pub eta_ratios: Vec<EtaRatio>,
    pub bound_components: Option<BoundComponents>,
    /// `value <= 0` within the statistical budget.
    pub pass: bool,
}

fn integrate_log<F>(samples: u64, stream: &RandomStream, body: F) -> Result<MeanEstimate>
where
    F: Fn(SpherePoint) -> f64 + Sync,
{
    if samples < MIN_PROXIMITY_SAMPLES {
        return Err(Error::Invalid(format!(
            "at least {MIN_PROXIMITY_SAMPLES} samples are required, got {samples}"
        )));
    }
    let acc = Accumulator::run(samples, stream, |rng, _| {
        let v = body(sample_fs(rng));
        v.is_finite().then_some(v)
    });
    check_rejections(&acc, samples)?;
    Ok(acc.estimate())
}

fn check_rejections(acc: &Accumulator, samples: u64) -> Result<()> {
    if acc.rejected as f64 > MAX_REJECTED_FRACTION * samples as f64 {
        return Err(Error::TooManyRejections {
            rejected: acc.rejected,
            total: samples,
        });
    }
    Ok(())
}

fn proximity_record(n: usize, e: MeanEstimate, etas: &[f64]) -> ProximityRecord {
    ProximityRecord {
        n,
        value: e.value,
        stderr: e.stderr,
        samples: e.samples,
        rejected: e.rejected,
        slope: (n > 0).then(|| e.value.abs() / n as f64),
        eta_ratios: etas
            .iter()
            .map(|&eta| EtaRatio {
                eta,
                ratio: e.value.abs() / eta.powi(n as i32),
            })
            .collect(),
        bound_components: None,
        pass: e.value <= SIGMAS * e.stderr,
    }
}

/// `m(f^n, a) = ∫ log[f^n(z), a] ω(z)`.
pub fn mean_proximity_constant(
    f: &RationalMap,
    a: SpherePoint,
    n: usize,
    samples: u64,
    stream: &RandomStream,
) -> Result<ProximityRecord> {
    let e = integrate_log(samples, stream, |z| f.iterate(OrbitPoint::from(z), n).log_chordal_to(a))?;
    Ok(proximity_record(n, e, &[]))
}

/// `m(f^n, Id) = ∫ log[f^n(z), z] ω(z)`, with `|m| / η^n` for each `η`.
pub fn mean_proximity_identity(
    f: &RationalMap,
    n: usize,
    samples: u64,
    etas: &[f64],
    stream: &RandomStream,
) -> Result<ProximityRecord> {
    let e = integrate_log(samples, stream, |z| f.iterate(OrbitPoint::from(z), n).log_chordal_to(z))?;
    Ok(proximity_record(n, e, etas))
}

/// Settings shared by the equidistribution experiments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquidistParams {
    pub mu: MuParams,
    pub method: MuMethod,
    /// Samples of the proximity function in the bound.
    pub proximity_samples: u64,
    pub budget: usize,
    /// `C_f`; measured from the spherical derivative when absent.
    pub c_f: Option<f64>,
}

impl Default for EquidistParams {
    fn default() -> Self {
        EquidistParams {
            mu: MuParams::default(),
            method: MuMethod::InverseIteration,
            proximity_samples: 1_000_000,
            budget: crate::DEFAULT_BUDGET,
            c_f: None,
        }
    }
}

/// `|⟨φ, divisor / N⟩ - ⟨φ, μ_f⟩|` against its explicit bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquidistRecord {
    pub n: usize,
    pub lhs: f64,
    pub rhs_bound: f64,
    /// Combined standard error of `lhs` and `rhs_bound`.
    pub stderr: f64,
    pub divisor_pairing: f64,
    pub mu: MeanEstimate,
    pub proximity: ProximityRecord,
    pub bound_components: BoundComponents,
    pub atoms: usize,
    /// `lhs <= rhs_bound + 3 stderr`.
    pub pass: bool,
}

fn equidist_record(
    n: usize,
    divisor: &AtomicMeasure,
    phi: &TestFunction,
    mu: MeanEstimate,
    proximity: ProximityRecord,
    c_f: f64,
) -> EquidistRecord {
    let normalizer = divisor.declared_mass;
    let divisor_pairing = divisor.pair(phi) / divisor.declared_mass;
    let lhs = (divisor_pairing - mu.value).abs();
    let lap = phi.laplacian_bound;
    let rhs_bound = lap * (proximity.value.abs() + c_f * c_omega()) / normalizer;
    let stderr = mu.stderr.hypot(lap * proximity.stderr / normalizer);
    let components = BoundComponents {
        laplacian_bound: lap,
        c_f,
        c_omega: c_omega(),
        normalizer,
    };
    EquidistRecord {
        n,
        lhs,
        rhs_bound,
        stderr,
        divisor_pairing,
        mu,
        proximity: ProximityRecord {
            bound_components: Some(components),
            ..proximity
        },
        bound_components: components,
        atoms: divisor.len(),
        pass: lhs <= rhs_bound + SIGMAS * stderr + ROUNDOFF,
    }
}

fn c_f_of(f: &RationalMap, params: &EquidistParams) -> f64 {
    params.c_f.unwrap_or_else(|| sup_spherical_derivative(f).c_f)
}

/// The preimage bound `sup|dd^cφ/ω| (|m(f^n,a)| + C_f C_ω) / d^n`.
pub fn equidist_error_preimages(
    f: &RationalMap,
    a: SpherePoint,
    n: usize,
    phi: &TestFunction,
    params: &EquidistParams,
    stream: &RandomStream,
) -> Result<EquidistRecord> {
    let divisor = preimage_measure(f, a, n, params.budget)?;
    let mu = mu_pairing(f, phi, params.method, &params.mu, &stream.child(0))?;
    let m = mean_proximity_constant(f, a, n, params.proximity_samples, &stream.child(1))?;
    // The normalized pullback has mass one; the bound divides by d^n.
    let mut rec = equidist_record(n, &divisor, phi, mu, m, c_f_of(f, params));
    let dn = (f.degree() as f64).powi(n as i32);
    rescale_normalizer(&mut rec, dn);
    Ok(rec)
}

fn rescale_normalizer(rec: &mut EquidistRecord, normalizer: f64) {
    let old = rec.bound_components.normalizer;
    rec.rhs_bound *= old / normalizer;
    let lap = rec.bound_components.laplacian_bound;
    rec.stderr = rec.mu.stderr.hypot(lap * rec.proximity.stderr / normalizer);
    rec.bound_components.normalizer = normalizer;
    if let Some(b) = rec.proximity.bound_components.as_mut() {
        b.normalizer = normalizer;
    }
    rec.pass = rec.lhs <= rec.rhs_bound + SIGMAS * rec.stderr + ROUNDOFF;
}

/// The periodic-point bound `sup|dd^cφ/ω| (|m(f^n,Id)| + C_f C_ω) / (d^n+1)`.
pub fn equidist_error_periodic(
    f: &RationalMap,
    n: usize,
    phi: &TestFunction,
    params: &EquidistParams,
    stream: &RandomStream,
) -> Result<EquidistRecord> {
    let divisor = periodic_divisor(f, n, params.budget)?;
    let mu = mu_pairing(f, phi, params.method, &params.mu, &stream.child(0))?;
    let m = mean_proximity_identity(f, n, params.proximity_samples, &[], &stream.child(1))?;
    Ok(equidist_record(n, &divisor, phi, mu, m, c_f_of(f, params)))
}

/// An error with the reference rates `(η/d)^n` it is compared against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRecord {
    pub n: usize,
    pub lhs: f64,
    pub stderr: f64,
    pub divisor_pairing: f64,
    pub mu: MeanEstimate,
    pub mass: f64,
    pub atoms: usize,
    /// `lhs / (η/d)^n`.
    pub eta_ratios: Vec<EtaRatio>,
}

fn rate_ratios(value: f64, d: usize, n: usize, etas: &[f64]) -> Vec<EtaRatio> {
    etas.iter()
        .map(|&eta| EtaRatio {
            eta,
            ratio: value / (eta / d as f64).powi(n as i32),
        })
        .collect()
}

fn rate_record(n: usize, d: usize, divisor: &AtomicMeasure, phi: &TestFunction, mu: MeanEstimate, etas: &[f64]) -> RateRecord {
    let divisor_pairing = divisor.pair(phi) / divisor.declared_mass;
    let lhs = (divisor_pairing - mu.value).abs();
    RateRecord {
        n,
        lhs,
        stderr: mu.stderr,
        divisor_pairing,
        mu,
        mass: divisor.total_weight(),
        atoms: divisor.len(),
        eta_ratios: rate_ratios(lhs, d, n, etas),
    }
}

/// Fails unless `∞` is the only exceptional point of `f`.
pub fn require_no_finite_exceptional_point(f: &RationalMap) -> Result<()> {
    let finite: Vec<String> = exceptional_points(f)?
        .into_iter()
        .filter(|z| !z.is_infinity())
        .map(|z| z.to_string())
        .collect();
    if finite.is_empty() {
        Ok(())
    } else {
        Err(Error::ExceptionalPoint(finite.join(", ")))
    }
}

/// `|⟨φ, ((f^n)')^*δ_a / (d^n-1)⟩ - ⟨φ, μ_f⟩|` for a polynomial `f` with
/// `E(f) = {∞}`.
pub fn derivative_equidist_error(
    f: &RationalMap,
    a: Complex64,
    n: usize,
    phi: &TestFunction,
    params: &EquidistParams,
    etas: &[f64],
    stream: &RandomStream,
) -> Result<RateRecord> {
    if !f.is_polynomial() {
        return Err(Error::NotPolynomial);
    }
    require_no_finite_exceptional_point(f)?;
    let divisor = derivative_level_set(f, SpherePoint::from_complex(a), n, params.budget)?;
    let mu = mu_pairing(f, phi, params.method, &params.mu, stream)?;
    Ok(rate_record(n, f.degree(), &divisor, phi, mu, etas))
}

/// `∫ |log|(f^n)'|/(d^n-1) - g_f| ω` and `∫ log min{1, |(f^n)'|}/(d^n-1) ω`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L1Record {
    pub n: usize,
    pub l1_diff: MeanEstimate,
    pub negative_part: MeanEstimate,
    /// `l1_diff / (η/d)^n`.
    pub eta_ratios: Vec<EtaRatio>,
    /// `|negative_part| / (η/d)^n`.
    pub negative_ratios: Vec<EtaRatio>,
}

pub fn derivative_green_l1(
    f: &RationalMap,
    n: usize,
    samples: u64,
    escape: &EscapeParams,
    etas: &[f64],
    stream: &RandomStream,
) -> Result<L1Record> {
    if n == 0 {
        return Err(Error::Invalid("iterate order must be at least one".into()));
    }
    let green = GreenEvaluator::new(f, escape)?;
    let d = f.degree();
    let norm = (d as f64).powi(n as i32) - 1.0;
    let log_derivative = |z: SpherePoint| {
        evaluate_iterate(f, z, n, true)
            .derivative_log_modulus
            .expect("derivative was requested")
    };
    // Both integrals use the same sample points.
    let l1 = integrate_log(samples, stream, |z| {
        let l = log_derivative(z);
        if l.is_finite() {
            (l / norm - green.eval(z).value).abs()
        } else {
            f64::NAN
        }
    })?;
    let neg = integrate_log(samples, stream, |z| {
        let l = log_derivative(z);
        if l.is_finite() {
            l.min(0.0) / norm
        } else {
            f64::NAN
        }
    })?;
    Ok(L1Record {
        n,
        eta_ratios: rate_ratios(l1.value, d, n, etas),
        negative_ratios: rate_ratios(neg.value.abs(), d, n, etas),
        l1_diff: l1,
        negative_part: neg,
    })
}

/// `log |(f_λ^n)'(λ)| = Σ_j log |d w_j^{d-1}|` along `w_0 = λ`,
/// `w_{j+1} = w_j^d + λ`, switching to logarithms once `w` is huge.
pub fn parameter_log_derivative(d: usize, lambda: Complex64, n: usize) -> f64 {
    let dd = d as f64;
    let mut w = lambda;
    let mut lw: Option<f64> = None;
    let mut acc = 0.0;
    for _ in 0..n {
        let l = lw.unwrap_or_else(|| w.norm().ln());
        acc += dd.ln() + (dd - 1.0) * l;
        if lw.is_none() && l * dd > 600.0 {
            lw = Some(l);
        }
        match lw.as_mut() {
            Some(x) => *x *= dd,
            None => w = w.powu(d as u32) + lambda,
        }
    }
    acc
}

/// The parameter-space analogue: roots of `(f_λ^n)'(λ) = a` against
/// `μ_{C_d}`, plus `∫ log min{1, |(f_λ^n)'(λ)|}/(d^n-1) ω(λ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterRecord {
    pub rate: RateRecord,
    pub negative_part: MeanEstimate,
    pub negative_ratios: Vec<EtaRatio>,
}

#[allow(clippy::too_many_arguments)]
pub fn parameter_derivative_error(
    d: usize,
    a: Complex64,
    n: usize,
    phi: &TestFunction,
    params: &EquidistParams,
    etas: &[f64],
    stream: &RandomStream,
) -> Result<ParameterRecord> {
    let divisor = parameter_derivative_roots(d, a, n, params.budget)?;
    let mu = mandelbrot_mu_pairing(d, phi, params.mu.samples, &params.mu.escape, &stream.child(0))?;
    let norm = (d as f64).powi(n as i32) - 1.0;
    let neg = integrate_log(params.proximity_samples, &stream.child(1), |z| match z.to_complex() {
        None => 0.0,
        Some(l) => parameter_log_derivative(d, l, n).min(0.0) / norm,
    })?;
    Ok(ParameterRecord {
        rate: rate_record(n, d, &divisor, phi, mu, etas),
        negative_ratios: rate_ratios(neg.value.abs(), d, n, etas),
        negative_part: neg,
    })
}
