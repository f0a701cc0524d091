use num_complex::Complex64;
use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use super::{chordal_distance, SpherePoint};
use crate::error::{Error, Result};

pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// Relative disagreement between the two Richardson levels above which an
/// estimate is flagged.
const RICHARDSON_FLAG: f64 = 1e-4;

type Evaluator = Arc<dyn Fn(SpherePoint) -> f64 + Send + Sync>;

/// A bounded `C²` observable on the sphere together with a bound on
/// `sup |dd^c φ / ω|`.
#[derive(Clone)]
pub struct TestFunction {
    pub label: String,
    eval: Evaluator,
    density: Option<Evaluator>,
    pub laplacian_bound: f64,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("label", &self.label)
            .field("laplacian_bound", &self.laplacian_bound)
            .field("closed_form_density", &self.density.is_some())
            .finish()
    }
}

impl TestFunction {
    /// Wraps an arbitrary evaluator and estimates its bound on the
    /// validation grid.
    pub fn new<F>(label: impl Into<String>, eval: F) -> Self
    where
        F: Fn(SpherePoint) -> f64 + Send + Sync + 'static,
    {
        let mut t = TestFunction {
            label: label.into(),
            eval: Arc::new(eval),
            density: None,
            laplacian_bound: 0.0,
        };
        t.laplacian_bound = t.estimate_laplacian_bound();
        t
    }

    /// `[·, a]²`, whose density is `2 - 4[·, a]²` for every `a`.
    pub fn chordal_square(a: SpherePoint) -> Self {
        TestFunction {
            label: format!("chordal_sq({a})"),
            eval: Arc::new(move |z| chordal_distance(z, a).powi(2)),
            density: Some(Arc::new(move |z| 2.0 - 4.0 * chordal_distance(z, a).powi(2))),
            laplacian_bound: 2.0,
        }
    }

    pub fn constant(c: f64) -> Self {
        TestFunction {
            label: format!("const({c})"),
            eval: Arc::new(move |_| c),
            density: Some(Arc::new(|_| 0.0)),
            laplacian_bound: 0.0,
        }
    }

    /// `Σ cᵢ φᵢ`. The density is exact when every term has one; the bound is
    /// re-estimated on the validation grid and never exceeds `Σ |cᵢ| boundᵢ`.
    pub fn linear_combination(label: impl Into<String>, terms: &[(f64, TestFunction)]) -> Self {
        let parts: Vec<(f64, TestFunction)> = terms.to_vec();
        let exact = parts.iter().all(|(_, t)| t.density.is_some());
        let triangle: f64 = parts.iter().map(|(c, t)| c.abs() * t.laplacian_bound).sum();
        let ev = parts.clone();
        let mut t = TestFunction {
            label: label.into(),
            eval: Arc::new(move |z| ev.iter().map(|(c, t)| c * t.eval(z)).sum()),
            density: None,
            laplacian_bound: triangle,
        };
        if exact {
            let dp = parts;
            t.density = Some(Arc::new(move |z| {
                dp.iter().map(|(c, t)| c * (t.density.as_ref().unwrap())(z)).sum()
            }));
            t.laplacian_bound = t.estimate_laplacian_bound().min(triangle);
        }
        t
    }

    /// `[·, i]² - [·, -i]²`, odd under complex conjugation.
    pub fn conjugation_odd() -> Self {
        let i = SpherePoint::Finite { re: 0.0, im: 1.0 };
        TestFunction::linear_combination(
            "odd_conj",
            &[
                (1.0, TestFunction::chordal_square(i)),
                (-1.0, TestFunction::chordal_square(i.conj())),
            ],
        )
    }

    /// Parses `const`, `const:C`, `chordal:A` (A one of `inf`, a real, or
    /// `re,im`) and `odd`.
    pub fn by_name(name: &str) -> Result<Self> {
        let name = name.trim();
        if name == "odd" {
            return Ok(TestFunction::conjugation_odd());
        }
        if name == "const" {
            return Ok(TestFunction::constant(1.0));
        }
        if let Some(c) = name.strip_prefix("const:") {
            let c: f64 = c
                .parse()
                .map_err(|_| Error::Parse(format!("bad constant in test function {name:?}")))?;
            return Ok(TestFunction::constant(c));
        }
        if let Some(a) = name.strip_prefix("chordal:") {
            return Ok(TestFunction::chordal_square(parse_point(a)?));
        }
        Err(Error::Parse(format!("unknown test function {name:?}")))
    }

    pub fn eval(&self, z: SpherePoint) -> f64 {
        (self.eval)(z)
    }

    /// The density of `dd^c φ` against `ω`, exact when a closed form is
    /// known and by finite differences otherwise.
    pub fn density(&self, z: SpherePoint) -> f64 {
        match &self.density {
            Some(d) => d(z),
            None => ddc_density(self, z, DEFAULT_FD_STEP),
        }
    }

    pub fn has_closed_form_density(&self) -> bool {
        self.density.is_some()
    }

    /// Maximum of `|dd^c φ / ω|` over [`validation_grid`].
    pub fn estimate_laplacian_bound(&self) -> f64 {
        validation_grid()
            .into_iter()
            .map(|z| self.density(z).abs())
            .fold(0.0, f64::max)
    }
}

/// Parses `inf`, `x`, `x,y` or `x+yi` into a sphere point.
pub fn parse_point(s: &str) -> Result<SpherePoint> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("inf") || s == "∞" {
        return Ok(SpherePoint::Infinity);
    }
    let bad = || Error::Parse(format!("cannot parse point {s:?}"));
    if !s.contains(',') && s.ends_with('i') {
        let z: Complex64 = s.parse().map_err(|_| bad())?;
        return SpherePoint::finite(z.re, z.im);
    }
    let mut it = s.split(',');
    let re: f64 = it.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
    let im: f64 = match it.next() {
        Some(t) => t.trim().parse().map_err(|_| bad())?,
        None => 0.0,
    };
    if it.next().is_some() {
        return Err(bad());
    }
    SpherePoint::finite(re, im)
}

/// A finite-difference density estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DdcEstimate {
    pub value: f64,
    /// Set when the two Richardson levels disagree, which signals
    /// cancellation from a step that is too small.
    pub flagged: bool,
    pub discrepancy: f64,
}

/// Finite-difference `dd^c φ / ω` at `z`; see [`ddc_density_checked`].
pub fn ddc_density(phi: &TestFunction, z: SpherePoint, step: f64) -> f64 {
    ddc_density_checked(phi, z, step).value
}

/// Five-point Laplacian at steps `h` and `h/2` combined by one Richardson
/// level; points with `|z| > 1` use the chart `w = 1/z`, in which the
/// density has the same expression.
pub fn ddc_density_checked(phi: &TestFunction, z: SpherePoint, step: f64) -> DdcEstimate {
    let (center, swapped) = match z.to_complex() {
        Some(c) if c.norm_sqr() <= 1.0 => (c, false),
        Some(c) => (c.inv(), true),
        None => (Complex64::new(0.0, 0.0), true),
    };
    let f = |w: Complex64| {
        let p = if swapped {
            if w.re == 0.0 && w.im == 0.0 {
                SpherePoint::Infinity
            } else {
                SpherePoint::from_complex(w.inv())
            }
        } else {
            SpherePoint::from_complex(w)
        };
        phi.eval(p)
    };
    let lap = |h: f64| {
        let c = f(center);
        (f(center + h) + f(center - h) + f(center + Complex64::new(0.0, h))
            + f(center - Complex64::new(0.0, h))
            - 4.0 * c)
            / (h * h)
    };
    let coarse = lap(step);
    let fine = lap(step / 2.0);
    let lapl = (4.0 * fine - coarse) / 3.0;
    let scale = (1.0 + center.norm_sqr()).powi(2) / 2.0;
    let discrepancy = (fine - coarse).abs() * scale;
    let value = lapl * scale;
    DdcEstimate {
        value,
        flagged: discrepancy > RICHARDSON_FLAG * value.abs().max(1.0) || !value.is_finite(),
        discrepancy,
    }
}

/// Polar grid covering both charts: radii `r` and `1/r` for `r` in
/// `(0, 1]`, 64 angles (including the four axes), and the poles.
pub fn validation_grid() -> Vec<SpherePoint> {
    let mut pts = vec![SpherePoint::ZERO, SpherePoint::Infinity];
    let radii: Vec<f64> = (1..=16).map(|k| k as f64 / 16.0).collect();
    for &r in &radii {
        for j in 0..64 {
            let theta = TAU * j as f64 / 64.0;
            let z = Complex64::from_polar(r, theta);
            pts.push(SpherePoint::from_complex(z));
            if r < 1.0 {
                pts.push(SpherePoint::from_complex(z.inv()));
            }
        }
    }
    pts
}

/// `φ_a = [·, a]²` for `a ∈ {∞, 0, 1, i}`. The bound for `φ_∞` is the
/// closed-form value; the others are estimated on the grid.
pub fn builtin_test_functions() -> Vec<TestFunction> {
    let targets = [
        ("phi_inf", SpherePoint::Infinity),
        ("phi_0", SpherePoint::ZERO),
        ("phi_1", SpherePoint::ONE),
        ("phi_i", SpherePoint::Finite { re: 0.0, im: 1.0 }),
    ];
    targets
        .into_iter()
        .enumerate()
        .map(|(k, (label, a))| {
            let mut t = TestFunction::chordal_square(a);
            t.label = label.to_string();
            if k > 0 {
                let a2 = a;
                let fd = TestFunction {
                    label: label.to_string(),
                    eval: Arc::new(move |z| chordal_distance(z, a2).powi(2)),
                    density: None,
                    laplacian_bound: 0.0,
                };
                t.laplacian_bound = fd.estimate_laplacian_bound();
            }
            t
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{fs_integrate, RandomStream};

    #[test]
    fn density_of_chordal_square_at_origin() {
        let phi = TestFunction::chordal_square(SpherePoint::Infinity);
        let e = ddc_density_checked(&phi, SpherePoint::ZERO, DEFAULT_FD_STEP);
        assert!((e.value + 2.0).abs() < 1e-6, "{e:?}");
        assert!(!e.flagged);
    }

    #[test]
    fn density_matches_closed_form_in_both_charts() {
        let a = SpherePoint::Finite { re: 0.3, im: -0.8 };
        let phi = TestFunction::chordal_square(a);
        for z in [
            SpherePoint::Finite { re: 0.2, im: 0.1 },
            SpherePoint::Finite { re: -3.0, im: 5.0 },
            SpherePoint::Infinity,
            a,
        ] {
            let fd = ddc_density(&phi, z, DEFAULT_FD_STEP);
            assert!((fd - phi.density(z)).abs() < 1e-5, "{z}: {fd} vs {}", phi.density(z));
        }
    }

    #[test]
    fn constant_has_zero_density() {
        let phi = TestFunction::new("c", |_| 3.5);
        assert_eq!(ddc_density(&phi, SpherePoint::real(0.7), DEFAULT_FD_STEP), 0.0);
        assert_eq!(phi.laplacian_bound, 0.0);
    }

    #[test]
    fn tiny_step_is_flagged() {
        let phi = TestFunction::chordal_square(SpherePoint::Infinity);
        let e = ddc_density_checked(&phi, SpherePoint::real(0.4), 1e-9);
        assert!(e.flagged, "{e:?}");
    }

    #[test]
    fn grid_sup_of_density_is_two() {
        let phi = TestFunction::new("fd", |z| chordal_distance(z, SpherePoint::Infinity).powi(2));
        assert!((phi.laplacian_bound - 2.0).abs() < 1e-5, "{}", phi.laplacian_bound);
    }

    #[test]
    fn builtins() {
        let fs = builtin_test_functions();
        assert_eq!(fs.len(), 4);
        assert_eq!(fs[0].eval(SpherePoint::ZERO), 1.0);
        assert_eq!(fs[0].laplacian_bound, 2.0);
        for f in &fs[1..] {
            assert!((f.laplacian_bound - 2.0).abs() < 1e-5, "{f:?}");
        }
    }

    #[test]
    fn densities_have_zero_mass() {
        for (k, f) in builtin_test_functions().into_iter().enumerate() {
            let e = fs_integrate(|z| f.density(z), 400_000, &RandomStream::new(10 + k as u64))
                .unwrap();
            assert!(e.value.abs() < 1e-3 + 3.0 * e.stderr, "{}: {e:?}", f.label);
        }
    }

    #[test]
    fn odd_function_bound() {
        let f = TestFunction::conjugation_odd();
        assert!(f.has_closed_form_density());
        assert!((f.laplacian_bound - 4.0).abs() < 1e-9, "{}", f.laplacian_bound);
        let z = SpherePoint::Finite { re: 0.4, im: 0.9 };
        assert!((f.eval(z) + f.eval(z.conj())).abs() < 1e-15);
    }

    #[test]
    fn names_parse() {
        assert_eq!(TestFunction::by_name("chordal:inf").unwrap().laplacian_bound, 2.0);
        assert_eq!(TestFunction::by_name("const").unwrap().eval(SpherePoint::ONE), 1.0);
        assert!(TestFunction::by_name("chordal:1,2").is_ok());
        assert!(TestFunction::by_name("nope").is_err());
    }

    #[test]
    fn point_syntaxes_agree() {
        let z = SpherePoint::Finite { re: 0.5, im: -2.0 };
        assert_eq!(parse_point("0.5,-2").unwrap(), z);
        assert_eq!(parse_point("0.5-2i").unwrap(), z);
        assert_eq!(parse_point("-i").unwrap(), SpherePoint::Finite { re: 0.0, im: -1.0 });
        assert_eq!(parse_point("∞").unwrap(), SpherePoint::Infinity);
        assert!(parse_point("1,2,3").is_err());
        assert!(parse_point("zi").is_err());
    }

    #[test]
    fn display_round_trips() {
        for z in [
            SpherePoint::Infinity,
            SpherePoint::Finite { re: 1.618, im: 6.9e-103 },
            SpherePoint::Finite { re: -2.0, im: -1e30 },
            SpherePoint::Finite { re: 0.1, im: 0.0 },
        ] {
            assert_eq!(parse_point(&z.to_string()).unwrap(), z, "{z}");
        }
    }
}
