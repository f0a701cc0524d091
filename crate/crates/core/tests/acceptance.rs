//! Acceptance criteria 1 to 11. Each test prints one `PASS`/`FAIL` line to
//! the real stdout, so the verdicts show even when output is captured.

use num_complex::Complex64;
use std::f64::consts::PI;
use std::io::Write as _;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use equidyn::equidist::{
    derivative_green_l1, equidist_error_periodic, equidist_error_preimages, mean_proximity_constant,
    mean_proximity_identity, parameter_derivative_error, EquidistParams, ProximityRecord, SIGMAS,
};
use equidyn::hyph::hypothesis_h_statistic;
use equidyn::potential::{
    green_escape, mandelbrot_green, mandelbrot_mu_pairing, mu_pairing, EscapeParams, MuMethod, MuParams,
};
use equidyn::ratmap::{derivative_level_set, periodic_divisor, repelling_fixed_point, RationalMap};
use equidyn::selberg::{myrberg_check, selberg_check, selberg_corpus, MyrbergOptions, PlanarDomain};
use equidyn::sphere::{builtin_test_functions, c_omega, chordal_distance, fs_integrate, RandomStream, SpherePoint};
use equidyn::{TestFunction, DEFAULT_BUDGET};

const SAMPLES: u64 = 1_000_000;
const SEED: u64 = 20_240_601;

/// Runtimes are only meaningful when the criteria do not overlap.
static SERIAL: Mutex<()> = Mutex::new(());

struct Verdict {
    criterion: u32,
    title: &'static str,
    started: Instant,
    limit: Option<Duration>,
    checks: usize,
    failures: Vec<String>,
}

impl Verdict {
    fn new(criterion: u32, title: &'static str, limit: Option<Duration>) -> Self {
        Verdict {
            criterion,
            title,
            started: Instant::now(),
            limit,
            checks: 0,
            failures: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    fn finish(mut self) {
        let elapsed = self.started.elapsed();
        if let Some(limit) = self.limit {
            self.check(elapsed < limit, || format!("runtime {elapsed:.1?} exceeds {limit:?}"));
        }
        let status = if self.failures.is_empty() { "PASS" } else { "FAIL" };
        let line = format!(
            "criterion {:>2}: {status} ({}/{} checks, {:.1}s) {}",
            self.criterion,
            self.checks - self.failures.len(),
            self.checks,
            elapsed.as_secs_f64(),
            self.title
        );
        let mut out = std::io::stdout().lock();
        writeln!(out, "{line}").unwrap();
        out.flush().unwrap();
        assert!(
            self.failures.is_empty(),
            "{line}\n  {}",
            self.failures.join("\n  ")
        );
    }
}

fn stream(criterion: u64) -> RandomStream {
    RandomStream::new(SEED).child(criterion)
}

fn quadratics() -> [(&'static str, RationalMap); 3] {
    [
        ("z²", RationalMap::quadratic(0.0)),
        ("z²-1", RationalMap::quadratic(-1.0)),
        ("z²-2", RationalMap::quadratic(-2.0)),
    ]
}

fn chordal_to_infinity() -> TestFunction {
    TestFunction::chordal_square(SpherePoint::Infinity)
}

fn params(c_f: Option<f64>) -> EquidistParams {
    EquidistParams {
        c_f,
        ..EquidistParams::default()
    }
}

fn within(x: f64, target: f64, sigma: f64) -> bool {
    (x - target).abs() <= SIGMAS * sigma
}

#[test]
fn criterion_01_sphere_constants() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut v = Verdict::new(1, "C_ω = 1/2 and ∫ log[·,a] ω = -1/2", Some(Duration::from_secs(10)));
    v.check(c_omega() == 0.5, || format!("c_omega() = {}", c_omega()));
    for (k, a) in [SpherePoint::ZERO, SpherePoint::ONE, SpherePoint::Infinity].into_iter().enumerate() {
        let e = fs_integrate(|z| chordal_distance(z, a).ln(), SAMPLES, &stream(1).child(k as u64)).unwrap();
        v.check(within(e.value, -0.5, e.stderr), || format!("a = {a}: {} ± {}", e.value, e.stderr));
        v.check(e.stderr < 2e-3, || format!("a = {a}: stderr {}", e.stderr));
    }
    v.finish();
}

#[test]
fn criterion_02_selberg_corpus() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut v = Verdict::new(2, "Selberg inequality on the domain corpus", Some(Duration::from_secs(60)));
    let corpus = selberg_corpus();
    let mut passed = 0;
    let (mut tan_active, mut log_active) = (false, false);
    for case in &corpus {
        let r = selberg_check(&case.domain, case.y, case.r).unwrap();
        v.check(r.pass, || format!("{}: lhs {} > bound {}", case.label, r.lhs, r.bound()));
        passed += usize::from(r.pass);
        if r.lhs > 0.0 {
            tan_active |= r.rhs_tan < r.rhs_log;
            log_active |= r.rhs_log < r.rhs_tan;
        }
    }
    v.check(passed >= 20, || format!("only {passed} passing configurations"));
    v.check(tan_active && log_active, || "both branches of the min must be active".into());

    let b31 = PlanarDomain::disk(Complex64::new(3.0, 0.0), 1.0).unwrap();
    let r = selberg_check(&b31, Complex64::new(3.0, 0.0), 3.0).unwrap();
    v.check(r.pass, || "B(3,1), y = 3, r = 3 fails".into());
    v.check((r.lhs - 0.1063).abs() <= 1e-3, || format!("B(3,1) lhs {}", r.lhs));
    // θ = 4 asin(1/6), so (π/2) tan(θ/4) = (π/2)/√35.
    let exact_tan = PI / 2.0 / 35f64.sqrt();
    v.check((r.rhs_tan - exact_tan).abs() <= 1e-9, || format!("B(3,1) rhs_tan {}", r.rhs_tan));
    v.check((r.bound() - 0.26507).abs() <= 1e-3, || format!("B(3,1) bound {}", r.bound()));
    v.check((r.rhs_log - 1.5f64.ln()).abs() <= 1e-12, || format!("B(3,1) rhs_log {}", r.rhs_log));
    v.finish();
}

#[test]
fn criterion_03_myrberg_decomposition() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut v = Verdict::new(3, "Myrberg decomposition of the grid Green function", None);
    let cases = [
        (RationalMap::quadratic(0.0), 1.0, 0.3, 1, 5e-3),
        (RationalMap::quadratic(-1.0), 0.5, 0.2, 2, 1e-2),
    ];
    for (f, a, s, n, tol) in cases {
        let t = Instant::now();
        let opts = MyrbergOptions {
            resolution: 512,
            ..MyrbergOptions::default()
        };
        let r = myrberg_check(&f, Complex64::new(a, 0.0), s, n, 400, &opts).unwrap();
        v.check(r.discrepancy < tol, || format!("{f}, a = {a}: discrepancy {}", r.discrepancy));
        let dt = t.elapsed();
        v.check(dt < Duration::from_secs(120), || format!("{f}: runtime {dt:.1?}"));
    }
    v.finish();
}

fn proximity_sequence(f: &RationalMap, a: SpherePoint, orders: std::ops::RangeInclusive<usize>, s: &RandomStream) -> Vec<ProximityRecord> {
    orders
        .map(|n| mean_proximity_constant(f, a, n, SAMPLES, &s.child(n as u64)).unwrap())
        .collect()
}

#[test]
fn criterion_04_linear_growth_at_repelling_points() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut v = Verdict::new(4, "m(f^n, a) = O(n) at a repelling fixed point", Some(Duration::from_secs(300)));
    for (k, (name, f)) in quadratics().into_iter().enumerate() {
        let a = repelling_fixed_point(&f).unwrap();
        let recs = proximity_sequence(&f, a, 1..=10, &stream(4).child(k as u64));
        let m3 = recs[2].value.abs() / 3.0;
        for r in &recs {
            v.check(r.value <= SIGMAS * r.stderr, || format!("{name}, n = {}: m = {} > 0", r.n, r.value));
            let slope = r.value.abs() / r.n as f64;
            v.check(slope <= 2.0 * m3 + SIGMAS * r.stderr / r.n as f64, || {
                format!("{name}, n = {}: |m|/n = {slope} above twice the n = 3 value {m3}", r.n)
            });
        }
        if k == 0 {
            for r in &recs[4..] {
                v.check(within(r.value, -0.3466, r.stderr), || {
                    format!("z², a = 1, n = {}: m = {} ± {}, expected -0.3466", r.n, r.value, r.stderr)
                });
            }
        }
    }
    v.finish();
}

#[test]
fn criterion_05_superattracting_contrast() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut v = Verdict::new(5, "|m(f^n, 0)| / 2^n → (log 2)/2 for z²", None);
    let f = RationalMap::quadratic(0.0);
    for r in proximity_sequence(&f, SpherePoint::ZERO, 4..=8, &stream(5)) {
        let scale = 2f64.powi(r.n as i32);
        let ratio = r.value.abs() / scale;
        v.check(within(ratio, 0.3466, r.stderr / scale), || {
            format!("n = {}: {ratio} ± {}", r.n, r.stderr / scale)
        });
    }
    v.finish();
}

#[test]
fn criterion_06_preimage_bound() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut v = Verdict::new(6, "preimage equidistribution bound", None);
    let phi = chordal_to_infinity();
    let s = stream(6);

    let z2 = RationalMap::quadratic(0.0);
    let i = SpherePoint::finite(0.0, 1.0).unwrap();
    let r = equidist_error_preimages(&z2, i, 3, &phi, &params(Some(4.0)), &s.child(0)).unwrap();
    v.check(r.pass, || format!("z², a = i: lhs {} above {}", r.lhs, r.rhs_bound));
    v.check(r.lhs <= equidyn::equidist::ROUNDOFF, || format!("z², a = i: lhs {} is not zero", r.lhs));

    let f = RationalMap::quadratic(-1.0);
    let a = SpherePoint::finite(0.3, 0.1).unwrap();
    for n in 2..=6 {
        let r = equidist_error_preimages(&f, a, n, &phi, &params(None), &s.child(n as u64)).unwrap();
        let c = r.bound_components;
        let bound = c.laplacian_bound * (r.proximity.value.abs() + c.c_f * c.c_omega) / 2f64.powi(n as i32);
        v.check(r.pass && r.lhs <= bound + SIGMAS * r.stderr + equidyn::equidist::ROUNDOFF, || {
            format!("z²-1, n = {n}: lhs {} above {bound} + 3·{}", r.lhs, r.stderr)
        });
    }
    v.finish();
}

#[test]
fn criterion_07_periodic_points() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut v = Verdict::new(7, "m(f^n, Id) and the periodic-point bound", None);
    let s = stream(7);
    let z2 = RationalMap::quadratic(0.0);
    for n in 5..=10 {
        let r = mean_proximity_identity(&z2, n, SAMPLES, &[], &s.child(n as u64)).unwrap();
        v.check(within(r.value, -0.8466, r.stderr), || {
            format!("z², n = {n}: m(f^n, Id) = {} ± {}, expected -0.8466", r.value, r.stderr)
        });
    }
    let phi = chordal_to_infinity();
    v.check(periodic_divisor(&z2, 3, DEFAULT_BUDGET).unwrap().len() == 9, || "z², n = 3: not 9 atoms".into());
    let r = equidist_error_periodic(&z2, 3, &phi, &params(Some(4.0)), &s.child(100)).unwrap();
    v.check(r.lhs <= equidyn::equidist::ROUNDOFF, || format!("z², n = 3: lhs {} is not zero", r.lhs));
    v.check(r.pass, || "z², n = 3: fails".into());
    let f = RationalMap::quadratic(-1.0);
    for n in 2..=6 {
        let r = equidist_error_periodic(&f, n, &phi, &params(None), &s.child(200 + n as u64)).unwrap();
        v.check(r.pass, || format!("z²-1, n = {n}: lhs {} above {} + 3·{}", r.lhs, r.rhs_bound, r.stderr));
    }
    v.finish();
}

#[test]
fn criterion_08_hypothesis_h() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut v = Verdict::new(8, "hypothesis-H cluster statistic", Some(Duration::from_secs(120)));
    let r = hypothesis_h_statistic(&RationalMap::quadratic(0.0), 4, 1.2).unwrap();
    v.check(r.max_cluster == 1, || format!("z², n = 4: max cluster {}", r.max_cluster));
    v.check((r.allowance - 2.0736).abs() < 1e-12, || format!("allowance {}", r.allowance));
    v.check(r.pass, || "z², n = 4 fails".into());
    let f = RationalMap::quadratic(-1.0);
    for n in 2..=8 {
        let r = hypothesis_h_statistic(&f, n, 1.1).unwrap();
        v.check(r.pass, || format!("z²-1, n = {n}: max cluster {} > {}", r.max_cluster, r.allowance));
    }
    v.finish();
}

#[test]
fn criterion_09_derivative_divisors() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut v = Verdict::new(9, "derivative level sets and the L¹ Green comparison", None);
    let f = RationalMap::quadratic(-1.0);
    for a in [Complex64::new(0.5, 0.0), Complex64::new(1.0, 1.0), Complex64::new(-3.0, 0.2)] {
        for n in 1..=7 {
            let m = derivative_level_set(&f, SpherePoint::from_complex(a), n, DEFAULT_BUDGET).unwrap();
            let want = 2f64.powi(n as i32) - 1.0;
            v.check(m.total_weight() == want, || format!("a = {a}, n = {n}: mass {}", m.total_weight()));
        }
    }

    let g = RationalMap::quadratic(-2.0);
    let s = stream(9);
    let recs: Vec<_> = (4..=8)
        .map(|n| derivative_green_l1(&g, n, SAMPLES, &EscapeParams::default(), &[1.2], &s.child(n as u64)).unwrap())
        .collect();
    let scaled = |k: usize| {
        let r = &recs[k];
        let q = 0.6f64.powi(r.n as i32);
        (r.l1_diff.value / q, r.l1_diff.stderr / q)
    };
    for r in &recs {
        v.check(r.l1_diff.value >= 0.0, || format!("n = {}: l1 {}", r.n, r.l1_diff.value));
    }
    for k in 0..recs.len() - 1 {
        let (a, sa) = scaled(k);
        let (b, sb) = scaled(k + 1);
        v.check(b <= a + SIGMAS * sa.hypot(sb), || {
            format!("ratio rises from {a} (n = {}) to {b} (n = {}) beyond 3·{}", recs[k].n, recs[k + 1].n, sa.hypot(sb))
        });
    }

    // z = w + 1/w with |w| > 1 conjugates z² - 2 to w², so g(3) = log((3+√5)/2).
    let exact = ((3.0 + 5f64.sqrt()) / 2.0).ln();
    let ge = green_escape(&g, SpherePoint::real(3.0), &EscapeParams::default()).unwrap().value;
    v.check((ge - exact).abs() <= 1e-9, || format!("green_escape(z²-2, 3) = {ge}, exact {exact}"));
    v.check((ge - 0.962424).abs() <= 5e-7, || format!("green_escape(z²-2, 3) = {ge}"));
    v.finish();
}

#[test]
fn criterion_10_parameter_space() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut v = Verdict::new(10, "unicritical parameter divisors and the bifurcation measure", None);
    let s = stream(10);
    let quick = EquidistParams {
        mu: MuParams {
            samples: 100_000,
            ..MuParams::default()
        },
        proximity_samples: 100_000,
        ..EquidistParams::default()
    };
    let phi = chordal_to_infinity();
    for n in 1..=7 {
        let r = parameter_derivative_error(2, Complex64::new(0.5, 0.0), n, &phi, &quick, &[1.2], &s.child(n as u64))
            .unwrap();
        let want = 2f64.powi(n as i32) - 1.0;
        v.check(r.rate.mass == want, || format!("n = {n}: mass {}", r.rate.mass));
    }
    let esc = EscapeParams::default();
    let g = mandelbrot_green(2, Complex64::new(2.0, 0.0), &esc).unwrap().value;
    v.check((g - 0.90956).abs() <= 1e-4, || format!("mandelbrot_green(2, 2) = {g}"));
    let one = mandelbrot_mu_pairing(2, &TestFunction::constant(1.0), SAMPLES, &esc, &s.child(100)).unwrap();
    v.check(within(one.value, 1.0, one.stderr), || format!("⟨1, μ⟩ = {} ± {}", one.value, one.stderr));
    let odd = mandelbrot_mu_pairing(2, &TestFunction::conjugation_odd(), SAMPLES, &esc, &s.child(101)).unwrap();
    v.check(within(odd.value, 0.0, odd.stderr), || format!("⟨odd, μ⟩ = {} ± {}", odd.value, odd.stderr));
    v.finish();
}

#[test]
fn criterion_11_estimators_agree() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut v = Verdict::new(11, "inverse iteration and potential estimators of μ_f agree", None);
    let s = stream(11);
    for (k, (name, f)) in quadratics().into_iter().enumerate() {
        for (j, phi) in builtin_test_functions().into_iter().enumerate() {
            let sub = s.child((10 * k + j) as u64);
            let a = mu_pairing(&f, &phi, MuMethod::InverseIteration, &MuParams::default(), &sub.child(0)).unwrap();
            let b = mu_pairing(&f, &phi, MuMethod::Potential, &MuParams::default(), &sub.child(1)).unwrap();
            let sigma = a.stderr.hypot(b.stderr);
            v.check(within(a.value, b.value, sigma), || {
                format!("{name}, {}: {} vs {} (combined stderr {sigma})", phi.label, a.value, b.value)
            });
        }
    }
    v.finish();
}
