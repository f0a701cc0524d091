//! Green functions of planar domains, angular measures and the
//! circle-average bound for Green functions of domains avoiding the origin.

mod grid;
mod myrberg;
pub mod quad;
mod solver;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

pub use grid::GridMask;
pub use myrberg::{myrberg_check, MyrbergOptions, MyrbergReport};
pub use solver::{GridGreen, Pole, SorOptions};

/// Slack allowed on top of the bound in [`selberg_check`].
pub const SELBERG_SLACK: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PlanarDomain {
    Disk {
        center: Complex64,
        radius: f64,
    },
    Annulus {
        center: Complex64,
        r_in: f64,
        r_out: f64,
    },
    Gridmask(#[serde(with = "mask_bits")] GridMask),
}

impl PlanarDomain {
    pub fn disk(center: Complex64, radius: f64) -> Result<Self> {
        let d = PlanarDomain::Disk { center, radius };
        d.validate()?;
        Ok(d)
    }

    pub fn annulus(center: Complex64, r_in: f64, r_out: f64) -> Result<Self> {
        let d = PlanarDomain::Annulus { center, r_in, r_out };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            PlanarDomain::Disk { center, radius } => center.is_finite() && radius.is_finite() && *radius > 0.0,
            PlanarDomain::Annulus { center, r_in, r_out } => {
                center.is_finite() && r_out.is_finite() && *r_in > 0.0 && r_out > r_in
            }
            PlanarDomain::Gridmask(m) => return m.validate(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("bad domain {self:?}")))
        }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        match self {
            PlanarDomain::Disk { center, radius } => (z - center).norm() < *radius,
            PlanarDomain::Annulus { center, r_in, r_out } => {
                let r = (z - center).norm();
                *r_in < r && r < *r_out
            }
            PlanarDomain::Gridmask(m) => m.contains(z),
        }
    }

    /// `inf |z|` over the domain.
    pub fn inf_modulus(&self) -> f64 {
        match self {
            PlanarDomain::Disk { center, radius } => (center.norm() - radius).max(0.0),
            PlanarDomain::Annulus { center, r_in, r_out } => {
                let c = center.norm();
                if c <= *r_in {
                    r_in - c
                } else {
                    (c - r_out).max(0.0)
                }
            }
            PlanarDomain::Gridmask(m) => m.inf_modulus(),
        }
    }

    /// Angular resolution at which membership along a circle of radius
    /// `r` is sampled before refining transitions.
    fn angular_samples(&self, r: f64) -> usize {
        match self {
            PlanarDomain::Gridmask(m) => {
                let (hx, hy) = m.cell_size();
                ((8.0 * TAU * r / hx.min(hy)).ceil() as usize).max(4096)
            }
            _ => 4096,
        }
    }
}

/// Serializes the mask bits as alternating run lengths starting with an
/// outside run.
mod mask_bits {
    use super::GridMask;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Encoded {
        bbox: [f64; 4],
        width: usize,
        height: usize,
        runs: Vec<usize>,
    }

    pub fn serialize<S: Serializer>(m: &GridMask, s: S) -> Result<S::Ok, S::Error> {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0;
        for &b in &m.inside {
            if b == current {
                len += 1;
            } else {
                runs.push(len);
                current = b;
                len = 1;
            }
        }
        runs.push(len);
        Encoded {
            bbox: m.bbox,
            width: m.width,
            height: m.height,
            runs,
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<GridMask, D::Error> {
        let e = Encoded::deserialize(d)?;
        let mut inside = Vec::with_capacity(e.width * e.height);
        for (k, &len) in e.runs.iter().enumerate() {
            inside.extend(std::iter::repeat_n(k % 2 == 1, len));
        }
        GridMask::new(e.bbox, e.width, e.height, inside).map_err(serde::de::Error::custom)
    }
}

/// `±∞` as the strings `"inf"` and `"-inf"`, which JSON lacks.
mod extended_float {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        match *v {
            f64::INFINITY => s.serialize_str("inf"),
            f64::NEG_INFINITY => s.serialize_str("-inf"),
            x => s.serialize_f64(x),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Text(t) => Err(de::Error::custom(format!("bad number {t:?}"))),
        }
    }
}

/// Green function of a domain with a fixed pole, ready for repeated
/// evaluation.
#[derive(Clone, Debug)]
pub enum DomainGreen {
    Disk { center: Complex64, radius: f64, pole: Complex64 },
    Annulus(AnnulusGreen),
    Grid(GridGreen),
}

impl DomainGreen {
    pub fn new(domain: &PlanarDomain, y: Complex64, sor: &SorOptions) -> Result<Self> {
        domain.validate()?;
        if !domain.contains(y) {
            return Err(Error::PoleOutsideDomain(format!("{y}")));
        }
        Ok(match domain {
            PlanarDomain::Disk { center, radius } => DomainGreen::Disk {
                center: *center,
                radius: *radius,
                pole: y,
            },
            PlanarDomain::Annulus { center, r_in, r_out } => DomainGreen::Annulus(AnnulusGreen {
                center: *center,
                r_in: *r_in,
                r_out: *r_out,
                pole: y,
            }),
            PlanarDomain::Gridmask(m) => DomainGreen::Grid(GridGreen::solve(m, &[Pole { point: y, weight: 1.0 }], sor)?),
        })
    }

    /// `G_V(z, y)`: positive in the domain, zero outside, `+∞` at the pole.
    pub fn eval(&self, z: Complex64) -> f64 {
        match self {
            DomainGreen::Disk { center, radius, pole } => {
                let (w, p) = (z - center, pole - center);
                if w.norm() >= *radius {
                    return 0.0;
                }
                let num = (radius * radius - w * p.conj()).norm();
                let den = radius * (w - p).norm();
                if den == 0.0 {
                    return f64::INFINITY;
                }
                (num / den).ln().max(0.0)
            }
            DomainGreen::Annulus(a) => a.eval(z),
            DomainGreen::Grid(g) => g.eval(z),
        }
    }
}

/// Green function of `r_in < |z − c| < r_out` from the Fourier series of
/// the Dirichlet problem for the harmonic part.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnnulusGreen {
    pub center: Complex64,
    pub r_in: f64,
    pub r_out: f64,
    pub pole: Complex64,
}

const SERIES_TERMS: usize = 1_000_000;

impl AnnulusGreen {
    pub fn eval(&self, z: Complex64) -> f64 {
        let (w, p) = (z - self.center, self.pole - self.center);
        let (rho, big_r) = (self.r_in, self.r_out);
        let r = w.norm();
        if r <= rho || r >= big_r {
            return 0.0;
        }
        if w == p {
            return f64::INFINITY;
        }
        let (ln_in, ln_out) = (rho.ln(), big_r.ln());
        let span = ln_out - ln_in;
        // Radial mode matches ln R outside and ln|p| inside.
        let b = (ln_out - p.norm().ln()) / span;
        let mut h = ln_out + b * (r.ln() - ln_out);
        let dir = w / r;
        let a_step = p.conj() * dir / big_r;
        let b_step = dir * rho / p;
        let (x_in, x_out) = (r.ln() - ln_in, ln_out - r.ln());
        let (mut ak, mut bk) = (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
        for k in 1..=SERIES_TERMS {
            ak *= a_step;
            bk *= b_step;
            let kf = k as f64;
            let out = sinh_ratio(kf, x_in, span);
            let inn = sinh_ratio(kf, x_out, span);
            // Both factors of each part decrease with k.
            if (ak.norm() * out + bk.norm() * inn) / kf < 1e-18 {
                break;
            }
            h -= (ak.re * out + bk.re * inn) / kf;
        }
        (h - (w - p).norm().ln()).max(0.0)
    }
}

/// `sinh(k x) / sinh(k l)` for `0 ≤ x ≤ l`.
fn sinh_ratio(k: f64, x: f64, l: f64) -> f64 {
    (k * (x - l)).exp() * (-(-2.0 * k * x).exp_m1()) / (-(-2.0 * k * l).exp_m1())
}

pub fn green_domain(domain: &PlanarDomain, z: Complex64, y: Complex64) -> Result<f64> {
    Ok(DomainGreen::new(domain, y, &SorOptions::default())?.eval(z))
}

/// Maximal arcs `[θ0, θ1]` (`θ0 < θ1`, within `[0, 2π]` unless the arc
/// wraps through angle 0) of the circle `|z| = r` inside the domain.
pub fn inside_arcs(domain: &PlanarDomain, r: f64) -> Vec<(f64, f64)> {
    let n = domain.angular_samples(r);
    let at = |t: f64| domain.contains(Complex64::from_polar(r, t));
    let step = TAU / n as f64;
    let inside: Vec<bool> = (0..n).map(|k| at(k as f64 * step)).collect();
    if inside.iter().all(|&b| b) {
        return vec![(0.0, TAU)];
    }
    // Refine each sign change to the angle where membership flips.
    let flip = |lo: f64, hi: f64, lo_inside: bool| {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if at(m) == lo_inside {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    };
    let first_out = inside.iter().position(|&b| !b).expect("some sample is outside");
    let mut arcs = Vec::new();
    let mut open: Option<f64> = None;
    for s in 0..n {
        let k = (first_out + s) % n;
        let next = (k + 1) % n;
        let lo = k as f64 * step;
        let hi = lo + step;
        if inside[k] != inside[next] {
            let t = flip(lo, hi, inside[k]);
            // Angles past 2π keep arcs that wrap contiguous.
            let t = if k < first_out { t + TAU } else { t };
            if inside[next] {
                open = Some(t);
            } else if let Some(start) = open.take() {
                arcs.push((start, t));
            }
        }
    }
    arcs
}

/// `θ_V(r)`: the total angle of `|z| = r` inside the domain.
pub fn angular_measure(domain: &PlanarDomain, r: f64) -> f64 {
    inside_arcs(domain, r).iter().fold(0.0, |acc, (a, b)| acc + (b - a)).min(TAU)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelbergResult {
    pub lhs: f64,
    /// `+∞` once the circle lies inside the domain.
    #[serde(with = "extended_float")]
    pub rhs_tan: f64,
    pub rhs_log: f64,
    pub theta: f64,
    pub pass: bool,
}

impl SelbergResult {
    pub fn bound(&self) -> f64 {
        self.rhs_tan.min(self.rhs_log)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelbergOptions {
    pub sor: SorOptions,
    /// Absolute tolerance of the circle quadrature.
    pub quad_tolerance: f64,
}

impl Default for SelbergOptions {
    fn default() -> Self {
        SelbergOptions {
            sor: SorOptions::default(),
            quad_tolerance: 1e-10,
        }
    }
}

pub fn selberg_check(domain: &PlanarDomain, y: Complex64, r: f64) -> Result<SelbergResult> {
    selberg_check_with(domain, y, r, &SelbergOptions::default())
}

/// Compares the circle average `(1/2π) ∫ G_V(r e^{iθ}, y) dθ` with
/// `min{(π/2) tan(θ_V(r)/4), log max(1, r / inf|z|)}`.
pub fn selberg_check_with(domain: &PlanarDomain, y: Complex64, r: f64, opts: &SelbergOptions) -> Result<SelbergResult> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Invalid(format!("radius must be positive, got {r}")));
    }
    let inf = domain.inf_modulus();
    if !(inf > 0.0) {
        return Err(Error::DomainTouchesOrigin(inf));
    }
    let green = DomainGreen::new(domain, y, &opts.sor)?;
    let arcs = inside_arcs(domain, r);
    let theta = arcs.iter().fold(0.0, |acc, (a, b)| acc + (b - a)).min(TAU);
    let on_circle = (y.norm() - r).abs() <= 1e-12 * r;
    let mut integral = 0.0;
    for &(a, b) in &arcs {
        // Put a pole on the circle at a subinterval endpoint.
        let mut cuts = vec![a, b];
        if on_circle {
            let t0 = y.arg().rem_euclid(TAU);
            for t in [t0, t0 + TAU] {
                if a < t && t < b {
                    cuts.insert(1, t);
                }
            }
        }
        for w in cuts.windows(2) {
            integral += quad::integrate(|t| green.eval(Complex64::from_polar(r, t)), w[0], w[1], opts.quad_tolerance);
        }
    }
    let lhs = integral / TAU;
    let rhs_tan = if theta >= TAU - 1e-12 {
        f64::INFINITY
    } else {
        PI / 2.0 * (theta / 4.0).tan()
    };
    let rhs_log = (r / inf).max(1.0).ln();
    Ok(SelbergResult {
        lhs,
        rhs_tan,
        rhs_log,
        theta,
        pass: lhs <= rhs_tan.min(rhs_log) + SELBERG_SLACK,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelbergCase {
    pub label: String,
    pub domain: PlanarDomain,
    pub y: Complex64,
    pub r: f64,
}

/// Fixed set of domains, poles and radii covering both terms of the bound.
pub fn selberg_corpus() -> Vec<SelbergCase> {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let disk = |x: Complex64, rad: f64| PlanarDomain::Disk { center: x, radius: rad };
    let ann = |x: Complex64, a: f64, b: f64| PlanarDomain::Annulus {
        center: x,
        r_in: a,
        r_out: b,
    };
    let grid = |bbox: [f64; 4], f: &dyn Fn(Complex64) -> bool| {
        PlanarDomain::Gridmask(GridMask::rasterize(bbox, 160, 160, f).expect("corpus masks are valid"))
    };
    let mut cases = vec![
        ("disk B(3,1) through the pole", disk(c(3.0, 0.0), 1.0), c(3.0, 0.0), 3.0),
        ("disk B(3,1) missing circle", disk(c(3.0, 0.0), 1.0), c(3.0, 0.0), 1.0),
        ("disk B(3,1) near edge", disk(c(3.0, 0.0), 1.0), c(3.0, 0.0), 2.2),
        ("disk B(3,1) far edge", disk(c(3.0, 0.0), 1.0), c(3.0, 0.0), 3.9),
        ("disk B(3,1) off-center pole", disk(c(3.0, 0.0), 1.0), c(2.5, 0.4), 3.0),
        ("disk B(2i,1.5)", disk(c(0.0, 2.0), 1.5), c(0.0, 1.0), 1.0),
        ("disk B(2i,1.5) wide", disk(c(0.0, 2.0), 1.5), c(0.0, 2.0), 2.5),
        ("small disk far out", disk(c(-5.0, 5.0), 0.5), c(-5.0, 5.0), 50f64.sqrt()),
        ("disk B(1.2,1) thin gap", disk(c(1.2, 0.0), 1.0), c(1.2, 0.0), 1.0),
        ("disk B(1.2,1) small radius", disk(c(1.2, 0.0), 1.0), c(1.0, 0.5), 0.5),
        ("annulus around origin", ann(c(0.0, 0.0), 1.0, 2.0), c(1.5, 0.0), 1.5),
        ("annulus around origin inner", ann(c(0.0, 0.0), 1.0, 2.0), c(0.0, 1.2), 1.1),
        ("annulus off origin", ann(c(4.0, 0.0), 0.5, 2.0), c(5.0, 0.0), 4.0),
        ("annulus off origin wide", ann(c(4.0, 0.0), 0.5, 2.0), c(2.5, 0.5), 2.5),
        ("thin annulus", ann(c(0.0, 0.0), 3.0, 3.2), c(0.0, -3.1), 3.1),
        ("shifted annulus with hole at origin", ann(c(0.3, 0.2), 1.0, 3.0), c(-2.0, 0.5), 1.5),
    ]
    .into_iter()
    .map(|(l, d, y, r)| SelbergCase {
        label: l.to_string(),
        domain: d,
        y,
        r,
    })
    .collect::<Vec<_>>();
    let grids: Vec<(&str, PlanarDomain, Complex64, f64)> = vec![
        (
            "gridmask annulus",
            grid([-2.2, 2.2, -2.2, 2.2], &|z| (1.0..2.0).contains(&z.norm())),
            c(1.5, 0.0),
            1.5,
        ),
        (
            "gridmask square",
            grid([1.0, 3.0, -1.0, 1.0], &|z| (z.re - 2.0).abs() < 0.8 && z.im.abs() < 0.8),
            c(2.0, 0.0),
            2.0,
        ),
        (
            "gridmask ellipse",
            grid([-1.0, 1.0, 1.0, 3.0], &|z| (z.re / 0.9).powi(2) + ((z.im - 2.0) / 0.5).powi(2) < 1.0),
            c(0.3, 2.1),
            2.0,
        ),
        (
            "gridmask L-shape",
            grid([0.5, 3.5, 0.5, 3.5], &|z| {
                let inside = |a: f64, b: f64, x0: f64, x1: f64, y0: f64, y1: f64| x0 < a && a < x1 && y0 < b && b < y1;
                inside(z.re, z.im, 1.0, 3.0, 1.0, 1.8) || inside(z.re, z.im, 1.0, 1.8, 1.0, 3.0)
            }),
            c(1.4, 1.4),
            2.0,
        ),
        (
            "gridmask disk edge circle",
            grid([1.9, 4.1, -1.1, 1.1], &|z| (z - 3.0).norm() < 1.0),
            c(3.0, 0.0),
            2.3,
        ),
    ];
    cases.extend(grids.into_iter().map(|(l, d, y, r)| SelbergCase {
        label: l.to_string(),
        domain: d,
        y,
        r,
    }));
    cases
}
