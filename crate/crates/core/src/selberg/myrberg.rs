use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::{cell_center, flood_fill, GridMask};
use super::solver::{GridGreen, Pole, SorOptions};
use crate::error::{Error, Result};
use crate::ratmap::{critical_points, preimage_measure, RationalMap};
use crate::sphere::SpherePoint;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MyrbergOptions {
    /// Picks the component containing the preimage of `a` closest to this
    /// point; `None` takes the first finite preimage.
    pub center: Option<Complex64>,
    /// Cells along the longer side of the component's box.
    pub resolution: usize,
    pub sor: SorOptions,
    pub budget: usize,
}

impl Default for MyrbergOptions {
    fn default() -> Self {
        MyrbergOptions {
            center: None,
            resolution: 512,
            sor: SorOptions::default(),
            budget: crate::DEFAULT_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MyrbergReport {
    /// `max |log(s / |fⁿ(z) − a|) − Σ deg_b G(z, b)|` over the probes.
    pub discrepancy: f64,
    /// Radius actually used after moving off critical values.
    pub s: f64,
    /// Preimages of `a` in the component with their local degrees.
    pub preimages: Vec<(Complex64, u64)>,
    pub total_degree: u64,
    pub bbox: [f64; 4],
    pub cells: usize,
    pub probes: usize,
    pub sweeps: usize,
}

const COARSE: usize = 96;
const MAX_DOUBLINGS: usize = 40;
/// Relative distance from `s` at which a critical value counts as being on
/// the circle.
const CRITICAL_GAP: f64 = 1e-6;

fn iterate(f: &RationalMap, mut z: Complex64, n: usize) -> Complex64 {
    for _ in 0..n {
        z = f.eval_complex(z);
    }
    z
}

/// Checks `log(s/|fⁿ − a|) = Σ_b deg_b(fⁿ) G_U(·, b)` on one component `U`
/// of `{|fⁿ − a| < s}`, with the Green functions from the grid solver.
pub fn myrberg_check(
    f: &RationalMap,
    a: Complex64,
    s: f64,
    n: usize,
    probes: usize,
    opts: &MyrbergOptions,
) -> Result<MyrbergReport> {
    if n == 0 || probes == 0 || !(s > 0.0) || opts.resolution < 16 {
        return Err(Error::Invalid(format!(
            "need n ≥ 1, probes ≥ 1, s > 0 and resolution ≥ 16 (n = {n}, probes = {probes}, s = {s})"
        )));
    }
    let s = off_critical_values(f, a, s, n)?;
    let fa = |z: Complex64| (iterate(f, z, n) - a).norm();
    let member = |z: Complex64| fa(z) < s;

    let pre = preimage_measure(f, SpherePoint::from_complex(a), n, opts.budget)?;
    let total = (f.degree() as f64).powi(n as i32);
    let finite: Vec<(Complex64, u64)> = pre
        .atoms
        .iter()
        .filter_map(|at| at.point.to_complex().map(|z| (z, (at.weight * total).round() as u64)))
        .collect();
    let seed = match opts.center {
        Some(c) => finite.iter().min_by(|x, y| (x.0 - c).norm().total_cmp(&(y.0 - c).norm())),
        None => finite.first(),
    }
    .ok_or_else(|| Error::Component("no finite preimage of the target".into()))?
    .0;

    let bbox = component_box(&member, seed, opts.resolution)?;
    let (w, h) = box_shape(&bbox, opts.resolution);
    let cells: Vec<bool> = (0..w * h).map(|k| member(cell_center(&bbox, w, h, k % w, k / w))).collect();
    let start = cell_index(&bbox, w, h, seed);
    let component = flood_fill(w, h, |k| cells[k], start);
    let mask = GridMask::new(bbox, w, h, component)?;

    let inside: Vec<(Complex64, u64)> = finite.iter().copied().filter(|(z, _)| mask.contains(*z)).collect();
    if inside.is_empty() {
        return Err(Error::Component("no preimage of the target inside the component".into()));
    }
    let total_degree = inside.iter().map(|p| p.1).sum();
    let poles: Vec<Pole> = inside
        .iter()
        .map(|&(point, deg)| Pole {
            point,
            weight: deg as f64,
        })
        .collect();
    // Shortley–Weller arms end on the true level curve.
    let crossing = |zi: Complex64, zo: Complex64| {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..40 {
            let m = 0.5 * (lo + hi);
            if member(zi + (zo - zi) * m) {
                lo = m;
            } else {
                hi = m;
            }
        }
        0.5 * (lo + hi)
    };
    let green = GridGreen::solve_with_crossing(&mask, &poles, &opts.sor, crossing)?;

    let members: Vec<usize> = (0..w * h).filter(|&k| mask.inside[k]).collect();
    let count = probes.min(members.len());
    let discrepancy = (0..count)
        .map(|p| {
            let k = members[p * members.len() / count];
            let z = mask.center(k % w, k / w);
            let lhs = (s / fa(z)).ln();
            let rhs = green.eval(z);
            if lhs.is_infinite() && rhs.is_infinite() {
                0.0
            } else {
                (lhs - rhs).abs()
            }
        })
        .fold(0.0, f64::max);

    Ok(MyrbergReport {
        discrepancy,
        s,
        preimages: inside,
        total_degree,
        bbox,
        cells: members.len(),
        probes: count,
        sweeps: green.sweeps,
    })
}

/// Grows `s` slightly until no critical value of `fⁿ` lies on the circle
/// `|w − a| = s`.
fn off_critical_values(f: &RationalMap, a: Complex64, mut s: f64, n: usize) -> Result<f64> {
    let crit = critical_points(f)?;
    let values: Vec<Complex64> = crit
        .atoms
        .iter()
        .filter_map(|at| at.point.to_complex())
        .flat_map(|c| {
            let mut z = c;
            (0..n).map(move |_| {
                z = f.eval_complex(z);
                z
            })
        })
        .collect();
    for _ in 0..20 {
        if values.iter().all(|v| ((v - a).norm() - s).abs() > CRITICAL_GAP * s) {
            return Ok(s);
        }
        s *= 1.0 + 1e-3;
    }
    Err(Error::Component("could not move the radius off the critical values".into()))
}

fn box_shape(bbox: &[f64; 4], resolution: usize) -> (usize, usize) {
    let (dx, dy) = (bbox[1] - bbox[0], bbox[3] - bbox[2]);
    let side = dx.max(dy) / resolution as f64;
    (((dx / side).round() as usize).max(3), ((dy / side).round() as usize).max(3))
}

fn cell_index(bbox: &[f64; 4], w: usize, h: usize, z: Complex64) -> usize {
    let i = (((z.re - bbox[0]) / (bbox[1] - bbox[0]) * w as f64) as usize).min(w - 1);
    let j = (((z.im - bbox[2]) / (bbox[3] - bbox[2]) * h as f64) as usize).min(h - 1);
    j * w + i
}

/// A box around the component through `seed`, found by flood fills on a
/// coarse grid over growing squares, padded by a few final cells.
fn component_box<F: Fn(Complex64) -> bool>(member: &F, seed: Complex64, resolution: usize) -> Result<[f64; 4]> {
    let mut half = 1e-3 * (1.0 + seed.norm());
    for _ in 0..MAX_DOUBLINGS {
        let bbox = [seed.re - half, seed.re + half, seed.im - half, seed.im + half];
        let cells: Vec<bool> = (0..COARSE * COARSE)
            .map(|k| member(cell_center(&bbox, COARSE, COARSE, k % COARSE, k / COARSE)))
            .collect();
        let start = cell_index(&bbox, COARSE, COARSE, seed);
        let filled = flood_fill(COARSE, COARSE, |k| cells[k], start);
        let touches = (0..COARSE).any(|t| {
            filled[t] || filled[(COARSE - 1) * COARSE + t] || filled[t * COARSE] || filled[t * COARSE + COARSE - 1]
        });
        let count = filled.iter().filter(|&&b| b).count();
        if touches || count < 16 {
            if touches {
                half *= 2.0;
            } else {
                half /= 3.0;
            }
            continue;
        }
        let (mut i0, mut i1, mut j0, mut j1) = (COARSE, 0, COARSE, 0);
        for k in (0..COARSE * COARSE).filter(|&k| filled[k]) {
            let (i, j) = (k % COARSE, k / COARSE);
            i0 = i0.min(i);
            i1 = i1.max(i);
            j0 = j0.min(j);
            j1 = j1.max(j);
        }
        // One coarse cell of slack on each side covers what the coarse
        // grid missed.
        let cell = 2.0 * half / COARSE as f64;
        let lo_x = bbox[0] + (i0 as f64 - 1.0) * cell;
        let hi_x = bbox[0] + (i1 as f64 + 2.0) * cell;
        let lo_y = bbox[2] + (j0 as f64 - 1.0) * cell;
        let hi_y = bbox[2] + (j1 as f64 + 2.0) * cell;
        let pad = 4.0 * (hi_x - lo_x).max(hi_y - lo_y) / resolution as f64;
        return Ok([lo_x - pad, hi_x + pad, lo_y - pad, hi_y + pad]);
    }
    Err(Error::Component(format!("component through {seed} does not fit a bounded box")))
}
