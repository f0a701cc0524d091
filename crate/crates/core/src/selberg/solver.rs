use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::GridMask;
use crate::error::{Error, Result};

/// A logarithmic pole `weight · log(1/|z − point|)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pole {
    pub point: Complex64,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SorOptions {
    /// Stop once the largest correction of a sweep is below this.
    pub tolerance: f64,
    /// Relaxation factor; `None` picks the optimum for a square of the
    /// domain's extent.
    pub omega: Option<f64>,
    /// `None` allows `50 N + 1000` sweeps for an extent of `N` cells.
    pub max_sweeps: Option<usize>,
}

impl Default for SorOptions {
    fn default() -> Self {
        SorOptions {
            tolerance: 1e-8,
            omega: None,
            max_sweeps: None,
        }
    }
}

const BOUNDARY: u32 = u32::MAX;
/// Smallest boundary arm as a fraction of the cell size.
const MIN_ARM: f64 = 1e-3;

/// Green function of a [`GridMask`] domain with one or several weighted
/// poles, from the 5-point Laplacian with Shortley–Weller arms at the
/// boundary.
#[derive(Clone, Debug)]
pub struct GridGreen {
    mask: GridMask,
    poles: Vec<Pole>,
    /// Harmonic part `Σ w log|z − p| + G` at every cell center; cells that
    /// touch the domain hold linearly extrapolated ghost values.
    harmonic: Vec<f64>,
    pub sweeps: usize,
    pub residual: f64,
    pub omega: f64,
}

fn pole_log(poles: &[Pole], z: Complex64) -> f64 {
    poles.iter().map(|p| p.weight * (z - p.point).norm().ln()).sum()
}

impl GridGreen {
    /// Boundary crossings are placed halfway between an inside and an
    /// outside cell center.
    pub fn solve(mask: &GridMask, poles: &[Pole], opts: &SorOptions) -> Result<Self> {
        Self::solve_with_crossing(mask, poles, opts, |_, _| 0.5)
    }

    /// `crossing(inside, outside)` returns where the boundary cuts the
    /// segment between two adjacent cell centers, as a fraction of the
    /// segment measured from the inside center.
    pub fn solve_with_crossing<C>(mask: &GridMask, poles: &[Pole], opts: &SorOptions, crossing: C) -> Result<Self>
    where
        C: Fn(Complex64, Complex64) -> f64,
    {
        if poles.is_empty() {
            return Err(Error::Invalid("at least one pole is required".into()));
        }
        if let Some(p) = poles.iter().find(|p| !mask.contains(p.point)) {
            return Err(Error::PoleOutsideDomain(format!("{}", p.point)));
        }
        let (w, h) = (mask.width, mask.height);
        let (hx, hy) = mask.cell_size();
        let mut index = vec![BOUNDARY; w * h];
        let mut cells = Vec::new();
        for k in 0..w * h {
            if mask.inside[k] {
                index[k] = cells.len() as u32;
                cells.push(k);
            }
        }
        let n = cells.len();
        let mut nbr = vec![[BOUNDARY; 4]; n];
        let mut coef = vec![[0.0f64; 4]; n];
        let mut rhs = vec![0.0; n];
        // Fraction of the way to each outside neighbor, for the ghost pass.
        let mut arms = vec![[1.0f64; 4]; n];
        for (c, &k) in cells.iter().enumerate() {
            let (i, j) = (k % w, k / w);
            let here = mask.center(i, j);
            // E, W, N, S; the frame is always outside so neighbors exist.
            let targets = [(i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)];
            let mut len = [0.0; 4];
            let mut bvals = [0.0; 4];
            for (dir, &(ti, tj)) in targets.iter().enumerate() {
                let t = tj * w + ti;
                let step = if dir < 2 { hx } else { hy };
                if mask.inside[t] {
                    nbr[c][dir] = index[t];
                    len[dir] = step;
                } else {
                    let there = mask.center(ti, tj);
                    let theta = crossing(here, there).clamp(MIN_ARM, 1.0);
                    arms[c][dir] = theta;
                    len[dir] = theta * step;
                    bvals[dir] = pole_log(poles, here + (there - here) * theta);
                }
            }
            let mut cs = [
                2.0 / (len[0] * (len[0] + len[1])),
                2.0 / (len[1] * (len[0] + len[1])),
                2.0 / (len[2] * (len[2] + len[3])),
                2.0 / (len[3] * (len[2] + len[3])),
            ];
            let diag: f64 = cs.iter().sum();
            for (dir, cv) in cs.iter_mut().enumerate() {
                *cv /= diag;
                if nbr[c][dir] == BOUNDARY {
                    rhs[c] += *cv * bvals[dir];
                    *cv = 0.0;
                }
            }
            coef[c] = cs;
        }

        let extent = {
            let (mut i0, mut i1, mut j0, mut j1) = (w, 0, h, 0);
            for &k in &cells {
                let (i, j) = (k % w, k / w);
                i0 = i0.min(i);
                i1 = i1.max(i);
                j0 = j0.min(j);
                j1 = j1.max(j);
            }
            (i1 - i0).max(j1 - j0) + 2
        };
        let omega = opts
            .omega
            .unwrap_or_else(|| 2.0 / (1.0 + (std::f64::consts::PI / extent as f64).sin()));
        let max_sweeps = opts.max_sweeps.unwrap_or(50 * extent + 1000);

        let (red, black): (Vec<usize>, Vec<usize>) = (0..n).partition(|&c| {
            let k = cells[c];
            (k % w + k / w) % 2 == 0
        });
        let start = rhs.iter().sum::<f64>() / rhs.iter().filter(|&&v| v != 0.0).count().max(1) as f64;
        let mut u = vec![start; n];
        let mut sweeps = 0;
        let mut residual = f64::INFINITY;
        while sweeps < max_sweeps {
            let mut worst = 0.0f64;
            for colour in [&red, &black] {
                for &c in colour.iter() {
                    let mut acc = rhs[c];
                    for dir in 0..4 {
                        let m = nbr[c][dir];
                        if m != BOUNDARY {
                            acc += coef[c][dir] * u[m as usize];
                        }
                    }
                    let delta = acc - u[c];
                    worst = worst.max(delta.abs());
                    u[c] += omega * delta;
                }
            }
            sweeps += 1;
            residual = worst;
            if !residual.is_finite() {
                break;
            }
            if residual < opts.tolerance {
                break;
            }
        }
        if !(residual < opts.tolerance) {
            return Err(Error::SolverDivergence {
                residual,
                iterations: sweeps,
            });
        }

        let mut harmonic: Vec<f64> = (0..w * h).map(|k| pole_log(poles, mask.center(k % w, k / w))).collect();
        let mut ghost_sum = vec![0.0; w * h];
        let mut ghost_count = vec![0u32; w * h];
        for (c, &k) in cells.iter().enumerate() {
            harmonic[k] = u[c];
            let (i, j) = (k % w, k / w);
            let green_here = u[c] - pole_log(poles, mask.center(i, j));
            let targets = [(i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1)];
            for (dir, &(ti, tj)) in targets.iter().enumerate() {
                if nbr[c][dir] == BOUNDARY {
                    let theta = arms[c][dir];
                    let t = tj * w + ti;
                    ghost_sum[t] += green_here * (1.0 - 1.0 / theta);
                    ghost_count[t] += 1;
                }
            }
        }
        for k in 0..w * h {
            if ghost_count[k] > 0 {
                harmonic[k] += ghost_sum[k] / ghost_count[k] as f64;
            }
        }
        Ok(GridGreen {
            mask: mask.clone(),
            poles: poles.to_vec(),
            harmonic,
            sweeps,
            residual,
            omega,
        })
    }

    pub fn mask(&self) -> &GridMask {
        &self.mask
    }

    pub fn poles(&self) -> &[Pole] {
        &self.poles
    }

    /// `Σ w_p G(z, p)`; zero off the mask and `+∞` at a pole.
    pub fn eval(&self, z: Complex64) -> f64 {
        if !self.mask.contains(z) {
            return 0.0;
        }
        let g = self.harmonic_at(z) - pole_log(&self.poles, z);
        if g.is_nan() {
            f64::INFINITY
        } else {
            g.max(0.0)
        }
    }

    /// Bilinear interpolation of the harmonic part between cell centers.
    fn harmonic_at(&self, z: Complex64) -> f64 {
        let m = &self.mask;
        let (hx, hy) = m.cell_size();
        let u = ((z.re - m.bbox[0]) / hx - 0.5).clamp(0.0, (m.width - 1) as f64);
        let v = ((z.im - m.bbox[2]) / hy - 0.5).clamp(0.0, (m.height - 1) as f64);
        let i = (u as usize).min(m.width - 2);
        let j = (v as usize).min(m.height - 2);
        let (s, t) = (u - i as f64, v - j as f64);
        let at = |i: usize, j: usize| self.harmonic[j * m.width + i];
        (1.0 - s) * (1.0 - t) * at(i, j) + s * (1.0 - t) * at(i + 1, j) + (1.0 - s) * t * at(i, j + 1) + s * t * at(i + 1, j + 1)
    }
}
