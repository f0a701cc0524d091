//! Orbit-separation statistic for periodic points: how many period-`n`
//! points can stay `η^{-n}`-close along their first `n` iterates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratmap::{periodic_divisor, RationalMap};
use crate::sphere::{chordal_distance, SpherePoint};

/// Support points closer than this are one point.
const SAME_POINT: f64 = 1e-9;
/// Largest support for which the exact clique search runs.
pub const MAX_CLIQUE_POINTS: usize = 64;

/// `max_{0 ≤ j < n} [f^j(z), f^j(w)]`.
pub fn orbit_sup_distance(f: &RationalMap, z: SpherePoint, w: SpherePoint, n: usize) -> f64 {
    let (mut a, mut b) = (z, w);
    let mut best = 0.0f64;
    for j in 0..n {
        best = best.max(chordal_distance(a, b));
        if j + 1 < n {
            a = f.eval(a);
            b = f.eval(b);
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub n: usize,
    pub eta: f64,
    /// `η^{-n}`.
    pub threshold: f64,
    /// Sizes of the connected components of the closeness graph, largest
    /// first.
    pub cluster_sizes: Vec<usize>,
    pub max_cluster: usize,
    /// `ηⁿ`.
    pub allowance: f64,
    /// Largest set of pairwise-close points, when the support is small
    /// enough to search exactly.
    pub max_clique: Option<usize>,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyphOptions {
    pub budget: usize,
    /// Run the exact clique search for supports of at most
    /// [`MAX_CLIQUE_POINTS`] points.
    pub exact_clique: bool,
}

impl Default for HyphOptions {
    fn default() -> Self {
        HyphOptions {
            budget: crate::DEFAULT_BUDGET,
            exact_clique: true,
        }
    }
}

pub fn hypothesis_h_statistic(f: &RationalMap, n: usize, eta: f64) -> Result<ClusterReport> {
    hypothesis_h_statistic_with(f, n, eta, &HyphOptions::default())
}

/// Clusters the distinct period-`n` points by orbit closeness and compares
/// the largest cluster with `ηⁿ`. Clusters are connected components, which
/// can only be larger than the largest pairwise-close set.
pub fn hypothesis_h_statistic_with(f: &RationalMap, n: usize, eta: f64, opts: &HyphOptions) -> Result<ClusterReport> {
    if !(eta > 1.0 && eta.is_finite()) {
        return Err(Error::Invalid(format!("η must exceed 1, got {eta}")));
    }
    let divisor = periodic_divisor(f, n, opts.budget)?;
    let points = distinct(divisor.support());
    let threshold = eta.powi(-(n as i32));
    let allowance = eta.powi(n as i32);
    let orbits: Vec<Vec<SpherePoint>> = points
        .par_iter()
        .map(|&z| {
            std::iter::successors(Some(z), |&w| Some(f.eval(w)))
                .take(n)
                .collect()
        })
        .collect();
    let close = |i: usize, j: usize| {
        orbits[i]
            .iter()
            .zip(&orbits[j])
            .all(|(&a, &b)| chordal_distance(a, b) < threshold)
    };
    let m = points.len();
    let edges: Vec<(usize, usize)> = (0..m)
        .into_par_iter()
        .flat_map_iter(|i| (i + 1..m).filter(move |&j| close(i, j)).map(move |j| (i, j)))
        .collect();

    let mut parent: Vec<usize> = (0..m).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(i, j) in &edges {
        let (a, b) = (root(&mut parent, i), root(&mut parent, j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut sizes = vec![0usize; m];
    for i in 0..m {
        let r = root(&mut parent, i);
        sizes[r] += 1;
    }
    let mut cluster_sizes: Vec<usize> = sizes.into_iter().filter(|&s| s > 0).collect();
    cluster_sizes.sort_unstable_by(|a, b| b.cmp(a));
    let max_cluster = cluster_sizes.first().copied().unwrap_or(0);
    let max_clique = (opts.exact_clique && m <= MAX_CLIQUE_POINTS).then(|| max_clique(m, &edges));
    Ok(ClusterReport {
        n,
        eta,
        threshold,
        cluster_sizes,
        max_cluster,
        allowance,
        max_clique,
        pass: max_cluster as f64 <= allowance,
    })
}

fn distinct(points: Vec<SpherePoint>) -> Vec<SpherePoint> {
    let mut out: Vec<SpherePoint> = Vec::with_capacity(points.len());
    for p in points {
        if out.iter().all(|&q| chordal_distance(p, q) >= SAME_POINT) {
            out.push(p);
        }
    }
    out
}

/// Bron–Kerbosch with pivoting over bitsets of at most 64 vertices.
fn max_clique(m: usize, edges: &[(usize, usize)]) -> usize {
    let mut adj = vec![0u64; m];
    for &(i, j) in edges {
        adj[i] |= 1 << j;
        adj[j] |= 1 << i;
    }
    fn expand(adj: &[u64], size: usize, p: u64, x: u64, best: &mut usize) {
        if p == 0 && x == 0 {
            *best = (*best).max(size);
            return;
        }
        if size + (p.count_ones() as usize) <= *best {
            return;
        }
        let pivot = (p | x).trailing_zeros() as usize;
        let mut candidates = p & !adj[pivot];
        let (mut p, mut x) = (p, x);
        while candidates != 0 {
            let v = candidates.trailing_zeros() as usize;
            candidates &= candidates - 1;
            expand(adj, size + 1, p & adj[v], x & adj[v], best);
            p &= !(1 << v);
            x |= 1 << v;
        }
    }
    let all = if m == 64 { u64::MAX } else { (1u64 << m) - 1 };
    let mut best = 0;
    if m > 0 {
        expand(&adj, 0, all, 0, &mut best);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orbit_distance_examples() {
        let f = RationalMap::quadratic(0.0);
        let z = SpherePoint::real(1.0);
        let w = SpherePoint::real(-1.0);
        assert_eq!(orbit_sup_distance(&f, z, z, 5), 0.0);
        assert_eq!(orbit_sup_distance(&f, z, w, 1), chordal_distance(z, w));
        // [1, −1] = 1 and [1, 1] = 0.
        assert!((orbit_sup_distance(&f, z, w, 2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn z_squared_period_four_is_separated() {
        let r = hypothesis_h_statistic(&RationalMap::quadratic(0.0), 4, 1.2).unwrap();
        assert!((r.threshold - 1.2f64.powi(-4)).abs() < 1e-15);
        assert_eq!(r.cluster_sizes, vec![1; 17]);
        assert_eq!(r.max_cluster, 1);
        assert_eq!(r.max_clique, Some(1));
        assert!(r.pass);
    }

    #[test]
    fn threshold_near_one_gives_one_cluster() {
        // Every pair of the five period-2 points of z² − 1 is chained by
        // distances below 1 − 1e-11.
        let r = hypothesis_h_statistic(&RationalMap::quadratic(-1.0), 2, 1.0 + 1e-12).unwrap();
        assert_eq!(r.cluster_sizes, vec![5]);
        assert!(!r.pass);
    }

    #[test]
    fn rejects_eta_at_most_one() {
        assert!(hypothesis_h_statistic(&RationalMap::quadratic(0.0), 2, 1.0).is_err());
    }

    #[test]
    fn clique_search_matches_brute_force() {
        // Path 0-1-2 plus triangle 3-4-5.
        let edges = [(0, 1), (1, 2), (3, 4), (4, 5), (3, 5)];
        assert_eq!(max_clique(6, &edges), 3);
        assert_eq!(max_clique(3, &[]), 1);
    }
}
