use num_complex::Complex64;
use rayon::prelude::*;

use super::measure::{Atom, AtomicMeasure, DivisorKind};
use super::orbit::OrbitPoint;
use super::RationalMap;
use crate::ddouble::{normalizing_exponent, Scalar};
use crate::error::{Error, Result};
use crate::roots::{circle_guesses, poly_roots, solve, winding_number, Eval, Ext, Implicit, Poly, Root, SolveOptions};
use crate::sphere::{chordal_distance, SpherePoint};

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// `d^n`, saturating.
fn power(d: usize, n: usize) -> u128 {
    u32::try_from(n)
        .ok()
        .and_then(|n| (d as u128).checked_pow(n))
        .unwrap_or(u128::MAX)
}

fn check_budget(d: usize, n: usize, budget: usize) -> Result<u128> {
    let needed = power(d, n);
    if needed > budget as u128 {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    Ok(needed)
}

fn with_context(e: Error, extra: String) -> Error {
    match e {
        Error::RootFinding {
            degree,
            unresolved,
            residual,
            context,
        } => Error::RootFinding {
            degree,
            unresolved,
            residual,
            context: format!("{context}{extra}"),
        },
        other => other,
    }
}

fn root_atoms(roots: &[Root]) -> Vec<Atom> {
    roots
        .iter()
        .map(|r| Atom {
            point: SpherePoint::from_complex(r.z),
            weight: r.multiplicity as f64,
        })
        .collect()
}

/// Critical points with weight `deg_c f - 1`; the deficit of the Wronskian
/// degree below `2d - 2` sits at `∞`.
pub fn critical_points(f: &RationalMap) -> Result<AtomicMeasure> {
    let d = f.degree();
    let w = f.wronskian();
    let mut atoms = if w.degree() > 0 {
        root_atoms(&poly_roots(w, &SolveOptions::default())?)
    } else {
        Vec::new()
    };
    let at_infinity = 2 * d - 2 - w.degree();
    if at_infinity > 0 {
        atoms.push(Atom {
            point: SpherePoint::Infinity,
            weight: at_infinity as f64,
        });
    }
    AtomicMeasure::new(atoms, (2 * d - 2) as f64, DivisorKind::Critical)
}

/// Solutions of `f(z) = w` with multiplicity, `d` in total.
pub fn preimages_one_step(f: &RationalMap, w: SpherePoint) -> Result<AtomicMeasure> {
    let d = f.degree();
    let (p, q) = f.padded();
    // Work with a P - b Q where |a|, |b| <= 1 to keep the scale uniform.
    let (alpha, beta) = match w {
        SpherePoint::Infinity => (zero(), Complex64::new(1.0, 0.0)),
        SpherePoint::Finite { re, im } => {
            let c = Complex64::new(re, im);
            if c.norm() <= 1.0 {
                (Complex64::new(1.0, 0.0), c)
            } else {
                (c.inv(), Complex64::new(1.0, 0.0))
            }
        }
    };
    let mut g: Vec<Complex64> = p.iter().zip(&q).map(|(&a, &b)| alpha * a - beta * b).collect();
    // Cancellation of leading terms means a root has moved to ∞.
    for k in (0..=d).rev() {
        let scale = alpha.norm() * p[k].norm() + beta.norm() * q[k].norm();
        if g[k].norm() <= 1e-13 * scale {
            g[k] = zero();
        } else {
            break;
        }
    }
    let g = Poly::new(g);
    if g.is_zero() {
        return Err(Error::Invalid(format!("{f} is constant at {w}")));
    }
    let mut atoms = if g.degree() > 0 {
        root_atoms(&poly_roots(&g, &SolveOptions::default())?)
    } else {
        Vec::new()
    };
    let at_infinity = d - g.degree();
    if at_infinity > 0 {
        atoms.push(Atom {
            point: SpherePoint::Infinity,
            weight: at_infinity as f64,
        });
    }
    AtomicMeasure::new(atoms, d as f64, DivisorKind::Preimage)
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PreimageNode {
    pub point: SpherePoint,
    pub multiplicity: u64,
    /// Index of the image node on the previous level.
    pub parent: Option<usize>,
}

/// Levels `0..=n` of iterated preimages of a target.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PreimageTree {
    pub levels: Vec<Vec<PreimageNode>>,
}

impl PreimageTree {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    /// Multiplicity-weighted node count at level `k`.
    pub fn level_mass(&self, k: usize) -> u64 {
        self.levels[k].iter().map(|n| n.multiplicity).sum()
    }

    pub fn leaves(&self) -> &[PreimageNode] {
        self.levels.last().expect("a tree has a root level")
    }

    /// Indices of the nodes from the root down to `leaf` on level `k`.
    pub fn path(&self, k: usize, leaf: usize) -> Vec<usize> {
        let mut out = vec![leaf];
        let mut cur = leaf;
        for lvl in (1..=k).rev() {
            cur = self.levels[lvl][cur].parent.expect("non-root nodes have parents");
            out.push(cur);
        }
        out.reverse();
        out
    }
}

/// `f^{-k}(a)` for `k = 0..=n`, requiring `d^n <= budget`.
pub fn preimage_tree(f: &RationalMap, a: SpherePoint, n: usize, budget: usize) -> Result<PreimageTree> {
    check_budget(f.degree(), n, budget)?;
    let mut levels = vec![vec![PreimageNode {
        point: a,
        multiplicity: 1,
        parent: None,
    }]];
    for k in 0..n {
        let prev = &levels[k];
        let children: Vec<Vec<PreimageNode>> = prev
            .par_iter()
            .enumerate()
            .map(|(i, node)| {
                let m = preimages_one_step(f, node.point).map_err(|e| {
                    let tree = PreimageTree { levels: levels.clone() };
                    with_context(e, format!(" at preimage tree path {:?}", tree.path(k, i)))
                })?;
                Ok(m.atoms
                    .iter()
                    .map(|at| PreimageNode {
                        point: at.point,
                        multiplicity: node.multiplicity * at.weight.round() as u64,
                        parent: Some(i),
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        levels.push(children.into_iter().flatten().collect());
    }
    Ok(PreimageTree { levels })
}

/// `(f^n)^* δ_a / d^n`.
pub fn preimage_measure(f: &RationalMap, a: SpherePoint, n: usize, budget: usize) -> Result<AtomicMeasure> {
    let tree = preimage_tree(f, a, n, budget)?;
    let total = power(f.degree(), n) as f64;
    let atoms = tree
        .leaves()
        .iter()
        .map(|node| Atom {
            point: node.point,
            weight: node.multiplicity as f64 / total,
        })
        .collect();
    AtomicMeasure::new(atoms, 1.0, DivisorKind::Preimage)
}

/// Homogeneous Horner step: `(P(x, y), Q(x, y))` and their derivatives
/// along `(dx, dy)`.
fn lift_step<S: Scalar>(p: &[S], q: &[S], x: S, y: S, dx: S, dy: S) -> (S, S, S, S) {
    let d = p.len() - 1;
    let mut ypow = Vec::with_capacity(d + 1);
    let mut dypow = Vec::with_capacity(d + 1);
    ypow.push(<S as Scalar>::one());
    dypow.push(<S as Scalar>::zero());
    for j in 1..=d {
        let (yj, dyj) = (ypow[j - 1], dypow[j - 1]);
        ypow.push(yj * y);
        dypow.push(dyj * y + yj * dy);
    }
    let horner = |c: &[S]| {
        let mut acc = c[d];
        let mut dacc = <S as Scalar>::zero();
        for k in (0..d).rev() {
            dacc = dacc * x + acc * dx + c[k] * dypow[d - k];
            acc = acc * x + c[k] * ypow[d - k];
        }
        (acc, dacc)
    };
    let (a, da) = horner(p);
    let (b, db) = horner(q);
    (a, b, da, db)
}

/// `f^n(z) - z` through the homogeneous lift `(X_n, Y_n)`: the polynomial
/// `X_n(z, 1) - z Y_n(z, 1)` has the finite fixed points of `f^n` as roots
/// and degree `d^n + 1 - ord_∞`.
#[derive(Clone, Debug)]
pub struct FixedPointEquation {
    p: Vec<Complex64>,
    q: Vec<Complex64>,
    n: usize,
    degree: usize,
}

impl FixedPointEquation {
    pub fn new(f: &RationalMap, n: usize) -> Self {
        let (p, q) = f.padded();
        let full = power(f.degree(), n).min(usize::MAX as u128 - 1) as usize + 1;
        FixedPointEquation { p, q, n, degree: full }
    }

    fn with_degree(mut self, degree: usize) -> Self {
        self.degree = degree;
        self
    }
}

impl Implicit for FixedPointEquation {
    fn degree(&self) -> usize {
        self.degree
    }

    fn eval<S: Scalar>(&self, z: S) -> Eval<S> {
        let p: Vec<S> = self.p.iter().map(|&c| S::from_c64(c)).collect();
        let q: Vec<S> = self.q.iter().map(|&c| S::from_c64(c)).collect();
        let (mut x, mut y) = (z, <S as Scalar>::one());
        let (mut dx, mut dy) = (<S as Scalar>::one(), <S as Scalar>::zero());
        let mut e: i64 = 0;
        for _ in 0..self.n {
            let (a, b, da, db) = lift_step(&p, &q, x, y, dx, dy);
            // Projective coordinates: rescale by a power of two each step.
            let k = normalizing_exponent(a.mag().max(b.mag()));
            x = a.ldexp(k);
            y = b.ldexp(k);
            dx = da.ldexp(k);
            dy = db.ldexp(k);
            // The lift is homogeneous of degree d, so earlier scalings compound.
            e = e * (p.len() as i64 - 1) - k as i64;
        }
        let value = x - z * y;
        let deriv = dx - y - z * dy;
        let scale = x.mag() + z.mag() * y.mag();
        let rel = value.mag() / scale.max(f64::MIN_POSITIVE);
        Eval {
            value: shifted(value, e),
            deriv: shifted(deriv, e),
            rel_residual: rel,
        }
    }
}

fn shifted<S: Scalar>(m: S, e: i64) -> Ext<S> {
    let mut x = Ext::new(m);
    if !x.is_zero() {
        x.e += e;
    }
    x
}

/// A finite fixed point of `f` with the largest multiplier modulus, which
/// must exceed one.
pub fn repelling_fixed_point(f: &RationalMap) -> Result<SpherePoint> {
    let mut best: Option<(f64, Complex64)> = None;
    for (z, _) in f.finite_fixed_points()? {
        let l = f.ln_abs_derivative(OrbitPoint::Plain(z));
        if best.map_or(true, |(b, _)| l > b) {
            best = Some((l, z));
        }
    }
    match best {
        Some((l, z)) if l > 1e-9 => Ok(SpherePoint::from_complex(z)),
        _ => Err(Error::Invalid(format!("{f} has no repelling finite fixed point"))),
    }
}

/// Order of `∞` as a fixed point of `f^n`.
fn infinity_order(f: &RationalMap, n: usize) -> usize {
    if f.is_polynomial() {
        return 1;
    }
    if f.iterate(OrbitPoint::Infinity, n) != OrbitPoint::Infinity {
        return 0;
    }
    let g = f.conjugate_by_inversion();
    let eq = FixedPointEquation::new(&g, n);
    winding_number(&eq, zero(), 1e-6).max(1) as usize
}

/// Finite points among the nodes, with multiplicity, as starting guesses.
fn node_guesses(nodes: &[PreimageNode]) -> Vec<Complex64> {
    let mut out = Vec::new();
    for node in nodes {
        if let Some(z) = node.point.to_complex() {
            for _ in 0..node.multiplicity {
                out.push(z);
            }
        }
    }
    out
}

/// `[f^n = Id]` with weights `ord_w`, mass `d^n + 1`.
pub fn periodic_divisor(f: &RationalMap, n: usize, budget: usize) -> Result<AtomicMeasure> {
    if n == 0 {
        return Err(Error::Invalid("period must be at least one".into()));
    }
    let total = check_budget(f.degree(), n, budget)? as usize + 1;
    let at_infinity = infinity_order(f, n);
    let eq = FixedPointEquation::new(f, n).with_degree(total - at_infinity);
    // f^{-n}(p) for a repelling fixed point p is spread like the periodic
    // points; circles cover what is left.
    let init = match repelling_fixed_point(f) {
        Ok(p) => node_guesses(preimage_tree(f, p, n, budget)?.leaves()),
        Err(_) => Vec::new(),
    };
    let mut atoms = root_atoms(
        &solve(&eq, init, &SolveOptions::default())
            .map_err(|e| with_context(e, format!(" solving {f} iterated {n} times = z")))?,
    );
    if at_infinity > 0 {
        atoms.push(Atom {
            point: SpherePoint::Infinity,
            weight: at_infinity as f64,
        });
    }
    AtomicMeasure::new(atoms, total as f64, DivisorKind::Periodic)
}

/// Value and first two derivatives of a polynomial in extended arithmetic.
fn horner2<S: Scalar>(c: &[S], u: Ext<S>) -> (Ext<S>, Ext<S>, Ext<S>) {
    let mut p = Ext::new(c[c.len() - 1]);
    let mut p1 = Ext::zero();
    let mut p2 = Ext::zero();
    for &ck in c.iter().rev().skip(1) {
        p2 = p2 * u + p1;
        p1 = p1 * u + p;
        p = p * u + Ext::new(ck);
    }
    (p, p1, p2 + p2)
}

/// `(f^n)'(z) - a` for a polynomial `f`, by the chain rule.
#[derive(Clone, Debug)]
pub struct DerivativeLevel {
    coeffs: Vec<Complex64>,
    a: Complex64,
    n: usize,
    degree: usize,
}

impl DerivativeLevel {
    pub fn new(f: &RationalMap, a: Complex64, n: usize) -> Result<Self> {
        let coeffs = f.polynomial_coefficients()?;
        let degree = (power(f.degree(), n).min(usize::MAX as u128) as usize).saturating_sub(1);
        Ok(DerivativeLevel { coeffs, a, n, degree })
    }
}

impl Implicit for DerivativeLevel {
    fn degree(&self) -> usize {
        self.degree
    }

    fn eval<S: Scalar>(&self, z: S) -> Eval<S> {
        let c: Vec<S> = self.coeffs.iter().map(|&x| S::from_c64(x)).collect();
        let mut u = Ext::new(z);
        let mut du = Ext::new(<S as Scalar>::one());
        let mut ddu = Ext::zero();
        for _ in 0..self.n {
            let (v, v1, v2) = horner2(&c, u);
            ddu = v2 * du * du + v1 * ddu;
            du = v1 * du;
            u = v;
        }
        let a = Ext::new(S::from_c64(self.a));
        rel_eval(du - a, ddu, du, self.a)
    }
}

/// `main - a` with residual `|main - a| / max(|main|, |a|)`, in log space.
fn rel_eval<S: Scalar>(value: Ext<S>, deriv: Ext<S>, main: Ext<S>, a: Complex64) -> Eval<S> {
    let top = main.log2_abs().max(a.norm().log2());
    let rel = if value.is_zero() {
        0.0
    } else if top.is_finite() {
        (value.log2_abs() - top).exp2()
    } else {
        1.0
    };
    Eval {
        value,
        deriv,
        rel_residual: rel,
    }
}

/// The finite critical points of `f^n`: iterated preimages of the critical
/// points of `f` up to depth `n - 1`.
fn iterate_critical_guesses(f: &RationalMap, n: usize, budget: usize) -> Result<Vec<Complex64>> {
    let crit = critical_points(f)?;
    let mut out = Vec::new();
    for atom in &crit.atoms {
        if atom.point.is_infinity() {
            continue;
        }
        for j in 0..n {
            let tree = preimage_tree(f, atom.point, j, budget)?;
            for z in node_guesses(tree.leaves()) {
                for _ in 0..atom.weight.round() as usize {
                    out.push(z);
                }
            }
        }
    }
    Ok(out)
}

/// `((f^n)')^* δ_a`, mass `d^n - 1`, for a polynomial `f`.
pub fn derivative_level_set(f: &RationalMap, a: SpherePoint, n: usize, budget: usize) -> Result<AtomicMeasure> {
    let a = a
        .to_complex()
        .ok_or_else(|| Error::Invalid("derivative level must be finite".into()))?;
    if n == 0 {
        return Err(Error::Invalid("iterate order must be at least one".into()));
    }
    let total = check_budget(f.degree(), n, budget)? as usize - 1;
    let eq = DerivativeLevel::new(f, a, n)?;
    let init = iterate_critical_guesses(f, n, budget)?;
    let roots = solve(&eq, init, &SolveOptions::default())
        .map_err(|e| with_context(e, format!(" solving (f^{n})' = {a} for {f}")))?;
    AtomicMeasure::new(root_atoms(&roots), total as f64, DivisorKind::DerivativeLevel)
}

/// `(f_λ^n)'(λ) - a` for `f_λ = z^d + λ`, as a polynomial in `λ`.
#[derive(Clone, Debug)]
pub struct ParameterDerivative {
    d: usize,
    a: Complex64,
    n: usize,
    degree: usize,
}

impl ParameterDerivative {
    pub fn new(d: usize, a: Complex64, n: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Degree { degree: d });
        }
        let degree = (power(d, n).min(usize::MAX as u128) as usize).saturating_sub(1);
        Ok(ParameterDerivative { d, a, n, degree })
    }
}

impl Implicit for ParameterDerivative {
    fn degree(&self) -> usize {
        self.degree
    }

    fn eval<S: Scalar>(&self, lambda: S) -> Eval<S> {
        let d = self.d as u32;
        let dd = Ext::new(S::from_c64(Complex64::new(self.d as f64, 0.0)));
        let dd1 = Ext::new(S::from_c64(Complex64::new((self.d * (self.d - 1)) as f64, 0.0)));
        let one = Ext::new(<S as Scalar>::one());
        let lam = Ext::new(lambda);
        // w_0 = λ, w_{j+1} = w_j^d + λ; the product runs over t_j = d w_j^{d-1}.
        let (mut w, mut dw) = (lam, one);
        let (mut prod, mut dprod) = (one, Ext::zero());
        for _ in 0..self.n {
            let wd2 = w.powu(d - 2);
            let wd1 = wd2 * w;
            let t = dd * wd1;
            let dt = dd1 * wd2 * dw;
            dprod = dprod * t + prod * dt;
            prod = prod * t;
            dw = dd * wd1 * dw + one;
            w = wd1 * w + lam;
        }
        rel_eval(prod - Ext::new(S::from_c64(self.a)), dprod, prod, self.a)
    }
}

/// Roots `λ` of `(f_λ^n)'(λ) = a` in the family `z^d + λ`, mass `d^n - 1`.
pub fn parameter_derivative_roots(d: usize, a: Complex64, n: usize, budget: usize) -> Result<AtomicMeasure> {
    if n == 0 {
        return Err(Error::Invalid("iterate order must be at least one".into()));
    }
    let total = check_budget(d, n, budget)? as usize - 1;
    let eq = ParameterDerivative::new(d, a, n)?;
    let init = circle_guesses(total, 0.3, 1.5);
    let roots = solve(&eq, init, &SolveOptions::default())
        .map_err(|e| with_context(e, format!(" solving the degree-{d} parameter equation at n = {n}")))?;
    AtomicMeasure::new(root_atoms(&roots), total as f64, DivisorKind::ParameterDerivative)
}

/// Points `z` with `f^{-2}(z) = {z}`, searched among the fixed points of
/// `f^2`.
pub fn exceptional_points(f: &RationalMap) -> Result<Vec<SpherePoint>> {
    const TOL: f64 = 1e-8;
    let single = |w: SpherePoint| -> Result<Option<SpherePoint>> {
        let pre = preimages_one_step(f, w)?;
        let first = pre.atoms[0].point;
        Ok(pre
            .atoms
            .iter()
            .all(|a| chordal_distance(a.point, first) < TOL)
            .then_some(first))
    };
    let cands = periodic_divisor(f, 2, usize::MAX)?;
    let mut out: Vec<SpherePoint> = Vec::new();
    for atom in &cands.atoms {
        let z = atom.point;
        if out.iter().any(|&e| chordal_distance(e, z) < TOL) {
            continue;
        }
        if let Some(w) = single(z)? {
            if let Some(back) = single(w)? {
                if chordal_distance(back, z) < TOL {
                    out.push(z);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DEFAULT_BUDGET;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn weight_at(m: &AtomicMeasure, z: SpherePoint) -> f64 {
        m.weight_near(z, 1e-8)
    }

    #[test]
    fn critical_points_of_quadratics() {
        for f in [RationalMap::quadratic(0.0), RationalMap::quadratic(-1.0)] {
            let m = critical_points(&f).unwrap();
            assert_eq!(m.total_weight(), 2.0);
            assert_eq!(weight_at(&m, SpherePoint::ZERO), 1.0);
            assert_eq!(weight_at(&m, SpherePoint::Infinity), 1.0);
        }
    }

    #[test]
    fn critical_points_of_rational_map() {
        let f = RationalMap::new(vec![c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)], vec![c(-1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)])
            .unwrap();
        let m = critical_points(&f).unwrap();
        assert_eq!(m.total_weight(), 2.0);
        // W = -4z: critical at 0 and, by symmetry z ↦ 1/z, at ∞.
        assert_eq!(weight_at(&m, SpherePoint::ZERO), 1.0);
        assert_eq!(weight_at(&m, SpherePoint::Infinity), 1.0);
    }

    #[test]
    fn one_step_preimages() {
        let m = preimages_one_step(&RationalMap::quadratic(-1.0), SpherePoint::real(-1.0)).unwrap();
        assert_eq!(weight_at(&m, SpherePoint::ZERO), 2.0);
        let m = preimages_one_step(&RationalMap::quadratic(0.0), SpherePoint::ONE).unwrap();
        assert_eq!(weight_at(&m, SpherePoint::ONE), 1.0);
        assert_eq!(weight_at(&m, SpherePoint::real(-1.0)), 1.0);
        let m = preimages_one_step(&RationalMap::quadratic(0.0), SpherePoint::Infinity).unwrap();
        assert_eq!(weight_at(&m, SpherePoint::Infinity), 2.0);
    }

    #[test]
    fn preimages_of_one_under_z_squared_are_roots_of_unity() {
        let m = preimage_measure(&RationalMap::quadratic(0.0), SpherePoint::ONE, 3, DEFAULT_BUDGET).unwrap();
        assert_eq!(m.len(), 8);
        for k in 0..8 {
            let z = Complex64::from_polar(1.0, std::f64::consts::PI * k as f64 / 4.0);
            assert!((weight_at(&m, z.into()) - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let r = preimage_measure(&RationalMap::quadratic(0.0), SpherePoint::ONE, 15, DEFAULT_BUDGET);
        assert!(matches!(r, Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn tree_paths_lead_to_the_root() {
        let f = RationalMap::quadratic(-1.0);
        let t = preimage_tree(&f, SpherePoint::real(0.3), 4, DEFAULT_BUDGET).unwrap();
        for k in 0..=4 {
            assert_eq!(t.level_mass(k), 1 << k);
        }
        let path = t.path(4, 5);
        assert_eq!(path.len(), 5);
        for (lvl, w) in path.windows(2).enumerate() {
            let child = t.levels[lvl + 1][w[1]].point;
            let parent = t.levels[lvl][w[0]].point;
            assert!(chordal_distance(f.eval(child), parent) < 1e-12);
        }
    }

    #[test]
    fn periodic_points_of_z_squared() {
        let f = RationalMap::quadratic(0.0);
        let m = periodic_divisor(&f, 1, DEFAULT_BUDGET).unwrap();
        assert_eq!(m.total_weight(), 3.0);
        for z in [SpherePoint::ZERO, SpherePoint::ONE, SpherePoint::Infinity] {
            assert_eq!(weight_at(&m, z), 1.0);
        }
        let m = periodic_divisor(&f, 3, DEFAULT_BUDGET).unwrap();
        assert_eq!(m.len(), 9);
        for k in 0..7 {
            let z = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / 7.0);
            assert_eq!(weight_at(&m, z.into()), 1.0);
        }
    }

    #[test]
    fn fixed_point_equation_matches_direct_iteration() {
        let f = RationalMap::quadratic(-1.0);
        let eq = FixedPointEquation::new(&f, 3);
        let z = c(0.3, 0.7);
        let e = eq.eval::<Complex64>(z);
        let w = f.eval_complex(f.eval_complex(f.eval_complex(z)));
        // X_3(z, 1) = f^3(z) for a polynomial with Q = 1.
        assert!((e.value.to_c64() - (w - z)).norm() < 1e-12, "{:?} vs {}", e.value.to_c64(), w - z);
    }

    #[test]
    fn derivative_level_of_quadratic() {
        let f = RationalMap::quadratic(-1.0);
        let m = derivative_level_set(&f, SpherePoint::ZERO, 2, DEFAULT_BUDGET).unwrap();
        assert_eq!(m.total_weight(), 3.0);
        for x in [0.0, 1.0, -1.0] {
            assert_eq!(weight_at(&m, SpherePoint::real(x)), 1.0);
        }
        let a = c(1.0, 1.0);
        let m = derivative_level_set(&f, a.into(), 1, DEFAULT_BUDGET).unwrap();
        assert_eq!(weight_at(&m, (a / 2.0).into()), 1.0);
    }

    #[test]
    fn parameter_cubic() {
        let m = parameter_derivative_roots(2, c(1.0, 0.0), 2, DEFAULT_BUDGET).unwrap();
        assert_eq!(m.total_weight(), 3.0);
        for a in &m.atoms {
            let l = a.point.to_complex().unwrap();
            assert!((4.0 * l * l * l + 4.0 * l * l - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn exceptional_sets() {
        let e = exceptional_points(&RationalMap::quadratic(-1.0)).unwrap();
        assert_eq!(e, vec![SpherePoint::Infinity]);
        let e = exceptional_points(&RationalMap::quadratic(0.0)).unwrap();
        assert_eq!(e.len(), 2);
        assert!(e.contains(&SpherePoint::Infinity));
        assert!(e.iter().any(|&z| chordal_distance(z, SpherePoint::ZERO) < 1e-12));
    }

    #[test]
    fn repelling_fixed_points() {
        let p = repelling_fixed_point(&RationalMap::quadratic(-2.0)).unwrap();
        assert!(chordal_distance(p, SpherePoint::real(2.0)) < 1e-12);
        let p = repelling_fixed_point(&RationalMap::quadratic(-1.0)).unwrap();
        assert!(chordal_distance(p, SpherePoint::real((1.0 + 5f64.sqrt()) / 2.0)) < 1e-12);
    }
}
