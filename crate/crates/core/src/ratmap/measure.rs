use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::sphere::{chordal_distance, SpherePoint, TestFunction};

/// The divisor an [`AtomicMeasure`] represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivisorKind {
    Point,
    Critical,
    Preimage,
    Periodic,
    DerivativeLevel,
    ParameterDerivative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: SpherePoint,
    pub weight: f64,
}

/// A finite sum of weighted Dirac masses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    pub atoms: Vec<Atom>,
    pub declared_mass: f64,
    pub kind: DivisorKind,
}

const MASS_TOL: f64 = 1e-9;

impl AtomicMeasure {
    /// Checks positivity of weights and that they sum to `declared_mass`.
    pub fn new(atoms: Vec<Atom>, declared_mass: f64, kind: DivisorKind) -> Result<Self> {
        let m = AtomicMeasure {
            atoms,
            declared_mass,
            kind,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn dirac(point: SpherePoint) -> Self {
        AtomicMeasure {
            atoms: vec![Atom { point, weight: 1.0 }],
            declared_mass: 1.0,
            kind: DivisorKind::Point,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(a) = self.atoms.iter().find(|a| !(a.weight > 0.0)) {
            return Err(Error::Invalid(format!("non-positive weight {} at {}", a.weight, a.point)));
        }
        let total = self.total_weight();
        if (total - self.declared_mass).abs() > MASS_TOL * self.declared_mass.abs().max(1.0) {
            return Err(Error::Invalid(format!(
                "weights sum to {total} but the declared mass is {}",
                self.declared_mass
            )));
        }
        Ok(())
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// The same atoms scaled to total mass one.
    pub fn normalized(&self) -> AtomicMeasure {
        let m = self.declared_mass;
        AtomicMeasure {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    point: a.point,
                    weight: a.weight / m,
                })
                .collect(),
            declared_mass: 1.0,
            kind: self.kind,
        }
    }

    /// `Σ φ(z) w(z)`.
    pub fn pair(&self, phi: &TestFunction) -> f64 {
        self.atoms.iter().map(|a| phi.eval(a.point) * a.weight).sum()
    }

    /// Distinct support points.
    pub fn support(&self) -> Vec<SpherePoint> {
        self.atoms.iter().map(|a| a.point).collect()
    }

    /// Weight within chordal distance `tol` of `z`.
    pub fn weight_near(&self, z: SpherePoint, tol: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| chordal_distance(a.point, z) < tol)
            .map(|a| a.weight)
            .sum()
    }

    /// Whether both measures put the same weight at matching points.
    pub fn approx_eq(&self, other: &AtomicMeasure, tol: f64) -> bool {
        let mut used = vec![false; other.atoms.len()];
        if (self.total_weight() - other.total_weight()).abs() > MASS_TOL * self.total_weight().max(1.0) {
            return false;
        }
        // Match weight greedily point by point.
        for a in &self.atoms {
            let mut need = a.weight;
            for (j, b) in other.atoms.iter().enumerate() {
                if !used[j] && chordal_distance(a.point, b.point) < tol && b.weight <= need + MASS_TOL {
                    used[j] = true;
                    need -= b.weight;
                    if need <= MASS_TOL {
                        break;
                    }
                }
            }
            if need > MASS_TOL {
                return false;
            }
        }
        used.iter().all(|&u| u)
    }

    /// CSV with header `re,im,is_infinity,weight`; `∞` is written with
    /// `re = im = 0`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("re,im,is_infinity,weight\n");
        for a in &self.atoms {
            let (re, im, inf) = match a.point {
                SpherePoint::Finite { re, im } => (re, im, 0),
                SpherePoint::Infinity => (0.0, 0.0, 1),
            };
            writeln!(s, "{re:.16e},{im:.16e},{inf},{:.16e}", a.weight).unwrap();
        }
        s
    }

    /// Parses [`AtomicMeasure::to_csv`] output.
    pub fn from_csv(text: &str, declared_mass: f64, kind: DivisorKind) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "re,im,is_infinity,weight" => {}
            _ => return Err(Error::Parse("missing atom CSV header".into())),
        }
        let atoms = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                let bad = || Error::Parse(format!("bad atom row {l:?}"));
                if f.len() != 4 {
                    return Err(bad());
                }
                let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
                let point = if f[2].trim() == "1" {
                    SpherePoint::Infinity
                } else {
                    SpherePoint::finite(num(f[0])?, num(f[1])?)?
                };
                Ok(Atom {
                    point,
                    weight: num(f[3])?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        AtomicMeasure::new(atoms, declared_mass, kind)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: AtomicMeasure = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> AtomicMeasure {
        AtomicMeasure::new(
            vec![
                Atom { point: SpherePoint::ZERO, weight: 1.0 },
                Atom { point: SpherePoint::Infinity, weight: 1.0 },
                Atom { point: SpherePoint::Finite { re: 0.1, im: -1.0 / 3.0 }, weight: 1.0 },
            ],
            3.0,
            DivisorKind::Periodic,
        )
        .unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let m = sample();
        let back = AtomicMeasure::from_csv(&m.to_csv(), 3.0, DivisorKind::Periodic).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn json_round_trip() {
        let m = sample();
        assert_eq!(AtomicMeasure::from_json(&m.to_json().unwrap()).unwrap(), m);
    }

    #[test]
    fn mass_is_checked() {
        let r = AtomicMeasure::new(
            vec![Atom { point: SpherePoint::ZERO, weight: 1.0 }],
            2.0,
            DivisorKind::Preimage,
        );
        assert!(r.is_err());
    }

    #[test]
    fn normalized_pairing() {
        let m = sample().normalized();
        let phi = TestFunction::chordal_square(SpherePoint::Infinity);
        // φ(0) = 1, φ(∞) = 0
        let expect = (1.0 + 0.0 + 1.0 / (1.0 + 0.01 + 1.0 / 9.0)) / 3.0;
        assert!((m.pair(&phi) - expect).abs() < 1e-15);
        assert!((m.total_weight() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn approx_equality_matches_multisets() {
        let m = sample();
        let mut other = sample();
        other.atoms.reverse();
        assert!(m.approx_eq(&other, 1e-9));
        other.atoms[0].point = SpherePoint::real(5.0);
        assert!(!m.approx_eq(&other, 1e-9));
    }
}
