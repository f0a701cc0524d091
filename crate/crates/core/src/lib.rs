//! Numerical experiments on the value distribution of rational maps of the
//! Riemann sphere: preimage and periodic-point measures, equilibrium
//! measures, proximity functions, planar Green functions and the Selberg
//! inequality, and the hypothesis-H cluster statistic.

pub mod ddouble;
pub mod equidist;
pub mod error;
pub mod hyph;
pub mod potential;
pub mod ratmap;
pub mod roots;
pub mod selberg;
pub mod sphere;

pub use error::{Error, Result};
pub use ratmap::{AtomicMeasure, DivisorKind, RationalMap};
pub use sphere::{RandomStream, SpherePoint, TestFunction};

/// Default cap on the number of atoms a single divisor may have.
pub const DEFAULT_BUDGET: usize = 1 << 14;
