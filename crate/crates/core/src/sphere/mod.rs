//! Geometry and integration on the Riemann sphere.
//!
//! The chordal metric is normalized so that `[0, ∞] = 1`, and the
//! Fubini–Study measure `ω = r dr dθ / (π (1 + r²)²)` is a probability
//! measure. With `dd^c log|z| = δ₀`, the density of `dd^c φ` against `ω` in
//! the finite chart is `(Δφ / 2)(1 + |z|²)²`.

mod integrate;
mod point;
mod testfn;

pub use integrate::{fs_integrate, sample_fs, Accumulator, MeanEstimate, RandomStream};
pub(crate) use point::half_log_1p_sq;
pub use point::{chordal_distance, log_chordal_distance, SpherePoint};
pub use testfn::{
    builtin_test_functions, ddc_density, ddc_density_checked, parse_point, validation_grid, DdcEstimate,
    TestFunction, DEFAULT_FD_STEP,
};

/// `|∫ log[·, z] ω|`, which does not depend on `z`.
pub const C_OMEGA: f64 = 0.5;

/// The universal constant `C_ω = 1/2`.
pub fn c_omega() -> f64 {
    C_OMEGA
}
