//! Atom clouds on a fixed 1024×1024 canvas. A point `z` is drawn at radius
//! `[z, 0] · 480` in the direction of `arg z`, so the plane fits in a disk
//! whose rim is `∞`.

use std::fmt::Write as _;

use equidyn::ratmap::AtomicMeasure;
use equidyn::sphere::{chordal_distance, SpherePoint};

pub const SIZE: f64 = 1024.0;
const RIM: f64 = 480.0;

/// Canvas position of a finite point.
pub fn project(z: SpherePoint) -> Option<(f64, f64)> {
    let c = z.to_complex()?;
    let rho = chordal_distance(z, SpherePoint::ZERO);
    let theta = c.arg();
    Some((SIZE / 2.0 + RIM * rho * theta.cos(), SIZE / 2.0 - RIM * rho * theta.sin()))
}

pub fn render_atoms(measure: &AtomicMeasure, title: &str) -> String {
    let mid = SIZE / 2.0;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r##"<circle class="rim" cx="{mid}" cy="{mid}" r="{RIM}" fill="none" stroke="#999"/>"##
    )
    .unwrap();
    writeln!(
        s,
        r##"<circle class="unit-circle" cx="{mid}" cy="{mid}" r="{:.3}" fill="none" stroke="#bbb" stroke-dasharray="6 4"/>"##,
        RIM / 2f64.sqrt()
    )
    .unwrap();
    writeln!(
        s,
        r##"<path class="origin" d="M {} {mid} L {} {mid} M {mid} {} L {mid} {}" stroke="#444"/>"##,
        mid - 8.0,
        mid + 8.0,
        mid - 8.0,
        mid + 8.0
    )
    .unwrap();
    let max_w = measure.atoms.iter().map(|a| a.weight).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut at_infinity = 0.0;
    for atom in &measure.atoms {
        match project(atom.point) {
            Some((x, y)) => {
                let r = 2.0 + 4.0 * (atom.weight / max_w).sqrt();
                writeln!(
                    s,
                    r##"<circle class="atom" cx="{x:.3}" cy="{y:.3}" r="{r:.3}" fill="#c0392b" fill-opacity="0.8" data-weight="{:e}"/>"##,
                    atom.weight
                )
                .unwrap();
            }
            None => at_infinity += atom.weight,
        }
    }
    writeln!(
        s,
        r#"<text class="legend" x="16" y="{}" font-family="sans-serif" font-size="16">∞: weight {at_infinity}</text>"#,
        SIZE - 16.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text class="title" x="16" y="28" font-family="sans-serif" font-size="18">{}</text>"#,
        escape(title)
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_puts_unit_circle_at_half_sqrt_two() {
        let (x, y) = project(SpherePoint::real(1.0)).unwrap();
        assert!((x - (512.0 + RIM / 2f64.sqrt())).abs() < 1e-9);
        assert!((y - 512.0).abs() < 1e-9);
        assert!(project(SpherePoint::Infinity).is_none());
    }
}
