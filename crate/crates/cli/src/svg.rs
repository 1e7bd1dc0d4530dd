//! Standalone SVG plots of an optimized shape.
//!
//! The left panel draws the boundary polyline, the box disks and the
//! detected atoms; the right panel draws `u(theta)` against the left axis and
//! the cone multiplier `zeta_0` against a secondary right axis.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use shapeopt::analyze::Atom;
use shapeopt::body::GaugeBody;

const PANEL: f64 = 400.0;
const MARGIN: f64 = 50.0;

pub struct ShapePlot<'a> {
    pub title: &'a str,
    pub body: &'a GaugeBody,
    pub atoms: &'a [Atom],
    /// Cone multiplier per grid node.
    pub zeta: Option<&'a [f64]>,
    pub inner_radius: Option<f64>,
    pub outer_radius: Option<f64>,
}

fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.abs() >= 1e-2 && x.abs() < 1e4 {
        format!("{:.3}", x).trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{x:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl ShapePlot<'_> {
    pub fn render(&self) -> String {
        let width = 2.0 * PANEL + 3.0 * MARGIN;
        let height = PANEL + 2.0 * MARGIN;
        let mut s = String::new();
        writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
        )
        .unwrap();
        writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
        writeln!(s, r#"<text x="{MARGIN}" y="{}" font-size="15">{}</text>"#, MARGIN * 0.5, escape(self.title)).unwrap();
        self.shape_panel(&mut s, MARGIN, MARGIN);
        self.theta_panel(&mut s, 2.0 * MARGIN + PANEL, MARGIN);
        s.push_str("</svg>\n");
        s
    }

    fn shape_panel(&self, s: &mut String, x0: f64, y0: f64) {
        let n = self.body.len();
        let extent = [Some(self.body.max_radius()), self.outer_radius, self.inner_radius]
            .into_iter()
            .flatten()
            .fold(0.0, f64::max)
            * 1.1;
        let scale = 0.5 * PANEL / extent;
        let cx = x0 + 0.5 * PANEL;
        let cy = y0 + 0.5 * PANEL;
        let map = |p: [f64; 2]| (cx + scale * p[0], cy - scale * p[1]);

        writeln!(s, r##"<g id="shape"><rect x="{x0}" y="{y0}" width="{PANEL}" height="{PANEL}" fill="none" stroke="#ccc"/>"##).unwrap();
        writeln!(
            s,
            r##"<line x1="{x0}" y1="{cy}" x2="{}" y2="{cy}" stroke="#eee"/><line x1="{cx}" y1="{y0}" x2="{cx}" y2="{}" stroke="#eee"/>"##,
            x0 + PANEL,
            y0 + PANEL
        )
        .unwrap();
        for r in [self.inner_radius, self.outer_radius].into_iter().flatten() {
            writeln!(
                s,
                r##"<circle cx="{cx:.3}" cy="{cy:.3}" r="{:.3}" fill="none" stroke="#999" stroke-dasharray="4 3"/>"##,
                scale * r
            )
            .unwrap();
        }
        let pts: Vec<String> = (0..n)
            .map(|j| {
                let (x, y) = map(self.body.boundary_point(j));
                format!("{x:.3},{y:.3}")
            })
            .collect();
        writeln!(s, r##"<polygon points="{}" fill="#dbe8f6" stroke="#1f5fa8" stroke-width="1.5"/>"##, pts.join(" "))
            .unwrap();
        let total: f64 = self.atoms.iter().map(|a| a.mass).sum::<f64>().max(f64::MIN_POSITIVE);
        for a in self.atoms {
            let r = 1.0 / self.body.interpolate(a.theta);
            let (x, y) = map([r * a.theta.cos(), r * a.theta.sin()]);
            let radius = 3.0 + 6.0 * (a.mass / total).sqrt();
            let fill = if a.inside { "#d62728" } else { "none" };
            writeln!(
                s,
                r##"<circle class="atom" cx="{x:.3}" cy="{y:.3}" r="{radius:.2}" fill="{fill}" stroke="#d62728"><title>theta = {:.4}, mass = {:.4}</title></circle>"##,
                a.theta, a.mass
            )
            .unwrap();
        }
        writeln!(
            s,
            r##"<text x="{x0}" y="{}" fill="#555">scale: half width = {}</text></g>"##,
            y0 + PANEL + 16.0,
            fmt_num(extent)
        )
        .unwrap();
    }

    fn theta_panel(&self, s: &mut String, x0: f64, y0: f64) {
        let u = self.body.gauge();
        let n = u.len();
        let (umin, umax) = (u.min(), u.max());
        let pad = ((umax - umin) * 0.1).max(1e-3 * umax.abs().max(1.0));
        let (ulo, uhi) = (umin - pad, umax + pad);
        let px = |t: f64| x0 + PANEL * t / TAU;
        let py = |v: f64, lo: f64, hi: f64| y0 + PANEL * (1.0 - (v - lo) / (hi - lo));

        writeln!(s, r##"<g id="profile"><rect x="{x0}" y="{y0}" width="{PANEL}" height="{PANEL}" fill="none" stroke="#ccc"/>"##).unwrap();
        for k in 0..=4 {
            let t = TAU * k as f64 / 4.0;
            let label = ["0", "π/2", "π", "3π/2", "2π"][k];
            writeln!(s, r##"<text x="{:.2}" y="{}" text-anchor="middle" fill="#555">{label}</text>"##, px(t), y0 + PANEL + 16.0)
                .unwrap();
        }
        for k in 0..=2 {
            let v = ulo + (uhi - ulo) * k as f64 / 2.0;
            writeln!(
                s,
                r##"<text x="{}" y="{:.2}" text-anchor="end" fill="#1f5fa8">{}</text>"##,
                x0 - 4.0,
                py(v, ulo, uhi) + 4.0,
                fmt_num(v)
            )
            .unwrap();
        }
        writeln!(s, r##"<text x="{}" y="{}" fill="#1f5fa8">u(θ)</text>"##, x0, y0 - 6.0).unwrap();
        let line: Vec<String> = (0..=n)
            .map(|j| {
                let t = TAU * j as f64 / n as f64;
                format!("{:.3},{:.3}", px(t), py(u.samples()[j % n], ulo, uhi))
            })
            .collect();
        writeln!(s, r##"<polyline points="{}" fill="none" stroke="#1f5fa8" stroke-width="1.5"/>"##, line.join(" ")).unwrap();

        if let Some(zeta) = self.zeta {
            let zmax = zeta.iter().copied().fold(0.0, f64::max);
            let zmin = zeta.iter().copied().fold(0.0, f64::min);
            let zhi = if zmax > zmin { zmax + 0.05 * (zmax - zmin) } else { 1.0 };
            let zlo = zmin;
            let xr = x0 + PANEL;
            writeln!(s, r##"<line x1="{xr}" y1="{y0}" x2="{xr}" y2="{}" stroke="#e07b00"/>"##, y0 + PANEL).unwrap();
            for k in 0..=2 {
                let v = zlo + (zhi - zlo) * k as f64 / 2.0;
                writeln!(
                    s,
                    r##"<text x="{}" y="{:.2}" fill="#e07b00">{}</text>"##,
                    xr + 4.0,
                    py(v, zlo, zhi) + 4.0,
                    fmt_num(v)
                )
                .unwrap();
            }
            writeln!(s, r##"<text x="{}" y="{}" text-anchor="end" fill="#e07b00">ζ₀</text>"##, xr, y0 - 6.0).unwrap();
            let line: Vec<String> = (0..=n)
                .map(|j| {
                    let t = TAU * j as f64 / n as f64;
                    format!("{:.3},{:.3}", px(t), py(zeta[j % n], zlo, zhi))
                })
                .collect();
            writeln!(
                s,
                r##"<polyline id="zeta" points="{}" fill="none" stroke="#e07b00" stroke-dasharray="5 2"/>"##,
                line.join(" ")
            )
            .unwrap();
        }
        for a in self.atoms {
            writeln!(
                s,
                r##"<line x1="{x:.3}" y1="{y0}" x2="{x:.3}" y2="{}" stroke="#d62728" stroke-opacity="0.5"/>"##,
                y0 + PANEL,
                x = px(a.theta)
            )
            .unwrap();
        }
        s.push_str("</g>\n");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plot_has_boundary_atoms_and_zeta() {
        let body = GaugeBody::square(64, 1.0).unwrap();
        let atoms = [Atom { theta: 0.785, mass: 1.4, first_node: 8, width: 1, inside: true }];
        let zeta = vec![0.5; 64];
        let svg = ShapePlot {
            title: "square <test>",
            body: &body,
            atoms: &atoms,
            zeta: Some(&zeta),
            inner_radius: Some(0.4),
            outer_radius: None,
        }
        .render();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("<polygon"));
        assert_eq!(svg.matches("class=\"atom\"").count(), 1);
        assert!(svg.contains("id=\"zeta\""));
        assert!(svg.contains("&lt;test&gt;"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
