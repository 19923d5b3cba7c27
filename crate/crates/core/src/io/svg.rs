//! Static phase portraits in the `(Y, R)` plane.

use std::fmt::Write;

use crate::dynamics::{JumpEvent, Trajectory};
use crate::geometry::{is_curve, Domain, Equilibrium, FoldKind, LmIsocline, Stability};
use crate::model::ModelSpec;

const W: f64 = 720.0;
const H: f64 = 480.0;
const PAD: f64 = 48.0;

/// Pieces of a portrait; every field is optional except the domain.
pub struct Portrait<'a> {
    pub spec: &'a ModelSpec,
    pub domain: Domain,
    pub isocline: Option<&'a LmIsocline>,
    pub equilibria: &'a [Equilibrium],
    pub trajectory: Option<&'a Trajectory>,
    pub jumps: &'a [JumpEvent],
    pub title: &'a str,
}

struct Frame {
    d: Domain,
}

impl Frame {
    fn x(&self, y: f64) -> f64 {
        PAD + (y - self.d.y_min) / (self.d.y_max - self.d.y_min) * (W - 2.0 * PAD)
    }

    fn y(&self, r: f64) -> f64 {
        H - PAD - (r - self.d.r_min) / (self.d.r_max - self.d.r_min) * (H - 2.0 * PAD)
    }

    fn points(&self, pts: impl Iterator<Item = (f64, f64)>) -> String {
        let mut s = String::new();
        for (y, r) in pts {
            let _ = write!(s, "{:.2},{:.2} ", self.x(y), self.y(r));
        }
        s.trim_end().to_string()
    }
}

fn decimate<T: Copy>(v: &[T], max_n: usize) -> Vec<T> {
    if v.len() <= max_n {
        return v.to_vec();
    }
    let stride = v.len().div_ceil(max_n);
    let mut out: Vec<T> = v.iter().step_by(stride).copied().collect();
    out.push(*v.last().unwrap());
    out
}

pub fn render(p: &Portrait) -> String {
    let f = Frame { d: p.domain };
    let d = p.domain;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<style>.stable{{stroke:#1f5fa8;fill:none;stroke-width:2}} .unstable{{stroke:#c0392b;fill:none;stroke-width:2;stroke-dasharray:6 4}} .is{{stroke:#2e8b57;fill:none;stroke-width:1.5}} .traj{{stroke:#444;fill:none;stroke-width:1}} .jump{{stroke:#000;stroke-width:1.5;marker-end:url(#arrow)}}</style>"#
    );
    let _ = writeln!(
        s,
        r#"<defs><marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="6" markerHeight="6" orient="auto"><path d="M0,0 L10,5 L0,10 z"/></marker></defs>"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    // axes
    let _ = writeln!(
        s,
        r##"<g class="axes" stroke="#000"><line x1="{PAD}" y1="{b:.2}" x2="{r:.2}" y2="{b:.2}"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{b:.2}"/></g>"##,
        b = H - PAD,
        r = W - PAD
    );
    if d.r_min < 0.0 && d.r_max > 0.0 {
        let _ = writeln!(
            s,
            r##"<line class="zero" x1="{PAD}" y1="{z:.2}" x2="{r:.2}" y2="{z:.2}" stroke="#999" stroke-dasharray="2 3"/>"##,
            z = f.y(0.0),
            r = W - PAD
        );
    }
    for k in 0..=4 {
        let yv = d.y_min + (d.y_max - d.y_min) * k as f64 / 4.0;
        let rv = d.r_min + (d.r_max - d.r_min) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            f.x(yv),
            H - PAD + 16.0,
            trim(yv)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            PAD - 6.0,
            f.y(rv) + 4.0,
            trim(rv)
        );
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">Y</text>"#, W / 2.0, H - 8.0);
    let _ = writeln!(s, r#"<text x="12" y="{:.2}">R</text>"#, H / 2.0);
    let _ = writeln!(s, r#"<text x="{:.2}" y="20" text-anchor="middle">{}</text>"#, W / 2.0, escape(p.title));

    // IS line, clipped to the plotted rectangle
    let is = is_curve(p.spec, &d);
    let is_pts: Vec<(f64, f64)> = (0..=200)
        .map(|k| d.y_min + (d.y_max - d.y_min) * k as f64 / 200.0)
        .map(|y| (y, is.rate(y)))
        .filter(|&(_, r)| r >= d.r_min && r <= d.r_max)
        .collect();
    if is_pts.len() > 1 {
        let _ = writeln!(s, r#"<polyline class="is" points="{}"/>"#, f.points(is_pts.into_iter()));
    }

    if let Some(iso) = p.isocline {
        for b in &iso.branches {
            let class = match b.stability {
                Stability::Stable => "stable",
                Stability::Unstable => "unstable",
            };
            let pts: Vec<(f64, f64)> = decimate(&b.y.iter().copied().zip(b.r.iter().copied()).collect::<Vec<_>>(), 600);
            let _ = writeln!(
                s,
                r#"<polyline class="{class}" data-arc="{}" points="{}"/>"#,
                b.arc,
                f.points(pts.into_iter())
            );
        }
        for fold in &iso.folds {
            let shape = match fold.kind {
                FoldKind::LowerKnee => "lower",
                FoldKind::UpperKnee => "upper",
            };
            let _ = writeln!(
                s,
                r##"<circle class="fold {shape}" cx="{:.2}" cy="{:.2}" r="4" fill="#f39c12"/>"##,
                f.x(fold.y),
                f.y(fold.r)
            );
        }
    }

    for e in p.equilibria {
        let fill = if e.classification.is_stable() { "#000" } else { "#fff" };
        let _ = writeln!(
            s,
            r##"<circle class="equilibrium" cx="{:.2}" cy="{:.2}" r="5" fill="{fill}" stroke="#000"/>"##,
            f.x(e.y),
            f.y(e.r)
        );
    }

    if let Some(t) = p.trajectory {
        // slow pieces only; jumps are drawn as arrows below
        let mut piece: Vec<(f64, f64)> = Vec::new();
        let mut pieces = Vec::new();
        for w in t.samples.windows(2) {
            let inside_jump = p
                .jumps
                .iter()
                .any(|j| w[0].t >= j.t_start && w[1].t <= j.t_end);
            if inside_jump {
                if piece.len() > 1 {
                    pieces.push(std::mem::take(&mut piece));
                }
                piece.clear();
                continue;
            }
            if piece.is_empty() {
                piece.push((w[0].y, w[0].r));
            }
            piece.push((w[1].y, w[1].r));
        }
        if piece.len() > 1 {
            pieces.push(piece);
        }
        for piece in pieces {
            let _ = writeln!(
                s,
                r#"<polyline class="traj" points="{}"/>"#,
                f.points(decimate(&piece, 2000).into_iter())
            );
        }
    }
    for j in p.jumps {
        let _ = writeln!(
            s,
            r#"<line class="jump" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
            f.x(j.y_at_jump),
            f.y(j.r_from),
            f.x(j.y_at_jump),
            f.y(j.r_to)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn trim(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Direction;
    use crate::presets;

    #[test]
    fn one_jump_one_arrow() {
        let spec = presets::reference();
        let jump = JumpEvent {
            t_start: 1.0,
            t_end: 1.0,
            y_at_jump: 4.0,
            r_from: 0.04,
            r_to: 0.1275,
            direction: Direction::Up,
            y_slip: 0.0,
            arcs: None,
        };
        let svg = render(&Portrait {
            spec: &spec,
            domain: Domain::default(),
            isocline: None,
            equilibria: &[],
            trajectory: None,
            jumps: &[jump],
            title: "a < b",
        });
        assert_eq!(svg.matches(r#"class="jump""#).count(), 1);
        assert!(svg.contains("a &lt; b"));
        assert!(svg.ends_with("</svg>\n"));
    }
}
