use std::fmt::Write;

use crate::error::{Error, Result};
use crate::geometry::{NormSpec, Point};
use crate::model::{evaluate, Instance, Solution};

/// Width and height of the drawing area in user units.
const CANVAS: f64 = 800.0;
const MARGIN: f64 = 20.0;
const BALL_SEGMENTS: usize = 72;

/// Affine map from instance coordinates to the canvas (y axis flipped).
struct Viewport {
    min_x: f64,
    max_y: f64,
    scale: f64,
}

impl Viewport {
    fn fit(points: &[&Point], pad: f64) -> Self {
        let (mut lx, mut ly, mut hx, mut hy) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            lx = lx.min(p.coords()[0]);
            hx = hx.max(p.coords()[0]);
            ly = ly.min(p.coords()[1]);
            hy = hy.max(p.coords()[1]);
        }
        let span = (hx - lx).max(hy - ly) + 2.0 * pad;
        let scale = if span > 0.0 { (CANVAS - 2.0 * MARGIN) / span } else { 1.0 };
        Viewport { min_x: lx - pad, max_y: hy + pad, scale }
    }

    fn x(&self, v: f64) -> f64 {
        MARGIN + (v - self.min_x) * self.scale
    }

    fn y(&self, v: f64) -> f64 {
        MARGIN + (self.max_y - v) * self.scale
    }
}

/// Outline of the ball of radius `r` about `c`, drawn as a circle for ℓ2 and
/// as a polygon otherwise.
fn ball(out: &mut String, vp: &Viewport, c: &Point, r: f64, norm: NormSpec, style: &str) {
    let (cx, cy) = (c.coords()[0], c.coords()[1]);
    if norm == NormSpec::L2 {
        let _ = writeln!(out, r#"<circle cx="{:.3}" cy="{:.3}" r="{:.3}" {style}/>"#, vp.x(cx), vp.y(cy), r * vp.scale);
        return;
    }
    let mut pts = String::new();
    for s in 0..BALL_SEGMENTS {
        let a = std::f64::consts::TAU * s as f64 / BALL_SEGMENTS as f64;
        let (dx, dy) = (a.cos(), a.sin());
        let len = norm.eval([dx, dy]);
        let _ = write!(pts, "{:.3},{:.3} ", vp.x(cx + r * dx / len), vp.y(cy + r * dy / len));
    }
    let _ = writeln!(out, r#"<polygon points="{}" {style}/>"#, pts.trim_end());
}

/// Renders demand points (covered in red, uncovered in grey), open discrete
/// sites as green squares and continuous centers as blue triangles, each with
/// its coverage ball.
pub fn emit_svg(instance: &Instance, solution: &Solution) -> Result<String> {
    if instance.dim() != 2 {
        return Err(Error::capability(format!("plots need planar instances, got dimension {}", instance.dim())));
    }
    let covered = evaluate(instance, solution).covered;
    let dts = instance.discrete_types();
    let cts = instance.continuous_types();
    let open: Vec<(usize, usize)> = solution
        .assignment
        .open_sites
        .iter()
        .enumerate()
        .flat_map(|(t, sites)| sites.iter().filter(move |&&j| j < dts[t].sites.len()).map(move |&j| (t, j)))
        .collect();

    let mut anchors: Vec<&Point> = instance.demand().iter().map(|d| &d.point).collect();
    anchors.extend(open.iter().map(|&(t, j)| &dts[t].sites[j]));
    anchors.extend(solution.continuous_centers.iter().flatten());
    let pad = dts.iter().flat_map(|t| t.radii.iter().copied()).chain(cts.iter().map(|t| t.radius)).fold(0.0, f64::max);
    let vp = Viewport::fit(&anchors, pad);

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{CANVAS}" height="{CANVAS}" viewBox="0 0 {CANVAS} {CANVAS}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let _ = writeln!(out, r#"<g id="discrete">"#);
    for &(t, j) in &open {
        let s = &dts[t].sites[j];
        ball(&mut out, &vp, s, dts[t].radii[j], dts[t].norm, r#"fill="green" fill-opacity="0.08" stroke="green""#);
        let _ = writeln!(
            out,
            r#"<rect x="{:.3}" y="{:.3}" width="8" height="8" fill="green"/>"#,
            vp.x(s.coords()[0]) - 4.0,
            vp.y(s.coords()[1]) - 4.0
        );
    }
    let _ = writeln!(out, "</g>");

    let _ = writeln!(out, r#"<g id="continuous">"#);
    for (t, centers) in solution.continuous_centers.iter().enumerate() {
        let Some(ty) = cts.get(t) else { continue };
        for c in centers.iter().filter(|c| c.dim() == 2) {
            ball(&mut out, &vp, c, ty.radius, ty.norm, r#"fill="blue" fill-opacity="0.08" stroke="blue""#);
            let (x, y) = (vp.x(c.coords()[0]), vp.y(c.coords()[1]));
            let _ = writeln!(
                out,
                r#"<polygon points="{:.3},{:.3} {:.3},{:.3} {:.3},{:.3}" fill="blue"/>"#,
                x,
                y - 6.0,
                x - 5.0,
                y + 4.0,
                x + 5.0,
                y + 4.0
            );
        }
    }
    let _ = writeln!(out, "</g>");

    let _ = writeln!(out, r#"<g id="demand">"#);
    for (d, &c) in instance.demand().iter().zip(&covered) {
        let (class, fill) = if c { ("covered", "red") } else { ("uncovered", "gray") };
        let _ = writeln!(
            out,
            r#"<circle class="{class}" cx="{:.3}" cy="{:.3}" r="3" fill="{fill}"/>"#,
            vp.x(d.point.coords()[0]),
            vp.y(d.point.coords()[1])
        );
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, "</svg>");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{assign_from_facilities, ContinuousType, DemandPoint};

    fn instance(rho: f64) -> Instance {
        let demand = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
            .iter()
            .map(|&(x, y)| DemandPoint { point: Point::xy(x, y), weight: 1.0 })
            .collect();
        Instance::new(2, demand, vec![], vec![ContinuousType::new(NormSpec::L2, rho, 1)]).unwrap()
    }

    fn solution(i: &Instance, center: Point) -> Solution {
        let centers = vec![vec![center]];
        let assignment = assign_from_facilities(i, &[], &centers);
        let mut s = Solution { assignment, continuous_centers: centers, objective: 0.0 };
        s.objective = evaluate(i, &s).objective;
        s
    }

    fn radius_attr(svg: &str) -> f64 {
        let line = svg.lines().find(|l| l.starts_with("<circle cx")).unwrap();
        let r = line.split("r=\"").nth(1).unwrap();
        r[..r.find('"').unwrap()].parse().unwrap()
    }

    #[test]
    fn uncovered_and_covered_styles() {
        let i = instance(0.1);
        let none = emit_svg(&i, &solution(&i, Point::xy(0.5, 0.5))).unwrap();
        assert_eq!(none.matches("class=\"uncovered\"").count(), 3);
        let big = instance(2.0);
        let all = emit_svg(&big, &solution(&big, Point::xy(0.3, 0.3))).unwrap();
        assert_eq!(all.matches("class=\"covered\"").count(), 3);
        assert_eq!(all.matches("fill=\"blue\"/>").count(), 1);
    }

    #[test]
    fn radius_scales_linearly() {
        // Keep the viewport fixed by placing the center at a demand point.
        let a = instance(0.1);
        let b = instance(0.2);
        let ra = radius_attr(&emit_svg(&a, &solution(&a, Point::xy(0.0, 0.0))).unwrap());
        let rb = radius_attr(&emit_svg(&b, &solution(&b, Point::xy(0.0, 0.0))).unwrap());
        let sa = (CANVAS - 2.0 * MARGIN) / (1.0 + 0.2);
        let sb = (CANVAS - 2.0 * MARGIN) / (1.0 + 0.4);
        assert!((ra - 0.1 * sa).abs() < 1e-3 && (rb - 0.2 * sb).abs() < 1e-3);
    }

    #[test]
    fn deterministic_and_planar_only() {
        let i = instance(0.3);
        let s = solution(&i, Point::xy(0.1, 0.1));
        assert_eq!(emit_svg(&i, &s).unwrap(), emit_svg(&i, &s).unwrap());
        let demand = vec![DemandPoint { point: Point::new(vec![0.0, 0.0, 0.0]), weight: 1.0 }];
        let d3 = Instance::new(3, demand, vec![], vec![ContinuousType::new(NormSpec::L2, 0.1, 1)]).unwrap();
        let s3 = solution(&d3, Point::new(vec![0.0; 3]));
        assert!(matches!(emit_svg(&d3, &s3), Err(Error::Capability(_))));
    }
}
