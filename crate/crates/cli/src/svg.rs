//! Standalone SVG pictures of the half disc: outline, colour-mapped field,
//! free-boundary polylines, reference rays and cones.

use std::fmt::Write as _;
use std::path::Path;

use bernoulli_core::blowup::ray_segment;
use bernoulli_core::closed_form::{Cone, ConeKind, GlobalSolution};
use bernoulli_core::experiments::Figure;
use bernoulli_core::{Error, Point, Result};

const SCALE: f64 = 360.0;
const MARGIN: f64 = 20.0;

/// `x1` to the right, `x2` up.
fn to_px(x: Point) -> (f64, f64) {
    (MARGIN + SCALE * x[0], MARGIN + SCALE * (1.0 - x[1]))
}

fn fmt_pt(x: Point) -> String {
    let (a, b) = to_px(x);
    format!("{a:.3},{b:.3}")
}

/// Red for positive, blue for negative, white at zero.
fn colour(v: f64, scale: f64) -> String {
    let t = if scale > 0.0 { (v / scale).clamp(-1.0, 1.0) } else { 0.0 };
    let fade = |t: f64| (255.0 * (1.0 - t.abs())).round() as u8;
    let (r, g, b) = if t >= 0.0 { (255, fade(t), fade(t)) } else { (fade(t), fade(t), 255) };
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn cone_polygon(cone: &Cone, radius: f64) -> Vec<Point> {
    let dir = |slope: f64, sign: f64| {
        let n = (1.0 + slope * slope).sqrt();
        [radius / n, sign * radius * slope / n]
    };
    match cone.kind {
        ConeKind::NonTangential { delta } => {
            let a = cone.apex;
            let n = (1.0 + delta * delta).sqrt();
            vec![a, [a[0] + radius * delta / n, a[1] + radius / n], [a[0] + radius * delta / n, a[1] - radius / n]]
        }
        ConeKind::SigmaPlus { sigma } => vec![[0.0, 0.0], dir(cone.gamma - sigma, 1.0), dir(cone.gamma + sigma, 1.0)],
        ConeKind::SigmaMinus { sigma } => vec![[0.0, 0.0], dir(cone.gamma - sigma, -1.0), dir(cone.gamma + sigma, -1.0)],
    }
}

/// Renders a figure as an SVG document.
pub fn render(fig: &Figure) -> Result<String> {
    let mut s = String::new();
    let w = 2.0 * MARGIN + SCALE;
    let h = 2.0 * MARGIN + 2.0 * SCALE;
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, "<title>{}</title>", fig.name);
    if let Some(field) = &fig.field {
        let mesh = field.mesh();
        let scale = field.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let _ = writeln!(s, r#"<g class="field" stroke="none">"#);
        for tri in mesh.triangles() {
            let mean = tri.iter().map(|&i| field.values()[i]).sum::<f64>() / 3.0;
            let pts: Vec<String> = tri.iter().map(|&i| fmt_pt(mesh.node(i))).collect();
            let _ = writeln!(s, r#"<polygon points="{}" fill="{}"/>"#, pts.join(" "), colour(mean, scale));
        }
        let _ = writeln!(s, "</g>");
    }
    let (top, bottom) = (to_px([0.0, 1.0]), to_px([0.0, -1.0]));
    let _ = writeln!(
        s,
        r#"<path class="outline" d="M {:.3},{:.3} L {:.3},{:.3} A {SCALE} {SCALE} 0 0 0 {:.3},{:.3} Z" fill="none" stroke="black" stroke-width="1.5"/>"#,
        top.0, top.1, bottom.0, bottom.1, top.0, top.1
    );
    for cone in &fig.cones {
        let pts: Vec<String> = cone_polygon(cone, 1.0).into_iter().map(fmt_pt).collect();
        let _ = writeln!(s, r##"<polygon class="cone" points="{}" fill="#88cc88" fill-opacity="0.3" stroke="green"/>"##, pts.join(" "));
    }
    for (variant, spec) in &fig.rays {
        let [a, b] = ray_segment(&GlobalSolution::new(*variant, *spec), 1.0)?;
        let (p, q) = (to_px(a), to_px(b));
        let _ = writeln!(
            s,
            r#"<line class="ray" x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="gray" stroke-dasharray="6,4"/>"#,
            p.0, p.1, q.0, q.1
        );
    }
    for comp in &fig.curve.components {
        let pts: Vec<String> = comp.points.iter().map(|p| fmt_pt(p.x)).collect();
        let _ = writeln!(s, r#"<polyline class="fb" points="{}" fill="none" stroke="black" stroke-width="2"/>"#, pts.join(" "));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_svg(fig: &Figure, path: &Path) -> Result<()> {
    std::fs::write(path, render(fig)?).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
