//! Top-down (x-z) trajectory plot.

use std::fmt::Write;

use depthvo_core::Vec3;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 30.0;

pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub points: &'a [Vec3],
}

pub fn trajectory_plot(title: &str, series: &[Series<'_>]) -> String {
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut z0, mut z1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in all {
        (x0, x1, z0, z1) = (x0.min(p.x), x1.max(p.x), z0.min(p.z), z1.max(p.z));
    }
    if !x0.is_finite() {
        (x0, x1, z0, z1) = (-1.0, 1.0, -1.0, 1.0);
    }
    // Equal axis scaling, centered.
    let span = (x1 - x0).max(z1 - z0).max(1e-9);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let (cx, cz) = ((x0 + x1) / 2.0, (z0 + z1) / 2.0);
    let map = |p: &Vec3| (SIZE / 2.0 + (p.x - cx) * scale, SIZE / 2.0 - (p.z - cz) * scale);

    let mut out = String::new();
    writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#).unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(out, r#"<text x="{MARGIN}" y="18" font-family="sans-serif" font-size="13">{}</text>"#, escape(title)).unwrap();
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = s.points.iter().map(|p| {
            let (u, v) = map(p);
            format!("{u:.2},{v:.2}")
        }).collect();
        writeln!(out, r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#, s.color, pts.join(" ")).unwrap();
        let y = SIZE - MARGIN / 2.0 - 16.0 * (series.len() - 1 - i) as f64;
        writeln!(out, r#"<line x1="{MARGIN}" y1="{y}" x2="{}" y2="{y}" stroke="{}" stroke-width="2"/>"#, MARGIN + 20.0, s.color).unwrap();
        writeln!(out, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#, MARGIN + 26.0, y + 4.0, escape(s.label)).unwrap();
    }
    writeln!(out, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">x right, z up</text>"#, SIZE - MARGIN, SIZE - 8.0).unwrap();
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_polyline_per_series() {
        let a = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 2.0)];
        let b = [Vec3::new(0.0, 5.0, 0.0)];
        let svg = trajectory_plot("t <1>", &[Series { label: "gt", color: "black", points: &a }, Series { label: "est", color: "red", points: &b }]);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("t &lt;1&gt;") && svg.ends_with("</svg>\n"));
        // Span 2 in z maps onto 420 px, centered on (0.5, 1).
        assert!(svg.contains("points=\"135.00,450.00 345.00,30.00\""), "{svg}");
    }
}
