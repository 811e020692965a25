use std::fmt::Write;

use crate::engine::AggregatePoint;

/// `cost,mean,std` with one row per checkpoint.
pub fn curve_csv(points: &[AggregatePoint]) -> String {
    let mut out = String::from("cost,mean,std\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.cost, p.mean, p.std);
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Standalone SVG line plot of the mean curve with a ±1 std band.
pub fn curve_svg(points: &[AggregatePoint], title: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    if points.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let cmin = points.first().map_or(0.0, |p| p.cost as f64);
    let cmax = points.last().map_or(1.0, |p| p.cost as f64);
    let lo = points.iter().map(|p| p.mean - p.std).fold(f64::INFINITY, f64::min).clamp(0.0, 1.0);
    let hi = points.iter().map(|p| p.mean + p.std).fold(f64::NEG_INFINITY, f64::max).clamp(0.0, 1.0);
    let (lo, hi) = if hi - lo < 1e-9 { (lo - 0.05, hi + 0.05) } else { (lo, hi) };
    let sx = |c: f64| {
        if cmax > cmin {
            PAD + (c - cmin) / (cmax - cmin) * (W - 2.0 * PAD)
        } else {
            W / 2.0
        }
    };
    let sy = |v: f64| H - PAD - (v - lo) / (hi - lo) * (H - 2.0 * PAD);

    let _ = writeln!(
        svg,
        r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    for (v, anchor_y) in [(lo, sy(lo)), (hi, sy(hi))] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="11">{v:.3}</text>"#,
            PAD - 4.0,
            anchor_y + 4.0
        );
    }
    for c in [cmin, cmax] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">{c}</text>"#,
            sx(c),
            H - PAD + 16.0
        );
    }

    let mut band = String::new();
    for (i, p) in points.iter().enumerate() {
        let _ = write!(band, "{}{:.2} {:.2} ", if i == 0 { "M" } else { "L" }, sx(p.cost as f64), sy((p.mean + p.std).min(1.0)));
    }
    for p in points.iter().rev() {
        let _ = write!(band, "L{:.2} {:.2} ", sx(p.cost as f64), sy((p.mean - p.std).max(0.0)));
    }
    let _ = writeln!(svg, r##"<path d="{}Z" fill="#1f77b4" fill-opacity="0.2" stroke="none"/>"##, band);

    let line: Vec<String> = points
        .iter()
        .map(|p| format!("{:.2},{:.2}", sx(p.cost as f64), sy(p.mean)))
        .collect();
    let _ = writeln!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##,
        line.join(" ")
    );
    svg.push_str("</svg>\n");
    svg
}
