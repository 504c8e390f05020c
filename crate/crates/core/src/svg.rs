//! Minimal SVG line and scatter plots for trace figures.

use std::fmt::Write;

const W: f64 = 800.0;
const H: f64 = 300.0;
const PAD: f64 = 40.0;

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() && hi > lo {
        (lo, hi)
    } else {
        (lo - 1.0, lo + 1.0)
    }
}

/// Points `(x, y, class)`; class 0 and 1 get different colours.
pub fn scatter(title: &str, x: &[f64], y: &[f64], class: &[usize]) -> String {
    let (x0, x1) = bounds(x);
    let (y0, y1) = bounds(y);
    let px = |v: f64| PAD + (v - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |v: f64| H - PAD - (v - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut s = String::new();
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = write!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = write!(
        s,
        r#"<text x="{PAD}" y="20" font-family="sans-serif" font-size="14">{title}</text>"#
    );
    let _ = write!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = write!(
        s,
        r#"<text x="2" y="{}" font-size="10">{y1:.3}</text>"#,
        PAD + 4.0
    );
    let _ = write!(
        s,
        r#"<text x="2" y="{}" font-size="10">{y0:.3}</text>"#,
        H - PAD
    );
    for ((&a, &b), &c) in x.iter().zip(y).zip(class) {
        let colour = if c == 0 { "#aaaaaa" } else { "#000000" };
        let _ = write!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1" fill="{colour}"/>"#,
            px(a),
            py(b)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Polyline through `(x, y)`.
pub fn line(title: &str, x: &[f64], y: &[f64]) -> String {
    let (x0, x1) = bounds(x);
    let (y0, y1) = bounds(y);
    let px = |v: f64| PAD + (v - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |v: f64| H - PAD - (v - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut pts = String::new();
    for (&a, &b) in x.iter().zip(y) {
        let _ = write!(pts, "{:.2},{:.2} ", px(a), py(b));
    }
    let mut s = String::new();
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = write!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = write!(
        s,
        r#"<text x="{PAD}" y="20" font-family="sans-serif" font-size="14">{title}</text>"#
    );
    let _ = write!(
        s,
        r#"<polyline fill="none" stroke="black" stroke-width="1" points="{}"/>"#,
        pts.trim_end()
    );
    s.push_str("</svg>\n");
    s
}
