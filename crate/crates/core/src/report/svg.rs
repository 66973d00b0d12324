//! Minimal static SVG charts: descending bar charts and yearly line plots.

use std::fmt::Write;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 80.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 60.0;

/// `8.74E-09` style: three significant digits, two-digit signed exponent.
pub fn sci3(v: f64) -> String {
    if v == 0.0 {
        return "0.00E+00".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let s = format!("{v:.2e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}E{sign}{:02}", exp.abs())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String) {
    let (x0, y0, x1, y1) = (MARGIN_L, HEIGHT - MARGIN_B, WIDTH - MARGIN_R, MARGIN_T);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
}

fn nice_max(v: f64) -> f64 {
    if !(v > 0.0) {
        return 1.0;
    }
    let mag = 10f64.powf(v.log10().floor());
    for m in [1.0, 2.0, 2.5, 5.0, 10.0] {
        if m * mag >= v {
            return m * mag;
        }
    }
    10.0 * mag
}

/// Bars in the given order, labeled with `labels` and annotated with
/// [`sci3`] values.
pub fn bar_chart(title: &str, bars: &[(String, f64)]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out);
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let ymax = nice_max(bars.iter().map(|b| b.1).fold(0.0, f64::max));
    for i in 0..=4 {
        let v = ymax * i as f64 / 4.0;
        let y = HEIGHT - MARGIN_B - plot_h * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN_L - 6.0,
            y + 4.0,
            sci3(v)
        );
        let _ = writeln!(
            out,
            r##"<line x1="{MARGIN_L}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/>"##,
            WIDTH - MARGIN_R
        );
    }
    if !bars.is_empty() {
        let slot = plot_w / bars.len() as f64;
        let bw = slot * 0.7;
        for (i, (label, v)) in bars.iter().enumerate() {
            let h = (v.max(0.0) / ymax) * plot_h;
            let x = MARGIN_L + slot * i as f64 + (slot - bw) / 2.0;
            let y = HEIGHT - MARGIN_B - h;
            let _ = writeln!(
                out,
                r##"<rect x="{x:.2}" y="{y:.2}" width="{bw:.2}" height="{h:.2}" fill="#4c72b0"><title>{} {}</title></rect>"##,
                escape(label),
                sci3(*v)
            );
            let cx = x + bw / 2.0;
            let _ = writeln!(
                out,
                r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                HEIGHT - MARGIN_B + 14.0,
                escape(label)
            );
            let _ = writeln!(
                out,
                r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle" font-size="8" transform="rotate(-90 {cx:.2} {:.2})">{}</text>"#,
                y - 4.0,
                y - 4.0,
                sci3(*v)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// A named polyline over years.
pub struct Line<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub dashed: bool,
    pub points: Vec<(i32, f64)>,
}

/// Vertical interval whiskers drawn at given years.
pub struct Whisker {
    pub year: i32,
    pub lower: f64,
    pub upper: f64,
}

pub fn line_chart(title: &str, lines: &[Line<'_>], whiskers: &[Whisker]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out);
    let all_years = lines
        .iter()
        .flat_map(|l| l.points.iter().map(|p| p.0))
        .chain(whiskers.iter().map(|w| w.year));
    let (ymin_year, ymax_year) = all_years.fold((i32::MAX, i32::MIN), |(a, b), y| (a.min(y), b.max(y)));
    let values = lines
        .iter()
        .flat_map(|l| l.points.iter().map(|p| p.1))
        .chain(whiskers.iter().flat_map(|w| [w.lower, w.upper]));
    let (vmin, vmax) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if ymin_year > ymax_year || !vmin.is_finite() {
        out.push_str("</svg>\n");
        return out;
    }
    let pad = ((vmax - vmin) * 0.05).max(vmax.abs() * 1e-3).max(1.0);
    let (lo, hi) = (vmin - pad, vmax + pad);
    let span_years = ((ymax_year - ymin_year) as f64).max(1.0);
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |year: i32| MARGIN_L + plot_w * (year - ymin_year) as f64 / span_years;
    let sy = |v: f64| HEIGHT - MARGIN_B - plot_h * (v - lo) / (hi - lo);

    for year in ymin_year..=ymax_year {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{year}</text>"#,
            sx(year),
            HEIGHT - MARGIN_B + 14.0
        );
    }
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{:.0}</text>"#,
            MARGIN_L - 6.0,
            sy(v) + 4.0,
            v
        );
    }
    for (k, line) in lines.iter().enumerate() {
        let pts: Vec<String> = line
            .points
            .iter()
            .map(|&(y, v)| format!("{:.2},{:.2}", sx(y), sy(v)))
            .collect();
        let dash = if line.dashed { r#" stroke-dasharray="5,3""# } else { "" };
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
            pts.join(" "),
            line.color
        );
        for &(y, v) in &line.points {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{}"/>"#,
                sx(y),
                sy(v),
                line.color
            );
        }
        let ly = MARGIN_T + 14.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{ly:.2}" fill="{}">{}</text>"#,
            MARGIN_L + 10.0,
            line.color,
            escape(line.label)
        );
    }
    for w in whiskers {
        let x = sx(w.year);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#c44e52" stroke-width="1.2"/>"##,
            sy(w.lower),
            sy(w.upper)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sci3_matches_table_style() {
        assert_eq!(sci3(8.74e-9), "8.74E-09");
        assert_eq!(sci3(1.88e-6), "1.88E-06");
        assert_eq!(sci3(0.0), "0.00E+00");
        assert_eq!(sci3(12345.0), "1.23E+04");
    }

    #[test]
    fn bar_chart_has_one_rect_per_bar() {
        let bars = vec![("MT".to_string(), 2e-6), ("LU".to_string(), 2.7e-7)];
        let svg = bar_chart("I_F 2020", &bars);
        assert_eq!(svg.matches("<rect x=").count(), 2);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains(">MT<"));
    }

    #[test]
    fn line_chart_handles_empty_input() {
        let svg = line_chart("empty", &[], &[]);
        assert!(svg.ends_with("</svg>\n"));
    }
}
