//! Self-contained SVG line plot with a logarithmic y axis.

use std::fmt::Write as _;

pub struct Series {
    pub label: String,
    pub color: &'static str,
    pub dashed: bool,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

/// Non-positive values cannot sit on a log axis and are dropped.
pub fn log_plot(title: &str, series: &[Series]) -> String {
    let positive = |s: &Series| s.points.iter().filter(|p| p.1 > 0.0 && p.1.is_finite()).copied().collect::<Vec<_>>();
    let kept: Vec<Vec<(f64, f64)>> = series.iter().map(positive).collect();
    let all = kept.iter().flatten();
    let (mut t0, mut t1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(t, y) in all {
        t0 = t0.min(t);
        t1 = t1.max(t);
        y0 = y0.min(y.log10());
        y1 = y1.max(y.log10());
    }
    if !t0.is_finite() {
        (t0, t1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
    if t1 <= t0 {
        t1 = t0 + 1.0;
    }
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |t: f64| LEFT + (t - t0) / (t1 - t0) * pw;
    let sy = |ly: f64| TOP + (y1 - ly) / (y1 - y0) * ph;

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(out, r#"<text x="{}" y="18" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, escape(title)).unwrap();
    writeln!(out, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#).unwrap();
    // one gridline per decade
    let mut d = y0;
    while d <= y1 + 0.5 {
        let y = sy(d);
        writeln!(out, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, LEFT + pw).unwrap();
        writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{}</text>"#, LEFT - 6.0, y + 4.0, d as i64).unwrap();
        d += 1.0;
    }
    for k in 0..=4 {
        let t = t0 + (t1 - t0) * k as f64 / 4.0;
        writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, sx(t), TOP + ph + 18.0, fmt_tick(t)).unwrap();
    }
    writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">t</text>"#, LEFT + pw / 2.0, HEIGHT - 10.0).unwrap();

    for (k, (s, pts)) in series.iter().zip(&kept).enumerate() {
        let coords: Vec<String> = pts.iter().map(|&(t, y)| format!("{:.2},{:.2}", sx(t), sy(y.log10()))).collect();
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5"{dash} points="{}"/>"#,
            s.color,
            coords.join(" ")
        )
        .unwrap();
        let ly = TOP + 14.0 + 18.0 * k as f64;
        let lx = LEFT + pw + 12.0;
        writeln!(out, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="1.5"{dash}/>"#, lx + 24.0, s.color).unwrap();
        writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 30.0, ly + 4.0, escape(&s.label)).unwrap();
    }
    out.push_str("</svg>\n");
    out
}

fn fmt_tick(t: f64) -> String {
    let s = format!("{t:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_polylines_and_balanced_tags() {
        let s = |label: &str, dashed| Series {
            label: label.into(),
            color: "black",
            dashed,
            points: (0..20).map(|k| (k as f64 * 0.1, (-(k as f64) * 0.1).exp())).collect(),
        };
        let svg = log_plot("E <and> I", &[s("E", false), s("bound", true)]);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("&lt;and&gt;"));
    }

    #[test]
    fn nonpositive_points_are_dropped() {
        let svg = log_plot("", &[Series { label: "z".into(), color: "red", dashed: false, points: vec![(0.0, 0.0), (1.0, -1.0)] }]);
        assert!(svg.contains(r#"points="""#));
    }
}
