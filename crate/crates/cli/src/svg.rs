//! Hand-written SVG: grouped accuracy bars with interval whiskers and
//! score lines.

use std::fmt::Write;

const W: f64 = 900.0;
const H: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 90.0;
const PALETTE: [&str; 8] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#9c755f",
];

/// One bar: value with its interval.
#[derive(Debug, Clone, Copy)]
pub struct Bar {
    pub value: f64,
    pub low: f64,
    pub high: f64,
}

pub struct BarChart {
    pub title: String,
    pub y_label: String,
    pub groups: Vec<String>,
    /// Series name and one bar per group.
    pub series: Vec<(String, Vec<Bar>)>,
    /// Dashed horizontal reference line (1/n for accuracies).
    pub chance: Option<f64>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
}

fn y_axis(out: &mut String, lo: f64, hi: f64, label: &str) -> impl Fn(f64) -> f64 {
    let plot_h = H - TOP - BOTTOM;
    let span = if hi > lo { hi - lo } else { 1.0 };
    let y = move |v: f64| TOP + plot_h * (1.0 - (v - lo) / span);
    let _ = writeln!(
        out,
        r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.1}" stroke="black"/>"#,
        H - BOTTOM
    );
    for i in 0..=5 {
        let v = lo + span * i as f64 / 5.0;
        let yy = y(v);
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{yy:.1}" x2="{LEFT}" y2="{yy:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}</text>"#,
            LEFT - 4.0,
            LEFT - 6.0,
            yy + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text transform="translate(16,{:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + (H - TOP - BOTTOM) / 2.0,
        escape(label)
    );
    y
}

fn legend(out: &mut String, names: &[&str]) {
    for (i, name) in names.iter().enumerate() {
        let x = LEFT + 10.0 + 150.0 * (i % 5) as f64;
        let y = H - 30.0 + 14.0 * (i / 5) as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{y:.1}">{}</text>"#,
            y - 9.0,
            PALETTE[i % PALETTE.len()],
            x + 14.0,
            escape(name)
        );
    }
}

pub fn bar_chart(chart: &BarChart) -> String {
    let mut out = String::new();
    header(&mut out, &chart.title);
    let y = y_axis(&mut out, 0.0, 1.0, &chart.y_label);
    let plot_w = W - LEFT - RIGHT;
    let groups = chart.groups.len().max(1) as f64;
    let group_w = plot_w / groups;
    let n = chart.series.len().max(1) as f64;
    let bar_w = group_w * 0.8 / n;
    for (g, name) in chart.groups.iter().enumerate() {
        let gx = LEFT + group_w * g as f64;
        let _ = writeln!(
            out,
            r#"<text transform="translate({:.1},{:.1}) rotate(-40)" text-anchor="end">{}</text>"#,
            gx + group_w / 2.0,
            H - BOTTOM + 14.0,
            escape(name)
        );
        for (s, (_, bars)) in chart.series.iter().enumerate() {
            let Some(bar) = bars.get(g) else { continue };
            let x = gx + group_w * 0.1 + bar_w * s as f64;
            let top = y(bar.value.clamp(0.0, 1.0));
            let _ = writeln!(
                out,
                r#"<rect x="{x:.1}" y="{top:.1}" width="{bar_w:.1}" height="{:.1}" fill="{}"/>"#,
                y(0.0) - top,
                PALETTE[s % PALETTE.len()]
            );
            let cx = x + bar_w / 2.0;
            let (ylo, yhi) = (y(bar.low.clamp(0.0, 1.0)), y(bar.high.clamp(0.0, 1.0)));
            let _ = writeln!(
                out,
                r#"<path d="M{cx:.1},{ylo:.1}V{yhi:.1}M{:.1},{ylo:.1}H{:.1}M{:.1},{yhi:.1}H{:.1}" stroke="black" fill="none"/>"#,
                cx - 2.0,
                cx + 2.0,
                cx - 2.0,
                cx + 2.0
            );
        }
    }
    if let Some(c) = chart.chance {
        let _ = writeln!(
            out,
            r#"<line x1="{LEFT}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="gray" stroke-dasharray="5,4"/><text x="{:.1}" y="{:.1}" fill="gray" text-anchor="end">chance {c:.2}</text>"#,
            y(c),
            W - RIGHT,
            y(c),
            W - RIGHT,
            y(c) - 3.0
        );
    }
    let names: Vec<&str> = chart.series.iter().map(|(n, _)| n.as_str()).collect();
    legend(&mut out, &names);
    out.push_str("</svg>\n");
    out
}

pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<(String, Vec<(f64, f64)>)>,
    /// Vertical marker, e.g. a known break frame.
    pub marker: Option<f64>,
}

pub fn line_chart(chart: &LineChart) -> String {
    let mut out = String::new();
    header(&mut out, &chart.title);
    let points = chart.series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in points {
        if x.is_finite() && y.is_finite() {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if y1 - y0 < 1e-9 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let y = y_axis(&mut out, y0, y1, &chart.y_label);
    let plot_w = W - LEFT - RIGHT;
    let xs = if x1 > x0 { x1 - x0 } else { 1.0 };
    let x = |v: f64| LEFT + plot_w * (v - x0) / xs;
    let _ = writeln!(
        out,
        r#"<line x1="{LEFT}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
        H - BOTTOM,
        W - RIGHT,
        H - BOTTOM
    );
    for i in 0..=5 {
        let v = x0 + xs * i as f64 / 5.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{v:.0}</text>"#,
            x(v),
            H - BOTTOM + 14.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        H - BOTTOM + 32.0,
        escape(&chart.x_label)
    );
    for (s, (_, pts)) in chart.series.iter().enumerate() {
        let mut d = String::new();
        for (i, &(px, py)) in pts.iter().filter(|(a, b)| a.is_finite() && b.is_finite()).enumerate() {
            let _ = write!(d, "{}{:.1},{:.1}", if i == 0 { "M" } else { "L" }, x(px), y(py));
        }
        let _ = writeln!(
            out,
            r#"<path d="{d}" stroke="{}" fill="none" stroke-width="1.5"/>"#,
            PALETTE[s % PALETTE.len()]
        );
    }
    if let Some(m) = chart.marker {
        let _ = writeln!(
            out,
            r#"<line x1="{:.1}" y1="{TOP}" x2="{:.1}" y2="{:.1}" stroke="gray" stroke-dasharray="4,3"/>"#,
            x(m),
            x(m),
            H - BOTTOM
        );
    }
    let names: Vec<&str> = chart.series.iter().map(|(n, _)| n.as_str()).collect();
    legend(&mut out, &names);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chance_line_sits_at_a_quarter() {
        let chart = BarChart {
            title: "t".into(),
            y_label: "accuracy".into(),
            groups: vec!["size".into()],
            series: vec![(
                "mcpc".into(),
                vec![Bar {
                    value: 0.5,
                    low: 0.4,
                    high: 0.6,
                }],
            )],
            chance: Some(0.25),
        };
        let svg = bar_chart(&chart);
        // plot spans y = 40 (1.0) to 330 (0.0)
        assert!(svg.contains(r#"y1="257.5""#), "{svg}");
        assert!(svg.contains("chance 0.25"));
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }

    #[test]
    fn line_chart_skips_non_finite_points() {
        let chart = LineChart {
            title: "scores".into(),
            x_label: "frame".into(),
            y_label: "score".into(),
            series: vec![("s".into(), vec![(0.0, 1.0), (1.0, f64::NAN), (2.0, 3.0)])],
            marker: Some(1.0),
        };
        let svg = line_chart(&chart);
        assert!(!svg.contains("NaN"));
        let d = svg.split("<path d=\"").nth(1).unwrap().split('"').next().unwrap();
        assert!(d.starts_with("M60.0,"));
        assert_eq!(d.matches('L').count(), 1);
    }
}
