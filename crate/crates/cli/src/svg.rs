//! Minimal line-chart SVG writer. Each figure embeds the plotted data as CSV
//! inside a comment block so the numbers travel with the picture.

use std::fmt::Write as _;

const PANEL_W: f64 = 520.0;
const PANEL_H: f64 = 260.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 130.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 40.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            name: name.into(),
            points,
            dashed: false,
        }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_tick(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.abs() >= 1e4 || x.abs() < 1e-2 {
        format!("{x:.1e}")
    } else {
        format!("{}", (x * 1000.0).round() / 1000.0)
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn draw_panel(out: &mut String, panel: &Panel, top: f64) {
    let all = || panel.series.iter().flat_map(|s| s.points.iter());
    let (x0, x1) = bounds(all().map(|p| p.0));
    let (y0, y1) = bounds(all().map(|p| p.1).chain([0.0]));
    let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
    let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| top + MARGIN_T + (1.0 - (y - y0) / (y1 - y0)) * plot_h;

    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{}</text>"#,
        MARGIN_L + plot_w / 2.0,
        top + 18.0,
        esc(&panel.title)
    );
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN_L}" y="{:.1}" width="{plot_w:.1}" height="{plot_h:.1}" fill="none" stroke="#444"/>"##,
        top + MARGIN_T
    );
    if y0 < 0.0 && y1 > 0.0 {
        let _ = writeln!(
            out,
            r##"<line x1="{MARGIN_L}" x2="{:.1}" y1="{:.1}" y2="{:.1}" stroke="#bbb"/>"##,
            MARGIN_L + plot_w,
            sy(0.0),
            sy(0.0)
        );
    }
    for (v, anchor) in [(y0, "end"), (y1, "end")] {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="{anchor}">{}</text>"#,
            MARGIN_L - 4.0,
            sy(v) + 3.0,
            fmt_tick(v)
        );
    }
    for (v, anchor) in [(x0, "start"), (x1, "end")] {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="{anchor}">{}</text>"#,
            sx(v),
            top + MARGIN_T + plot_h + 13.0,
            fmt_tick(v)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
        MARGIN_L + plot_w / 2.0,
        top + PANEL_H - 8.0,
        esc(&panel.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.1}" font-size="11" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        top + MARGIN_T + plot_h / 2.0,
        top + MARGIN_T + plot_h / 2.0,
        esc(&panel.y_label)
    );
    for (k, s) in panel.series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let dash = if s.dashed { r#" stroke-dasharray="5,3""# } else { "" };
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
            pts.join(" ")
        );
        let ly = top + MARGIN_T + 12.0 + 15.0 * k as f64;
        let lx = MARGIN_L + plot_w + 10.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.1}" x2="{:.1}" y1="{ly:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"{dash}/>"#,
            lx + 18.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="10">{}</text>"#,
            lx + 22.0,
            ly + 3.0,
            esc(&s.name)
        );
    }
}

/// Long-format `panel,series,x,y` rows.
fn data_csv(panels: &[Panel]) -> String {
    let mut out = String::from("panel,series,x,y\n");
    for p in panels {
        for s in &p.series {
            for (x, y) in &s.points {
                let _ = writeln!(out, "{},{},{x},{y}", p.title.replace(',', ";"), s.name.replace(',', ";"));
            }
        }
    }
    out
}

/// Panels stacked vertically. `stamp` adds a generation note.
pub fn figure(panels: &[Panel], stamp: Option<&str>) -> String {
    let height = PANEL_H * panels.len().max(1) as f64 + if stamp.is_some() { 16.0 } else { 0.0 };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_W}" height="{height}" viewBox="0 0 {PANEL_W} {height}" font-family="sans-serif">"#
    );
    // "--" may not appear inside an XML comment.
    let _ = writeln!(out, "<!-- data\n{}-->", data_csv(panels).replace("--", "- -"));
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (k, p) in panels.iter().enumerate() {
        draw_panel(&mut out, p, PANEL_H * k as f64);
    }
    if let Some(s) = stamp {
        let _ = writeln!(
            out,
            r##"<text x="4" y="{:.1}" font-size="9" fill="#888">{}</text>"##,
            height - 4.0,
            esc(s)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embeds_data_and_balances_tags() {
        let p = Panel {
            title: "A".into(),
            x_label: "m".into(),
            y_label: "strength".into(),
            series: vec![Series::new("pos", vec![(1.0, 2.0), (2.0, -0.5)])],
        };
        let svg = figure(&[p], None);
        assert!(svg.contains("A,pos,2,-0.5"));
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(!svg.contains("generated"));
    }
}
