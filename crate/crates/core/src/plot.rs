// SPDX-License-Identifier: MIT OR Apache-2.0

//! Minimal static SVG output for grids and curves.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// White to dark blue over [0, 1].
fn shade(v: f64) -> String {
    let t = v.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(255.0, 8.0), lerp(255.0, 48.0), lerp(255.0, 107.0))
}

fn save(path: &Path, svg: String) -> Result<()> {
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}

/// Heatmap of values in [0, 1]; `None` cells are drawn grey with "n/a".
pub fn heatmap_svg(
    path: impl AsRef<Path>,
    title: &str,
    rows: &[String],
    columns: &[String],
    values: &[Vec<Option<f64>>],
) -> Result<()> {
    let (cell_w, cell_h, left, top) = (90.0, 40.0, 220.0, 140.0);
    let width = left + cell_w * columns.len() as f64 + 20.0;
    let height = top + cell_h * rows.len() as f64 + 20.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<text x="10" y="20" font-size="14">{}</text>"#, escape(title));
    for (j, c) in columns.iter().enumerate() {
        let x = left + cell_w * (j as f64 + 0.5);
        let _ = writeln!(
            s,
            r#"<text transform="translate({x},{}) rotate(-45)">{}</text>"#,
            top - 6.0,
            escape(c)
        );
    }
    for (i, r) in rows.iter().enumerate() {
        let y = top + cell_h * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            left - 6.0,
            y + cell_h * 0.6,
            escape(r)
        );
        for j in 0..columns.len() {
            let x = left + cell_w * j as f64;
            let v = values.get(i).and_then(|row| row.get(j)).copied().flatten();
            let (fill, label, ink) = match v {
                Some(v) => (shade(v), format!("{v:.2}"), if v > 0.5 { "white" } else { "black" }),
                None => ("#cccccc".to_string(), "n/a".to_string(), "black"),
            };
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{cell_w}" height="{cell_h}" fill="{fill}" stroke="white"/><text x="{}" y="{}" text-anchor="middle" fill="{ink}">{label}</text>"#,
                x + cell_w / 2.0,
                y + cell_h * 0.6
            );
        }
    }
    s.push_str("</svg>\n");
    save(path.as_ref(), s)
}

/// Line plot of accuracy-like series against positions `0..n`, y in [0, 1].
pub fn line_plot_svg(
    path: impl AsRef<Path>,
    title: &str,
    x_labels: &[String],
    series: &[(String, Vec<f64>)],
) -> Result<()> {
    let (w, h, left, top, right, bottom) = (640.0, 360.0, 60.0, 40.0, 180.0, 60.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let n = x_labels.len().max(1);
    let xpos = |i: usize| {
        if n == 1 {
            left + pw / 2.0
        } else {
            left + pw * i as f64 / (n - 1) as f64
        }
    };
    let ypos = |v: f64| top + ph * (1.0 - v.clamp(0.0, 1.0));
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<text x="10" y="20" font-size="14">{}</text>"#, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let _ = writeln!(
            s,
            r##"<line x1="{left}" x2="{}" y1="{y}" y2="{y}" stroke="#dddddd"/><text x="{}" y="{}" text-anchor="end">{v:.2}</text>"##,
            left + pw,
            left - 6.0,
            ypos(v) + 4.0,
            y = ypos(v)
        );
    }
    for (i, l) in x_labels.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            xpos(i),
            top + ph + 18.0,
            escape(l)
        );
    }
    for (k, (name, ys)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = ys
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.2},{:.2}", xpos(i), ypos(v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            points.join(" ")
        );
        let ly = top + 16.0 * k as f64 + 8.0;
        let _ = writeln!(
            s,
            r#"<line x1="{}" x2="{}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            left + pw + 10.0,
            left + pw + 30.0,
            left + pw + 34.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    save(path.as_ref(), s)
}

/// Grouped bar chart, one group per category, one bar per method.
pub fn bar_chart_svg(
    path: impl AsRef<Path>,
    title: &str,
    groups: &[String],
    methods: &[String],
    values: &[Vec<Option<f64>>],
) -> Result<()> {
    let (left, top, bottom, group_w) = (60.0, 40.0, 80.0, 30.0 * methods.len().max(1) as f64 + 30.0);
    let ph = 260.0;
    let w = left + group_w * groups.len() as f64 + 140.0;
    let h = top + ph + bottom;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<text x="10" y="20" font-size="14">{}</text>"#, escape(title));
    for (g, name) in groups.iter().enumerate() {
        let gx = left + group_w * g as f64 + 15.0;
        for (m, _) in methods.iter().enumerate() {
            if let Some(v) = values.get(g).and_then(|r| r.get(m)).copied().flatten() {
                let bh = ph * v.clamp(0.0, 1.0);
                let _ = writeln!(
                    s,
                    r#"<rect x="{}" y="{}" width="26" height="{bh}" fill="{}"/>"#,
                    gx + 30.0 * m as f64,
                    top + ph - bh,
                    PALETTE[m % PALETTE.len()]
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text transform="translate({},{}) rotate(30)">{}</text>"#,
            gx,
            top + ph + 14.0,
            escape(name)
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{left}" x2="{}" y1="{}" y2="{}" stroke="black"/>"#,
        left + group_w * groups.len() as f64,
        top + ph,
        top + ph
    );
    for (m, name) in methods.iter().enumerate() {
        let x = left + group_w * groups.len() as f64 + 10.0;
        let y = top + 16.0 * m as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{y}" width="12" height="12" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            PALETTE[m % PALETTE.len()],
            x + 16.0,
            y + 10.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    save(path.as_ref(), s)
}
