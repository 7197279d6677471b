//! Static SVG output: field heatmaps and curve plots, written directly.

use std::fmt::Write as _;
use std::path::Path;

use crate::domain::{Mask, ScalarField};
use crate::error::Result;

/// Cells per axis of a heatmap; finer grids are subsampled.
const HEATMAP_CELLS: usize = 128;
const SIZE: f64 = 480.0;

/// Blue (negative) through white (zero) to red (positive), symmetric in the
/// largest magnitude.
fn diverging(t: f64) -> (u8, u8, u8) {
    let t = t.clamp(-1.0, 1.0);
    let mix = |a: f64, b: f64, s: f64| (a + (b - a) * s).round() as u8;
    if t < 0.0 {
        let s = -t;
        (mix(255.0, 33.0, s), mix(255.0, 102.0, s), mix(255.0, 172.0, s))
    } else {
        (mix(255.0, 178.0, t), mix(255.0, 24.0, t), mix(255.0, 43.0, t))
    }
}

/// Heatmap of `field` over the active nodes, outlining `highlight` nodes
/// (for example a contact set) in black.
pub fn heatmap(field: &ScalarField, highlight: Option<&Mask>, title: &str, path: &Path) -> Result<()> {
    let g = field.grid();
    let n = g.n();
    let stride = n.div_ceil(HEATMAP_CELLS).max(1);
    let cells = n.div_ceil(stride);
    let cell = SIZE / cells as f64;
    let scale = field.max_abs().max(1e-300);
    let mut s = String::new();
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = SIZE,
        h = SIZE + 30.0
    );
    let _ = write!(
        s,
        r#"<text x="4" y="18" font-family="sans-serif" font-size="14">{} (|u| max {:.4e})</text>"#,
        escape(title),
        scale
    );
    let _ = write!(s, r#"<g transform="translate(0,30)" shape-rendering="crispEdges">"#);
    for cj in 0..cells {
        for ci in 0..cells {
            let (i, j) = ((ci * stride).min(n - 1), (cj * stride).min(n - 1));
            let k = g.index(i, j);
            if !g.is_active(k) {
                continue;
            }
            let (r, gr, b) = diverging(field.at(k) / scale);
            // Row 0 of the lattice is the bottom of the picture.
            let y = (cells - 1 - cj) as f64 * cell;
            let _ = write!(
                s,
                r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#{r:02x}{gr:02x}{b:02x}"/>"##,
                ci as f64 * cell,
                y,
                cell,
                cell
            );
        }
    }
    if let Some(mask) = highlight {
        for k in mask.indices() {
            let (i, j) = g.ij(k);
            let (x, y) = (
                (i as f64 / stride as f64 + 0.5) * cell,
                (cells as f64 - j as f64 / stride as f64 - 0.5) * cell,
            );
            let _ = write!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="1.2" fill="black"/>"#);
        }
    }
    s.push_str("</g></svg>\n");
    std::fs::write(path, s)?;
    Ok(())
}

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Polyline plot; `log_x`/`log_y` plot the base-10 logarithm of the axis.
pub fn line_plot(
    title: &str,
    x_label: &str,
    series: &[Series<'_>],
    log_x: bool,
    log_y: bool,
    path: &Path,
) -> Result<()> {
    let tx = |v: f64| if log_x { v.log10() } else { v };
    let ty = |v: f64| if log_y { v.log10() } else { v };
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .map(|&(x, y)| (tx(x), ty(y)))
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .collect()
        })
        .collect();
    let all = pts.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let (left, top, w, h) = (60.0, 30.0, SIZE - 80.0, SIZE - 80.0);
    let px = |x: f64| left + (x - x0) / (x1 - x0) * w;
    let py = |y: f64| top + h - (y - y0) / (y1 - y0) * h;
    let mut s = String::new();
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}" font-family="sans-serif" font-size="12">"#
    );
    let _ = write!(s, r#"<text x="4" y="18" font-size="14">{}</text>"#, escape(title));
    let _ = write!(
        s,
        r#"<rect x="{left}" y="{top}" width="{w}" height="{h}" fill="none" stroke="black"/>"#
    );
    let fmt = |v: f64, log: bool| if log { format!("1e{v:.2}") } else { format!("{v:.4}") };
    let _ = write!(
        s,
        r#"<text x="{left}" y="{}">{}</text><text x="{}" y="{}" text-anchor="end">{}</text>"#,
        top + h + 16.0,
        fmt(x0, log_x),
        left + w,
        top + h + 16.0,
        fmt(x1, log_x)
    );
    let _ = write!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        left + w / 2.0,
        top + h + 34.0,
        escape(x_label)
    );
    let _ = write!(
        s,
        r#"<text x="{}" y="{}" text-anchor="end">{}</text><text x="{}" y="{}" text-anchor="end">{}</text>"#,
        left - 4.0,
        top + h,
        fmt(y0, log_y),
        left - 4.0,
        top + 10.0,
        fmt(y1, log_y)
    );
    for (idx, (ser, p)) in series.iter().zip(&pts).enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let line: Vec<String> = p
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = write!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
        let _ = write!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            left + 8.0,
            top + 16.0 + 14.0 * idx as f64,
            escape(ser.label)
        );
    }
    s.push_str("</svg>\n");
    std::fs::write(path, s)?;
    Ok(())
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Grid, GridSpec};

    #[test]
    fn palette_is_white_at_zero() {
        assert_eq!(diverging(0.0), (255, 255, 255));
        let (r, _, b) = diverging(1.0);
        assert!(r > b);
        let (r, _, b) = diverging(-1.0);
        assert!(b > r);
    }

    #[test]
    fn writes_well_formed_files() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::build(GridSpec::new(33).unwrap()).unwrap();
        let u = ScalarField::from_fn(g.clone(), |x, y| x - y);
        let p = dir.path().join("u.svg");
        heatmap(&u, None, "u < 1 & more", &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("<svg") && text.trim_end().ends_with("</svg>"));
        assert!(text.contains("&lt;"));
        let q = dir.path().join("n.svg");
        let series = [Series {
            label: "N",
            points: vec![(0.1, 0.5), (0.2, 0.51), (0.0, 1.0)],
        }];
        line_plot("N(r)", "r", &series, true, false, &q).unwrap();
        let text = std::fs::read_to_string(&q).unwrap();
        assert!(text.contains("polyline"));
    }
}
