//! Minimal static SVG charts: line plots with bands, heatmaps, box plots.
//!
//! Output depends only on the input numbers, so reruns give identical files.

use std::fmt::Write;

const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

pub const CAD_COLOR: &str = "#c0392b";
pub const NORMAL_COLOR: &str = "#2471a3";

pub struct Series<'a> {
    pub name: &'a str,
    pub color: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
    /// Lower and upper edge of a shaded band around `y`.
    pub band: Option<(&'a [f64], &'a [f64])>,
}

pub struct BoxGroup {
    pub label: String,
    pub cad: Vec<f64>,
    pub normal: Vec<f64>,
    pub stars: &'static str,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n\
         <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n\
         <text transform=\"translate(16 {:.1}) rotate(-90)\" text-anchor=\"middle\">{}</text>\n",
        W / 2.0,
        esc(title),
        LEFT + (W - LEFT - RIGHT) / 2.0,
        H - 14.0,
        esc(xlabel),
        TOP + (H - TOP - BOTTOM) / 2.0,
        esc(ylabel)
    );
}

fn nice_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let raw = (hi - lo) / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1000.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }

    fn axes(&self, out: &mut String, x_ticks: bool) {
        let _ = writeln!(
            out,
            "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"#444\"/>",
            W - LEFT - RIGHT,
            H - TOP - BOTTOM
        );
        for t in nice_ticks(self.y0, self.y1, 6) {
            let y = self.py(t);
            let _ = writeln!(
                out,
                "<line x1=\"{:.1}\" x2=\"{LEFT}\" y1=\"{y:.1}\" y2=\"{y:.1}\" stroke=\"#444\"/><text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
                LEFT - 4.0,
                LEFT - 6.0,
                y + 4.0,
                fmt_tick(t)
            );
        }
        if x_ticks {
            for t in nice_ticks(self.x0, self.x1, 8) {
                let x = self.px(t);
                let _ = writeln!(
                    out,
                    "<line x1=\"{x:.1}\" x2=\"{x:.1}\" y1=\"{:.1}\" y2=\"{:.1}\" stroke=\"#444\"/><text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
                    H - BOTTOM,
                    H - BOTTOM + 4.0,
                    H - BOTTOM + 18.0,
                    fmt_tick(t)
                );
            }
        }
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn polyline(frame: &Frame, x: &[f64], y: &[f64]) -> String {
    x.iter()
        .zip(y)
        .map(|(a, b)| format!("{:.1},{:.1}", frame.px(*a), frame.py(*b)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn legend(out: &mut String, items: &[(&str, &str)]) {
    for (i, (name, color)) in items.iter().enumerate() {
        let y = TOP + 14.0 + 16.0 * i as f64;
        let x = W - RIGHT - 120.0;
        let _ = writeln!(
            out,
            "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"12\" height=\"10\" fill=\"{color}\"/><text x=\"{:.1}\" y=\"{y:.1}\">{}</text>",
            y - 9.0,
            x + 18.0,
            esc(name)
        );
    }
}

pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let mut out = String::new();
    header(&mut out, title, xlabel, ylabel);
    let (x0, x1) = range(series.iter().flat_map(|s| s.x.iter().copied()));
    let ys = series.iter().flat_map(|s| {
        let band = s.band.map(|(lo, hi)| lo.iter().chain(hi).copied().collect::<Vec<_>>());
        s.y.iter().copied().chain(band.unwrap_or_default())
    });
    let (y0, y1) = range(ys);
    let frame = Frame { x0, x1, y0, y1 };
    frame.axes(&mut out, true);
    for s in series {
        if let Some((lo, hi)) = s.band {
            let upper = polyline(&frame, s.x, hi);
            let lower: Vec<f64> = lo.iter().rev().copied().collect();
            let xr: Vec<f64> = s.x.iter().rev().copied().collect();
            let _ = writeln!(
                out,
                "<polygon points=\"{upper} {}\" fill=\"{}\" fill-opacity=\"0.2\" stroke=\"none\"/>",
                polyline(&frame, &xr, &lower),
                s.color
            );
        }
        let _ = writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>",
            polyline(&frame, s.x, s.y),
            s.color
        );
    }
    legend(&mut out, &series.iter().map(|s| (s.name, s.color)).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}

fn diverging(v: f64, scale: f64) -> String {
    let t = if scale > 0.0 { (v / scale).clamp(-1.0, 1.0) } else { 0.0 };
    let (r, g, b) = if t >= 0.0 {
        (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
    } else {
        (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

/// `values[row][col]`, drawn with row 0 at the bottom. Colours are symmetric
/// around zero.
pub fn heatmap(title: &str, xlabel: &str, ylabel: &str, values: &[Vec<f64>], row_labels: &[String]) -> String {
    let mut out = String::new();
    header(&mut out, title, xlabel, ylabel);
    let rows = values.len().max(1);
    let cols = values.first().map_or(1, |r| r.len().max(1));
    let scale = values.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let frame = Frame {
        x0: 0.0,
        x1: cols as f64,
        y0: 0.0,
        y1: rows as f64,
    };
    let cw = (W - LEFT - RIGHT) / cols as f64;
    let ch = (H - TOP - BOTTOM) / rows as f64;
    for (r, row) in values.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let _ = writeln!(
                out,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                frame.px(c as f64),
                frame.py((r + 1) as f64),
                cw + 0.05,
                ch + 0.05,
                diverging(v, scale)
            );
        }
    }
    for (r, label) in row_labels.iter().enumerate() {
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            LEFT - 6.0,
            frame.py(r as f64 + 0.5) + 4.0,
            esc(label)
        );
    }
    for t in nice_ticks(0.0, cols as f64, 8) {
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            frame.px(t),
            H - BOTTOM + 18.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        out,
        "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"#444\"/>",
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"11\">red: CAD higher, blue: Normal higher (max |diff| {scale:.3})</text>",
        W - RIGHT,
        TOP - 6.0
    );
    out.push_str("</svg>\n");
    out
}

fn quartiles(v: &[f64]) -> [f64; 5] {
    let mut s: Vec<f64> = v.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (s.len() - 1) as f64;
        let (i, f) = (pos.floor() as usize, pos.fract());
        if i + 1 < s.len() {
            s[i] * (1.0 - f) + s[i + 1] * f
        } else {
            s[i]
        }
    };
    [s[0], q(0.25), q(0.5), q(0.75), s[s.len() - 1]]
}

/// Paired CAD / Normal boxes per group, with significance stars above each pair.
pub fn box_plot(title: &str, ylabel: &str, groups: &[BoxGroup]) -> String {
    let mut out = String::new();
    header(&mut out, title, "", ylabel);
    let (y0, y1) = range(groups.iter().flat_map(|g| g.cad.iter().chain(&g.normal).copied()));
    let y1 = y1 + 0.08 * (y1 - y0);
    let frame = Frame {
        x0: 0.0,
        x1: groups.len().max(1) as f64,
        y0,
        y1,
    };
    frame.axes(&mut out, false);
    let slot = (W - LEFT - RIGHT) / groups.len().max(1) as f64;
    let bw = (slot * 0.28).min(40.0);
    for (i, g) in groups.iter().enumerate() {
        let centre = frame.px(i as f64 + 0.5);
        for (data, dx, color) in [(&g.cad, -0.6, CAD_COLOR), (&g.normal, 0.6, NORMAL_COLOR)] {
            if data.is_empty() {
                continue;
            }
            let [lo, q1, med, q3, hi] = quartiles(data);
            let x = centre + dx * bw;
            let _ = writeln!(
                out,
                "<line x1=\"{x:.1}\" x2=\"{x:.1}\" y1=\"{:.1}\" y2=\"{:.1}\" stroke=\"{color}\"/>\
                 <rect x=\"{:.1}\" y=\"{:.1}\" width=\"{bw:.1}\" height=\"{:.1}\" fill=\"{color}\" fill-opacity=\"0.3\" stroke=\"{color}\"/>\
                 <line x1=\"{:.1}\" x2=\"{:.1}\" y1=\"{:.1}\" y2=\"{:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>",
                frame.py(lo),
                frame.py(hi),
                x - bw / 2.0,
                frame.py(q3),
                (frame.py(q1) - frame.py(q3)).max(0.5),
                x - bw / 2.0,
                x + bw / 2.0,
                frame.py(med),
                frame.py(med)
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{centre:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"11\">{}</text>",
            H - BOTTOM + 18.0,
            esc(&g.label)
        );
        if !g.stars.is_empty() {
            let _ = writeln!(
                out,
                "<text x=\"{centre:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"16\">{}</text>",
                TOP + 16.0,
                g.stars
            );
        }
    }
    for (i, (name, color)) in [("CAD", CAD_COLOR), ("Normal", NORMAL_COLOR)].iter().enumerate() {
        let x = LEFT + 80.0 * i as f64;
        let _ = writeln!(
            out,
            "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"12\" height=\"10\" fill=\"{color}\"/><text x=\"{:.1}\" y=\"{:.1}\">{name}</text>",
            TOP - 17.0,
            x + 18.0,
            TOP - 8.0
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_cover_range() {
        let t = nice_ticks(0.0, 1000.0, 8);
        assert_eq!(t.first(), Some(&0.0));
        assert_eq!(t.last(), Some(&1000.0));
    }

    #[test]
    fn quartiles_of_five() {
        assert_eq!(quartiles(&[5.0, 1.0, 3.0, 2.0, 4.0]), [1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn charts_are_well_formed() {
        let x = [0.0, 1.0, 2.0];
        let y = [1.0, 3.0, 2.0];
        let s = line_chart(
            "a<b",
            "x",
            "y",
            &[Series {
                name: "s",
                color: CAD_COLOR,
                x: &x,
                y: &y,
                band: Some((&x, &y)),
            }],
        );
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains("a&lt;b"));
        let h = heatmap("h", "x", "y", &[vec![1.0, -1.0]], &["c0".into()]);
        assert!(h.contains("#ff0000") && h.contains("#0000ff"));
        let b = box_plot(
            "b",
            "v",
            &[BoxGroup {
                label: "f".into(),
                cad: vec![1.0, 2.0],
                normal: vec![3.0],
                stars: "**",
            }],
        );
        assert!(b.contains("**"));
    }
}
