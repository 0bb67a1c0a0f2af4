//! Standalone SVG line and heat-map plots.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn extent(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        return None;
    }
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.05 };
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

fn header(out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n\
         <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n\
         <text transform=\"translate(18,{}) rotate(-90)\" text-anchor=\"middle\">{}</text>\n",
        (LEFT + W - RIGHT) / 2.0,
        escape(title),
        (LEFT + W - RIGHT) / 2.0,
        H - 15.0,
        escape(xlabel),
        (TOP + H - BOTTOM) / 2.0,
        escape(ylabel)
    );
}

fn axes(out: &mut String, (x0, x1): (f64, f64), (y0, y1): (f64, f64), log_y: bool) {
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let _ = writeln!(out, "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>");
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let px = LEFT + f * pw;
        let py = TOP + ph - f * ph;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let ytext = if log_y { format!("1e{yv:.1}") } else { format!("{yv:.3e}") };
        let _ = writeln!(
            out,
            "<line x1=\"{px}\" y1=\"{}\" x2=\"{px}\" y2=\"{}\" stroke=\"black\"/><text x=\"{px}\" y=\"{}\" text-anchor=\"middle\">{xv:.4}</text>",
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0
        );
        let _ = writeln!(
            out,
            "<line x1=\"{}\" y1=\"{py}\" x2=\"{LEFT}\" y2=\"{py}\" stroke=\"black\"/><text x=\"{}\" y=\"{}\" text-anchor=\"end\">{ytext}</text>",
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0
        );
    }
}

/// Lines through each series; with `log_y` non-positive values are dropped.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series], log_y: bool) -> String {
    let ty = |y: f64| if log_y { if y > 0.0 { y.log10() } else { f64::NAN } } else { y };
    let xr = extent(series.iter().flat_map(|s| s.points.iter().map(|p| p.0))).unwrap_or((0.0, 1.0));
    let yr = extent(series.iter().flat_map(|s| s.points.iter().map(|p| ty(p.1)))).unwrap_or((0.0, 1.0));
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let mut out = String::new();
    header(&mut out, title, xlabel, ylabel);
    axes(&mut out, xr, yr, log_y);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        let mut pen = false;
        for &(x, y) in &s.points {
            let y = ty(y);
            if !x.is_finite() || !y.is_finite() {
                pen = false;
                continue;
            }
            let px = LEFT + (x - xr.0) / (xr.1 - xr.0) * pw;
            let py = TOP + ph - (y - yr.0) / (yr.1 - yr.0) * ph;
            let _ = write!(d, "{}{px:.2},{py:.2} ", if pen { "L" } else { "M" });
            pen = true;
        }
        let _ = writeln!(out, "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>", d.trim_end());
        if i < 20 {
            let ly = TOP + 14.0 * i as f64 + 8.0;
            let _ = writeln!(
                out,
                "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/><text x=\"{}\" y=\"{}\">{}</text>",
                W - RIGHT + 10.0,
                W - RIGHT + 30.0,
                W - RIGHT + 35.0,
                ly + 4.0,
                escape(&s.name)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

fn diverging(t: f64) -> String {
    // t in [-1, 1]: blue through white to red.
    let t = t.clamp(-1.0, 1.0);
    let (r, g, b) = if t < 0.0 {
        let s = 1.0 + t;
        (s, s, 1.0)
    } else {
        (1.0, 1.0 - t, 1.0 - t)
    };
    format!("#{:02x}{:02x}{:02x}", (r * 255.0) as u8, (g * 255.0) as u8, (b * 255.0) as u8)
}

/// Heat map of `z[j][i]` at `(xs[i], ys[j])` with a colour scale symmetric about zero.
pub fn heat_map(title: &str, xlabel: &str, ylabel: &str, xs: &[f64], ys: &[f64], z: &[Vec<f64>]) -> String {
    let xr = extent(xs.iter().copied()).unwrap_or((0.0, 1.0));
    let yr = extent(ys.iter().copied()).unwrap_or((0.0, 1.0));
    let zmax = z.iter().flatten().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs()));
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let (cw, chh) = (pw / xs.len().max(1) as f64, ph / ys.len().max(1) as f64);
    let mut out = String::new();
    header(&mut out, title, xlabel, ylabel);
    for (j, row) in z.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            let fill = if v.is_finite() && zmax > 0.0 { diverging(v / zmax) } else { "#cccccc".to_string() };
            let _ = writeln!(
                out,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{fill}\"/>",
                LEFT + i as f64 * cw,
                TOP + ph - (j + 1) as f64 * chh,
                cw + 0.3,
                chh + 0.3
            );
        }
    }
    axes(&mut out, xr, yr, false);
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\">|z| max {zmax:.3e}</text>",
        W - RIGHT + 10.0,
        TOP + 10.0
    );
    for k in 0..=10 {
        let t = 1.0 - k as f64 / 5.0;
        let _ = writeln!(
            out,
            "<rect x=\"{}\" y=\"{}\" width=\"16\" height=\"14\" fill=\"{}\"/><text x=\"{}\" y=\"{}\">{:.2e}</text>",
            W - RIGHT + 10.0,
            TOP + 24.0 + 14.0 * k as f64,
            diverging(t),
            W - RIGHT + 30.0,
            TOP + 35.0 + 14.0 * k as f64,
            t * zmax
        );
    }
    out.push_str("</svg>\n");
    out
}
