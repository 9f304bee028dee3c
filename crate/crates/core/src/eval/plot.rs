//! Minimal deterministic SVG charts.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 360.0;
const PAD: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn frame(title: &str, y_label: &str, y_max: f64) -> String {
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n\
         <text x=\"14\" y=\"{}\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">{}</text>\n",
        W / 2.0,
        escape(title),
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    let _ = writeln!(s, "<line x1=\"{PAD}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>", H - PAD, W - 16.0, H - PAD);
    let _ = writeln!(s, "<line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{}\" stroke=\"black\"/>", H - PAD);
    for i in 0..=4 {
        let v = y_max * i as f64 / 4.0;
        let y = H - PAD - (H - 2.0 * PAD) * i as f64 / 4.0;
        let _ = writeln!(s, "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>", PAD - 6.0, y + 4.0, fmt_tick(v));
    }
    s
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 || (0.01..1000.0).contains(&v.abs()) { format!("{v:.2}") } else { format!("{v:.1e}") }
}

fn nice_max(values: impl Iterator<Item = f64>) -> f64 {
    let m = values.filter(|v| v.is_finite()).fold(0.0f64, f64::max);
    if m <= 0.0 { 1.0 } else { m * 1.1 }
}

/// Vertical bars, one per label.
pub fn bar_chart(title: &str, y_label: &str, bars: &[(String, f64)]) -> String {
    let y_max = nice_max(bars.iter().map(|b| b.1));
    let mut s = frame(title, y_label, y_max);
    let slot = (W - PAD - 16.0) / bars.len().max(1) as f64;
    for (i, (label, v)) in bars.iter().enumerate() {
        let h = (H - 2.0 * PAD) * v.max(0.0) / y_max;
        let x = PAD + slot * i as f64 + slot * 0.15;
        let _ = writeln!(
            s,
            "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{h:.1}\" fill=\"{}\"/>",
            H - PAD - h,
            slot * 0.7,
            PALETTE[i % PALETTE.len()]
        );
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{:.1}</text>", x + slot * 0.35, H - PAD - h - 4.0, v);
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>", x + slot * 0.35, H - PAD + 16.0, escape(label));
    }
    s.push_str("</svg>\n");
    s
}

/// Polylines over a shared x axis.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let y_max = nice_max(series.iter().flat_map(|s| s.1.iter().map(|p| p.1)));
    let xs = series.iter().flat_map(|s| s.1.iter().map(|p| p.0));
    let (x_min, x_max) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (x_min, x_max) = if x_min.is_finite() && x_max > x_min { (x_min, x_max) } else { (0.0, 1.0) };
    let mut s = frame(title, y_label, y_max);
    let px = |x: f64| PAD + (W - PAD - 16.0) * (x - x_min) / (x_max - x_min);
    let py = |y: f64| H - PAD - (H - 2.0 * PAD) * y / y_max;
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>", W / 2.0, H - 14.0, escape(x_label));
    let _ = writeln!(s, "<text x=\"{PAD}\" y=\"{}\" text-anchor=\"middle\">{}</text>", H - PAD + 16.0, fmt_tick(x_min));
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>", W - 16.0, H - PAD + 16.0, fmt_tick(x_max));
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts.iter().filter(|p| p.1.is_finite()).map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
        let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>", path.join(" "));
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>", PAD + 10.0, PAD + 16.0 * i as f64, escape(name));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_wellformed_and_deterministic() {
        let bars = vec![("a<b".to_string(), 72.3), ("c".to_string(), 80.0)];
        let svg = bar_chart("mCE", "%", &bars);
        assert_eq!(svg, bar_chart("mCE", "%", &bars));
        assert_eq!(svg.matches("<rect").count(), 3);
        assert!(svg.contains("a&lt;b") && svg.ends_with("</svg>\n"));
        let line = line_chart("FIM", "epoch", "trace", &[("run".into(), vec![(0.0, 1.0), (1.0, 3.0), (2.0, 2.0)])]);
        assert_eq!(line.matches("<polyline").count(), 1);
    }
}
