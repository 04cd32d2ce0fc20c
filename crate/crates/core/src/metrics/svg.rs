//! Minimal SVG plots: activity traces, PR curves and predicted-vs-actual
//! minute scatters.

use std::fmt::Write;

use super::aggregate::AggregateTimeReport;
use super::ap::PrCurve;

const PALETTE: [&str; 9] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
];

fn color(c: usize) -> &'static str {
    PALETTE[c % PALETTE.len()]
}

fn open(w: u32, h: u32) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

/// Run-length segments `(start, end, class)` of a label sequence.
pub fn segments(labels: &[usize]) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=labels.len() {
        if i == labels.len() || labels[i] != labels[start] {
            out.push((start, i, labels[start]));
            start = i;
        }
    }
    out
}

/// Two stacked colour bands (predicted above, actual below) over time.
pub fn trace_svg(predicted: &[usize], actual: Option<&[usize]>, class_names: &[&str], hop_ms: f64) -> String {
    let (w, left, band) = (900.0, 70.0, 28.0);
    let n = predicted.len().max(1) as f64;
    let plot_w = w - left - 20.0;
    let rows: Vec<(&str, &[usize])> = std::iter::once(("predicted", predicted))
        .chain(actual.map(|a| ("actual", a)))
        .collect();
    let h = 40.0 + rows.len() as f64 * (band + 10.0) + 40.0;
    let mut s = open(w as u32, h as u32);
    for (r, (name, labels)) in rows.iter().enumerate() {
        let y = 20.0 + r as f64 * (band + 10.0);
        let _ = writeln!(s, "<text x=\"4\" y=\"{:.1}\">{name}</text>", y + band / 2.0 + 4.0);
        for (a, b, c) in segments(labels) {
            let x0 = left + a as f64 / n * plot_w;
            let x1 = left + b as f64 / n * plot_w;
            let _ = writeln!(
                s,
                "<rect x=\"{x0:.2}\" y=\"{y:.1}\" width=\"{:.2}\" height=\"{band}\" fill=\"{}\"/>",
                (x1 - x0).max(0.01),
                color(c)
            );
        }
    }
    let ly = h - 30.0;
    let minutes = n * hop_ms / 60_000.0;
    let _ = writeln!(s, "<text x=\"{left}\" y=\"{:.1}\">0 min</text>", ly - 4.0);
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{minutes:.1} min</text>",
        left + plot_w,
        ly - 4.0
    );
    for (c, name) in class_names.iter().enumerate() {
        let x = left + c as f64 * 70.0;
        let _ = writeln!(
            s,
            "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{}\"/>",
            ly + 4.0,
            color(c)
        );
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\">{name}</text>", x + 14.0, ly + 13.0);
    }
    s.push_str("</svg>\n");
    s
}

fn axes(s: &mut String, x0: f64, y0: f64, size: f64, xlabel: &str, ylabel: &str, max: f64) {
    let _ = writeln!(
        s,
        "<rect x=\"{x0}\" y=\"{}\" width=\"{size}\" height=\"{size}\" fill=\"none\" stroke=\"black\"/>",
        y0 - size
    );
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{xlabel}</text>",
        x0 + size / 2.0,
        y0 + 28.0
    );
    let _ = writeln!(
        s,
        "<text x=\"12\" y=\"{:.1}\" transform=\"rotate(-90 12 {:.1})\" text-anchor=\"middle\">{ylabel}</text>",
        y0 - size / 2.0,
        y0 - size / 2.0
    );
    let _ = writeln!(
        s,
        "<text x=\"{x0}\" y=\"{:.1}\" text-anchor=\"middle\">0</text>",
        y0 + 14.0
    );
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{max:.3}</text>",
        x0 + size,
        y0 + 14.0
    );
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{max:.3}</text>",
        x0 - 4.0,
        y0 - size + 4.0
    );
}

/// One step-wise polyline per class in the unit square.
pub fn pr_svg(curves: &[PrCurve], class_names: &[&str]) -> String {
    let (x0, y0, size) = (50.0, 430.0, 380.0);
    let mut s = open(560, 470);
    axes(&mut s, x0, y0, size, "recall", "precision", 1.0);
    for (k, c) in curves.iter().enumerate() {
        let mut pts = String::new();
        let mut prev_r = 0.0;
        for (&r, &p) in c.recall.iter().zip(&c.precision) {
            let py = y0 - p * size;
            let _ = write!(pts, "{:.2},{py:.2} {:.2},{py:.2} ", x0 + prev_r * size, x0 + r * size);
            prev_r = r;
        }
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>",
            pts.trim_end(),
            color(c.class)
        );
        let name = class_names.get(c.class).copied().unwrap_or("?");
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{}\">{name}</text>",
            x0 + size + 10.0,
            60.0 + k as f64 * 14.0,
            color(c.class)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Predicted (vertical) vs actual (horizontal) minutes per session and activity.
pub fn aggregate_svg(report: &AggregateTimeReport) -> String {
    let (x0, y0, size) = (50.0, 430.0, 380.0);
    let max = report
        .sessions
        .iter()
        .flat_map(|s| s.predicted_minutes.iter().chain(&s.actual_minutes))
        .fold(1e-9f64, |a, &b| a.max(b));
    let mut s = open(560, 470);
    axes(&mut s, x0, y0, size, "actual minutes", "predicted minutes", max);
    let _ = writeln!(
        s,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>",
        x0 + size,
        y0 - size
    );
    for sess in &report.sessions {
        for c in 0..report.class_names.len() {
            let cx = x0 + sess.actual_minutes[c] / max * size;
            let cy = y0 - sess.predicted_minutes[c] / max * size;
            let _ = writeln!(
                s,
                "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"3\" fill=\"{}\"/>",
                color(c)
            );
        }
    }
    for (c, name) in report.class_names.iter().enumerate() {
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{}\">{name} {:.2}</text>",
            x0 + size + 10.0,
            60.0 + c as f64 * 14.0,
            color(c),
            report.rmse_minutes[c]
        );
    }
    s.push_str("</svg>\n");
    s
}
