//! Dependency-free SVG emitters for heatmaps, line plots and histograms.
//!
//! Output is deliberately plain (fixed canvas, embedded text) so files are
//! small, diffable and stable across runs with identical data.

/// Five-anchor perceptual color ramp (dark violet → yellow).
const RAMP: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

fn ramp_color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let i = (t.floor() as usize).min(RAMP.len() - 2);
    let f = t - i as f64;
    let (r0, g0, b0) = RAMP[i];
    let (r1, g1, b1) = RAMP[i + 1];
    format!(
        "rgb({},{},{})",
        (r0 + f * (r1 - r0)).round() as u8,
        (g0 + f * (g1 - g0)).round() as u8,
        (b0 + f * (b1 - b0)).round() as u8
    )
}

fn fmt(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.abs() >= 1e4 || x.abs() < 1e-3 {
        format!("{x:.3e}")
    } else {
        format!("{x:.4}")
    }
}

/// Render a `rows × cols` matrix (row-major, row 0 at the bottom) as a colored
/// cell grid with a min/max legend.
pub fn heatmap(values: &[f64], cols: usize, rows: usize, title: &str) -> String {
    assert_eq!(values.len(), cols * rows, "heatmap dims");
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let cell = (480.0 / cols.max(rows) as f64).clamp(4.0, 40.0);
    let (w, h) = (cols as f64 * cell, rows as f64 * cell);
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" \
         font-family=\"monospace\" font-size=\"12\">\n",
        w + 140.0,
        h + 50.0
    ));
    s.push_str(&format!("<text x=\"10\" y=\"20\">{}</text>\n", xml_escape(title)));
    for ry in 0..rows {
        for cx in 0..cols {
            let v = values[ry * cols + cx];
            // row 0 drawn at the bottom: y grows downward in SVG
            let y = 30.0 + (rows - 1 - ry) as f64 * cell;
            let x = 10.0 + cx as f64 * cell;
            s.push_str(&format!(
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{cell:.1}\" height=\"{cell:.1}\" \
                 fill=\"{}\"/>\n",
                ramp_color((v - lo) / span)
            ));
        }
    }
    s.push_str(&format!(
        "<text x=\"{}\" y=\"45\">max {}</text>\n<text x=\"{}\" y=\"{}\">min {}</text>\n",
        w + 20.0,
        fmt(hi),
        w + 20.0,
        h + 25.0,
        fmt(lo)
    ));
    s.push_str("</svg>\n");
    s
}

/// Render one or more named line series on shared axes.
pub fn line_plot(series: &[(&str, Vec<(f64, f64)>)], title: &str, xlabel: &str, ylabel: &str) -> String {
    const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let (w, h, ml, mb, mt, mr) = (560.0, 360.0, 70.0, 45.0, 35.0, 20.0);
    let pts: Vec<(f64, f64)> = series.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        x0 = 0.0;
        x1 = 1.0;
        y0 = 0.0;
        y1 = 1.0;
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let sy = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mb - mt);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         font-family=\"monospace\" font-size=\"12\">\n"
    );
    s.push_str(&format!("<text x=\"10\" y=\"20\">{}</text>\n", xml_escape(title)));
    s.push_str(&format!(
        "<rect x=\"{ml}\" y=\"{mt}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>\n",
        w - ml - mr,
        h - mb - mt
    ));
    // axis extremes
    s.push_str(&format!(
        "<text x=\"{ml}\" y=\"{}\">{}</text><text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
        h - mb + 15.0,
        fmt(x0),
        w - mr,
        h - mb + 15.0,
        fmt(x1)
    ));
    s.push_str(&format!(
        "<text x=\"5\" y=\"{}\">{}</text><text x=\"5\" y=\"{}\">{}</text>\n",
        h - mb,
        fmt(y0),
        mt + 10.0,
        fmt(y1)
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        (ml + w - mr) / 2.0,
        h - 8.0,
        xml_escape(xlabel)
    ));
    s.push_str(&format!(
        "<text x=\"14\" y=\"{}\" transform=\"rotate(-90 14 {})\" text-anchor=\"middle\">{}</text>\n",
        (mt + h - mb) / 2.0,
        (mt + h - mb) / 2.0,
        xml_escape(ylabel)
    ));
    for (si, (name, points)) in series.iter().enumerate() {
        let color = COLORS[si % COLORS.len()];
        let path: Vec<String> = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| {
                format!("{}{:.1},{:.1}", if i == 0 { "M" } else { "L" }, sx(x), sy(y))
            })
            .collect();
        s.push_str(&format!(
            "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            path.join(" ")
        ));
        for &(x, y) in points.iter() {
            s.push_str(&format!(
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"2.5\" fill=\"{color}\"/>\n",
                sx(x),
                sy(y)
            ));
        }
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>\n",
            ml + 8.0,
            mt + 16.0 + 14.0 * si as f64,
            xml_escape(name)
        ));
    }
    s.push_str("</svg>\n");
    s
}

/// Render a histogram of `values` with `bins` equal-width bins.
pub fn histogram(values: &[f64], bins: usize, title: &str, xlabel: &str) -> String {
    let bins = bins.max(1);
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if lo.is_finite() && hi > lo { (lo, hi) } else { (0.0, 1.0) };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let t = ((v - lo) / (hi - lo) * bins as f64).floor() as isize;
        counts[t.clamp(0, bins as isize - 1) as usize] += 1;
    }
    let peak = counts.iter().max().copied().unwrap_or(1).max(1) as f64;
    let (w, h, ml, mb, mt) = (560.0, 300.0, 50.0, 45.0, 35.0);
    let bw = (w - ml - 20.0) / bins as f64;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         font-family=\"monospace\" font-size=\"12\">\n"
    );
    s.push_str(&format!("<text x=\"10\" y=\"20\">{}</text>\n", xml_escape(title)));
    for (i, &c) in counts.iter().enumerate() {
        let bh = c as f64 / peak * (h - mb - mt);
        s.push_str(&format!(
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"#1f77b4\"/>\n",
            ml + i as f64 * bw,
            h - mb - bh,
            (bw - 1.0).max(0.5),
            bh
        ));
    }
    s.push_str(&format!(
        "<text x=\"{ml}\" y=\"{}\">{}</text><text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
        h - mb + 15.0,
        fmt(lo),
        w - 20.0,
        h - mb + 15.0,
        fmt(hi)
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        (ml + w - 20.0) / 2.0,
        h - 8.0,
        xml_escape(xlabel)
    ));
    s.push_str(&format!("<text x=\"5\" y=\"{}\">n={}</text>\n", mt + 10.0, values.len()));
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
