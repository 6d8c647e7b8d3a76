use std::fmt::Write as _;
use std::path::Path;

use super::HarnessError;

/// Width of the centered moving average, in evaluation points.
pub const SMOOTHING_WINDOW: usize = 5;

/// Centered moving average. Near the ends the window is truncated to the
/// points that exist, so the output has the same length as the input.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be positive");
    let half = window / 2;
    (0..xs.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(xs.len() - 1);
            let w = &xs[lo..=hi];
            w.iter().sum::<f64>() / w.len() as f64
        })
        .collect()
}

/// One line with an optional shaded band of `mean +- band`.
#[derive(Debug, Clone)]
pub struct PlotSeries {
    pub label: String,
    pub color: &'static str,
    pub mean: Vec<f64>,
    pub band: Vec<f64>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN: f64 = 60.0;

/// Renders smoothed curves with half-std bands as a standalone SVG.
pub fn render_svg(title: &str, steps: &[u64], series: &[PlotSeries]) -> String {
    let smoothed: Vec<(Vec<f64>, Vec<f64>)> = series
        .iter()
        .map(|s| {
            (
                moving_average(&s.mean, SMOOTHING_WINDOW),
                moving_average(&s.band, SMOOTHING_WINDOW),
            )
        })
        .collect();

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (m, b) in &smoothed {
        for (m, b) in m.iter().zip(b) {
            lo = lo.min(m - b);
            hi = hi.max(m + b);
        }
    }
    if !(lo.is_finite() && hi.is_finite()) {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo, hi) = (lo - 0.5, hi + 0.5);
    }
    let x_max = steps.last().copied().unwrap_or(0).max(1) as f64;
    let px = |step: u64| MARGIN + (WIDTH - 2.0 * MARGIN) * step as f64 / x_max;
    let py = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - lo) / (hi - lo);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" stroke="black" fill="none"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{x0}" y="{}" text-anchor="middle">0</text>"#,
        y0 + 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{x1}" y="{}" text-anchor="middle">{x_max}</text>"#,
        y0 + 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">environment steps</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="end">{hi:.3}</text>"#,
        x0 - 4.0,
        y1 + 4.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="end">{lo:.3}</text>"#,
        x0 - 4.0,
        y0 + 4.0
    );

    for (k, (s, (mean, band))) in series.iter().zip(&smoothed).enumerate() {
        let n = mean.len().min(steps.len());
        if n == 0 {
            continue;
        }
        let mut upper: Vec<String> = Vec::with_capacity(n);
        let mut lower: Vec<String> = Vec::with_capacity(n);
        for i in 0..n {
            upper.push(format!("{:.2},{:.2}", px(steps[i]), py(mean[i] + band[i])));
            lower.push(format!("{:.2},{:.2}", px(steps[i]), py(mean[i] - band[i])));
        }
        lower.reverse();
        let _ = writeln!(
            svg,
            r#"<polygon points="{} {}" fill="{}" fill-opacity="0.2" stroke="none"/>"#,
            upper.join(" "),
            lower.join(" "),
            s.color
        );
        let line: Vec<String> = (0..n)
            .map(|i| format!("{:.2},{:.2}", px(steps[i]), py(mean[i])))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            line.join(" "),
            s.color
        );
        let ly = MARGIN + 16.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{ly}" fill="{}">{}</text>"#,
            x1 - 150.0,
            s.color,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Plots any CSV written by this crate: a comparison CSV shows both arms with
/// half-std bands; a single learning curve shows its evaluation returns.
pub fn emit_plot(csv_path: &Path, out: &Path) -> Result<(), HarnessError> {
    let csv_err = |source| HarnessError::Csv {
        path: csv_path.to_path_buf(),
        source,
    };
    let mut rdr = csv::Reader::from_path(csv_path).map_err(csv_err)?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(String::from)
        .collect();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| {
                csv_err(csv::Error::from(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    e,
                )))
            })?;
        rows.push(row);
    }
    let column = |i: usize| rows.iter().map(|r| r[i]).collect::<Vec<f64>>();
    let bad_header = || {
        csv_err(csv::Error::from(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("unrecognised columns {headers:?}"),
        )))
    };
    let step_col = col("step").ok_or_else(bad_header)?;
    let steps: Vec<u64> = column(step_col).into_iter().map(|s| s as u64).collect();

    let series = match (
        col("mean_eecl"),
        col("halfstd_eecl"),
        col("mean_base"),
        col("halfstd_base"),
    ) {
        (Some(me), Some(he), Some(mb), Some(hb)) => vec![
            PlotSeries {
                label: "TD3 + EECL".into(),
                color: "#d62728",
                mean: column(me),
                band: column(he),
            },
            PlotSeries {
                label: "TD3".into(),
                color: "#1f77b4",
                mean: column(mb),
                band: column(hb),
            },
        ],
        _ => {
            let r = col("mean_eval_return").ok_or_else(bad_header)?;
            vec![PlotSeries {
                label: "mean evaluation return".into(),
                color: "#1f77b4",
                mean: column(r),
                band: vec![0.0; rows.len()],
            }]
        }
    };
    let title = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let svg = render_svg(&title, &steps, &series);
    std::fs::write(out, svg).map_err(|e| HarnessError::io(out, e))
}
