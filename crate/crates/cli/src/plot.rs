use std::path::{Path, PathBuf};
use vsnash::{Error, Result};

/// One CSV trace reduced to (x, y) pairs in data space; the log transforms
/// happen at render time so empty checks see the raw values.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 20.0;
const MARGIN_B: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

const Y_COLUMNS: [&str; 3] = ["mse", "rel_err", "consensus_err"];
const X_COLUMNS: [&str; 2] = ["k", "samples"];

fn column_index(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| {
        Error::Config(format!("{}: no column '{name}'", path.display()))
    })
}

/// Trace files are conventionally named `trace.csv` inside a per-experiment
/// directory, so the directory name is the informative label.
fn label_for(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
    if stem == "trace" {
        if let Some(dir) = path.parent().and_then(|p| p.file_name()).and_then(|s| s.to_str()) {
            return dir.to_string();
        }
    }
    stem.to_string()
}

pub fn load_series(path: &Path, column: &str, x_axis: &str) -> Result<Series> {
    if !Y_COLUMNS.contains(&column) {
        return Err(Error::Config(format!(
            "plot column must be one of {Y_COLUMNS:?}, got '{column}'"
        )));
    }
    if !X_COLUMNS.contains(&x_axis) {
        return Err(Error::Config(format!(
            "x axis must be one of {X_COLUMNS:?}, got '{x_axis}'"
        )));
    }
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        .clone();
    let xi = column_index(&headers, x_axis, path)?;
    let yi = column_index(&headers, column, path)?;
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let cell = |i: usize| record.get(i).unwrap_or("").trim().parse::<f64>().ok();
        if let (Some(x), Some(y)) = (cell(xi), cell(yi)) {
            points.push((x, y));
        }
    }
    Ok(Series { label: label_for(path), points })
}

fn pad_if_flat(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo > 1e-12 {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn tick_label(t: f64, log_scale: bool, span: f64) -> String {
    if log_scale {
        format!("{:.0e}", 10f64.powf(t))
    } else if span >= 10.0 {
        format!("{t:.0}")
    } else {
        format!("{t:.2}")
    }
}

/// Render log-scale error curves as one SVG panel. Returns None when no
/// series has a positive finite value to draw.
pub fn render_svg(series: &[Series], x_label: &str, y_label: &str, log_x: bool) -> Option<String> {
    let cleaned: Vec<(&str, Vec<(f64, f64)>)> = series
        .iter()
        .map(|s| {
            let pts: Vec<(f64, f64)> = s
                .points
                .iter()
                .filter(|(x, y)| y.is_finite() && *y > 0.0 && x.is_finite() && (!log_x || *x > 0.0))
                .map(|&(x, y)| (if log_x { x.log10() } else { x }, y.log10()))
                .collect();
            (s.label.as_str(), pts)
        })
        .collect();
    if cleaned.iter().all(|(_, p)| p.is_empty()) {
        return None;
    }
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for (_, pts) in &cleaned {
        for &(x, y) in pts {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
    }
    let (xmin, xmax) = pad_if_flat(xmin, xmax);
    let (ymin, ymax) = pad_if_flat(ymin, ymax);
    let px = |x: f64| MARGIN_L + (x - xmin) / (xmax - xmin) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |y: f64| HEIGHT - MARGIN_B - (y - ymin) / (ymax - ymin) * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\">\n"
    ));
    svg.push_str(&format!("<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"));

    let ticks = 5;
    for i in 0..ticks {
        let f = i as f64 / (ticks - 1) as f64;
        let tx = xmin + f * (xmax - xmin);
        let ty = ymin + f * (ymax - ymin);
        let gx = px(tx);
        let gy = py(ty);
        svg.push_str(&format!(
            "<line x1=\"{gx:.2}\" y1=\"{:.2}\" x2=\"{gx:.2}\" y2=\"{:.2}\" stroke=\"#dddddd\"/>\n",
            MARGIN_T,
            HEIGHT - MARGIN_B
        ));
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{gy:.2}\" x2=\"{:.2}\" y2=\"{gy:.2}\" stroke=\"#dddddd\"/>\n",
            MARGIN_L,
            WIDTH - MARGIN_R
        ));
        svg.push_str(&format!(
            "<text x=\"{gx:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            HEIGHT - MARGIN_B + 16.0,
            tick_label(tx, log_x, xmax - xmin)
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            MARGIN_L - 6.0,
            gy + 4.0,
            tick_label(ty, true, ymax - ymin)
        ));
    }
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#333333\"/>\n",
        HEIGHT - MARGIN_B,
        WIDTH - MARGIN_R,
        HEIGHT - MARGIN_B
    ));
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{}\" stroke=\"#333333\"/>\n",
        HEIGHT - MARGIN_B
    ));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{x_label}</text>\n",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\" \
         transform=\"rotate(-90 16 {:.2})\">{y_label}</text>\n",
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0
    ));

    for (idx, (label, pts)) in cleaned.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        let color = PALETTE[idx % PALETTE.len()];
        let coords: Vec<String> =
            pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            coords.join(" ")
        ));
        let ly = MARGIN_T + 14.0 + 16.0 * idx as f64;
        let lx = WIDTH - MARGIN_R - 150.0;
        svg.push_str(&format!(
            "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            lx + 20.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{:.2}\" font-size=\"11\">{label}</text>\n",
            lx + 26.0,
            ly + 4.0
        ));
    }
    svg.push_str("</svg>\n");
    Some(svg)
}

/// Load each trace, render one panel, write it to `out`. An all-empty input
/// set warns and writes nothing.
pub fn plot_files(
    paths: &[PathBuf],
    column: &str,
    x_axis: &str,
    out: &Path,
) -> Result<Option<PathBuf>> {
    let series: Vec<Series> =
        paths.iter().map(|p| load_series(p, column, x_axis)).collect::<Result<_>>()?;
    let (x_label, log_x) = match x_axis {
        "samples" => ("samples (log)", true),
        _ => ("iteration k", false),
    };
    match render_svg(&series, x_label, &format!("{column} (log)"), log_x) {
        None => {
            eprintln!("warning: no positive finite values in {column}; nothing to plot");
            Ok(None)
        }
        Some(svg) => {
            std::fs::write(out, svg)
                .map_err(|e| Error::Config(format!("{}: {e}", out.display())))?;
            Ok(Some(out.to_path_buf()))
        }
    }
}
