//! Re-plotting and summarizing a finished run directory from its CSV
//! tables alone: no simulation, no RNG, so `report` is cheap and cannot
//! change any result.
//!
//! SVGs are hand-rolled with fixed-precision coordinates; rendering the
//! same table twice gives the same bytes.

use std::fs;
use std::io;
use std::path::Path;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const ML: f64 = 70.0;
const MR: f64 = 18.0;
const MT: f64 = 34.0;
const MB: f64 = 46.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Line through the points (sorted by x) instead of markers.
    pub draw_line: bool,
}

fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{v:.1e}")
    }
}

fn range_of(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        let pad = lo.abs().max(1.0) * 0.1;
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

/// One fixed-size chart. `y_categories` replaces numeric y ticks with the
/// given labels at y = 0, 1, ... (used by the exponents dot plot).
pub fn chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    y_categories: Option<&[String]>,
) -> String {
    let (x_lo, x_hi) = range_of(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y_lo, y_hi) = match y_categories {
        Some(cats) => (-0.75, cats.len() as f64 - 0.25),
        None => range_of(series.iter().flat_map(|s| s.points.iter().map(|p| p.1))),
    };
    let px = |x: f64| ML + (x - x_lo) / (x_hi - x_lo) * (WIDTH - ML - MR);
    let py = |y: f64| HEIGHT - MB - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - MT - MB);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\" font-size=\"11\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n",
        (ML + WIDTH - MR) / 2.0,
        title
    ));

    // Ticks and grid.
    for i in 0..=4 {
        let x = x_lo + (x_hi - x_lo) * i as f64 / 4.0;
        let gx = px(x);
        svg.push_str(&format!(
            "<line x1=\"{gx:.2}\" y1=\"{:.2}\" x2=\"{gx:.2}\" y2=\"{:.2}\" stroke=\"#dddddd\"/>\n",
            MT, HEIGHT - MB
        ));
        svg.push_str(&format!(
            "<text x=\"{gx:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n",
            HEIGHT - MB + 16.0,
            fmt_tick(x)
        ));
    }
    match y_categories {
        Some(cats) => {
            for (i, label) in cats.iter().enumerate() {
                let gy = py(i as f64);
                svg.push_str(&format!(
                    "<line x1=\"{ML}\" y1=\"{gy:.2}\" x2=\"{:.2}\" y2=\"{gy:.2}\" stroke=\"#dddddd\"/>\n",
                    WIDTH - MR
                ));
                svg.push_str(&format!(
                    "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n",
                    ML - 6.0,
                    gy + 4.0,
                    label
                ));
            }
        }
        None => {
            for i in 0..=4 {
                let y = y_lo + (y_hi - y_lo) * i as f64 / 4.0;
                let gy = py(y);
                svg.push_str(&format!(
                    "<line x1=\"{ML}\" y1=\"{gy:.2}\" x2=\"{:.2}\" y2=\"{gy:.2}\" stroke=\"#dddddd\"/>\n",
                    WIDTH - MR
                ));
                svg.push_str(&format!(
                    "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n",
                    ML - 6.0,
                    gy + 4.0,
                    fmt_tick(y)
                ));
            }
        }
    }

    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#333333\"/>\n",
        HEIGHT - MB,
        WIDTH - MR,
        HEIGHT - MB
    ));
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{:.2}\" stroke=\"#333333\"/>\n",
        HEIGHT - MB
    ));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n",
        (ML + WIDTH - MR) / 2.0,
        HEIGHT - 8.0,
        x_label
    ));
    svg.push_str(&format!(
        "<text x=\"14\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.2})\">{}</text>\n",
        (MT + HEIGHT - MB) / 2.0,
        (MT + HEIGHT - MB) / 2.0,
        y_label
    ));

    // Data.
    for (si, s) in series.iter().enumerate() {
        let c = color(si);
        if s.draw_line {
            let mut pts: Vec<(f64, f64)> = s.points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let joined: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", px(p.0), py(p.1))).collect();
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{c}\" stroke-width=\"1.5\"/>\n",
                joined.join(" ")
            ));
        } else {
            for p in &s.points {
                if p.0.is_finite() && p.1.is_finite() {
                    svg.push_str(&format!(
                        "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{c}\"/>\n",
                        px(p.0),
                        py(p.1)
                    ));
                }
            }
        }
    }

    // Legend, top right inside the plot area.
    for (si, s) in series.iter().enumerate() {
        let y = MT + 8.0 + 14.0 * si as f64;
        let x = WIDTH - MR - 170.0;
        svg.push_str(&format!(
            "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n",
            y - 9.0,
            color(si)
        ));
        svg.push_str(&format!("<text x=\"{:.2}\" y=\"{y:.2}\">{}</text>\n", x + 14.0, s.label));
    }

    svg.push_str("</svg>\n");
    svg
}

/// Parse a CSV written by this binary: header row, comma cells, no quoting.
pub fn read_table(path: &Path) -> io::Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "empty table"))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    Ok((header, rows))
}

fn f(cell: &str) -> f64 {
    cell.parse().unwrap_or(f64::NAN)
}

fn dedup_keys(keys: impl Iterator<Item = String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for k in keys {
        if !out.contains(&k) {
            out.push(k);
        }
    }
    out
}

fn plot_tails(dir: &Path, rows: &[Vec<String>]) -> String {
    // H,n_or_T,delta,r,estimate,stderr,envelope,censored
    let _ = dir;
    let keys = dedup_keys(rows.iter().map(|r| format!("H={} n={}", f(&r[0]), r[1])));
    let mut series = Vec::new();
    for key in keys {
        let sub: Vec<&Vec<String>> =
            rows.iter().filter(|r| format!("H={} n={}", f(&r[0]), r[1]) == key).collect();
        series.push(Series {
            label: format!("{key} tail"),
            points: sub.iter().map(|r| (f(&r[3]), f(&r[4]))).collect(),
            draw_line: false,
        });
        series.push(Series {
            label: format!("{key} envelope"),
            points: sub.iter().map(|r| (f(&r[3]), f(&r[6]).min(1.5))).collect(),
            draw_line: true,
        });
    }
    chart("Tail estimates against envelopes", "threshold r", "P(statistic > r)", &series, None)
}

fn plot_exponents(rows: &[Vec<String>]) -> String {
    // H,quantity,slope,slope_stderr,target
    let labels: Vec<String> = rows.iter().map(|r| format!("H={} {}", f(&r[0]), r[1])).collect();
    let measured = Series {
        label: "measured slope".into(),
        points: rows.iter().enumerate().map(|(i, r)| (f(&r[2]), i as f64)).collect(),
        draw_line: false,
    };
    let target = Series {
        label: "target".into(),
        points: rows.iter().enumerate().map(|(i, r)| (f(&r[4]), i as f64)).collect(),
        draw_line: false,
    };
    chart("Scaling exponents: measured against target", "log-log slope", "", &[measured, target], Some(&labels))
}

fn plot_psi(rows: &[Vec<String>]) -> String {
    // H,n_or_T,k,psi,psi_sq_cumsum,growth_exponent
    let keys = dedup_keys(rows.iter().map(|r| format!("H={} n={}", f(&r[0]), r[1])));
    let series: Vec<Series> = keys
        .into_iter()
        .map(|key| Series {
            label: key.clone(),
            points: rows
                .iter()
                .filter(|r| format!("H={} n={}", f(&r[0]), r[1]) == key)
                .map(|r| (f(&r[2]).log10(), f(&r[4]).log10()))
                .collect(),
            draw_line: true,
        })
        .collect();
    chart("Growth of the squared psi sums", "log10 k", "log10 cumulative psi^2", &series, None)
}

fn plot_supbm(rows: &[Vec<String>]) -> String {
    // x,p,estimate,stderr,comparator; tail rows have p = 0.
    let tails: Vec<&Vec<String>> = rows.iter().filter(|r| r[1] == "0").collect();
    let est = Series {
        label: "MC tail".into(),
        points: tails.iter().map(|r| (f(&r[0]), f(&r[2]))).collect(),
        draw_line: false,
    };
    let cmp = Series {
        label: "exp comparator (capped)".into(),
        points: tails.iter().map(|r| (f(&r[0]), f(&r[4]).min(1.5))).collect(),
        draw_line: true,
    };
    chart("Running-maximum tails", "threshold x", "P(sup |W| > x)", &[est, cmp], None)
}

fn plot_gmoments(rows: &[Vec<String>]) -> String {
    // v,v_prime,k,H,second_moment,bound_ratio
    let keys = dedup_keys(rows.iter().map(|r| format!("k={}", r[2])));
    let series: Vec<Series> = keys
        .into_iter()
        .map(|key| Series {
            label: key.clone(),
            points: rows
                .iter()
                .filter(|r| format!("k={}", r[2]) == key)
                .map(|r| ((f(&r[0]) - f(&r[1])).abs(), f(&r[5])))
                .collect(),
            draw_line: false,
        })
        .collect();
    chart("Increment moment against the Holder comparator", "|v - v'|", "moment / |v - v'|^(2a)", &series, None)
}

fn plot_paths(rows: &[Vec<String>], title: &str) -> String {
    // t,comp_0,...: one line per component.
    let dim = rows.first().map_or(0, |r| r.len().saturating_sub(1));
    let series: Vec<Series> = (0..dim.min(4))
        .map(|c| Series {
            label: format!("comp_{c}"),
            points: rows.iter().map(|r| (f(&r[0]), f(&r[c + 1]))).collect(),
            draw_line: true,
        })
        .collect();
    chart(title, "t", "value", &series, None)
}

/// Render every plot the directory's tables support; returns the file names
/// written under plots/.
pub fn render_plots(dir: &Path) -> io::Result<Vec<String>> {
    let plots = dir.join("plots");
    fs::create_dir_all(&plots)?;
    let mut written = Vec::new();
    let mut emit = |name: &str, svg: String| -> io::Result<()> {
        fs::write(plots.join(name), svg)?;
        written.push(format!("plots/{name}"));
        Ok(())
    };

    if let Ok((_, rows)) = read_table(&dir.join("tails.csv")) {
        if !rows.is_empty() {
            emit("tails.svg", plot_tails(dir, &rows))?;
        }
    }
    if let Ok((_, rows)) = read_table(&dir.join("exponents.csv")) {
        if !rows.is_empty() {
            emit("exponents.svg", plot_exponents(&rows))?;
        }
    }
    if let Ok((_, rows)) = read_table(&dir.join("psi.csv")) {
        if !rows.is_empty() {
            emit("psi.svg", plot_psi(&rows))?;
        }
    }
    if let Ok((_, rows)) = read_table(&dir.join("supbm.csv")) {
        if !rows.is_empty() {
            emit("supbm.svg", plot_supbm(&rows))?;
        }
    }
    if let Ok((_, rows)) = read_table(&dir.join("gmoments.csv")) {
        if !rows.is_empty() {
            emit("gmoments.svg", plot_gmoments(&rows))?;
        }
    }
    if let Ok((_, rows)) = read_table(&dir.join("path_000.csv")) {
        if !rows.is_empty() {
            emit("paths.svg", plot_paths(&rows, "Sampled driving paths (replica 0)"))?;
        }
    }
    if let Ok((_, rows)) = read_table(&dir.join("trajectory_000.csv")) {
        if !rows.is_empty() {
            emit("trajectories.svg", plot_paths(&rows, "SDE trajectory (replica 0)"))?;
        }
    }
    Ok(written)
}

/// Human summary of a run directory: the criteria table when present,
/// otherwise the tables found.
pub fn summarize(dir: &Path) -> io::Result<String> {
    let criteria = dir.join("criteria.csv");
    if criteria.exists() {
        let (_, rows) = read_table(&criteria)?;
        let mut out = String::new();
        let mut passed = 0usize;
        for r in &rows {
            let ok = r[2] == "true";
            passed += usize::from(ok);
            out.push_str(&format!(
                "criterion {:>2} {} {}: {}\n",
                r[0],
                if ok { "pass" } else { "FAIL" },
                r[1],
                r.get(3).map(String::as_str).unwrap_or("")
            ));
        }
        out.push_str(&format!("{passed}/{} criteria passed\n", rows.len()));
        return Ok(out);
    }
    let mut out = String::new();
    let mut entries: Vec<_> = fs::read_dir(dir)?.filter_map(Result::ok).collect();
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let name = e.file_name().to_string_lossy().into_owned();
        if name.ends_with(".csv") {
            let (_, rows) = read_table(&e.path())?;
            out.push_str(&format!("table {name}: {} rows\n", rows.len()));
        }
    }
    if out.is_empty() {
        out.push_str("no tables in this run directory\n");
    }
    Ok(out)
}
