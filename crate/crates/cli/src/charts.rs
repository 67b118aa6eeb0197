//! Self-contained SVG line and step charts, rendered from the CSV outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::Chart;
use crate::CliError;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Draw as a right-continuous step function.
    pub step: bool,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn bounds(series: &[Series], pick: impl Fn(&(f64, f64)) -> f64) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in series
        .iter()
        .flat_map(|s| s.points.iter().map(&pick))
        .filter(|v| v.is_finite())
    {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

/// Renders a chart; `x_range`/`y_range` default to the data bounds.
pub fn render(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    x_range: Option<(f64, f64)>,
    y_range: Option<(f64, f64)>,
) -> String {
    let (x0, x1) = x_range.unwrap_or_else(|| bounds(series, |p| p.0));
    let (y0, y1) = y_range.unwrap_or_else(|| bounds(series, |p| p.1));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            s,
            r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#ccc"/>"##,
            TOP,
            TOP + ph
        );
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#ccc"/>"##,
            LEFT + pw
        );
        let _ = writeln!(
            s,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph + 16.0,
            tick_label(xv)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            py + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(y_label)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut pts: Vec<(f64, f64)> = Vec::new();
        for (j, &(x, y)) in ser
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .enumerate()
        {
            if ser.step && j > 0 {
                let prev = pts.last().expect("nonempty").1;
                pts.push((sx(x), prev));
            }
            pts.push((sx(x), sy(y)));
        }
        let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{}"/>"#,
            path.join(" ")
        );
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/>"#,
            lx + 18.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{}</text>"#,
            lx + 24.0,
            ly + 4.0,
            escape(&ser.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Rows of a CSV file grouped by the value of column `key`, in order of
/// first appearance; each row is a header-to-value lookup.
fn grouped(path: &Path, key: &str) -> Result<Vec<(String, Vec<csv::StringRecord>)>, CliError> {
    let err = |e: csv::Error| CliError::runtime(format!("cannot read {}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(err)?;
    let headers = r.headers().map_err(err)?.clone();
    let k = headers
        .iter()
        .position(|h| h == key)
        .ok_or_else(|| CliError::runtime(format!("{} has no column {key:?}", path.display())))?;
    let mut out: Vec<(String, Vec<csv::StringRecord>)> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(err)?;
        let name = rec.get(k).unwrap_or_default().to_string();
        match out.iter_mut().find(|(n, _)| *n == name) {
            Some((_, rows)) => rows.push(rec),
            None => out.push((name, vec![rec])),
        }
    }
    Ok(out)
}

fn column(path: &Path, name: &str) -> Result<usize, CliError> {
    let mut r =
        csv::Reader::from_path(path).map_err(|e| CliError::runtime(format!("cannot read {}: {e}", path.display())))?;
    let headers = r
        .headers()
        .map_err(|e| CliError::runtime(format!("cannot read {}: {e}", path.display())))?;
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::runtime(format!("{} has no column {name:?}", path.display())))
}

fn value(rec: &csv::StringRecord, idx: usize) -> f64 {
    rec.get(idx).and_then(|v| v.parse().ok()).unwrap_or(f64::NAN)
}

fn xy_series(path: &Path, key: &str, x: &str, y: &str, step: bool) -> Result<Vec<Series>, CliError> {
    let (xi, yi) = (column(path, x)?, column(path, y)?);
    Ok(grouped(path, key)?
        .into_iter()
        .map(|(name, rows)| Series {
            name,
            points: rows.iter().map(|r| (value(r, xi), value(r, yi))).collect(),
            step,
        })
        .collect())
}

fn sorted_csvs(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::runtime(format!("cannot list {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

fn save(out: &Path, name: &str, svg: String, written: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let dir = out.join("charts");
    fs::create_dir_all(&dir).map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, svg).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
    written.push(PathBuf::from("charts").join(name));
    Ok(())
}

/// Renders the requested charts from the CSV files in `out`; returns the
/// written paths relative to `out`.
pub fn render_charts(out: &Path, charts: &[Chart]) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    if charts.contains(&Chart::F1Cdf) {
        let path = out.join("f1_cdf.csv");
        if path.is_file() {
            let series = xy_series(&path, "method", "avg_f1", "cdf", true)?;
            let svg = render(
                "Empirical CDF of macro-F1",
                "macro-F1",
                "fraction of trials",
                &series,
                None,
                Some((0.0, 1.0)),
            );
            save(out, "f1_cdf.svg", svg, &mut written)?;
        }
    }
    if charts.contains(&Chart::Roc) {
        for path in sorted_csvs(&out.join("roc"))? {
            let stem = path.file_stem().unwrap_or_default().to_string_lossy().to_string();
            let mut series = xy_series(&path, "method", "fpr", "tpr", false)?;
            series.push(Series {
                name: "chance".into(),
                points: vec![(0.0, 0.0), (1.0, 1.0)],
                step: false,
            });
            let svg = render(
                &format!("ROC, class {stem}"),
                "false positive rate",
                "true positive rate",
                &series,
                Some((0.0, 1.0)),
                Some((0.0, 1.0)),
            );
            save(out, &format!("roc_{stem}.svg"), svg, &mut written)?;
        }
    }
    if charts.contains(&Chart::Convergence) {
        for path in sorted_csvs(&out.join("traces"))? {
            let stem = path.file_stem().unwrap_or_default().to_string_lossy().to_string();
            let Some((trial, rows)) = grouped(&path, "trial")?.into_iter().next() else {
                continue;
            };
            let k = column(&path, "k")?;
            let series: Vec<Series> = ["rho_k", "rho_bar", "alpha"]
                .iter()
                .map(|name| {
                    let c = column(&path, name)?;
                    Ok(Series {
                        name: name.to_string(),
                        points: rows.iter().map(|r| (value(r, k), value(r, c))).collect(),
                        step: false,
                    })
                })
                .collect::<Result<_, CliError>>()?;
            let svg = render(
                &format!("Convergence, {stem}, trial {trial}"),
                "iteration",
                "objective",
                &series,
                None,
                None,
            );
            save(out, &format!("convergence_{stem}.svg"), svg, &mut written)?;
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_series_draws_corners() {
        let s = Series {
            name: "a<b".into(),
            points: vec![(0.0, 0.0), (1.0, 1.0)],
            step: true,
        };
        let svg = render("t", "x", "y", &[s], Some((0.0, 1.0)), Some((0.0, 1.0)));
        assert!(svg.contains("a&lt;b"));
        // origin, corner at (1, 0), then (1, 1)
        assert!(
            svg.contains(r#"points="70.00,370.00 470.00,370.00 470.00,40.00""#),
            "{svg}"
        );
    }

    #[test]
    fn flat_data_get_a_range() {
        let s = Series {
            name: "a".into(),
            points: vec![(0.0, 2.0), (1.0, 2.0)],
            step: false,
        };
        assert!(render("t", "x", "y", &[s], None, None).contains("</svg>"));
        assert_eq!(tick_label(0.25), "0.25");
        assert_eq!(tick_label(2.0), "2");
        assert_eq!(tick_label(-0.0001), "0");
    }
}
