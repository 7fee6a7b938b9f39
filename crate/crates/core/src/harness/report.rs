//! Collects the CSV outputs of a run directory into one summary table and
//! draws sweep curves as SVG.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::sweep::SWEEP_CSV_HEADER;
use crate::error::{Error, Result};

pub const SUMMARY_FILE: &str = "summary.csv";

/// One line of the merged summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    /// CSV path relative to the run directory.
    pub source: String,
    pub key: String,
    pub metric: String,
    pub value: String,
}

/// Parsed sweep CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    pub source: String,
    pub axis: String,
    pub values: Vec<String>,
    /// `(column name, value per row)`, absent entries as `None`.
    pub series: Vec<(String, Vec<Option<f64>>)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSummary {
    pub rows: Vec<SummaryRow>,
    pub curves: Vec<SweepCurve>,
}

fn csv_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            csv_files(&p, out)?;
        } else if p.extension().is_some_and(|e| e == "csv") {
            out.push(p);
        }
    }
    Ok(())
}

/// Reads every CSV below `dir` (sorted by path). Sweep tables, `metric,value`
/// tables and `metric,before,after` tables are recognized; anything else is
/// skipped. An existing summary file is ignored.
pub fn collect(dir: &Path) -> Result<RunSummary> {
    let mut files = Vec::new();
    csv_files(dir, &mut files)?;
    let mut summary = RunSummary::default();
    for path in files {
        let source = path
            .strip_prefix(dir)
            .unwrap_or(&path)
            .to_string_lossy()
            .into_owned();
        if source == SUMMARY_FILE {
            continue;
        }
        let mut rdr = csv::Reader::from_path(&path)?;
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let records: Vec<csv::StringRecord> =
            rdr.records().collect::<std::result::Result<_, _>>()?;
        let push = |summary: &mut RunSummary, key: String, metric: &str, value: &str| {
            summary.rows.push(SummaryRow {
                source: source.clone(),
                key,
                metric: metric.to_string(),
                value: value.to_string(),
            })
        };
        if header == SWEEP_CSV_HEADER {
            let mut curve = SweepCurve {
                source: source.clone(),
                axis: records
                    .first()
                    .map_or_else(String::new, |r| r[0].to_string()),
                values: Vec::new(),
                series: header[2..]
                    .iter()
                    .map(|h| (h.clone(), Vec::new()))
                    .collect(),
            };
            for r in &records {
                curve.values.push(r[1].to_string());
                for (i, (name, col)) in curve.series.iter_mut().enumerate() {
                    let cell = &r[i + 2];
                    col.push(cell.parse().ok());
                    push(&mut summary, format!("{}={}", &r[0], &r[1]), name, cell);
                }
            }
            summary.curves.push(curve);
        } else if header == ["metric", "value"] {
            for r in &records {
                push(&mut summary, String::new(), &r[0], &r[1]);
            }
        } else if header == ["metric", "before", "after"] {
            for r in &records {
                push(&mut summary, "before".into(), &r[0], &r[1]);
                push(&mut summary, "after".into(), &r[0], &r[2]);
            }
        }
    }
    Ok(summary)
}

impl RunSummary {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["source", "key", "metric", "value"])?;
        for r in &self.rows {
            w.write_record([&r.source, &r.key, &r.metric, &r.value])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

const PLOT_W: f64 = 480.0;
const PLOT_H: f64 = 300.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

/// Line plot of every rate column against the swept value. Non-numeric
/// values (orientation, phase pairs) are placed at evenly spaced positions.
pub fn sweep_svg(curve: &SweepCurve) -> String {
    let numeric: Option<Vec<f64>> = curve.values.iter().map(|v| v.parse().ok()).collect();
    let xs: Vec<f64> = numeric
        .clone()
        .unwrap_or_else(|| (0..curve.values.len()).map(|i| i as f64).collect());
    let (x_lo, x_hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    let span = if x_hi > x_lo { x_hi - x_lo } else { 1.0 };
    let px = |x: f64| MARGIN + (x - x_lo) / span * (PLOT_W - 2.0 * MARGIN);
    let py = |y: f64| PLOT_H - MARGIN - y.clamp(0.0, 1.0) * (PLOT_H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PLOT_W}" height="{PLOT_H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        PLOT_W / 2.0,
        curve.axis
    );
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{b}" stroke="black"/>"#,
        b = PLOT_H - MARGIN,
        r = PLOT_W - MARGIN
    );
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{tick}</text>"#,
            MARGIN - 4.0,
            py(tick) + 4.0
        );
    }
    for (x, label) in xs.iter().zip(&curve.values) {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{label}</text>"#,
            px(*x),
            PLOT_H - MARGIN + 14.0
        );
    }
    let rates = curve
        .series
        .iter()
        .filter(|(n, _)| n.ends_with("_rate") || n == "mean_similarity");
    for (k, (name, ys)) in rates.enumerate() {
        let color = COLORS[k % COLORS.len()];
        let points: Vec<String> = xs
            .iter()
            .zip(ys)
            .filter_map(|(x, y)| y.map(|y| format!("{:.2},{:.2}", px(*x), py(y))))
            .collect();
        if points.is_empty() {
            continue;
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{name}</text>"#,
            PLOT_W - MARGIN - 120.0,
            MARGIN + 14.0 * k as f64
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `summary.csv` and one SVG per sweep table into `dir`. Returns the
/// written paths.
pub fn write_report(dir: &Path) -> Result<Vec<PathBuf>> {
    let summary = collect(dir)?;
    let mut written = vec![dir.join(SUMMARY_FILE)];
    summary.write_csv(&written[0])?;
    for curve in &summary.curves {
        let stem = curve
            .source
            .trim_end_matches(".csv")
            .replace(['/', '\\'], "_");
        let path = dir.join(format!("{stem}.svg"));
        std::fs::write(&path, sweep_svg(curve)).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_known_tables() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("sweep.csv"),
            "axis,value,face_detection_rate,victim_success_rate,attack_success_rate,mean_similarity,std_similarity\n\
             duty_cycle,0.1,1,1,0.5,0.9,0.01\nduty_cycle,0.5,1,1,,0.8,0.02\n",
        )
        .unwrap();
        std::fs::create_dir(dir.path().join("attack")).unwrap();
        std::fs::write(
            dir.path().join("attack/summary.csv"),
            "metric,value\nattack_success_rate,0.25\n",
        )
        .unwrap();
        std::fs::write(
            dir.path().join("defense.csv"),
            "metric,before,after\nattack_success_rate,0.5,0.1\n",
        )
        .unwrap();
        std::fs::write(
            dir.path().join("history.csv"),
            "generation,best_score\n0,1\n",
        )
        .unwrap();

        let written = write_report(dir.path()).unwrap();
        assert_eq!(written.len(), 2);
        let s = collect(dir.path()).unwrap();
        assert_eq!(s.curves.len(), 1);
        assert_eq!(s.curves[0].series[2].1, vec![Some(0.5), None]);
        assert_eq!(
            s.rows.iter().filter(|r| r.source == "defense.csv").count(),
            2
        );
        assert!(s
            .rows
            .iter()
            .any(|r| r.source == "attack/summary.csv" && r.value == "0.25"));
        let svg = std::fs::read_to_string(&written[1]).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("polyline"));
        // a second pass reads the same inputs and skips its own summary
        assert_eq!(collect(dir.path()).unwrap(), s);
    }
}
