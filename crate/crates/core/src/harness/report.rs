//! Reading run logs back and comparing them: aligned accuracy tables,
//! per-run summaries and SVG line charts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::experiment::{mean, CSV_COLUMNS};
use crate::error::{Error, Result};

/// A parsed run log.
#[derive(Clone, Debug, PartialEq)]
pub struct RunCsv {
    pub label: String,
    /// Echoed config and footer entries, keyed without the leading `# `.
    pub meta: BTreeMap<String, String>,
    pub rounds: Vec<usize>,
    pub accuracy: Vec<f64>,
    pub f2: Vec<f64>,
}

impl RunCsv {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.get(key).map(String::as_str)
    }

    /// Monitoring period if the defense was on, otherwise `None`.
    pub fn delta(&self) -> Option<usize> {
        (self.meta("defense.enabled") == Some("true"))
            .then(|| self.meta("defense.delta").and_then(|d| d.parse().ok()))
            .flatten()
    }

    pub fn mean_post_activation_f2(&self) -> f64 {
        let from = self.delta().unwrap_or(0);
        let post: Vec<f64> = self
            .rounds
            .iter()
            .zip(&self.f2)
            .filter(|(r, _)| **r >= from)
            .map(|(_, f)| *f)
            .collect();
        mean(&post)
    }

    pub fn accuracy_at(&self, round: usize) -> Option<f64> {
        self.rounds
            .iter()
            .zip(&self.accuracy)
            .take_while(|(r, _)| **r <= round)
            .last()
            .map(|(_, a)| *a)
    }
}

fn bad(path: &Path, what: impl std::fmt::Display) -> Error {
    Error::Schema(format!("{}: {what}", path.display()))
}

pub fn parse_run_csv(text: &str, label: &str, path: &Path) -> Result<RunCsv> {
    let mut meta = BTreeMap::new();
    let mut body = String::new();
    for line in text.lines() {
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((k, v)) = comment.split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(bad(path, format!("unexpected columns {header:?}")));
    }
    let col = |name: &str| CSV_COLUMNS.iter().position(|c| *c == name).expect("known column");
    let (ri, ai, fi) = (col("round"), col("global_accuracy"), col("f2"));
    let mut run = RunCsv {
        label: label.to_string(),
        meta,
        rounds: Vec::new(),
        accuracy: Vec::new(),
        f2: Vec::new(),
    };
    for record in reader.records() {
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or("");
        run.rounds.push(field(ri).parse().map_err(|_| bad(path, "non-integer round"))?);
        run.accuracy.push(field(ai).parse().map_err(|_| bad(path, "non-numeric accuracy"))?);
        run.f2.push(field(fi).parse().map_err(|_| bad(path, "non-numeric f2"))?);
    }
    Ok(run)
}

pub fn read_run_csv(path: &Path) -> Result<RunCsv> {
    let text = std::fs::read_to_string(path)?;
    let label = path
        .file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
    parse_run_csv(&text, &label, path)
}

/// Accuracy per round for every run side by side, plus each run's
/// difference from the first.
pub fn comparison_table(runs: &[RunCsv]) -> Result<String> {
    let Some(first) = runs.first() else {
        return Err(Error::InvalidArgument("no runs to compare".into()));
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["round".to_string()];
    header.extend(runs.iter().map(|r| r.label.clone()));
    header.extend(runs[1..].iter().map(|r| format!("{}-minus-{}", r.label, first.label)));
    w.write_record(&header)?;

    let max_rounds = runs.iter().map(|r| r.rounds.len()).max().unwrap_or(0);
    for i in 0..max_rounds {
        let round = runs.iter().find_map(|r| r.rounds.get(i)).copied().unwrap_or(i);
        let acc: Vec<Option<f64>> = runs.iter().map(|r| r.accuracy.get(i).copied()).collect();
        let mut row = vec![round.to_string()];
        row.extend(acc.iter().map(|a| a.map_or(String::new(), |v| v.to_string())));
        row.extend(acc[1..].iter().map(|a| match (a, acc[0]) {
            (Some(a), Some(b)) => (a - b).to_string(),
            _ => String::new(),
        }));
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// One row per run: attack, Δ, readout accuracy and mean post-activation F2.
pub fn summary_table(runs: &[RunCsv]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["run", "attack", "delta", "readout_round", "readout_accuracy", "mean_post_activation_f2"])?;
    for r in runs {
        let readout: usize = r.meta("readout_round").and_then(|v| v.parse().ok()).unwrap_or(0);
        w.write_record([
            r.label.clone(),
            r.meta("attack.pattern").unwrap_or("?").to_string(),
            r.delta().map_or_else(|| "off".to_string(), |d| d.to_string()),
            readout.to_string(),
            r.accuracy_at(readout).map_or(String::new(), |a| a.to_string()),
            r.mean_post_activation_f2().to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// A plain SVG line chart of `series` (one y value per round) on `[0, 1]`.
pub fn line_chart(title: &str, series: &[(&str, &[usize], &[f64])]) -> String {
    let (w, h, pad) = (720.0, 400.0, 50.0);
    let max_round = series
        .iter()
        .flat_map(|(_, r, _)| r.iter().copied())
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let x = |r: usize| pad + (w - 2.0 * pad) * r as f64 / max_round;
    let y = |v: f64| h - pad - (h - 2.0 * pad) * v.clamp(0.0, 1.0);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#, w / 2.0);
    let _ = writeln!(
        svg,
        r#"<path d="M{pad},{pad} V{} H{}" fill="none" stroke="black"/>"#,
        h - pad,
        w - pad
    );
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{tick}</text>"#, pad - 5.0, y(tick) + 4.0);
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">round (max {max_round})</text>"#, w / 2.0, h - 15.0);
    for (i, (label, rounds, values)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = rounds
            .iter()
            .zip(values.iter())
            .map(|(&r, &v)| format!("{:.1},{:.1}", x(r), y(v)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            points.join(" ")
        );
        let ly = pad + 15.0 * i as f64;
        let _ = writeln!(svg, r#"<text x="{}" y="{ly}" fill="{color}">{label}</text>"#, w - pad - 150.0);
    }
    svg.push_str("</svg>\n");
    svg
}

/// Files written by [`write_report`].
#[derive(Clone, Debug, PartialEq)]
pub struct ReportFiles {
    pub comparison: PathBuf,
    pub summary: PathBuf,
    pub charts: Vec<PathBuf>,
}

/// Reads `inputs` and writes `comparison.csv`, `summary.csv` and, if
/// requested, `accuracy.svg` and `f2.svg` into `out_dir`.
pub fn write_report(inputs: &[PathBuf], out_dir: &Path, charts: bool) -> Result<ReportFiles> {
    let runs: Vec<RunCsv> = inputs.iter().map(|p| read_run_csv(p)).collect::<Result<_>>()?;
    std::fs::create_dir_all(out_dir)?;
    let files = ReportFiles {
        comparison: out_dir.join("comparison.csv"),
        summary: out_dir.join("summary.csv"),
        charts: if charts {
            vec![out_dir.join("accuracy.svg"), out_dir.join("f2.svg")]
        } else {
            Vec::new()
        },
    };
    std::fs::write(&files.comparison, comparison_table(&runs)?)?;
    std::fs::write(&files.summary, summary_table(&runs)?)?;
    if charts {
        let acc: Vec<_> = runs.iter().map(|r| (r.label.as_str(), &r.rounds[..], &r.accuracy[..])).collect();
        let f2: Vec<_> = runs.iter().map(|r| (r.label.as_str(), &r.rounds[..], &r.f2[..])).collect();
        std::fs::write(&files.charts[0], line_chart("global accuracy", &acc))?;
        std::fs::write(&files.charts[1], line_chart("F2 of exclusions", &f2))?;
    }
    Ok(files)
}
