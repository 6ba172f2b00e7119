//! Plain-data report emission: tables, CSV files, plot specifications and a
//! minimal SVG histogram.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::coverage::{coverage_spectrum_points, CoverageReport};
use crate::error::Result;
use crate::model::{Actions, TrajectoryDataset};
use crate::stats::{DensityCurve, EpisodeReturnSummary, Histogram};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnInfo {
    pub name: String,
    pub dtype: String,
    pub shape: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureListing {
    pub name: String,
    pub agents: Vec<String>,
    pub columns: Vec<ColumnInfo>,
    pub n_transitions: u64,
    pub n_trajectories: u64,
}

pub fn structure_listing(d: &TrajectoryDataset) -> StructureListing {
    let t = d.n_transitions() as u64;
    let n = d.n_agents() as u64;
    let col = |name: &str, dtype: &str, shape: Vec<u64>| ColumnInfo {
        name: name.into(),
        dtype: dtype.into(),
        shape,
    };
    let mut columns = vec![col(
        "observations",
        "f32",
        vec![t, n, d.observation_dim() as u64],
    )];
    columns.push(match &d.actions {
        Actions::Discrete(_) => col("actions", "i32", vec![t, n]),
        Actions::Continuous(_) => col("actions", "f32", vec![t, n, d.action_width() as u64]),
    });
    columns.push(col("rewards", "f32", vec![t, n]));
    columns.push(col("terminals", "u8", vec![t]));
    if let Some(sd) = d.state_dim() {
        columns.push(col("state", "f32", vec![t, sd as u64]));
    }
    StructureListing {
        name: d.meta.name.clone(),
        agents: d.agents.iter().map(|a| a.agent_id.clone()).collect(),
        columns,
        n_transitions: t,
        n_trajectories: d.n_episodes() as u64,
    }
}

pub fn structure_text(s: &StructureListing) -> String {
    let mut out = format!("{}\n", s.name);
    for c in &s.columns {
        let shape: Vec<String> = c.shape.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "  {:<13}{:<5}[{}]", c.name, c.dtype, shape.join(", "));
    }
    let _ = writeln!(out, "  agents: {}", s.agents.join(", "));
    let _ = writeln!(out, "  transitions: {}", s.n_transitions);
    let _ = writeln!(out, "  trajectories: {}", s.n_trajectories);
    out
}

/// One row of the dataset summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub n_transitions: u64,
    pub n_trajectories: u64,
    pub joint_saco: Option<f64>,
}

impl SummaryRow {
    pub fn new(name: &str, s: &EpisodeReturnSummary, coverage: Option<&CoverageReport>) -> Self {
        SummaryRow {
            name: name.into(),
            mean: s.mean,
            std: s.std,
            min: s.min,
            max: s.max,
            n_transitions: s.n_transitions,
            n_trajectories: s.n_trajectories,
            joint_saco: coverage.and_then(|c| c.joint_saco),
        }
    }
}

pub const SUMMARY_COLUMNS: [&str; 8] = [
    "Dataset",
    "Mean",
    "Stddev",
    "Min",
    "Max",
    "#Transitions",
    "#Trajectories",
    "Joint-SACo",
];

/// Right-aligned text table, two decimals for real-valued cells.
pub fn summary_table(rows: &[SummaryRow]) -> String {
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.name.clone(),
                format!("{:.2}", r.mean),
                format!("{:.2}", r.std),
                format!("{:.2}", r.min),
                format!("{:.2}", r.max),
                r.n_transitions.to_string(),
                r.n_trajectories.to_string(),
                r.joint_saco.map_or("n/a".into(), |v| format!("{v:.2}")),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..SUMMARY_COLUMNS.len())
        .map(|i| {
            cells
                .iter()
                .map(|row| row[i].len())
                .chain([SUMMARY_COLUMNS[i].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |row: &[String]| {
        let mut s = format!("{:<w$}", row[0], w = widths[0]);
        for (cell, w) in row.iter().zip(&widths).skip(1) {
            let _ = write!(s, "  {cell:>w$}");
        }
        s.push('\n');
        s
    };
    let header: Vec<String> = SUMMARY_COLUMNS.iter().map(|s| s.to_string()).collect();
    let mut out = line(&header);
    for row in &cells {
        out.push_str(&line(row));
    }
    out
}

pub fn histogram_csv(h: &Histogram) -> String {
    let mut out = String::from("bin_lo,bin_hi,count\n");
    for (i, c) in h.counts.iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", h.bin_edges[i], h.bin_edges[i + 1], c);
    }
    out
}

pub fn density_csv(d: &DensityCurve) -> String {
    let mut out = String::from("x,density\n");
    for (x, y) in d.xs.iter().zip(&d.ys) {
        let _ = writeln!(out, "{x},{y}");
    }
    out
}

pub fn spectrum_csv(r: &CoverageReport) -> String {
    let mut out = String::from("count,frequency\n");
    for (c, f) in &r.count_frequency {
        let _ = writeln!(out, "{c},{f}");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Library-neutral description of a plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    /// `bar`, `line` or `scatter`.
    pub kind: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    #[serde(default)]
    pub log_x: bool,
    #[serde(default)]
    pub log_y: bool,
    pub series: Vec<Series>,
}

pub fn histogram_plot(h: &Histogram, title: &str) -> PlotSpec {
    let centres = h
        .bin_edges
        .windows(2)
        .map(|w| 0.5 * (w[0] + w[1]))
        .collect();
    PlotSpec {
        kind: "bar".into(),
        title: title.into(),
        x_label: "episode return".into(),
        y_label: "episodes".into(),
        log_x: false,
        log_y: false,
        series: vec![Series {
            name: "count".into(),
            x: centres,
            y: h.counts.iter().map(|&c| c as f64).collect(),
        }],
    }
}

pub fn density_plot(d: &DensityCurve, title: &str) -> PlotSpec {
    PlotSpec {
        kind: "line".into(),
        title: title.into(),
        x_label: "episode return".into(),
        y_label: "density".into(),
        log_x: false,
        log_y: false,
        series: vec![Series {
            name: "kde".into(),
            x: d.xs.clone(),
            y: d.ys.clone(),
        }],
    }
}

/// Count-frequency spectrum as raw values on log-log axes.
pub fn spectrum_plot(r: &CoverageReport, title: &str) -> Result<PlotSpec> {
    let points = coverage_spectrum_points(r)?;
    Ok(PlotSpec {
        kind: "scatter".into(),
        title: title.into(),
        x_label: "count".into(),
        y_label: "frequency".into(),
        log_x: true,
        log_y: true,
        series: vec![Series {
            name: "pairs".into(),
            x: points.iter().map(|p| p.0.exp()).collect(),
            y: points.iter().map(|p| p.1.exp()).collect(),
        }],
    })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Standalone SVG bar chart of a histogram.
pub fn histogram_svg(h: &Histogram, title: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 48.0;
    let max = h.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let bins = h.counts.len().max(1) as f64;
    let bar_w = (W - 2.0 * PAD) / bins;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    for (i, &c) in h.counts.iter().enumerate() {
        let bh = (H - 2.0 * PAD) * c as f64 / max;
        let _ = writeln!(
            out,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#4c72b0"><title>[{}, {}]: {}</title></rect>"##,
            PAD + i as f64 * bar_w,
            H - PAD - bh,
            (bar_w - 1.0).max(0.5),
            bh,
            h.bin_edges[i],
            h.bin_edges[i + 1],
            c
        );
    }
    let _ = writeln!(
        out,
        r#"<line x1="{PAD}" y1="{y}" x2="{x2}" y2="{y}" stroke="black"/>"#,
        y = H - PAD,
        x2 = W - PAD
    );
    if let (Some(lo), Some(hi)) = (h.bin_edges.first(), h.bin_edges.last()) {
        let _ = writeln!(
            out,
            r#"<text x="{PAD}" y="{y}" font-family="sans-serif" font-size="11">{lo:.2}</text>"#,
            y = H - PAD + 16.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{y}" text-anchor="end" font-family="sans-serif" font-size="11">{hi:.2}</text>"#,
            x = W - PAD,
            y = H - PAD + 16.0
        );
    }
    out.push_str("</svg>\n");
    out
}
