//! Result files: CSV rows, trajectory and path JSON, SVG step plots.

use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{LnsConfig, RunRecord};
use crate::model::{Coord, GridMap, ModelError, Path};

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub const CSV_HEADER: [&str; 15] = [
    "map",
    "scene",
    "agents",
    "strategy",
    "nb_size",
    "replan",
    "init",
    "seed",
    "time_limit_s",
    "init_delay",
    "final_delay",
    "auc",
    "iters",
    "accepted_iters",
    "core_time_s",
];

/// One line of the results table. Measured fields are empty when the cell
/// failed; `nb_size` is 0 for strategies that pick their own size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResultRow {
    pub map: String,
    pub scene: u32,
    pub agents: usize,
    pub strategy: String,
    pub nb_size: usize,
    pub replan: String,
    pub init: String,
    pub seed: u64,
    pub time_limit_s: f64,
    pub init_delay: Option<u64>,
    pub final_delay: Option<u64>,
    pub auc: Option<f64>,
    pub iters: Option<u64>,
    pub accepted_iters: Option<u64>,
    pub core_time_s: Option<f64>,
}

impl RunResultRow {
    /// A failed cell: identification columns only.
    pub fn failed(map: &str, scene: u32, agents: usize, config: &LnsConfig) -> Self {
        Self {
            map: map.to_string(),
            scene,
            agents,
            strategy: config.strategy.label().to_string(),
            nb_size: if config.strategy.picks_size() {
                0
            } else {
                config.nb_size
            },
            replan: config.replan.label(),
            init: config.init.label().to_string(),
            seed: config.seed,
            time_limit_s: config.budget.limit(),
            init_delay: None,
            final_delay: None,
            auc: None,
            iters: None,
            accepted_iters: None,
            core_time_s: None,
        }
    }

    pub fn from_record(map: &str, scene: u32, agents: usize, record: &RunRecord) -> Self {
        Self {
            init_delay: Some(record.initial_delay),
            final_delay: Some(record.final_delay),
            auc: Some(record.auc),
            iters: Some(record.iterations),
            accepted_iters: Some(record.accepted),
            core_time_s: Some(record.core_seconds),
            ..Self::failed(map, scene, agents, &record.config)
        }
    }

    pub fn succeeded(&self) -> bool {
        self.final_delay.is_some()
    }
}

pub fn write_results_csv<W: Write>(
    rows: &[RunResultRow],
    destination: W,
) -> Result<(), OutputError> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(destination);
    writer.write_record(CSV_HEADER)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_results_csv<R: Read>(source: R) -> Result<Vec<RunResultRow>, OutputError> {
    let mut reader = csv::Reader::from_reader(source);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(OutputError::Invalid(format!(
            "unexpected CSV header: {}",
            header.join(",")
        )));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(OutputError::from))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFile {
    pub config: LnsConfig,
    pub seed: u64,
    pub trajectory: Vec<(f64, u64)>,
}

pub fn write_trajectory_json<W: Write>(
    record: &RunRecord,
    mut destination: W,
) -> Result<(), OutputError> {
    if record.trajectory.is_empty() {
        return Err(OutputError::Invalid("empty trajectory".into()));
    }
    let file = TrajectoryFile {
        config: record.config.clone(),
        seed: record.config.seed,
        trajectory: record.trajectory.clone(),
    };
    serde_json::to_writer_pretty(&mut destination, &file)?;
    destination.write_all(b"\n")?;
    Ok(())
}

pub fn read_trajectory_json<R: Read>(source: R) -> Result<TrajectoryFile, OutputError> {
    Ok(serde_json::from_reader(source)?)
}

#[derive(Serialize, Deserialize)]
struct PathsFile {
    paths: Vec<Vec<(u32, u32)>>,
}

/// Paths as `{"paths": [[[row, col], ...], ...]}`.
pub fn write_paths_json<W: Write>(
    map: &GridMap,
    paths: &[Path],
    mut destination: W,
) -> Result<(), OutputError> {
    let file = PathsFile {
        paths: paths
            .iter()
            .map(|p| {
                p.cells
                    .iter()
                    .map(|&c| {
                        let Coord { row, col } = map.coord(c);
                        (row, col)
                    })
                    .collect()
            })
            .collect(),
    };
    serde_json::to_writer(&mut destination, &file)?;
    destination.write_all(b"\n")?;
    Ok(())
}

/// Reads a paths file. Coordinates outside the map are errors; whether the
/// paths are well formed for an instance is left to validation.
pub fn read_paths_json<R: Read>(map: &GridMap, source: R) -> Result<Vec<Path>, OutputError> {
    let file: PathsFile = serde_json::from_reader(source)?;
    file.paths
        .into_iter()
        .enumerate()
        .map(|(agent, cells)| {
            cells
                .into_iter()
                .map(|(row, col)| {
                    map.cell(Coord::new(row, col)).ok_or_else(|| {
                        OutputError::Model(ModelError::MalformedPath {
                            agent,
                            reason: format!("({row}, {col}) is outside the map"),
                        })
                    })
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Path::new)
        })
        .collect()
}

/// A labelled curve for [`emit_svg_plot`].
#[derive(Debug, Clone)]
pub struct PlotSeries {
    pub label: String,
    pub trajectory: Vec<(f64, f64)>,
    pub time_limit: f64,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Step plot of best-so-far delay against time, one polyline per series.
pub fn emit_svg_plot<W: Write>(
    series: &[PlotSeries],
    title: &str,
    mut destination: W,
) -> Result<(), OutputError> {
    if series.is_empty() {
        return Err(OutputError::Invalid("nothing to plot".into()));
    }
    if let Some(s) = series.iter().find(|s| s.trajectory.is_empty()) {
        return Err(OutputError::Invalid(format!(
            "series `{}` has no points",
            s.label
        )));
    }
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (70.0, 170.0, 40.0, 50.0);
    let t_max = series
        .iter()
        .map(|s| s.time_limit)
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let d_max = series
        .iter()
        .flat_map(|s| s.trajectory.iter().map(|p| p.1))
        .fold(1.0f64, f64::max);
    let x = |t: f64| left + (t.min(t_max) / t_max) * (w - left - right);
    let y = |d: f64| top + (1.0 - d / d_max) * (h - top - bottom);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        (left + w - right) / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<path d="M{left} {top} V{} H{}" fill="none" stroke="black"/>"#,
        h - bottom,
        w - right
    );
    for i in 0..=4 {
        let t = t_max * f64::from(i) / 4.0;
        let d = d_max * f64::from(i) / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{}" font-family="sans-serif" font-size="10" text-anchor="middle">{}</text>"#,
            x(t),
            h - bottom + 15.0,
            fmt_num(t)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>"#,
            left - 5.0,
            y(d) + 3.0,
            fmt_num(d)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">time</text>"#,
        (left + w - right) / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle" transform="rotate(-90 16 {})">sum of delays</text>"#,
        (top + h - bottom) / 2.0,
        (top + h - bottom) / 2.0
    );

    for (i, s) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let mut points = String::new();
        let mut last = s.trajectory[0].1;
        let _ = write!(points, "{:.2},{:.2}", x(0.0), y(last));
        for &(t, d) in &s.trajectory[1..] {
            if t > s.time_limit {
                break;
            }
            let _ = write!(
                points,
                " {:.2},{:.2} {:.2},{:.2}",
                x(t),
                y(last),
                x(t),
                y(d)
            );
            last = d;
        }
        let _ = write!(points, " {:.2},{:.2}", x(s.time_limit), y(last));
        let _ = writeln!(
            svg,
            r#"<polyline points="{points}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#
        );
        let ly = top + 10.0 + 18.0 * i as f64;
        let lx = w - right + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    destination.write_all(svg.as_bytes())?;
    Ok(())
}

fn fmt_num(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
