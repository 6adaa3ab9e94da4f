//! Run reports and their file formats: JSON report, coverage CSV, paths file.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::anytime::{AnytimeEvent, IterationStats, SolveConfig, WindowStats};
use crate::error::ParseError;
use crate::grid::Grid;
use crate::instance::{Configuration, Solution};
use crate::traffic::Ltm;
use crate::validate::{Metrics, ValidationReport};

pub const SCHEMA_VERSION: u32 = 1;

/// JSON schema of [`RunReport`], as shipped in the repository.
pub const REPORT_SCHEMA: &str = include_str!("../schema/run_report.schema.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceInfo {
    pub map: String,
    pub scen: String,
    pub agents: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub instance: InstanceInfo,
    pub config: SolveConfig,
    pub seed: u64,
    /// "solved" or "unsolved".
    pub status: String,
    /// Why the solver stopped (one-shot stop reason or PE session status).
    pub stop: String,
    pub events: Vec<AnytimeEvent>,
    pub iterations: Vec<IterationStats>,
    pub windows: Vec<WindowStats>,
    pub metrics: Option<Metrics>,
    pub validation: Option<ValidationReport>,
    /// Per agent, per timestep `[x, y]`.
    pub solution: Option<Vec<Vec<[usize; 2]>>>,
    pub ltm_dump: Option<String>,
    pub elapsed_ms: f64,
}

impl RunReport {
    /// The embedded solution as configurations.
    pub fn embedded_solution(&self, grid: &Grid) -> Option<Solution> {
        let paths = self.solution.as_ref()?;
        let len = paths.first().map_or(0, Vec::len);
        let mut steps = Vec::with_capacity(len);
        for t in 0..len {
            let c = paths
                .iter()
                .map(|p| p.get(t).and_then(|&[x, y]| grid.vertex_at(x, y)))
                .collect::<Option<Vec<_>>>()?;
            steps.push(Configuration(c));
        }
        Some(Solution::new(steps))
    }

    /// JSON with wall-clock fields zeroed, for comparing runs.
    pub fn without_timing(&self) -> RunReport {
        let mut r = self.clone();
        r.elapsed_ms = 0.0;
        for e in &mut r.events {
            e.time_ns = 0;
        }
        r
    }
}

/// Per agent, the `[x, y]` cell at each timestep.
pub fn solution_coords(grid: &Grid, sol: &Solution) -> Vec<Vec<[usize; 2]>> {
    (0..sol.num_agents())
        .map(|i| {
            sol.path(i)
                .into_iter()
                .map(|v| {
                    let (x, y) = grid.coord(v);
                    [x, y]
                })
                .collect()
        })
        .collect()
}

/// One line per agent: `(x,y),(x,y),...`.
pub fn format_paths(grid: &Grid, sol: &Solution) -> String {
    let mut out = String::new();
    for path in solution_coords(grid, sol) {
        let cells: Vec<String> = path.iter().map(|[x, y]| format!("({x},{y})")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Inverse of [`format_paths`]; all lines must have the same length.
pub fn parse_paths(text: &str, grid: &Grid) -> Result<Solution, ParseError> {
    let mut paths = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut path = Vec::new();
        let inner = line
            .strip_prefix('(')
            .and_then(|l| l.strip_suffix(')'))
            .ok_or_else(|| ParseError::new(i + 1, "expected (x,y) entries"))?;
        for cell in inner.split("),(") {
            let (x, y) = cell
                .split_once(',')
                .ok_or_else(|| ParseError::new(i + 1, format!("bad cell `{cell}`")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| ParseError::new(i + 1, format!("bad coordinate `{s}`")))
            };
            let (x, y) = (parse(x)?, parse(y)?);
            let v = grid
                .vertex_at(x, y)
                .ok_or_else(|| ParseError::new(i + 1, format!("({x},{y}) is not a free cell")))?;
            path.push(v);
        }
        paths.push((i + 1, path));
    }
    let len = paths.first().map_or(0, |(_, p)| p.len());
    if let Some((line, _)) = paths.iter().find(|(_, p)| p.len() != len) {
        return Err(ParseError::new(*line, "paths have different lengths"));
    }
    let steps = (0..len)
        .map(|t| Configuration(paths.iter().map(|(_, p)| p[t]).collect()))
        .collect();
    Ok(Solution::new(steps))
}

/// Rows `time_ms,best_sol,sol_ratio`.
pub fn write_coverage(mut out: impl Write, events: &[AnytimeEvent], lower_bound: u64) -> io::Result<()> {
    writeln!(out, "time_ms,best_sol,sol_ratio")?;
    for e in events {
        let ratio = if lower_bound == 0 { 1.0 } else { e.sol as f64 / lower_bound as f64 };
        writeln!(out, "{:.6},{},{:.6}", e.time_ns as f64 / 1e6, e.sol, ratio)?;
    }
    Ok(())
}

/// Where to write each artifact; `None` skips it.
#[derive(Debug, Clone, Default)]
pub struct ReportTargets {
    pub output: Option<PathBuf>,
    pub coverage: Option<PathBuf>,
    pub dump_ltm: Option<PathBuf>,
    pub paths: Option<PathBuf>,
}

fn create(path: &Path) -> io::Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Writes every requested artifact.
pub fn emit_reports(
    report: &RunReport,
    grid: &Grid,
    ltm: &Ltm,
    lower_bound: u64,
    targets: &ReportTargets,
) -> io::Result<()> {
    if let Some(p) = &targets.output {
        let mut w = create(p)?;
        serde_json::to_writer_pretty(&mut w, report)?;
        writeln!(w)?;
        w.flush()?;
    }
    if let Some(p) = &targets.coverage {
        let mut w = create(p)?;
        write_coverage(&mut w, &report.events, lower_bound)?;
        w.flush()?;
    }
    if let Some(p) = &targets.dump_ltm {
        let mut w = create(p)?;
        ltm.write_csv(&mut w)?;
        w.flush()?;
    }
    if let Some(p) = &targets.paths {
        if let Some(sol) = report.embedded_solution(grid) {
            let mut w = create(p)?;
            w.write_all(format_paths(grid, &sol).as_bytes())?;
            w.flush()?;
        }
    }
    Ok(())
}
