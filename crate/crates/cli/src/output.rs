use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use mase::experiment::{Comparison, RunSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

pub fn write_text(path: Option<&Path>, text: &str) -> Result<(), String> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| e.to_string()),
    }
}

/// Where a report goes and how it is encoded.
pub struct Sink {
    path: Option<PathBuf>,
    format: OutputFormat,
}

#[derive(Serialize)]
struct RunCsvRow<'a> {
    run: String,
    method: &'a str,
    k: usize,
    boundary_dim: usize,
    iterations: usize,
    converged: bool,
    objective: f64,
    residual_norm: f64,
    total_s: f64,
    assembly_s: f64,
    local_condense_s: f64,
    boundary_assemble_s: f64,
    boundary_solve_s: f64,
    recovery_s: f64,
}

#[derive(Serialize)]
struct CompareCsvRow<'a> {
    method: &'a str,
    k: usize,
    boundary_dim: usize,
    iterations: usize,
    converged: bool,
    objective: f64,
    residual_norm: f64,
    mean_total_s: f64,
    max_state_diff: f64,
    objective_rel_diff: f64,
}

impl Sink {
    pub fn new(path: Option<PathBuf>, format: OutputFormat) -> Self {
        Sink { path, format }
    }

    fn csv<T: Serialize>(&self, rows: &[T]) -> Result<(), String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in rows {
            w.serialize(row).map_err(|e| e.to_string())?;
        }
        let bytes = w.into_inner().map_err(|e| e.to_string())?;
        write_text(
            self.path.as_deref(),
            &String::from_utf8(bytes).expect("csv output is utf-8"),
        )
    }

    fn json<T: Serialize + ?Sized>(&self, value: &T) -> Result<(), String> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
        text.push('\n');
        write_text(self.path.as_deref(), &text)
    }

    pub fn table<T: Serialize>(&self, rows: &[T]) -> Result<(), String> {
        match self.format {
            OutputFormat::Csv => self.csv(rows),
            OutputFormat::Json => self.json(rows),
        }
    }

    /// CSV: one row per run, then a "mean" row over runs 2..n.
    pub fn run(&self, s: &RunSummary) -> Result<(), String> {
        if self.format == OutputFormat::Json {
            return self.json(s);
        }
        let method = s.method.to_string();
        let row = |run: String,
                   iterations,
                   converged,
                   objective,
                   residual_norm,
                   t: &mase::solver::PhaseTimings| RunCsvRow {
            run,
            method: &method,
            k: s.k,
            boundary_dim: s.boundary_dim,
            iterations,
            converged,
            objective,
            residual_norm,
            total_s: t.total,
            assembly_s: t.assembly,
            local_condense_s: t.local_condense,
            boundary_assemble_s: t.boundary_assemble,
            boundary_solve_s: t.boundary_solve,
            recovery_s: t.recovery,
        };
        let mut rows: Vec<_> = s
            .runs
            .iter()
            .map(|r| {
                row(
                    r.run.to_string(),
                    r.iterations,
                    r.converged,
                    r.objective,
                    r.residual_norm,
                    &r.timings,
                )
            })
            .collect();
        rows.push(row(
            "mean".into(),
            s.iterations,
            s.converged,
            s.objective,
            s.residual_norm,
            &s.mean,
        ));
        self.csv(&rows)
    }

    pub fn comparison(&self, c: &Comparison) -> Result<(), String> {
        if self.format == OutputFormat::Json {
            return self.json(c);
        }
        let names = [
            c.centralized.method.to_string(),
            c.multiarea.method.to_string(),
        ];
        let rows: Vec<_> = [&c.centralized, &c.multiarea]
            .into_iter()
            .zip(&names)
            .map(|(s, name)| CompareCsvRow {
                method: name,
                k: s.k,
                boundary_dim: s.boundary_dim,
                iterations: s.iterations,
                converged: s.converged,
                objective: s.objective,
                residual_norm: s.residual_norm,
                mean_total_s: s.mean.total,
                max_state_diff: c.max_state_diff,
                objective_rel_diff: c.objective_rel_diff,
            })
            .collect();
        self.csv(&rows)
    }
}
