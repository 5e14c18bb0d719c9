//! `run`: repeated searches from a config file, written as CSV/JSON traces.

use std::fs;
use std::path::{Path, PathBuf};

use barycenter::exec::{map_indexed, Execution};
use barycenter::oracles::ZeroOrderOracle;
use barycenter::strategies::{run_parallel_with, run_search, RunRow};
use barycenter::{NoisyOracle, Oracle, Point, RunRecord};
use serde::Serialize;

use crate::config::{ExperimentConfig, Format};
use crate::error::CliError;
use crate::shift::{config_offset, shift_config, unshift, ShiftedOracle};

/// Command-line overrides for a config file.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub exec: Execution,
}

#[derive(Clone, Debug, Serialize)]
pub struct RepetitionSummary {
    pub repetition: u64,
    pub seed: u64,
    pub best_value: f64,
    pub best_point: Vec<f64>,
    pub final_readout: Vec<f64>,
    pub total_queries: u64,
    pub degenerate: bool,
    pub complex_feedback: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub success: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub shift: Vec<f64>,
    pub repetitions: Vec<RepetitionSummary>,
    pub total_queries: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub success_rate: Option<f64>,
    pub files: Vec<String>,
}

/// One repetition's result in user coordinates.
pub struct Repetition {
    pub seed: u64,
    pub record: RunRecord,
    pub offset: Vec<f64>,
}

impl Repetition {
    /// Per-worker traces; a single-worker run has one.
    pub fn traces(&self) -> Vec<&[RunRow]> {
        if self.record.workers.is_empty() {
            vec![&self.record.rows]
        } else {
            self.record.workers.iter().map(|w| w.rows.as_slice()).collect()
        }
    }
}

pub fn execute(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<Repetition>, CliError> {
    let base = cfg.oracle.build()?;
    let reps = map_indexed(cfg.repetitions as usize, exec, |r| {
        let seed = cfg.seed.wrapping_add(r as u64);
        run_repetition(cfg, &base, seed, exec)
    });
    reps.into_iter().collect()
}

fn run_repetition(
    cfg: &ExperimentConfig,
    base: &Oracle,
    seed: u64,
    exec: Execution,
) -> Result<Repetition, CliError> {
    let search = cfg.search_config(seed);
    let offset = config_offset(&search);
    let shifted = shift_config(&search);
    let noisy = NoisyOracle::new(base.clone(), cfg.noise_sigma, seed)?;
    let oracle = ShiftedOracle::new(&noisy as &dyn ZeroOrderOracle, offset.clone());
    let record = if cfg.workers == 1 {
        run_search(&shifted, &oracle)?
    } else {
        let configs = vec![shifted; cfg.workers];
        run_parallel_with(&configs, &oracle, exec)?
    };
    Ok(Repetition {
        seed,
        record,
        offset,
    })
}

pub fn cmd_run(config_path: &Path, opts: &RunOptions) -> Result<RunSummary, CliError> {
    let mut cfg = ExperimentConfig::load(config_path)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &opts.out {
        cfg.output = Some(out.clone());
    }
    if let Some(format) = opts.format {
        cfg.format = format;
    }
    let cfg = cfg.resolve()?;
    let out_dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("barycenter-out"));
    let reps = execute(&cfg, opts.exec)?;
    fs::create_dir_all(&out_dir)?;

    let mut files = Vec::new();
    let mut repetitions = Vec::new();
    for (r, rep) in reps.iter().enumerate() {
        let traces = rep.traces();
        for (k, rows) in traces.iter().enumerate() {
            let stem = if traces.len() == 1 {
                format!("rep{r:03}")
            } else {
                format!("rep{r:03}_w{k:02}")
            };
            let name = match cfg.format {
                Format::Csv => format!("{stem}.csv"),
                Format::Json => format!("{stem}.json"),
            };
            let bytes = match cfg.format {
                Format::Csv => rows_csv(rows, &rep.offset)?,
                Format::Json => rows_json(rows, &rep.offset)?,
            };
            fs::write(out_dir.join(&name), bytes)?;
            files.push(name);
        }
        let s = &rep.record.summary;
        let final_readout = unshift(&s.final_readout, &rep.offset);
        let success = cfg.success.as_ref().map(|t| {
            let d: f64 = final_readout
                .iter()
                .zip(&t.target)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d.sqrt() <= t.radius
        });
        repetitions.push(RepetitionSummary {
            repetition: r as u64,
            seed: rep.seed,
            best_value: s.best_value,
            best_point: unshift(&s.best_point, &rep.offset),
            final_readout,
            total_queries: s.total_queries,
            degenerate: rep.record.degenerate,
            complex_feedback: rep.record.complex_feedback,
            success,
        });
    }
    let success_rate = cfg.success.as_ref().map(|_| {
        repetitions.iter().filter(|r| r.success == Some(true)).count() as f64 / repetitions.len() as f64
    });
    let summary = RunSummary {
        shift: reps.first().map(|r| r.offset.clone()).unwrap_or_default(),
        total_queries: repetitions.iter().map(|r| r.total_queries).sum(),
        repetitions,
        success_rate,
        files,
        config: cfg,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(out_dir.join("summary.json"), json + "\n")?;

    let degenerate = summary.repetitions.iter().filter(|r| r.degenerate).count();
    if degenerate > 0 {
        return Err(CliError::Degenerate(degenerate));
    }
    Ok(summary)
}

fn user_coords(p: &Point, offset: &[f64]) -> Vec<f64> {
    unshift(p, offset)
}

/// Columns `n, x0.., f, mass_magnitude, xhat0.., step_norm`; shortest
/// round-trip decimal formatting, `\n` row terminators.
pub fn rows_csv(rows: &[RunRow], offset: &[f64]) -> Result<Vec<u8>, CliError> {
    let dim = offset.len();
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec!["n".to_string()];
    header.extend((0..dim).map(|i| format!("x{i}")));
    header.push("f".into());
    header.push("mass_magnitude".into());
    header.extend((0..dim).map(|i| format!("xhat{i}")));
    header.push("step_norm".into());
    w.write_record(&header).map_err(io_err)?;
    for row in rows {
        let mut rec = vec![row.n.to_string()];
        rec.extend(user_coords(&row.query, offset).iter().map(f64::to_string));
        rec.push(row.value.to_string());
        rec.push(row.mass_magnitude.to_string());
        rec.extend(user_coords(&row.readout, offset).iter().map(f64::to_string));
        rec.push(row.step_norm.to_string());
        w.write_record(&rec).map_err(io_err)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Serialize)]
struct JsonRow {
    n: u64,
    x: Vec<f64>,
    f: f64,
    mass_magnitude: f64,
    xhat: Vec<f64>,
    step_norm: f64,
}

pub fn rows_json(rows: &[RunRow], offset: &[f64]) -> Result<Vec<u8>, CliError> {
    let rows: Vec<JsonRow> = rows
        .iter()
        .map(|r| JsonRow {
            n: r.n,
            x: user_coords(&r.query, offset),
            f: r.value,
            mass_magnitude: r.mass_magnitude,
            xhat: user_coords(&r.readout, offset),
            step_norm: r.step_norm,
        })
        .collect();
    let mut out = serde_json::to_vec_pretty(&rows).map_err(|e| CliError::Io(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

fn io_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}
