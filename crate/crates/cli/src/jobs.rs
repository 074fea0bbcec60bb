//! Running the solver over all evaluation points and writing the result files.

use std::fs;
use std::io;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use elliptic_bsde::problems::write_intensity_csv;
use elliptic_bsde::rng::derive_seed;
use elliptic_bsde::solver::{estimate_point, RunStatus, SolveResult};
use elliptic_bsde::Problem;

use crate::config::{emit_config, Point, ProblemConfig, RunConfig};

/// Outcome of one evaluation point.
#[derive(Clone, Debug)]
pub struct SummaryRow {
    pub index: usize,
    pub point: Point,
    pub seed: u64,
    pub reference: Option<f64>,
    pub outcome: Result<SolveResult, String>,
}

impl SummaryRow {
    pub fn estimate(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|r| r.estimate)
    }

    pub fn abs_error(&self) -> Option<f64> {
        Some((self.estimate()? - self.reference?).abs())
    }

    pub fn seconds(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|r| r.seconds)
    }

    pub fn is_ok(&self) -> bool {
        self.outcome.is_ok()
    }

    pub fn status(&self) -> &str {
        match &self.outcome {
            Ok(r) if r.on_boundary => "ok-boundary",
            Ok(_) => "ok",
            Err(_) => "failed",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub total_seconds: f64,
    pub concurrency: usize,
}

impl Summary {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(SummaryRow::is_ok)
    }

    /// Wall time scaled to eight points, the unit the timing tables use.
    pub fn seconds_per_eight_points(&self) -> f64 {
        if self.rows.is_empty() {
            0.0
        } else {
            self.total_seconds * 8.0 / self.rows.len() as f64
        }
    }

    pub fn max_abs_error(&self) -> Option<f64> {
        self.rows.iter().filter_map(SummaryRow::abs_error).reduce(f64::max)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration: {0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("problem setup: {0}")]
    Problem(#[from] elliptic_bsde::Error),
    #[error("writing output: {0}")]
    Io(#[from] io::Error),
    #[error("writing CSV: {0}")]
    Csv(#[from] csv::Error),
}

/// Solves every evaluation point with at most `config.concurrency` points in
/// flight. `on_done` sees each row as it completes; the returned rows are in
/// point order.
pub fn run_jobs(config: &RunConfig, mut on_done: impl FnMut(&SummaryRow)) -> Result<Summary, RunError> {
    config.validate()?;
    let problem = config.problem.build()?;
    let points = config.points.points(config.problem.dim())?;
    let started = Instant::now();
    let next = AtomicUsize::new(0);
    let workers = config.concurrency.min(points.len()).max(1);
    let (tx, rx) = mpsc::channel::<SummaryRow>();
    let mut rows: Vec<SummaryRow> = Vec::with_capacity(points.len());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, points, problem) = (&next, &points, &*problem);
            scope.spawn(move || loop {
                let index = next.fetch_add(1, Ordering::Relaxed);
                let Some(point) = points.get(index) else { break };
                let row = solve_one(problem, config, index, point);
                if tx.send(row).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for row in rx {
            on_done(&row);
            rows.push(row);
        }
    });

    rows.sort_by_key(|r| r.index);
    Ok(Summary { rows, total_seconds: started.elapsed().as_secs_f64(), concurrency: workers })
}

fn solve_one(problem: &dyn Problem, config: &RunConfig, index: usize, point: &Point) -> SummaryRow {
    let seed = derive_seed(config.seed, &[index as u64]);
    let outcome = estimate_point(problem, &point.x, &config.training, seed).map_err(|e| e.to_string());
    SummaryRow { index, point: point.clone(), seed, reference: problem.reference(&point.x), outcome }
}

fn fmt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes `summary.csv`, `traces/`, `plot/`, `config.toml` and, unless the
/// run is deterministic, `timing.csv` into `dir`. Dividend runs also get
/// `intensity.csv`.
pub fn write_outputs(config: &RunConfig, summary: &Summary, dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir.join("traces"))?;
    fs::write(dir.join("config.toml"), emit_config(config))?;
    write_summary(config, summary, fs::File::create(dir.join("summary.csv"))?)?;
    for row in &summary.rows {
        let file = fs::File::create(dir.join("traces").join(format!("point_{:03}.csv", row.index)))?;
        write_trace(row, file)?;
    }
    crate::plot::emit_plot_data(summary, &dir.join("plot"))?;
    if !config.deterministic {
        write_timing(summary, fs::File::create(dir.join("timing.csv"))?)?;
    }
    if let ProblemConfig::Dividend(p) = &config.problem {
        write_intensity_csv(&p.q, fs::File::create(dir.join("intensity.csv"))?)?;
    }
    Ok(())
}

/// Columns: `point, coordinate, estimate, reference, abs_error, seconds,
/// seed, runs_ok, runs_failed, status, message, x_1 .. x_d`.
pub fn write_summary(config: &RunConfig, summary: &Summary, out: impl io::Write) -> Result<(), RunError> {
    let dim = config.problem.dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "point",
        "coordinate",
        "estimate",
        "reference",
        "abs_error",
        "seconds",
        "seed",
        "runs_ok",
        "runs_failed",
        "status",
        "message",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=dim).map(|k| format!("x_{k}")));
    w.write_record(&header)?;
    for row in &summary.rows {
        let (ok, failed, message) = match &row.outcome {
            Ok(r) => {
                let failed = r.failed_runs();
                let message = r
                    .runs
                    .iter()
                    .find_map(|run| match &run.status {
                        RunStatus::Failed(m) => Some(m.clone()),
                        RunStatus::Ok => None,
                    })
                    .unwrap_or_default();
                (r.runs.len() - failed, failed, message)
            }
            Err(e) => (0, config.training.runs, e.clone()),
        };
        let seconds = if config.deterministic { None } else { row.seconds() };
        let mut record = vec![
            row.index.to_string(),
            row.point.coordinate.to_string(),
            fmt(row.estimate()),
            fmt(row.reference),
            fmt(row.abs_error()),
            fmt(seconds),
            row.seed.to_string(),
            ok.to_string(),
            failed.to_string(),
            row.status().to_string(),
            message,
        ];
        record.extend(row.point.x.iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns: `run, epoch, train_loss, val_loss, u0`, epochs counted from 1.
pub fn write_trace(row: &SummaryRow, out: impl io::Write) -> Result<(), RunError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["run", "epoch", "train_loss", "val_loss", "u0"])?;
    if let Ok(result) = &row.outcome {
        for (r, run) in result.runs.iter().enumerate() {
            let h = &run.history;
            for e in 0..h.u0.len() {
                w.write_record(&[
                    r.to_string(),
                    (e + 1).to_string(),
                    fmt(h.train_loss.get(e).copied()),
                    fmt(h.val_loss.get(e).copied()),
                    h.u0[e].to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Columns: `points, concurrency, total_seconds, seconds_per_eight_points`.
pub fn write_timing(summary: &Summary, out: impl io::Write) -> Result<(), RunError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["points", "concurrency", "total_seconds", "seconds_per_eight_points"])?;
    w.write_record(&[
        summary.rows.len().to_string(),
        summary.concurrency.to_string(),
        summary.total_seconds.to_string(),
        summary.seconds_per_eight_points().to_string(),
    ])?;
    w.flush()?;
    Ok(())
}
