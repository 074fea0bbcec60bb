//! Plot-ready CSV files.
//!
//! * `solution.csv`: `x, estimate, reference` with one row per point, `x`
//!   being the swept coordinate.
//! * `loss_NNN.csv`: `epoch, train_loss, val_loss`, averaged over the
//!   successful runs of point `NNN`, one row per epoch.
//!
//! Missing values are left empty.

use std::fs;
use std::path::Path;

use elliptic_bsde::solver::RunStatus;

use crate::jobs::{RunError, Summary, SummaryRow};

pub fn emit_plot_data(summary: &Summary, dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("solution.csv"))?;
    w.write_record(["x", "estimate", "reference"])?;
    for row in &summary.rows {
        w.write_record(&[row.point.coordinate.to_string(), opt(row.estimate()), opt(row.reference)])?;
    }
    w.flush()?;
    for row in &summary.rows {
        let mut w = csv::Writer::from_path(dir.join(format!("loss_{:03}.csv", row.index)))?;
        w.write_record(["epoch", "train_loss", "val_loss"])?;
        for (e, (train, val)) in mean_losses(row).into_iter().enumerate() {
            w.write_record(&[(e + 1).to_string(), train.to_string(), val.to_string()])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Per-epoch mean of training and validation loss over successful runs.
pub fn mean_losses(row: &SummaryRow) -> Vec<(f64, f64)> {
    let Ok(result) = &row.outcome else { return Vec::new() };
    let runs: Vec<_> = result
        .runs
        .iter()
        .filter(|r| r.status == RunStatus::Ok)
        .map(|r| &r.history)
        .collect();
    let epochs = runs.iter().map(|h| h.val_loss.len()).min().unwrap_or(0);
    (0..epochs)
        .map(|e| {
            let n = runs.len() as f64;
            let train = runs.iter().map(|h| h.train_loss[e]).sum::<f64>() / n;
            let val = runs.iter().map(|h| h.val_loss[e]).sum::<f64>() / n;
            (train, val)
        })
        .collect()
}
