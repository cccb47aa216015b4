//! Per-epoch metrics as CSV.

use std::fmt::Write as _;
use std::path::Path;

use weldcnn_core::train::MetricsHistory;

use crate::{Error, Result};

pub const CSV_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc";

/// One row per epoch (1-based), six decimals per value.
pub fn metrics_csv(history: &MetricsHistory) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (i, m) in history.epochs.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.6}",
            i + 1,
            m.train_loss,
            m.train_acc,
            m.val_loss,
            m.val_acc
        );
    }
    out
}

pub fn write_metrics_csv(path: &Path, history: &MetricsHistory) -> Result<()> {
    std::fs::write(path, metrics_csv(history)).map_err(|e| Error::io(path, e))
}
