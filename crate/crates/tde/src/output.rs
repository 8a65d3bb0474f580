//! CSV serialisation of result tables and single trials.

use std::io::Write;
use std::path::Path;

use crate::error::{HarnessError, Result};
use crate::runner::{Table, TrialRecord};

pub const TABLE_HEADER: [&str; 6] = [
    "sweep_var",
    "estimator",
    "mean_tau_mse_us2",
    "trials_ok",
    "trials_failed",
    "mean_runtime_ns",
];

fn number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else {
        String::new()
    }
}

pub fn write_table<W: Write>(table: &Table, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TABLE_HEADER)?;
    for r in &table.rows {
        w.write_record([
            format!("{}", r.sweep),
            r.estimator.name().to_string(),
            number(r.mean_tau_mse),
            r.trials_ok.to_string(),
            r.trials_failed.to_string(),
            r.mean_runtime_ns.map_or(String::new(), |t| format!("{t:.0}")),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(table: &Table, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_table(table, std::io::BufWriter::new(file)).map_err(|source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

/// Columns of [`trial_row`]: three per estimator after the trial coordinates.
pub fn trial_header(record: &TrialRecord) -> Vec<String> {
    let mut h = vec!["trial".to_string(), "kappa".into(), "snr_db".into()];
    for o in &record.outcomes {
        let name = o.estimator.name();
        h.push(format!("{name}_tau_mse_us2"));
        h.push(format!("{name}_failed"));
        h.push(format!("{name}_runtime_ns"));
    }
    h
}

pub fn trial_row(record: &TrialRecord) -> Vec<String> {
    let mut row = vec![
        record.trial.to_string(),
        format!("{}", record.kappa),
        record.snr_db.map_or(String::new(), |s| format!("{s}")),
    ];
    for o in &record.outcomes {
        row.push(o.tau_mse.map_or(String::new(), number));
        row.push(o.failed().to_string());
        row.push(o.runtime_ns.map_or(String::new(), |t| t.to_string()));
    }
    row
}

pub fn write_trial<W: Write>(record: &TrialRecord, header: bool, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if header {
        w.write_record(trial_header(record))?;
    }
    w.write_record(trial_row(record))?;
    w.flush()?;
    Ok(())
}
