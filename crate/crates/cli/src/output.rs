//! Run artifacts: `results.csv`, `meta.json` and the optional `plot.svg`.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::json;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::experiments::{Table, Value};
use crate::plot::{Chart, Series};

pub fn csv_bytes(table: &Table) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(table.columns())?;
    for row in &table.rows {
        w.write_record(row.iter().map(Value::render))?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

pub struct RunInfo {
    pub workers: usize,
    pub wall_time_s: f64,
}

pub fn meta_json(cfg: &ExperimentConfig, table: &Table, info: &RunInfo) -> serde_json::Value {
    json!({
        "experiment": cfg.experiment.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed,
        "config": cfg,
        "columns": table.columns(),
        "rows": table.rows.len(),
        "workers": info.workers,
        "wall_time_s": info.wall_time_s,
        "timestamp": chrono::Utc::now().to_rfc3339(),
        "notes": table.notes,
        "extra": table.extra,
    })
}

fn series_by(table: &Table, key: &str, x: &str, y: &str) -> Vec<Series> {
    let (Some(keys), Some(xs), Some(ys)) = (table.column(key), table.column_f64(x), table.column_f64(y)) else {
        return Vec::new();
    };
    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for ((k, x), y) in keys.iter().zip(xs).zip(ys) {
        groups.entry(format!("{key} = {}", k.render())).or_default().push((x, y));
    }
    groups
        .into_iter()
        .map(|(label, points)| Series { label, points })
        .collect()
}

/// A chart for the experiment, if it has a natural one.
pub fn chart(table: &Table) -> Option<Chart> {
    let (title, x, y, key, log_x, log_y) = match table.experiment {
        Experiment::CltRate => ("Kolmogorov distance to the Gaussian", "n", "d_k", "k", true, true),
        Experiment::PnnCount => ("Mean voting-set size", "n", "mean_L", "k", true, false),
        Experiment::BiasDecay => ("Absolute bias", "n", "abs_bias", "k", true, true),
        Experiment::Concentration => ("P(L <= E L / 2)", "n", "fraction", "k", true, false),
        Experiment::LowerBoundFit => ("Double membership integral", "k", "estimate", "t", true, true),
        Experiment::TailCalibration => ("Simulated vs exact membership", "psi", "mc_freq", "k", false, false),
        Experiment::AssumptionAudit => return None,
    };
    Some(Chart {
        title: title.into(),
        x_label: x.into(),
        y_label: y.into(),
        log_x,
        log_y,
        series: series_by(table, key, x, y),
    })
}

pub fn write_artifacts(dir: &Path, cfg: &ExperimentConfig, table: &Table, info: &RunInfo) -> Result<()> {
    let io = |what: &str, e: std::io::Error| CliError::Io(format!("{what} in {}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(|e| io("cannot create output directory", e))?;
    std::fs::write(dir.join("results.csv"), csv_bytes(table)?).map_err(|e| io("cannot write results.csv", e))?;
    let meta = serde_json::to_string_pretty(&meta_json(cfg, table, info)).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(dir.join("meta.json"), meta + "\n").map_err(|e| io("cannot write meta.json", e))?;
    if cfg.plot {
        if let Some(c) = chart(table) {
            std::fs::write(dir.join("plot.svg"), c.to_svg()).map_err(|e| io("cannot write plot.svg", e))?;
        }
    }
    Ok(())
}
