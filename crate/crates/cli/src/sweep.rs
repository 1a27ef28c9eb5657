use heatlab::fit::fit_exponent;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{set_path, ExperimentConfig, SweepConfig};
use crate::error::{CliError, CliResult};
use crate::table::{num, Table};
use crate::tasks::{cell, run_task, summary_keys, TaskOutput};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitRecord {
    pub exponent: f64,
    pub intercept: f64,
    pub slope: f64,
    pub residual_sum: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSummary {
    pub task: String,
    pub inner_task: String,
    pub axis: String,
    pub rows: usize,
    pub failures: usize,
    pub fits: Vec<FitRecord>,
    pub best_exponent: Option<f64>,
}

fn render(v: &serde_json::Value) -> String {
    match v.as_f64() {
        Some(f) => num(f),
        None => v.to_string(),
    }
}

fn run_row(
    base: &serde_json::Value,
    sweep: &SweepConfig,
    value: &serde_json::Value,
) -> CliResult<TaskOutput> {
    let mut cfg = base.clone();
    if let Some(obj) = cfg.as_object_mut() {
        obj.remove("sweep");
        obj.remove("task");
    }
    set_path(&mut cfg, &sweep.axis, value.clone())?;
    let cfg = ExperimentConfig::from_value(cfg)?;
    run_task(sweep.task, &cfg)
}

/// Runs the inner task once per axis value. Rows keep the order of
/// `values`; a failing row records its error and the sweep goes on.
pub fn sweep(base: &serde_json::Value, sweep: &SweepConfig, jobs: usize) -> CliResult<TaskOutput> {
    let keys = summary_keys(sweep.task)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Io(e.to_string()))?;
    let results: Vec<CliResult<TaskOutput>> = pool.install(|| {
        sweep
            .values
            .par_iter()
            .map(|v| run_row(base, sweep, v))
            .collect()
    });

    let mut header = vec!["index", "value", "status", "error"];
    header.extend(keys.iter().map(String::as_str));
    let mut table = Table::new(&header);
    let mut failures = 0;
    for (i, (value, res)) in sweep.values.iter().zip(&results).enumerate() {
        let mut row = vec![i.to_string(), render(value)];
        match res {
            Ok(out) => {
                row.push("ok".into());
                row.push(String::new());
                row.extend(keys.iter().map(|k| cell(&out.summary[k])));
            }
            Err(e) => {
                failures += 1;
                row.push(e.kind().into());
                row.push(e.message().into());
                row.extend(keys.iter().map(|_| String::new()));
            }
        }
        table.push(row);
    }

    let (fits, best_exponent) = match &sweep.fit {
        Some(f) => {
            let col = |name: &str| -> CliResult<usize> {
                table
                    .header
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| CliError::Schema(format!("fit: unknown column `{name}`")))
            };
            let (xi, yi) = (col(&f.x)?, col(&f.y)?);
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for row in table.rows.iter().filter(|r| r[2] == "ok") {
                if let (Ok(x), Ok(y)) = (row[xi].parse::<f64>(), row[yi].parse::<f64>()) {
                    xs.push(x);
                    ys.push(if f.log_y { y.ln() } else { y });
                }
            }
            let (fits, best) = fit_exponent(&xs, &ys, &f.candidates)?;
            let records: Vec<FitRecord> = fits
                .iter()
                .map(|r| FitRecord {
                    exponent: r.exponent,
                    intercept: r.intercept,
                    slope: r.slope,
                    residual_sum: r.residual_sum,
                    r_squared: r.r_squared,
                })
                .collect();
            (records, Some(fits[best].exponent))
        }
        None => (Vec::new(), None),
    };
    let summary = SweepSummary {
        task: "sweep".into(),
        inner_task: sweep.task.name().into(),
        axis: sweep.axis.clone(),
        rows: table.rows.len(),
        failures,
        fits,
        best_exponent,
    };
    Ok(TaskOutput {
        table,
        summary: serde_json::to_value(&summary).expect("summary serializes"),
    })
}
