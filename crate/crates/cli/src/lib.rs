//! Experiment runner: JSON configurations in, CSV tables and JSON summaries out.

pub mod config;
pub mod error;
pub mod seed;
pub mod sweep;
pub mod table;
pub mod tasks;

use std::path::{Path, PathBuf};

use config::{ExperimentConfig, Task};
use error::{CliError, CliResult};
use tasks::TaskOutput;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

/// Where the artifacts of a run went.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub csv: Option<PathBuf>,
    pub summary_path: Option<PathBuf>,
    pub summary: serde_json::Value,
}

/// `out.csv` → `out.summary.json`.
pub fn summary_path(csv: &Path) -> PathBuf {
    let stem = csv
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    csv.with_file_name(format!("{stem}.summary.json"))
}

pub fn execute(
    task: Task,
    mut raw: serde_json::Value,
    opts: &RunOptions,
) -> CliResult<(ExperimentConfig, TaskOutput)> {
    if let Some(seed) = opts.seed {
        match raw.as_object_mut() {
            Some(obj) => {
                obj.insert("seed".into(), seed.into());
            }
            None => return Err(CliError::Schema("config must be a JSON object".into())),
        }
    }
    let cfg = ExperimentConfig::from_value(raw.clone())?;
    if let Some(t) = cfg.task {
        if t != task {
            return Err(CliError::Schema(format!(
                "config is for `{}` but `{}` was requested",
                t.name(),
                task.name()
            )));
        }
    }
    let out = if task == Task::Sweep {
        let sw = cfg
            .sweep
            .as_ref()
            .ok_or_else(|| CliError::Schema("sweep needs a `sweep` section".into()))?;
        let jobs = opts
            .jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        sweep::sweep(&raw, sw, jobs)?
    } else {
        tasks::run_task(task, &cfg)?
    };
    Ok((cfg, out))
}

/// Runs one task from a config file and writes its artifacts. Without an
/// output path the CSV goes to stdout and no summary file is written.
pub fn run(task: Task, config: &Path, opts: &RunOptions) -> CliResult<RunReport> {
    let raw = ExperimentConfig::load(config)?;
    let (cfg, out) = execute(task, raw, opts).map_err(|e| e.context(task.name()))?;
    let target = opts
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from));
    match target {
        Some(path) => {
            out.table.write(
                std::fs::File::create(&path)
                    .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
            )?;
            let sp = summary_path(&path);
            let text = serde_json::to_string_pretty(&out.summary).expect("summary serializes");
            std::fs::write(&sp, text + "\n")
                .map_err(|e| CliError::Io(format!("{}: {e}", sp.display())))?;
            Ok(RunReport {
                csv: Some(path),
                summary_path: Some(sp),
                summary: out.summary,
            })
        }
        None => {
            out.table.write(std::io::stdout().lock())?;
            Ok(RunReport {
                csv: None,
                summary_path: None,
                summary: out.summary,
            })
        }
    }
}
