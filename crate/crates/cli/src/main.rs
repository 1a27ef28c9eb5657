use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use heatlab_cli::config::Task;
use heatlab_cli::{run, RunOptions};

#[derive(Parser)]
#[command(
    name = "heatlab",
    version,
    about = "Observability and control experiments for the 1-D heat equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output; the summary goes next to it as `<stem>.summary.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent sweep rows.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Forward solve; CSV t,x,y.
    Solve(Common),
    /// Minimal-norm null control; CSV t,x,h on omega.
    Hum(Common),
    /// Smooth null control supported in omega; CSV t,x,h.
    Regctl(Common),
    /// Measured observability constant against the bounds.
    Obscost(Common),
    /// Weighted estimate sides and threshold search.
    Carleman(Common),
    /// Worst-case eigenfunction-sum ratios over a cutoff ladder.
    Spectral(Common),
    /// Repeats a task over a list of values at one config path.
    Sweep(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (task, common) = match cli.command {
        Command::Solve(c) => (Task::Solve, c),
        Command::Hum(c) => (Task::Hum, c),
        Command::Regctl(c) => (Task::Regctl, c),
        Command::Obscost(c) => (Task::Obscost, c),
        Command::Carleman(c) => (Task::Carleman, c),
        Command::Spectral(c) => (Task::Spectral, c),
        Command::Sweep(c) => (Task::Sweep, c),
    };
    let opts = RunOptions {
        seed: common.seed,
        out: common.out,
        jobs: common.jobs,
    };
    match run(task, &common.config, &opts) {
        Ok(report) => {
            if report.csv.is_some() {
                println!("{}", report.summary);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
