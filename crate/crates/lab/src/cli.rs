//! Command-line interface.
//!
//! Exit status is 0 when every check passes, 2 when a statistical check
//! fails and 1 on any error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use crate::config::{Config, Model};
use crate::output::preamble;
use crate::pipelines::{self, Outcome};
use crate::runner::Runner;

#[derive(Debug, Parser)]
#[command(name = "bralev", version, about = "Simulate and verify extremes of branching Lévy processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML model and experiment configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed; overrides `experiment.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads. Results do not depend on this.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Overrides `experiment.replications`.
    #[arg(long)]
    pub replications: Option<u64>,
    /// Comma-separated horizons; overrides `experiment.t_grid`.
    #[arg(long, value_delimiter = ',')]
    pub t_grid: Option<Vec<f64>>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate trees; write populations and one full tree.
    Simulate(Common),
    /// Sample the limit point process and check its maximum.
    Limit(Common),
    /// Compare scaled first and second maxima with their limit laws.
    VerifyMax(Common),
    /// Compare Laplace functionals with the limit.
    VerifyLaplace(Common),
    /// Goodness of fit of the cluster size law.
    VerifyCluster(Common),
    /// Locate the travelling front and check the bands around it.
    Front(Common),
    /// Large-jump events, the many-to-one identity and the increment tail.
    Diagnostics(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Simulate(c)
            | Command::Limit(c)
            | Command::VerifyMax(c)
            | Command::VerifyLaplace(c)
            | Command::VerifyCluster(c)
            | Command::Front(c)
            | Command::Diagnostics(c) => c,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Limit(_) => "limit",
            Command::VerifyMax(_) => "verify-max",
            Command::VerifyLaplace(_) => "verify-laplace",
            Command::VerifyCluster(_) => "verify-cluster",
            Command::Front(_) => "front",
            Command::Diagnostics(_) => "diagnostics",
        }
    }
}

/// Runs a parsed command and writes its output files. Returns the verdict
/// and the report path.
pub fn run(command: &Command) -> anyhow::Result<(bool, PathBuf)> {
    let common = command.common();
    let mut cfg = Config::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.experiment.seed = Some(seed);
    }
    if let Some(n) = common.replications {
        cfg.experiment.replications = n;
    }
    if let Some(grid) = &common.t_grid {
        cfg.experiment.t_grid = grid.clone();
    }
    let model = Model::from_config(&cfg)?;
    let seed = cfg.seed();
    let runner = Runner::new(seed, common.workers)?;
    let ex = &cfg.experiment;
    let n = ex.replications;
    let outcome = match command {
        Command::Simulate(_) => pipelines::simulate(&cfg, &model, &runner, n)?,
        Command::Limit(_) => pipelines::limit_check(&cfg, &model, &runner, ex.limit_draws)?.outcome(),
        Command::VerifyMax(_) => pipelines::verify_max(&cfg, &model, &runner, &ex.t_grid, n)?.outcome(),
        Command::VerifyLaplace(_) => pipelines::verify_laplace(&cfg, &model, &runner, ex.t, n)?.outcome(),
        Command::VerifyCluster(_) => pipelines::verify_cluster(&model, &runner, ex.cluster_draws)?.outcome(),
        Command::Front(_) => {
            let reps = common.replications.unwrap_or(ex.front_replications);
            pipelines::front(&cfg, &model, &runner, &ex.t_grid, reps)?.outcome()
        }
        Command::Diagnostics(_) => pipelines::diagnostics(&cfg, &model, &runner, n)?.outcome(),
    };
    let lines = preamble(&cfg, &model, command.name(), seed);
    let report = write_outcome(&common.out_dir, &outcome, &lines)?;
    Ok((outcome.pass, report))
}

fn write_outcome(dir: &Path, outcome: &Outcome, lines: &[String]) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, table) in &outcome.tables {
        table.write(&dir.join(name), lines)?;
    }
    let mut text = String::new();
    for l in lines {
        text.push_str("# ");
        text.push_str(l);
        text.push('\n');
    }
    text.push_str(&outcome.summary);
    text.push_str(if outcome.pass { "verdict: PASS\n" } else { "verdict: FAIL\n" });
    let report = dir.join("report.txt");
    std::fs::write(&report, text).with_context(|| format!("writing {}", report.display()))?;
    Ok(report)
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok((true, report)) => {
            println!("{}", report.display());
            ExitCode::SUCCESS
        }
        Ok((false, report)) => {
            eprintln!("statistical check failed; see {}", report.display());
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_grid_and_overrides() {
        let cli = Cli::parse_from([
            "bralev",
            "verify-max",
            "--config",
            "c.toml",
            "--t-grid",
            "4,6,8",
            "--workers",
            "3",
            "--seed",
            "7",
        ]);
        let c = cli.command.common();
        assert_eq!(c.t_grid.as_deref(), Some(&[4.0, 6.0, 8.0][..]));
        assert_eq!(c.workers, 3);
        assert_eq!(c.seed, Some(7));
        assert_eq!(cli.command.name(), "verify-max");
    }
}
