use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use flmon_core::harness::grid::{oat_grid, run_grid, DEFAULT_DELTAS};
use flmon_core::harness::report::write_report;
use flmon_core::harness::search::{delta_search, recommend, render_scores, scores_from_csvs};
use flmon_core::harness::experiment::run_to_file;
use flmon_core::ExperimentConfig;

/// Federated learning under model poisoning, with a monitored attestation defense.
#[derive(Parser)]
#[command(name = "flmon", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file of `key = value` lines.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set defense.delta=10`. Repeatable.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        Ok(ExperimentConfig::load(self.config.as_deref(), &self.overrides)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its per-round CSV.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output CSV; defaults to the config's `out`.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Worker threads; results do not depend on this.
        #[arg(short, long, default_value_t = 1)]
        threads: usize,
    },
    /// Expand use cases into the one-at-a-time grid and run it.
    Grid {
        /// One config file per use case.
        #[arg(short, long = "config", required = true)]
        configs: Vec<PathBuf>,
        /// Overrides applied to every use case.
        #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Monitoring periods to evaluate.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_DELTAS)]
        deltas: Vec<usize>,
        #[arg(short, long, default_value = "grid")]
        out_dir: PathBuf,
        /// Runs executed concurrently.
        #[arg(short, long, default_value_t = 1)]
        jobs: usize,
        /// Print the manifest without running anything.
        #[arg(long)]
        dry_run: bool,
    },
    /// Score candidate monitoring periods and recommend one.
    Search {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_DELTAS)]
        candidates: Vec<usize>,
        /// Seeds per candidate, counting up from the config's seed.
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[arg(short, long, default_value = "search")]
        out_dir: PathBuf,
        #[arg(short, long, default_value_t = 1)]
        jobs: usize,
        /// Score existing run CSVs instead of running new ones.
        #[arg(long, num_args = 1..)]
        from: Vec<PathBuf>,
    },
    /// Compare run CSVs: aligned accuracy table, summaries and charts.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(short, long, default_value = "report")]
        out_dir: PathBuf,
        /// Skip the SVG charts.
        #[arg(long)]
        no_charts: bool,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, out, threads } => {
            let config = config.load()?;
            let path = out.clone().unwrap_or_else(|| config.out.clone());
            let s = run_to_file(&config, Some(&path), threads)?;
            println!(
                "{}: {} rounds, accuracy at round {} = {:.4}, final = {:.4}, mean post-activation F2 = {:.4}",
                path.display(),
                s.rounds_run,
                s.readout_round,
                s.readout_accuracy,
                s.final_accuracy,
                s.mean_post_activation_f
            );
        }
        Command::Grid {
            configs,
            overrides,
            deltas,
            out_dir,
            jobs,
            dry_run,
        } => {
            let bases = configs
                .iter()
                .map(|p| {
                    ExperimentConfig::load(Some(p), &overrides).with_context(|| format!("loading {}", p.display()))
                })
                .collect::<Result<Vec<_>>>()?;
            let entries = oat_grid(&bases, &deltas);
            if dry_run {
                for e in &entries {
                    println!("{}", e.run_id);
                }
                println!("{} runs", entries.len());
                return Ok(());
            }
            let results = run_grid(&entries, &out_dir, jobs)?;
            let failed: Vec<_> = results.iter().filter_map(|r| r.outcome.as_ref().err()).collect();
            println!("{} runs, {} failed; manifest at {}", results.len(), failed.len(), out_dir.join("manifest.csv").display());
            for e in &failed {
                eprintln!("  {e}");
            }
            if !failed.is_empty() {
                bail!("{} grid runs failed", failed.len());
            }
        }
        Command::Search {
            config,
            candidates,
            seeds,
            out_dir,
            jobs,
            from,
        } => {
            let scores = if from.is_empty() {
                delta_search(&config.load()?, &candidates, seeds, &out_dir, jobs)?
            } else {
                scores_from_csvs(&from)?
            };
            print!("{}", render_scores(&scores));
            match recommend(&scores) {
                Some(d) => println!("recommended delta = {d}"),
                None => bail!("no scores to recommend from"),
            }
        }
        Command::Report {
            inputs,
            out_dir,
            no_charts,
        } => {
            let files = write_report(&inputs, &out_dir, !no_charts)?;
            println!("wrote {}", files.comparison.display());
            println!("wrote {}", files.summary.display());
            for c in &files.charts {
                println!("wrote {}", c.display());
            }
        }
    }
    Ok(())
}
