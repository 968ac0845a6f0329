//! One-at-a-time experiment grid.
//!
//! Per use case: one clean baseline, each attack without defense, and each
//! attack with the defense at every monitoring period in the Δ set.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{ExperimentConfig, PatternKind};
use super::experiment::{run_to_file, RunSummary};
use crate::error::{Error, Result};

pub const DEFAULT_DELTAS: [usize; 3] = [0, 10, 40];

#[derive(Clone, Debug, PartialEq)]
pub struct GridEntry {
    pub run_id: String,
    pub config: ExperimentConfig,
}

/// Runs per use case: `1 + attacks * (1 + deltas)`.
pub fn runs_per_use_case(deltas: usize) -> usize {
    1 + PatternKind::ATTACKS.len() * (1 + deltas)
}

/// Expands each base config into its one-at-a-time variations. Run ids are
/// derived from the base name and seed, so the manifest is reproducible.
pub fn oat_grid(bases: &[ExperimentConfig], deltas: &[usize]) -> Vec<GridEntry> {
    let mut entries = Vec::with_capacity(bases.len() * runs_per_use_case(deltas.len()));
    for base in bases {
        let prefix = format!("{}-s{}", base.name, base.seed);
        let variant = |pattern: PatternKind, delta: Option<usize>| {
            let mut c = base.clone();
            c.pattern = pattern;
            c.defense_enabled = delta.is_some();
            if let Some(d) = delta {
                c.monitor.delta = d;
            }
            c
        };
        entries.push(GridEntry {
            run_id: format!("{prefix}-baseline"),
            config: variant(PatternKind::None, None),
        });
        for attack in PatternKind::ATTACKS {
            entries.push(GridEntry {
                run_id: format!("{prefix}-{}-nodefense", attack.name()),
                config: variant(attack, None),
            });
            for &d in deltas {
                entries.push(GridEntry {
                    run_id: format!("{prefix}-{}-delta{d}", attack.name()),
                    config: variant(attack, Some(d)),
                });
            }
        }
    }
    entries
}

#[derive(Debug)]
pub struct GridResult {
    pub run_id: String,
    pub path: PathBuf,
    pub outcome: Result<RunSummary>,
}

/// Runs every entry, writing `<out_dir>/<run_id>.csv` and a `manifest.csv`.
/// A failing run is recorded and does not stop the others.
pub fn run_grid(entries: &[GridEntry], out_dir: &Path, jobs: usize) -> Result<Vec<GridResult>> {
    std::fs::create_dir_all(out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let results: Vec<GridResult> = pool.install(|| {
        entries
            .par_iter()
            .map(|e| {
                let path = out_dir.join(format!("{}.csv", e.run_id));
                let mut config = e.config.clone();
                config.out = path.clone();
                let outcome = run_to_file(&config, Some(&path), 1).map_err(|source| Error::Run {
                    run_id: e.run_id.clone(),
                    source: Box::new(source),
                });
                GridResult {
                    run_id: e.run_id.clone(),
                    path,
                    outcome,
                }
            })
            .collect()
    });
    write_manifest(entries, &results, &out_dir.join("manifest.csv"))?;
    Ok(results)
}

fn write_manifest(entries: &[GridEntry], results: &[GridResult], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "run_id",
        "attack",
        "defense",
        "delta",
        "status",
        "readout_accuracy",
        "mean_post_activation_f2",
    ])?;
    for (e, r) in entries.iter().zip(results) {
        let (status, acc, f2) = match &r.outcome {
            Ok(s) => ("ok".to_string(), s.readout_accuracy.to_string(), s.mean_post_activation_f.to_string()),
            Err(err) => (format!("failed: {err}"), String::new(), String::new()),
        };
        w.write_record([
            e.run_id.clone(),
            e.config.pattern.name().to_string(),
            e.config.defense_enabled.to_string(),
            if e.config.defense_enabled {
                e.config.monitor.delta.to_string()
            } else {
                String::new()
            },
            status,
            acc,
            f2,
        ])?;
    }
    w.flush()?;
    Ok(())
}
