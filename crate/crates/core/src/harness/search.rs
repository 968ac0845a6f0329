//! Choosing the monitoring period Δ.
//!
//! Each candidate is run over several seeds with the defense on; the
//! recommendation maximizes mean post-activation F2, breaking ties by higher
//! final accuracy and then by the smaller Δ.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::experiment::{mean, run_to_file};
use super::report::read_run_csv;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DeltaScore {
    pub delta: usize,
    pub mean_f2: f64,
    pub mean_final_accuracy: f64,
    pub runs: usize,
}

/// Best-scoring Δ, or `None` for an empty table.
pub fn recommend(scores: &[DeltaScore]) -> Option<usize> {
    scores
        .iter()
        .max_by(|a, b| {
            a.mean_f2
                .total_cmp(&b.mean_f2)
                .then(a.mean_final_accuracy.total_cmp(&b.mean_final_accuracy))
                .then(b.delta.cmp(&a.delta))
        })
        .map(|s| s.delta)
}

fn aggregate(per_run: Vec<(usize, f64, f64)>) -> Vec<DeltaScore> {
    let mut deltas: Vec<usize> = per_run.iter().map(|r| r.0).collect();
    deltas.sort_unstable();
    deltas.dedup();
    deltas
        .into_iter()
        .map(|delta| {
            let (f2, acc): (Vec<f64>, Vec<f64>) = per_run
                .iter()
                .filter(|r| r.0 == delta)
                .map(|r| (r.1, r.2))
                .unzip();
            DeltaScore {
                delta,
                mean_f2: mean(&f2),
                mean_final_accuracy: mean(&acc),
                runs: f2.len(),
            }
        })
        .collect()
}

/// Runs every (Δ, seed) pair, seeds `base.seed + i`, writing one CSV each
/// under `out_dir`.
pub fn delta_search(
    base: &ExperimentConfig,
    candidates: &[usize],
    seeds: usize,
    out_dir: &Path,
    jobs: usize,
) -> Result<Vec<DeltaScore>> {
    if candidates.is_empty() || seeds == 0 {
        return Err(Error::InvalidArgument("need at least one candidate and one seed".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut plan = Vec::new();
    for &delta in candidates {
        for i in 0..seeds as u64 {
            let mut c = base.clone();
            c.defense_enabled = true;
            c.monitor.delta = delta;
            c.seed = base.seed + i;
            c.validate()?;
            let path = out_dir.join(format!("{}-delta{delta}-s{}.csv", base.name, c.seed));
            c.out = path.clone();
            plan.push(c);
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let per_run = pool.install(|| {
        plan.par_iter()
            .map(|c| {
                let s = run_to_file(c, None, 1)?;
                Ok((c.monitor.delta, s.mean_post_activation_f, s.final_accuracy))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(aggregate(per_run))
}

/// Rebuilds the score table from saved run logs that had the defense on.
pub fn scores_from_csvs(paths: &[PathBuf]) -> Result<Vec<DeltaScore>> {
    let mut per_run = Vec::with_capacity(paths.len());
    for p in paths {
        let run = read_run_csv(p)?;
        let delta = run
            .delta()
            .ok_or_else(|| Error::Schema(format!("{}: defense was not enabled", p.display())))?;
        let final_acc = run.accuracy.last().copied().unwrap_or(0.0);
        per_run.push((delta, run.mean_post_activation_f2(), final_acc));
    }
    Ok(aggregate(per_run))
}

pub fn render_scores(scores: &[DeltaScore]) -> String {
    let mut out = String::from("delta,mean_f2,mean_final_accuracy,runs\n");
    for s in scores {
        out.push_str(&format!("{},{},{},{}\n", s.delta, s.mean_f2, s.mean_final_accuracy, s.runs));
    }
    out
}
