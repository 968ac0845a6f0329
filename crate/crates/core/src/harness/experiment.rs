//! Single runs: dataset assembly, the training loop and the per-round CSV.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{DatasetKind, ExperimentConfig};
use crate::data::{distribute, gen_blobs, load_idx, Dataset};
use crate::defense::AttestationState;
use crate::error::{Error, Result};
use crate::model::init_params;
use crate::protocol::{ChiefNode, ExperimentLog, Federation, RoundSetup, RunStatus, WorkerNode};
use crate::rng::{derive_seed, Purpose};

/// Column header of every run log.
pub const CSV_COLUMNS: &[&str] = &[
    "round",
    "global_accuracy",
    "n_excluded_total",
    "newly_excluded_ids",
    "tp",
    "fp",
    "fn",
    "tn",
    "precision",
    "recall",
    "f2",
];

/// Train, validation and test splits for one run.
#[derive(Clone, Debug)]
pub struct Splits {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

pub fn load_splits(config: &ExperimentConfig) -> Result<Splits> {
    let seed = derive_seed(config.data_seed(), Purpose::Data, 0, 0);
    let (train_n, val_n, test_n) = (config.train_size, config.validation_size, config.test_size);
    match config.dataset_kind {
        DatasetKind::Blobs => {
            let total = train_n + val_n + test_n;
            let per_class = total.div_ceil(config.dataset_classes);
            let data = gen_blobs(
                config.dataset_classes,
                config.dataset_dim,
                per_class,
                config.dataset_spread,
                seed,
            )?;
            let order = shuffled(data.len(), seed ^ 1);
            Ok(Splits {
                train: data.subset(&order[..train_n]),
                validation: data.subset(&order[train_n..train_n + val_n]),
                test: data.subset(&order[train_n + val_n..total]),
            })
        }
        DatasetKind::Mnist => {
            let dir = &config.dataset_path;
            let full = load_idx(dir.join("train-images-idx3-ubyte"), dir.join("train-labels-idx1-ubyte"))?;
            let held = load_idx(dir.join("t10k-images-idx3-ubyte"), dir.join("t10k-labels-idx1-ubyte"))?;
            if full.len() <= val_n {
                return Err(Error::config(
                    "dataset.validation",
                    format!("{val_n} rows leave no training data out of {}", full.len()),
                ));
            }
            // Validation comes out of the training file; the test file is untouched.
            let order = shuffled(full.len(), seed ^ 1);
            let train_end = (val_n + train_n).min(full.len());
            let test_idx: Vec<usize> = (0..test_n.min(held.len())).collect();
            Ok(Splits {
                validation: full.subset(&order[..val_n]),
                train: full.subset(&order[val_n..train_end]),
                test: held.subset(&test_idx),
            })
        }
    }
}

/// Assembles a federation from already-loaded splits.
pub fn build_federation(config: &ExperimentConfig, splits: Splits) -> Result<Federation> {
    config.validate()?;
    let arch = config.architecture()?;
    let shard_seed = derive_seed(config.seed, Purpose::Data, 1, 0);
    let shards = distribute(&splits.train, config.workers, config.distribution, shard_seed)?;
    let global = init_params(&arch, derive_seed(config.seed, Purpose::Init, 0, 0));
    Ok(Federation {
        chief: ChiefNode {
            global,
            validation: Arc::new(splits.validation),
            attestation: AttestationState::new(),
            rule: config.aggregation_rule(),
        },
        workers: WorkerNode::from_shards(shards),
        test: Arc::new(splits.test),
        setup: RoundSetup {
            arch,
            train: config.train,
            attack: config.attack(),
            fabrication: config.fabrication,
            monitor: config.monitor(),
            participants: config.per_round,
            seed: config.seed,
        },
        beta: config.beta,
    })
}

/// Runs the full training loop for `config`.
pub fn run_training(config: &ExperimentConfig) -> Result<ExperimentLog> {
    let mut federation = build_federation(config, load_splits(config)?)?;
    federation.run(config.rounds, config.target_accuracy)
}

/// Like [`run_training`], on a dedicated pool of `threads` workers.
/// Results do not depend on the thread count.
pub fn run_training_with_threads(config: &ExperimentConfig, threads: usize) -> Result<ExperimentLog> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| run_training(config))
}

/// Headline numbers of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub readout_round: usize,
    /// Accuracy at the readout round, or at the last round if the run was shorter.
    pub readout_accuracy: f64,
    pub final_accuracy: f64,
    /// Mean F-beta over rounds at or after defense activation.
    pub mean_post_activation_f: f64,
    pub rounds_run: usize,
}

pub fn summarize(config: &ExperimentConfig, log: &ExperimentLog) -> RunSummary {
    let accuracy_at = |round: usize| {
        log.records
            .iter()
            .take_while(|r| r.outcome.round <= round)
            .last()
            .map_or(log.initial_accuracy, |r| r.outcome.global_accuracy)
    };
    let post: Vec<f64> = log
        .records
        .iter()
        .filter(|r| r.outcome.round >= config.activation_round())
        .map(|r| r.detection.f_beta)
        .collect();
    RunSummary {
        readout_round: config.readout_round,
        readout_accuracy: accuracy_at(config.readout_round),
        final_accuracy: log.records.last().map_or(log.initial_accuracy, |r| r.outcome.global_accuracy),
        mean_post_activation_f: mean(&post),
        rounds_run: log.records.len(),
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn status_text(status: &RunStatus) -> String {
    match status {
        RunStatus::Completed => "completed".into(),
        RunStatus::TargetReached { round } => format!("target_reached@{round}"),
        RunStatus::NoParticipants { round } => format!("no_participants@{round}"),
    }
}

/// Renders the run log: a `# key = value` header echoing the resolved config,
/// one row per round, then a `#` footer with the status and summary.
pub fn render_csv(config: &ExperimentConfig, log: &ExperimentLog) -> Result<String> {
    let mut out = String::new();
    for (k, v) in config.to_pairs() {
        writeln!(out, "# {k} = {v}").expect("writing to a String");
    }
    writeln!(out, "# initial_accuracy = {}", log.initial_accuracy).expect("writing to a String");

    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(CSV_COLUMNS)?;
    for r in &log.records {
        let d = &r.detection;
        let ids: Vec<String> = r.outcome.newly_excluded.iter().map(|w| w.to_string()).collect();
        writer.write_record([
            r.outcome.round.to_string(),
            r.outcome.global_accuracy.to_string(),
            r.outcome.excluded_so_far.len().to_string(),
            ids.join(";"),
            d.counts.tp.to_string(),
            d.counts.fp.to_string(),
            d.counts.fn_.to_string(),
            d.counts.tn.to_string(),
            d.precision.to_string(),
            d.recall.to_string(),
            d.f_beta.to_string(),
        ])?;
    }
    let body = writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    out.push_str(&String::from_utf8(body).expect("csv output is utf-8"));

    let s = summarize(config, log);
    writeln!(out, "# status = {}", status_text(&log.status)).expect("writing to a String");
    writeln!(out, "# readout_accuracy = {}", s.readout_accuracy).expect("writing to a String");
    writeln!(out, "# final_accuracy = {}", s.final_accuracy).expect("writing to a String");
    writeln!(out, "# mean_post_activation_f2 = {}", s.mean_post_activation_f).expect("writing to a String");
    Ok(out)
}

/// Runs `config` and writes its CSV to `out` (or `config.out`).
pub fn run_to_file(config: &ExperimentConfig, out: Option<&Path>, threads: usize) -> Result<RunSummary> {
    let log = run_training_with_threads(config, threads)?;
    let path = out.unwrap_or(&config.out);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, render_csv(config, &log)?)?;
    Ok(summarize(config, &log))
}
