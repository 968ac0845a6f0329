//! The chief/worker training loop.
//!
//! Each round is a fork/join: participating workers compute their updates
//! and the chief evaluates them in parallel, then verdicts, aggregation and
//! the global update run sequentially in worker-id order. All randomness is
//! drawn from per-(worker, round) substreams, so the thread count never
//! changes a result.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::adversary::{fabricate_update, role_at, AttackPattern, FabricationParams, Role, WorkerId};
use crate::aggregation::AggregationRule;
use crate::data::Dataset;
use crate::defense::{AttestationState, MonitorConfig};
use crate::error::{Error, Result};
use crate::metrics::{confusion, DetectionRecord};
use crate::model::{evaluate, sgd_train, MlpArchitecture, ParamVector, TrainSpec};
use crate::rng::{derive_seed, substream, Purpose};

#[derive(Clone, Debug)]
pub struct WorkerNode {
    pub id: WorkerId,
    pub data: Arc<Dataset>,
    /// Share of the total training data, `l_i / l`.
    pub alpha: f64,
}

impl WorkerNode {
    /// Builds workers `0..k` with data-proportional weights.
    pub fn from_shards(shards: Vec<Arc<Dataset>>) -> Vec<WorkerNode> {
        let total: usize = shards.iter().map(|s| s.len()).sum();
        shards
            .into_iter()
            .enumerate()
            .map(|(id, data)| WorkerNode {
                id,
                alpha: data.len() as f64 / total as f64,
                data,
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct ChiefNode {
    pub global: ParamVector,
    pub validation: Arc<Dataset>,
    pub attestation: AttestationState,
    pub rule: AggregationRule,
}

/// Everything a round needs besides the nodes themselves.
#[derive(Clone, Debug)]
pub struct RoundSetup {
    pub arch: MlpArchitecture,
    pub train: TrainSpec,
    pub attack: AttackPattern,
    pub fabrication: FabricationParams,
    /// `None` disables attestation entirely.
    pub monitor: Option<MonitorConfig>,
    /// Workers sampled per round; `None` means every non-excluded worker.
    pub participants: Option<usize>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundOutcome {
    pub round: usize,
    pub global_accuracy: f64,
    pub submitted: BTreeMap<WorkerId, Role>,
    pub newly_excluded: BTreeSet<WorkerId>,
    pub excluded_so_far: BTreeSet<WorkerId>,
    pub error_deltas: BTreeMap<WorkerId, f64>,
    /// Workers whose updates reached the aggregator this round.
    pub aggregated: Vec<WorkerId>,
}

/// One worker's message for the round: `w_i - w_G` when benign, a
/// fabricated vector when malicious.
#[allow(clippy::too_many_arguments)]
pub fn worker_step(
    worker: &WorkerNode,
    global: &ParamVector,
    role: Role,
    arch: &MlpArchitecture,
    train: &TrainSpec,
    fabrication: &FabricationParams,
    seed: u64,
    round: usize,
) -> Result<ParamVector> {
    let (id, round) = (worker.id as u64, round as u64);
    match role {
        Role::Benign => {
            let local_seed = derive_seed(seed, Purpose::LocalTraining, id, round);
            let local = sgd_train(arch, global, &worker.data, train, local_seed)?;
            Ok(local.sub(global))
        }
        Role::Malicious => {
            let mut rng = substream(seed, Purpose::Fabrication, id, round);
            Ok(fabricate_update(global.len(), fabrication, &mut rng))
        }
    }
}

fn participants(chief: &ChiefNode, workers: &[WorkerNode], setup: &RoundSetup, round: usize) -> Vec<usize> {
    let mut active: Vec<usize> = (0..workers.len())
        .filter(|&i| !chief.attestation.is_excluded(workers[i].id))
        .collect();
    if let Some(k) = setup.participants {
        if k < active.len() {
            active.shuffle(&mut substream(setup.seed, Purpose::Sampling, 0, round as u64));
            active.truncate(k);
            active.sort_unstable();
        }
    }
    active
}

/// Runs one round and updates the chief in place. `test` measures global accuracy.
pub fn run_round(
    chief: &mut ChiefNode,
    workers: &[WorkerNode],
    setup: &RoundSetup,
    test: &Dataset,
    round: usize,
) -> Result<RoundOutcome> {
    let chosen = participants(chief, workers, setup, round);
    if chosen.is_empty() {
        return Err(Error::NoParticipants(round));
    }
    let global = &chief.global;
    let validation = &chief.validation;

    let submissions: Vec<(WorkerId, Role, ParamVector, Option<f64>)> = chosen
        .par_iter()
        .map(|&i| {
            let worker = &workers[i];
            let role = role_at(&setup.attack, worker.id, round, setup.seed);
            let delta = worker_step(
                worker,
                global,
                role,
                &setup.arch,
                &setup.train,
                &setup.fabrication,
                setup.seed,
                round,
            )?;
            let error = match setup.monitor {
                Some(_) => Some(evaluate(&setup.arch, &global.add(&delta), validation)?.error_rate),
                None => None,
            };
            Ok((worker.id, role, delta, error))
        })
        .collect::<Result<_>>()?;

    let mut error_deltas = BTreeMap::new();
    let mut newly_excluded = BTreeSet::new();
    if let Some(monitor) = &setup.monitor {
        for (id, _, _, error) in &submissions {
            let change = chief
                .attestation
                .record_error(*id, error.expect("evaluated when monitoring"), round)?;
            error_deltas.insert(*id, change);
        }
        newly_excluded = chief.attestation.update_verdicts(monitor, round);
    }

    let survivors: Vec<&(WorkerId, Role, ParamVector, Option<f64>)> = submissions
        .iter()
        .filter(|s| !newly_excluded.contains(&s.0))
        .collect();
    if survivors.is_empty() {
        return Err(Error::NoParticipants(round));
    }
    let alpha_of: BTreeMap<WorkerId, f64> = workers.iter().map(|w| (w.id, w.alpha)).collect();
    let total_alpha: f64 = survivors.iter().map(|s| alpha_of[&s.0]).sum();
    let alphas: Vec<f64> = survivors.iter().map(|s| alpha_of[&s.0] / total_alpha).collect();
    let deltas: Vec<ParamVector> = survivors.iter().map(|s| s.2.clone()).collect();
    let step = chief.rule.aggregate(&deltas, &alphas)?;
    chief.global.add_scaled(1.0, &step);

    if (setup.monitor.is_some() || chief.rule.is_robust()) && !chief.global.is_finite() {
        return Err(Error::NonFiniteGlobal(round));
    }

    let global_accuracy = evaluate(&setup.arch, &chief.global, test)?.accuracy;
    Ok(RoundOutcome {
        round,
        global_accuracy,
        submitted: submissions.iter().map(|s| (s.0, s.1)).collect(),
        newly_excluded,
        excluded_so_far: chief.attestation.excluded(),
        error_deltas,
        aggregated: survivors.iter().map(|s| s.0).collect(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub outcome: RoundOutcome,
    pub detection: DetectionRecord,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    /// Stopped early after reaching the configured target accuracy.
    TargetReached { round: usize },
    /// Every worker was excluded before this round could aggregate.
    NoParticipants { round: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentLog {
    pub initial_accuracy: f64,
    pub records: Vec<RoundRecord>,
    pub status: RunStatus,
}

/// A fully assembled federation, ready to train.
#[derive(Clone, Debug)]
pub struct Federation {
    pub chief: ChiefNode,
    pub workers: Vec<WorkerNode>,
    pub test: Arc<Dataset>,
    pub setup: RoundSetup,
    pub beta: f64,
}

impl Federation {
    /// Runs `rounds` rounds, scoring detection against the compromised set.
    pub fn run(&mut self, rounds: usize, target_accuracy: Option<f64>) -> Result<ExperimentLog> {
        let initial_accuracy = evaluate(&self.setup.arch, &self.chief.global, &self.test)?.accuracy;
        let all: BTreeSet<WorkerId> = self.workers.iter().map(|w| w.id).collect();
        let truth = self.setup.attack.compromised();
        let mut records = Vec::with_capacity(rounds);
        let mut status = RunStatus::Completed;
        for round in 0..rounds {
            let outcome = match run_round(&mut self.chief, &self.workers, &self.setup, &self.test, round) {
                Ok(o) => o,
                Err(Error::NoParticipants(r)) => {
                    status = RunStatus::NoParticipants { round: r };
                    break;
                }
                Err(e) => return Err(e),
            };
            let counts = confusion(&outcome.excluded_so_far, &truth, &all)?;
            let reached = target_accuracy.is_some_and(|t| outcome.global_accuracy >= t);
            records.push(RoundRecord {
                detection: DetectionRecord::new(round, counts, self.beta),
                outcome,
            });
            if reached {
                status = RunStatus::TargetReached { round };
                break;
            }
        }
        Ok(ExperimentLog {
            initial_accuracy,
            records,
            status,
        })
    }
}
