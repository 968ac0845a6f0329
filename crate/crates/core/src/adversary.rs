//! Attack schedules and fabricated updates.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::model::ParamVector;
use crate::rng::{substream, Purpose};

pub type WorkerId = usize;

/// Which workers the adversary controls and when they attack.
#[derive(Clone, Debug, PartialEq)]
pub enum AttackPattern {
    None,
    /// Compromised workers attack every round.
    Static { compromised: BTreeSet<WorkerId> },
    /// Compromised workers behave until `start_round`, then attack every round.
    Pretence {
        compromised: BTreeSet<WorkerId>,
        start_round: usize,
    },
    /// Each round, each compromised worker attacks with probability `flip_prob`,
    /// independently of earlier rounds.
    Randomized {
        compromised: BTreeSet<WorkerId>,
        flip_prob: f64,
    },
}

impl AttackPattern {
    pub fn name(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Static { .. } => "static",
            Self::Pretence { .. } => "pretence",
            Self::Randomized { .. } => "randomized",
        }
    }

    /// Workers ever under adversary control; empty for `None`.
    pub fn compromised(&self) -> BTreeSet<WorkerId> {
        match self {
            Self::None => BTreeSet::new(),
            Self::Static { compromised }
            | Self::Pretence { compromised, .. }
            | Self::Randomized { compromised, .. } => compromised.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FabricationParams {
    pub mu: f64,
    pub sigma: f64,
}

impl Default for FabricationParams {
    fn default() -> Self {
        Self { mu: 0.5, sigma: 2e6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Benign,
    Malicious,
}

/// Role of `worker` at `round`. Randomized draws come from the
/// `(seed, worker, round)` substream, so they replay exactly.
pub fn role_at(pattern: &AttackPattern, worker: WorkerId, round: usize, seed: u64) -> Role {
    let malicious = match pattern {
        AttackPattern::None => false,
        AttackPattern::Static { compromised } => compromised.contains(&worker),
        AttackPattern::Pretence {
            compromised,
            start_round,
        } => compromised.contains(&worker) && round >= *start_round,
        AttackPattern::Randomized {
            compromised,
            flip_prob,
        } => {
            compromised.contains(&worker)
                && substream(seed, Purpose::Role, worker as u64, round as u64).random::<f64>() < *flip_prob
        }
    };
    if malicious {
        Role::Malicious
    } else {
        Role::Benign
    }
}

/// `d` i.i.d. draws from `N(mu, sigma^2)`.
pub fn fabricate_update<R: Rng + ?Sized>(d: usize, params: &FabricationParams, rng: &mut R) -> ParamVector {
    let normal = Normal::new(params.mu, params.sigma).expect("sigma must be positive and finite");
    ParamVector::new((0..d).map(|_| normal.sample(rng)).collect())
}
