//! Federated learning under model poisoning, with an attestation defense
//! whose verdicts are held back for a configurable monitoring period.
//!
//! The crate is organized bottom-up:
//!
//! - [`model`]: the MLP every worker trains locally;
//! - [`data`]: synthetic blobs, MNIST IDX loading, holdout and sharding;
//! - [`adversary`]: attack schedules and Gaussian update fabrication;
//! - [`aggregation`]: FedAvg, Krum, geometric median, Bulyan;
//! - [`defense`]: validation-error attestation and gated exclusion;
//! - [`protocol`]: the round loop tying the above together;
//! - [`metrics`]: precision, recall and F-beta of the exclusions;
//! - [`harness`]: config files, CSV logs, the one-at-a-time grid and the
//!   monitoring-period search.

pub mod adversary;
pub mod aggregation;
pub mod data;
pub mod defense;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod protocol;
pub mod rng;

pub use adversary::{AttackPattern, FabricationParams, Role, WorkerId};
pub use aggregation::AggregationRule;
pub use data::{Dataset, DistributionMode};
pub use defense::{AttestationState, MonitorConfig};
pub use error::{Error, Result};
pub use harness::config::ExperimentConfig;
pub use metrics::{ConfusionCounts, DetectionRecord};
pub use model::{MlpArchitecture, ParamVector, TrainSpec};
pub use protocol::{ExperimentLog, RoundOutcome, RunStatus};
