//! Behavior attestation at the chief, with a monitoring gate.
//!
//! Every round the chief rebuilds each submitted local model, measures its
//! error on a private validation set and tracks the change from the
//! worker's previous error. Verdicts are withheld until round `delta`; before
//! that, histories grow but no strikes are counted and nobody is excluded.
//!
//! A verdict round gives a worker a strike when its error is not more than
//! `tolerance` below its best error over the previous `window` rounds *and*
//! it lags the round's median error by at least `peer_margin`. A worker with `strikes_to_exclude` strikes among its last
//! `window` verdicts is excluded for good.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::adversary::WorkerId;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{evaluate, MlpArchitecture, ParamVector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonitorConfig {
    /// Monitoring period: first round at which verdicts may be issued.
    pub delta: usize,
    pub window: usize,
    pub tolerance: f64,
    pub strikes_to_exclude: usize,
    pub peer_margin: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            delta: 10,
            window: 5,
            tolerance: 0.0,
            strikes_to_exclude: 3,
            peer_margin: 0.05,
        }
    }
}

impl MonitorConfig {
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.window == 0 {
            return Err(("defense.window", "must be at least 1".into()));
        }
        if self.strikes_to_exclude == 0 {
            return Err(("defense.strikes", "must be at least 1".into()));
        }
        if self.strikes_to_exclude > self.window {
            return Err((
                "defense.strikes",
                format!("{} strikes can never fit in a window of {}", self.strikes_to_exclude, self.window),
            ));
        }
        if !self.tolerance.is_finite() || self.tolerance < 0.0 {
            return Err(("defense.tau", "must be finite and non-negative".into()));
        }
        if !self.peer_margin.is_finite() {
            return Err(("defense.margin", "must be finite".into()));
        }
        Ok(())
    }
}

/// True once the monitoring period is over.
pub fn is_active(round: usize, delta: usize) -> bool {
    round >= delta
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AttestationState {
    error_history: BTreeMap<WorkerId, Vec<f64>>,
    last_attested: BTreeMap<WorkerId, usize>,
    verdicts: BTreeMap<WorkerId, VecDeque<bool>>,
    excluded_at: BTreeMap<WorkerId, usize>,
}

impl AttestationState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn error_history(&self, worker: WorkerId) -> &[f64] {
        self.error_history.get(&worker).map_or(&[], Vec::as_slice)
    }

    /// Strikes inside the current window.
    pub fn strike_count(&self, worker: WorkerId) -> usize {
        self.verdicts
            .get(&worker)
            .map_or(0, |v| v.iter().filter(|&&s| s).count())
    }

    pub fn is_excluded(&self, worker: WorkerId) -> bool {
        self.excluded_at.contains_key(&worker)
    }

    pub fn excluded(&self) -> BTreeSet<WorkerId> {
        self.excluded_at.keys().copied().collect()
    }

    pub fn excluded_at(&self) -> &BTreeMap<WorkerId, usize> {
        &self.excluded_at
    }

    /// Records an already-measured validation error and returns its change
    /// from the worker's previous entry (0 on first observation).
    pub fn record_error(&mut self, worker: WorkerId, error_rate: f64, round: usize) -> Result<f64> {
        if self.is_excluded(worker) {
            return Err(Error::ExcludedWorker(worker));
        }
        let history = self.error_history.entry(worker).or_default();
        let change = history.last().map_or(0.0, |prev| error_rate - prev);
        history.push(error_rate);
        self.last_attested.insert(worker, round);
        Ok(change)
    }

    /// Evaluates `local_model` on the validation set and records the result.
    pub fn attest(
        &mut self,
        worker: WorkerId,
        local_model: &ParamVector,
        arch: &MlpArchitecture,
        validation: &Dataset,
        round: usize,
    ) -> Result<f64> {
        if self.is_excluded(worker) {
            return Err(Error::ExcludedWorker(worker));
        }
        let error = evaluate(arch, local_model, validation)?.error_rate;
        self.record_error(worker, error, round)
    }

    /// Issues this round's verdicts for every worker attested at `round`.
    pub fn update_verdicts(&mut self, config: &MonitorConfig, round: usize) -> BTreeSet<WorkerId> {
        let mut newly_excluded = BTreeSet::new();
        if !is_active(round, config.delta) {
            return newly_excluded;
        }
        let attested: Vec<WorkerId> = self
            .last_attested
            .iter()
            .filter(|&(w, &r)| r == round && !self.is_excluded(*w))
            .map(|(&w, _)| w)
            .collect();
        if attested.is_empty() {
            return newly_excluded;
        }

        let mut current: Vec<f64> = attested
            .iter()
            .map(|w| *self.error_history[w].last().expect("attested this round"))
            .collect();
        current.sort_by(f64::total_cmp);
        let peer_reference = current[(current.len() - 1) / 2];

        for worker in attested {
            let history = &self.error_history[&worker];
            let error = history[history.len() - 1];
            // Improvement means beating the best of the previous `window`
            // errors; noise around a flat level rarely does.
            let earlier = &history[history.len().saturating_sub(config.window + 1)..history.len() - 1];
            let best = earlier.iter().copied().fold(f64::INFINITY, f64::min);
            let improved = !earlier.is_empty() && error < best - config.tolerance;
            let lagging = error >= peer_reference + config.peer_margin;
            let strike = !improved && lagging;

            let recent = self.verdicts.entry(worker).or_default();
            recent.push_back(strike);
            while recent.len() > config.window {
                recent.pop_front();
            }
            if recent.iter().filter(|&&s| s).count() >= config.strikes_to_exclude {
                self.excluded_at.insert(worker, round);
                newly_excluded.insert(worker);
            }
        }
        newly_excluded
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_margin(delta: usize) -> MonitorConfig {
        MonitorConfig {
            delta,
            peer_margin: 0.0,
            ..MonitorConfig::default()
        }
    }

    #[test]
    fn gate_boundary() {
        assert!(!is_active(9, 10));
        assert!(is_active(10, 10));
        assert!(is_active(0, 0));
        assert!(is_active(57, 0));
    }

    #[test]
    fn attest_returns_error_change() {
        let mut s = AttestationState::new();
        assert_eq!(s.record_error(0, 0.5, 0).unwrap(), 0.0);
        let change = s.record_error(0, 0.4, 1).unwrap();
        assert!((change + 0.1).abs() < 1e-12);
        assert_eq!(s.error_history(0), &[0.5, 0.4]);
    }

    #[test]
    fn strike_arithmetic_without_gate() {
        let mut s = AttestationState::new();
        let cfg = no_margin(0);
        let mut e = 0.2;
        s.record_error(7, e, 0).unwrap();
        assert!(s.update_verdicts(&cfg, 0).is_empty());
        for round in 1..=2 {
            e += 0.1;
            s.record_error(7, e, round).unwrap();
            let out = s.update_verdicts(&cfg, round);
            if round < 2 {
                assert!(out.is_empty());
            } else {
                assert_eq!(out, BTreeSet::from([7]));
            }
        }
        assert_eq!(s.excluded_at()[&7], 2);
    }

    #[test]
    fn monitoring_period_withholds_verdicts() {
        let mut s = AttestationState::new();
        let cfg = MonitorConfig {
            delta: 10,
            ..MonitorConfig::default()
        };
        let mut first_exclusion = None;
        for round in 0..30 {
            if !s.is_excluded(3) {
                s.record_error(3, 0.3 * (round as f64 + 1.0) / 30.0, round).unwrap();
            }
            s.record_error(4, 0.0, round).unwrap();
            if round < 10 {
                assert_eq!(s.strike_count(3), 0);
            }
            if !s.update_verdicts(&cfg, round).is_empty() && first_exclusion.is_none() {
                first_exclusion = Some(round);
            }
        }
        // Monitored through round 12, then no longer attested.
        assert_eq!(s.error_history(3).len(), 13);
        let at = first_exclusion.expect("worsening worker is eventually excluded");
        assert!(at >= 10);
        assert_eq!(at, 12);
    }

    #[test]
    fn improving_or_leading_workers_are_spared() {
        let mut s = AttestationState::new();
        let cfg = MonitorConfig {
            delta: 0,
            ..MonitorConfig::default()
        };
        for round in 0..60 {
            let honest = 0.5 / (round as f64 + 1.0);
            for w in 0..6 {
                s.record_error(w, honest, round).unwrap();
            }
            for w in 6..10 {
                if !s.is_excluded(w) {
                    s.record_error(w, 0.9, round).unwrap();
                }
            }
            s.update_verdicts(&cfg, round);
        }
        assert_eq!(s.excluded(), (6..10).collect());
        assert!(s.excluded_at().values().all(|&r| r == 2));
    }

    #[test]
    fn excluded_workers_cannot_be_attested() {
        let mut s = AttestationState::new();
        let cfg = MonitorConfig {
            delta: 0,
            window: 1,
            strikes_to_exclude: 1,
            tolerance: 0.0,
            peer_margin: 0.0,
        };
        s.record_error(0, 0.9, 0).unwrap();
        assert_eq!(s.update_verdicts(&cfg, 0), BTreeSet::from([0]));
        assert!(matches!(s.record_error(0, 0.9, 1), Err(Error::ExcludedWorker(0))));
        // Exclusion is permanent and the set only grows.
        assert!(s.update_verdicts(&cfg, 1).is_empty());
        assert_eq!(s.excluded(), BTreeSet::from([0]));
    }

    #[test]
    fn config_validation() {
        assert!(MonitorConfig::default().validate().is_ok());
        let bad = MonitorConfig {
            window: 0,
            ..MonitorConfig::default()
        };
        assert_eq!(bad.validate().unwrap_err().0, "defense.window");
        let bad = MonitorConfig {
            strikes_to_exclude: 6,
            ..MonitorConfig::default()
        };
        assert_eq!(bad.validate().unwrap_err().0, "defense.strikes");
    }
}
