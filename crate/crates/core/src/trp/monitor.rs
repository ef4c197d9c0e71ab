//! Checks the conditional rank-monotonicity property on a recorded trajectory:
//! if every update between two projections is bounded by `G` with
//! `m * G / ||W||_F < sqrt(e)`, the later projection cannot pick a larger rank.

use serde::Serialize;

use super::config::TrpConfig;
use super::trajectory::RankTrajectory;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairCheck {
    pub layer: usize,
    /// Index of the later event of the pair.
    pub z: u64,
    pub bound_stat: f64,
    pub sqrt_e: f64,
    pub bound_holds: bool,
    pub rank_before: usize,
    pub rank_after: usize,
    pub rank_nonincrease: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorReport {
    pub pairs: Vec<PairCheck>,
    pub total_pairs: usize,
    /// Pairs where `bound_stat < sqrt(e)`.
    pub hypothesis_satisfied: usize,
    /// Rank increases among pairs satisfying the hypothesis. Expected 0.
    pub violations: usize,
    /// Rank increases where the hypothesis failed (allowed).
    pub unconditioned_increases: usize,
    pub max_bound_stat: f64,
}

impl MonitorReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

pub fn theorem2_monitor(trajectory: &RankTrajectory, config: &TrpConfig) -> Result<MonitorReport> {
    let sqrt_e = config.energy_e.sqrt();
    let layers = trajectory.layers();
    if layers.is_empty() {
        return Err(Error::TooFewEvents("no events recorded".into()));
    }
    let mut pairs = Vec::new();
    for layer in layers {
        let events = trajectory.for_layer(layer);
        if events.len() < 2 {
            return Err(Error::TooFewEvents(format!(
                "layer {layer} has {} event(s), need at least 2",
                events.len()
            )));
        }
        for w in events.windows(2) {
            let (prev, next) = (w[0], w[1]);
            pairs.push(PairCheck {
                layer,
                z: next.z,
                bound_stat: next.bound_stat,
                sqrt_e,
                bound_holds: next.bound_stat < sqrt_e,
                rank_before: prev.k,
                rank_after: next.k,
                rank_nonincrease: next.k <= prev.k,
            });
        }
    }
    let hypothesis_satisfied = pairs.iter().filter(|p| p.bound_holds).count();
    let violations = pairs
        .iter()
        .filter(|p| p.bound_holds && !p.rank_nonincrease)
        .count();
    let unconditioned_increases = pairs
        .iter()
        .filter(|p| !p.bound_holds && !p.rank_nonincrease)
        .count();
    let max_bound_stat = pairs.iter().map(|p| p.bound_stat).fold(0.0, f64::max);
    Ok(MonitorReport {
        total_pairs: pairs.len(),
        pairs,
        hypothesis_satisfied,
        violations,
        unconditioned_increases,
        max_bound_stat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trp::TsvdEvent;

    fn event(layer: usize, z: u64, k: usize, bound_stat: f64) -> TsvdEvent {
        TsvdEvent {
            layer,
            t: z * 20,
            z,
            k,
            full_rank: 8,
            energy_ratios: vec![1.0 / k as f64; k],
            fro_norm: 1.0,
            bound_stat,
            bound_holds: bound_stat < 0.05f64.sqrt(),
            discarded_energy: 0.0,
            window_max: bound_stat / 20.0,
            window_sum: bound_stat,
        }
    }

    #[test]
    fn counts_conditional_violations_only() {
        let cfg = TrpConfig {
            energy_e: 0.05,
            ..Default::default()
        };
        let traj = RankTrajectory {
            events: vec![
                event(0, 0, 6, 0.0),
                event(0, 1, 5, 0.1),
                event(0, 2, 7, 0.5), // increase outside the hypothesis
                event(0, 3, 8, 0.1), // increase under the hypothesis
            ],
        };
        let r = theorem2_monitor(&traj, &cfg).unwrap();
        assert_eq!(r.total_pairs, 3);
        assert_eq!(r.hypothesis_satisfied, 2);
        assert_eq!(r.violations, 1);
        assert_eq!(r.unconditioned_increases, 1);
        assert_eq!(r.max_bound_stat, 0.5);
        assert!(!r.holds());
    }

    #[test]
    fn too_few_events() {
        let cfg = TrpConfig::default();
        let traj = RankTrajectory {
            events: vec![event(0, 0, 6, 0.0)],
        };
        assert!(matches!(theorem2_monitor(&traj, &cfg), Err(Error::TooFewEvents(_))));
        assert!(matches!(
            theorem2_monitor(&RankTrajectory::default(), &cfg),
            Err(Error::TooFewEvents(_))
        ));
    }
}
