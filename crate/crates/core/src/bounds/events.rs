//! Monte-Carlo estimation of exceedance-event probabilities.
//!
//! The bounds need probabilities of events like "subspace i's statistic
//! exceeds a threshold" or "subspace k captures more energy than subspace
//! j" under a specified hypothesis. None of these have closed forms beyond
//! the known-statistics marginals, so they are estimated from trials of the
//! scenario itself.

use crate::bounds::{EventCounts, EventProbabilities};
use crate::error::{Error, Result};
use crate::mc::Stream;
use crate::sim::engine::{prepare_known, run_trial};
use crate::sim::scenario::{Hypothesis, Scenario};
use crate::noise::Regime;

/// One event whose probability is wanted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    /// The statistic formed with subspace `subspace`'s projector exceeds
    /// `gamma_bar` (with the scenario regime's normalization).
    StatExceeds { subspace: usize, gamma_bar: f64 },
    /// The projected energy of subspace `numerator` strictly exceeds that
    /// of `denominator` (the ratio statistic exceeds one).
    EnergyRatioExceedsOne { numerator: usize, denominator: usize },
}

/// Estimates marginal and pairwise joint probabilities of `events` under
/// `hypothesis` with fresh Monte-Carlo trials of the scenario.
///
/// In the unknown noise regimes every trial draws its own training set, as
/// in the main harness. Requires at least 1000 trials so the attached
/// standard errors mean something.
pub fn estimate_event_probs(
    scenario: &Scenario,
    hypothesis: Hypothesis,
    events: &[Event],
    trials: usize,
) -> Result<EventProbabilities> {
    scenario.validate()?;
    if trials < 1000 {
        return Err(Error::TooFewTrials { trials, needed: 1000 });
    }
    let k0 = scenario.union.count();
    for event in events {
        let max_index = match event {
            Event::StatExceeds { subspace, .. } => *subspace,
            Event::EnergyRatioExceedsOne { numerator, denominator } => {
                (*numerator).max(*denominator)
            }
        };
        if max_index >= k0 {
            return Err(Error::InvalidConfig {
                what: format!("event references subspace {max_index}, union has {k0}"),
            });
        }
    }

    let fixed = match scenario.regime {
        Regime::Known => Some(prepare_known(scenario)?),
        _ => None,
    };
    let flags_per_trial: Vec<Result<Vec<bool>>> =
        crate::mc::parallel_trials(scenario.seed, Stream::Aux, trials, |i, rng| {
            let record = run_trial(scenario, fixed.as_ref(), hypothesis, f64::INFINITY, i, rng)?;
            Ok(events
                .iter()
                .map(|event| match event {
                    Event::StatExceeds { subspace, gamma_bar } => {
                        record.subspace_statistics[*subspace] > *gamma_bar
                    }
                    Event::EnergyRatioExceedsOne { numerator, denominator } => {
                        record.outcome.energies[*numerator] > record.outcome.energies[*denominator]
                    }
                })
                .collect())
        });

    let mut counts = EventCounts::new(events.len());
    for flags in flags_per_trial {
        counts.record(&flags?);
    }
    Ok(counts.probabilities())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{axis_subspace, UnionModel};
    use crate::noise::NoiseTruth;
    use nalgebra::DMatrix;

    fn single_subspace_scenario() -> Scenario {
        Scenario {
            union: UnionModel::new(vec![axis_subspace(4, &[0, 1])]).unwrap(),
            noise: NoiseTruth::new(1.0, DMatrix::identity(4, 4)).unwrap(),
            regime: Regime::Known,
            n0: None,
            snr_db: 10.0,
            class_priors: vec![1.0],
            trials: 100,
            seed: 99,
        }
    }

    #[test]
    fn known_null_marginal_matches_chi2_tail() {
        let scenario = single_subspace_scenario();
        let gamma_bar = 1.7;
        let probs = estimate_event_probs(
            &scenario,
            Hypothesis::Null,
            &[Event::StatExceeds { subspace: 0, gamma_bar }],
            100_000,
        )
        .unwrap();
        let p_true = (-gamma_bar as f64).exp();
        assert!(
            (probs.marginal(0) - p_true).abs() < 3.0 * probs.se_marginal(0).max(1e-9),
            "{} vs {}",
            probs.marginal(0),
            p_true
        );
    }

    #[test]
    fn duplicate_events_have_joint_equal_marginal() {
        let scenario = single_subspace_scenario();
        let e = Event::StatExceeds { subspace: 0, gamma_bar: 1.0 };
        let probs =
            estimate_event_probs(&scenario, Hypothesis::Null, &[e, e], 2_000).unwrap();
        assert_eq!(probs.marginal(0), probs.marginal(1));
        assert_eq!(probs.joint(0, 1), probs.marginal(0));
    }

    #[test]
    fn extreme_threshold_kills_probability() {
        let scenario = single_subspace_scenario();
        let probs = estimate_event_probs(
            &scenario,
            Hypothesis::Class(0),
            &[Event::StatExceeds { subspace: 0, gamma_bar: 1e9 }],
            1_000,
        )
        .unwrap();
        assert_eq!(probs.marginal(0), 0.0);
    }

    #[test]
    fn trial_floor_enforced() {
        let scenario = single_subspace_scenario();
        assert!(matches!(
            estimate_event_probs(
                &scenario,
                Hypothesis::Null,
                &[Event::StatExceeds { subspace: 0, gamma_bar: 1.0 }],
                10
            ),
            Err(Error::TooFewTrials { .. })
        ));
    }

    #[test]
    fn event_indices_validated() {
        let scenario = single_subspace_scenario();
        assert!(matches!(
            estimate_event_probs(
                &scenario,
                Hypothesis::Null,
                &[Event::StatExceeds { subspace: 3, gamma_bar: 1.0 }],
                1000
            ),
            Err(Error::InvalidConfig { .. })
        ));
    }
}
