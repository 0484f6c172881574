//! Probability bounds on detector performance.
//!
//! Exact error probabilities require joint distributions of dependent
//! quadratic forms that have no closed form, so performance is bracketed
//! instead: the false-alarm probability by a union bound, the detection
//! probability by a union upper bound and a de Caen lower bound built from
//! pairwise joint probabilities, and the per-class correct-classification
//! probability by a Frechet lower bound and a (looser) Gaussian-tail /
//! Bessel penalty bound. Event probabilities with no closed form are
//! estimated by Monte Carlo; known-statistics marginals also have analytic
//! chi-squared fast paths.

pub mod events;
pub mod special;

pub use events::{estimate_event_probs, Event};
pub use special::{bessel_k, bessel_k_scaled, chi2_sf, gaussian_q, noncentral_chi2_sf, psi, psi_zero_limit};

use crate::error::{Error, Result};
use crate::mc::binomial_se;
use crate::noise::Regime;

/// Monte-Carlo estimates of event marginals and pairwise joints under one
/// hypothesis. The diagonal of `joints` equals the marginals by definition.
#[derive(Debug, Clone)]
pub struct EventProbabilities {
    marginals: Vec<f64>,
    joints: Vec<Vec<f64>>,
    trials: usize,
    se_marginals: Vec<f64>,
    se_joints: Vec<Vec<f64>>,
}

impl EventProbabilities {
    pub fn marginals(&self) -> &[f64] {
        &self.marginals
    }

    pub fn marginal(&self, i: usize) -> f64 {
        self.marginals[i]
    }

    pub fn joint(&self, i: usize, j: usize) -> f64 {
        self.joints[i][j]
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    pub fn se_marginal(&self, i: usize) -> f64 {
        self.se_marginals[i]
    }

    pub fn se_joint(&self, i: usize, j: usize) -> f64 {
        self.se_joints[i][j]
    }

    pub fn event_count(&self) -> usize {
        self.marginals.len()
    }
}

/// Fixed-order integer counters for event marginals and pairwise joints.
/// Counting in trial order and converting once keeps parallel and serial
/// runs bit-identical.
#[derive(Debug, Clone)]
pub struct EventCounts {
    events: usize,
    trials: u64,
    marginal: Vec<u64>,
    joint: Vec<Vec<u64>>,
}

impl EventCounts {
    pub fn new(events: usize) -> Self {
        EventCounts {
            events,
            trials: 0,
            marginal: vec![0; events],
            joint: vec![vec![0; events]; events],
        }
    }

    /// Records one trial's event indicators.
    pub fn record(&mut self, flags: &[bool]) {
        debug_assert_eq!(flags.len(), self.events);
        self.trials += 1;
        for i in 0..self.events {
            if flags[i] {
                self.marginal[i] += 1;
                for j in 0..self.events {
                    if flags[j] {
                        self.joint[i][j] += 1;
                    }
                }
            }
        }
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn probabilities(&self) -> EventProbabilities {
        let t = self.trials.max(1) as f64;
        let marginals: Vec<f64> = self.marginal.iter().map(|&c| c as f64 / t).collect();
        let joints: Vec<Vec<f64>> = self
            .joint
            .iter()
            .map(|row| row.iter().map(|&c| c as f64 / t).collect())
            .collect();
        let se_marginals = marginals.iter().map(|&p| binomial_se(p, self.trials as usize)).collect();
        let se_joints = joints
            .iter()
            .map(|row: &Vec<f64>| row.iter().map(|&p| binomial_se(p, self.trials as usize)).collect())
            .collect();
        EventProbabilities {
            marginals,
            joints,
            trials: self.trials as usize,
            se_marginals,
            se_joints,
        }
    }
}

/// Union upper bound on the false-alarm probability from estimated
/// per-subspace exceedance marginals: `min(1, sum_k P(A_k))`.
pub fn pfa_union_bound(null_events: &EventProbabilities) -> f64 {
    let sum: f64 = null_events.marginals.iter().sum();
    sum.min(1.0)
}

/// Analytic fast path for known noise statistics: each whitened-noise
/// exceedance marginal is a central chi-squared tail, so the union bound is
/// `min(1, K0 Pr(chi^2_n > 2 gamma))`.
pub fn pfa_union_bound_known(k0: usize, n: usize, gamma_bar: f64) -> Result<f64> {
    let per_term = chi2_sf(n, 2.0 * gamma_bar)?;
    Ok((k0 as f64 * per_term).min(1.0))
}

/// Union upper and de Caen lower bounds on the detection probability.
///
/// `per_class[k]` holds the exceedance-event estimates conditioned on the
/// signal lying in subspace k; `weights` are the class probabilities. The
/// de Caen term for event i is `P(A_i)^2 / sum_j P(A_i and A_j)`; classes
/// and events with zero marginals contribute nothing.
pub fn pd_bounds(per_class: &[EventProbabilities], weights: &[f64]) -> Result<(f64, f64)> {
    if per_class.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} weights", per_class.len()),
            got: format!("{}", weights.len()),
        });
    }
    let mut upper = 0.0;
    let mut lower = 0.0;
    for (probs, &w) in per_class.iter().zip(weights) {
        let sum: f64 = probs.marginals.iter().sum();
        upper += w * sum.min(1.0);
        let mut class_lower = 0.0;
        for i in 0..probs.event_count() {
            let m = probs.marginals[i];
            if m == 0.0 {
                continue;
            }
            let denom: f64 = probs.joints[i].iter().sum();
            if denom == 0.0 {
                return Err(Error::DegenerateJoint { index: i });
            }
            class_lower += m * m / denom;
        }
        lower += w * class_lower.min(1.0);
    }
    Ok((upper.clamp(0.0, 1.0), lower.clamp(0.0, 1.0)))
}

/// Frechet lower bound on the probability of correct classification for one
/// class: `max(0, P(T_k > gamma) + sum_{j != k} P(ratio_kj > 1) - (K0 - 1))`.
pub fn pc_lower_frechet(detection_marginal: f64, ratio_marginals: &[f64]) -> f64 {
    let sum: f64 = ratio_marginals.iter().sum();
    (detection_marginal + sum - ratio_marginals.len() as f64).clamp(0.0, 1.0)
}

/// Per-observation penalty of the Bessel-based classification bound:
/// `sum_j [ Q((1 - 2 eta0) sqrt(lambda_j) / 2) + Psi(n, eta0, lambda_j) ]`,
/// where `lambda_j` is the whitened signal energy outside subspace j over
/// `sigma^2`. A vanishing lambda uses the analytic `alpha -> 0` limit of
/// `Psi` (the bound then collapses to zero through the clamp).
pub fn bessel_penalty(n: usize, eta0: f64, lambdas: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for &lam in lambdas {
        if !(lam >= 0.0) {
            return Err(Error::DomainError { what: format!("lambda must be >= 0, got {lam}") });
        }
        if lam < 1e-300 {
            total += gaussian_q(0.0) + psi_zero_limit(n);
        } else {
            total += gaussian_q(0.5 * (1.0 - 2.0 * eta0) * lam.sqrt()) + psi(n, eta0, lam)?;
        }
    }
    Ok(total)
}

/// Distribution summary of the per-trial Bessel bound for one class.
///
/// The penalty depends on the realized whitened signal, so the bound is
/// evaluated per trial and summarized by its mean and 5th/95th percentiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselBound {
    pub mean: f64,
    pub p05: f64,
    pub p95: f64,
}

/// Combines the detection-event marginal for class k with the per-trial
/// penalties into the Bessel classification lower bound.
pub fn pc_lower_bessel(detection_marginal: f64, per_trial_penalties: &[f64]) -> BesselBound {
    if per_trial_penalties.is_empty() {
        return BesselBound { mean: 0.0, p05: 0.0, p95: 0.0 };
    }
    let values: Vec<f64> = per_trial_penalties
        .iter()
        .map(|&pen| (detection_marginal - pen).clamp(0.0, 1.0))
        .collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut sorted = values;
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("bound values are finite"));
    let pick = |q: f64| -> f64 {
        let idx = (q * (sorted.len() - 1) as f64).round() as usize;
        sorted[idx.min(sorted.len() - 1)]
    };
    BesselBound { mean, p05: pick(0.05), p95: pick(0.95) }
}

/// All bound values for one operating point.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub regime: Regime,
    pub gamma_bar: f64,
    pub pfa_upper: f64,
    pub pd_upper: f64,
    pub pd_lower: f64,
    /// Per-class Frechet classification lower bounds.
    pub pc_lower_frechet: Vec<f64>,
    /// Per-class Bessel classification lower bounds (per-trial summaries).
    pub pc_lower_bessel: Vec<BesselBound>,
}

impl BoundReport {
    /// Class-weighted mean of the Frechet bounds.
    pub fn pc_frechet_weighted(&self, weights: &[f64]) -> f64 {
        self.pc_lower_frechet
            .iter()
            .zip(weights)
            .map(|(b, w)| b * w)
            .sum()
    }

    /// Class-weighted mean of the Bessel bound means.
    pub fn pc_bessel_weighted(&self, weights: &[f64]) -> f64 {
        self.pc_lower_bessel
            .iter()
            .zip(weights)
            .map(|(b, w)| b.mean * w)
            .sum()
    }

    /// Header of the per-class CSV serialization for `k0` classes.
    pub fn csv_header(k0: usize) -> String {
        let mut cols = vec![
            "scenario_id".to_string(),
            "regime".to_string(),
            "gamma_bar".to_string(),
            "pfa_upper".to_string(),
            "pd_upper".to_string(),
            "pd_lower".to_string(),
        ];
        for k in 1..=k0 {
            cols.push(format!("pc_lb_frechet_{k}"));
        }
        for k in 1..=k0 {
            cols.push(format!("pc_lb_bessel_mean_{k}"));
            cols.push(format!("pc_lb_bessel_p05_{k}"));
            cols.push(format!("pc_lb_bessel_p95_{k}"));
        }
        cols.join(",")
    }

    pub fn csv_row(&self, scenario_id: &str) -> String {
        let mut fields = vec![
            scenario_id.to_string(),
            self.regime.name().to_string(),
            format!("{}", self.gamma_bar),
            format!("{}", self.pfa_upper),
            format!("{}", self.pd_upper),
            format!("{}", self.pd_lower),
        ];
        for b in &self.pc_lower_frechet {
            fields.push(format!("{b}"));
        }
        for b in &self.pc_lower_bessel {
            fields.push(format!("{}", b.mean));
            fields.push(format!("{}", b.p05));
            fields.push(format!("{}", b.p95));
        }
        fields.join(",")
    }
}

impl std::fmt::Display for BoundReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "bounds @ gamma_bar={:.6} ({}): P_FA <= {:.6}, {:.6} <= P_D <= {:.6}",
            self.gamma_bar, self.regime, self.pfa_upper, self.pd_lower, self.pd_upper
        )?;
        for (k, (fr, be)) in self
            .pc_lower_frechet
            .iter()
            .zip(&self.pc_lower_bessel)
            .enumerate()
        {
            writeln!(
                f,
                "  class {}: P_C >= {:.6} (frechet), >= {:.6} mean [{:.6}, {:.6}] (bessel)",
                k + 1,
                fr,
                be.mean,
                be.p05,
                be.p95
            )?;
        }
        Ok(())
    }
}
