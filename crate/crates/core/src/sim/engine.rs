//! Trial execution, threshold calibration, and bound assembly.
//!
//! Each trial consumes one child generator in a fixed draw order (class,
//! training set, signal coefficients, noise), so the record stream for a
//! given `(scenario, seed)` is bit-identical regardless of how many workers
//! execute it. Reductions walk the collected records in trial order.

use rand_chacha::ChaCha8Rng;

use crate::bounds::{
    bessel_penalty, pc_lower_bessel, pc_lower_frechet, pd_bounds, pfa_union_bound,
    pfa_union_bound_known, BoundReport, EventCounts,
};
use crate::detect::{self, DetectionOutcome, PreparedUnion};
use crate::error::{Error, Result};
use crate::mc::{binomial_se, parallel_trials, Stream};
use crate::noise::{NoiseModel, Regime};
use crate::sim::scenario::{sample_signal, Hypothesis, Scenario};

/// Everything retained from one trial.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub trial_id: usize,
    pub hypothesis: Hypothesis,
    pub outcome: DetectionOutcome,
    /// `||x_bar||^2`, the whitened signal energy (zero for null trials).
    pub whitened_signal_energy: f64,
    /// Per-subspace decision-statistic values for this trial's regime.
    pub subspace_statistics: Vec<f64>,
    /// For a class-k trial: `x_bar^T P_perp_j x_bar / sigma^2` for each
    /// j != k in ascending j order. Empty for null trials.
    pub signal_lambdas: Vec<f64>,
}

/// Builds the detector-side preparation for the known-statistics regime
/// (shared across trials; the unknown regimes retrain per trial).
pub fn prepare_known(scenario: &Scenario) -> Result<PreparedUnion> {
    let model = NoiseModel::Known {
        sigma2: scenario.noise.sigma2(),
        covariance: scenario.noise.covariance().clone(),
    };
    PreparedUnion::prepare(&scenario.union, &model)
}

fn prepare_for_trial(scenario: &Scenario, rng: &mut ChaCha8Rng) -> Result<PreparedUnion> {
    let n0 = scenario.n0.expect("validated scenario carries n0");
    let training = scenario.noise.sample_training(n0, rng);
    let model = match scenario.regime {
        Regime::UnknownCovariance => NoiseModel::UnknownCovariance {
            sigma2: scenario.noise.sigma2(),
            training_samples: training,
        },
        Regime::UnknownStatistics => NoiseModel::UnknownStatistics { training_samples: training },
        Regime::Known => unreachable!("known regime uses the shared preparation"),
    };
    PreparedUnion::prepare(&scenario.union, &model)
}

/// Runs a single trial under `hypothesis`.
pub fn run_trial(
    scenario: &Scenario,
    fixed_prep: Option<&PreparedUnion>,
    hypothesis: Hypothesis,
    gamma_bar: f64,
    trial_id: usize,
    rng: &mut ChaCha8Rng,
) -> Result<TrialRecord> {
    let local_prep;
    let prep: &PreparedUnion = match fixed_prep {
        Some(p) => p,
        None => {
            local_prep = prepare_for_trial(scenario, rng)?;
            &local_prep
        }
    };

    let signal = match hypothesis {
        Hypothesis::Null => None,
        Hypothesis::Class(k) => Some((
            k,
            sample_signal(&scenario.union, k, scenario.snr_db, scenario.noise.sigma2(), rng),
        )),
    };
    let noise_vec = scenario.noise.sample_noise(rng);
    let y = match &signal {
        Some((_, x)) => x + &noise_vec,
        None => noise_vec,
    };

    let eval = detect::evaluate(prep, &y)?;
    let outcome = eval.decide(gamma_bar);

    let (whitened_signal_energy, signal_lambdas) = match &signal {
        Some((k, x)) => {
            let x_bar = prep.whiten(x)?;
            let total = x_bar.dot(&x_bar);
            let sigma2 = scenario.noise.sigma2();
            let mut lambdas = Vec::with_capacity(prep.count().saturating_sub(1));
            for j in 0..prep.count() {
                if j == *k {
                    continue;
                }
                let q = prep.whitened_subspace(j).basis();
                let inside = (q.transpose() * &x_bar).norm_squared();
                lambdas.push((total - inside).max(0.0) / sigma2);
            }
            (total, lambdas)
        }
        None => (0.0, Vec::new()),
    };

    Ok(TrialRecord {
        trial_id,
        hypothesis,
        outcome,
        whitened_signal_energy,
        subspace_statistics: eval.statistics,
        signal_lambdas,
    })
}

fn run_batch(
    scenario: &Scenario,
    gamma_bar: f64,
    stream: Stream,
    count: usize,
    null_run: bool,
) -> Result<Vec<TrialRecord>> {
    let fixed = match scenario.regime {
        Regime::Known => Some(prepare_known(scenario)?),
        _ => None,
    };
    let results = parallel_trials(scenario.seed, stream, count, |i, rng| {
        let hypothesis = if null_run {
            Hypothesis::Null
        } else {
            Hypothesis::Class(scenario.sample_class(rng))
        };
        run_trial(scenario, fixed.as_ref(), hypothesis, gamma_bar, i, rng)
    });
    results.into_iter().collect()
}

/// Per-class empirical rates.
#[derive(Debug, Clone)]
pub struct ClassSummary {
    pub trials: usize,
    pub pd: f64,
    pub pd_se: f64,
    pub pc: f64,
    pub pc_se: f64,
    /// Mean whitened signal norm `||x_bar||` over the class's trials.
    pub mean_whitened_norm: f64,
}

/// Empirical summary of a paired null/signal run.
///
/// Aggregate detection and classification probabilities are prior-weighted
/// averages of the per-class conditional estimates, matching their
/// definitions as mixtures over the active class.
#[derive(Debug, Clone)]
pub struct Summary {
    pub trials_null: usize,
    pub trials_signal: usize,
    pub pfa: f64,
    pub pfa_se: f64,
    pub pd: f64,
    pub pd_se: f64,
    pub pc: f64,
    pub pc_se: f64,
    pub per_class: Vec<ClassSummary>,
    /// Prior weights actually used (zero-trial classes excluded and the
    /// rest renormalized; equal to the priors in any reasonable run).
    pub weights: Vec<f64>,
}

/// Class weights for aggregation: the scenario priors with zero-trial
/// classes dropped and the remainder renormalized.
fn effective_weights(priors: &[f64], counts: &[usize]) -> Result<Vec<f64>> {
    let mut weights: Vec<f64> = priors
        .iter()
        .zip(counts)
        .map(|(&p, &c)| if c > 0 { p } else { 0.0 })
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidConfig {
            what: "no signal trials landed in any class with positive prior".into(),
        });
    }
    for w in &mut weights {
        *w /= total;
    }
    Ok(weights)
}

fn summarize(
    scenario: &Scenario,
    null_records: &[TrialRecord],
    signal_records: &[TrialRecord],
) -> Result<Summary> {
    let k0 = scenario.union.count();
    let trials_null = null_records.len();
    let false_alarms = null_records.iter().filter(|r| r.outcome.signal_detected).count();
    let pfa = false_alarms as f64 / trials_null.max(1) as f64;

    let mut counts = vec![0usize; k0];
    let mut detections = vec![0usize; k0];
    let mut correct = vec![0usize; k0];
    let mut norm_sums = vec![0.0f64; k0];
    for r in signal_records {
        let Hypothesis::Class(k) = r.hypothesis else { continue };
        counts[k] += 1;
        norm_sums[k] += r.whitened_signal_energy.sqrt();
        if r.outcome.signal_detected {
            detections[k] += 1;
            if r.outcome.khat == k {
                correct[k] += 1;
            }
        }
    }
    let weights = effective_weights(&scenario.class_priors, &counts)?;

    let mut per_class = Vec::with_capacity(k0);
    let mut pd = 0.0;
    let mut pc = 0.0;
    let mut pd_var = 0.0;
    let mut pc_var = 0.0;
    for k in 0..k0 {
        let n = counts[k];
        let (pd_k, pc_k) = if n > 0 {
            (detections[k] as f64 / n as f64, correct[k] as f64 / n as f64)
        } else {
            (0.0, 0.0)
        };
        let pd_se = binomial_se(pd_k, n);
        let pc_se = binomial_se(pc_k, n);
        pd += weights[k] * pd_k;
        pc += weights[k] * pc_k;
        pd_var += (weights[k] * pd_se).powi(2);
        pc_var += (weights[k] * pc_se).powi(2);
        per_class.push(ClassSummary {
            trials: n,
            pd: pd_k,
            pd_se,
            pc: pc_k,
            pc_se,
            mean_whitened_norm: if n > 0 { norm_sums[k] / n as f64 } else { 0.0 },
        });
    }

    Ok(Summary {
        trials_null,
        trials_signal: signal_records.len(),
        pfa,
        pfa_se: binomial_se(pfa, trials_null),
        pd,
        pd_se: pd_var.sqrt(),
        pc,
        pc_se: pc_var.sqrt(),
        per_class,
        weights,
    })
}

/// Records plus empirical summary for one operating point.
#[derive(Debug, Clone)]
pub struct TrialRun {
    pub null_records: Vec<TrialRecord>,
    pub signal_records: Vec<TrialRecord>,
    pub summary: Summary,
}

/// Runs `scenario.trials` null trials (for the false-alarm rate) and the
/// same number of signal trials with the active class drawn from the
/// priors (for detection and classification rates).
pub fn run_trials(scenario: &Scenario, gamma_bar: f64) -> Result<TrialRun> {
    scenario.validate()?;
    let null_records = run_batch(scenario, gamma_bar, Stream::NullTrials, scenario.trials, true)?;
    let signal_records =
        run_batch(scenario, gamma_bar, Stream::SignalTrials, scenario.trials, false)?;
    let summary = summarize(scenario, &null_records, &signal_records)?;
    Ok(TrialRun { null_records, signal_records, summary })
}

/// Calibrates the decision threshold to a target false-alarm level as the
/// empirical `(1 - target)` quantile of the null max-statistic, using the
/// conservative higher-order-statistic rule: the returned threshold leaves
/// at most `target * trials` calibration samples strictly above it.
pub fn calibrate_threshold(
    scenario: &Scenario,
    target_pfa: f64,
    calibration_trials: usize,
) -> Result<f64> {
    scenario.validate()?;
    if !(target_pfa > 0.0 && target_pfa <= 1.0) {
        return Err(Error::InvalidConfig {
            what: format!("target_pfa must lie in (0, 1], got {target_pfa}"),
        });
    }
    let needed = (10.0 / target_pfa).ceil() as usize;
    if calibration_trials < needed {
        return Err(Error::TooFewTrials { trials: calibration_trials, needed });
    }
    let records =
        run_batch(scenario, f64::INFINITY, Stream::Calibration, calibration_trials, true)?;
    let mut stats: Vec<f64> = records.iter().map(|r| r.outcome.statistic).collect();
    stats.sort_by(|a, b| a.partial_cmp(b).expect("statistics are finite"));
    let n = stats.len();
    let above = (target_pfa * n as f64).floor() as usize;
    let idx = n.saturating_sub(1).saturating_sub(above);
    Ok(stats[idx])
}

/// Assembles every probability bound for one operating point from the
/// trial records themselves: marginals and joints are reduced from the
/// same trials that produced the empirical rates, so the bound/empirical
/// inequalities hold sample-exactly. The known-regime false-alarm bound
/// uses the analytic chi-squared path.
pub fn bound_report(
    scenario: &Scenario,
    gamma_bar: f64,
    run: &TrialRun,
    eta0: f64,
) -> Result<BoundReport> {
    let k0 = scenario.union.count();
    let n = scenario.union.subspace_dim();

    let pfa_upper = match scenario.regime {
        Regime::Known => pfa_union_bound_known(k0, n, gamma_bar)?,
        _ => {
            let mut counts = EventCounts::new(k0);
            for r in &run.null_records {
                let flags: Vec<bool> =
                    r.subspace_statistics.iter().map(|&s| s > gamma_bar).collect();
                counts.record(&flags);
            }
            pfa_union_bound(&counts.probabilities())
        }
    };

    // Per-class event estimates over the class's own trials.
    let mut detect_counts: Vec<EventCounts> = (0..k0).map(|_| EventCounts::new(k0)).collect();
    let mut ratio_counts: Vec<Vec<(u64, u64)>> = vec![vec![(0, 0); k0]; k0];
    let mut penalties: Vec<Vec<f64>> = vec![Vec::new(); k0];
    for r in &run.signal_records {
        let Hypothesis::Class(k) = r.hypothesis else { continue };
        let flags: Vec<bool> = r.subspace_statistics.iter().map(|&s| s > gamma_bar).collect();
        detect_counts[k].record(&flags);
        for j in 0..k0 {
            if j == k {
                continue;
            }
            let (hits, total) = &mut ratio_counts[k][j];
            if r.outcome.energies[k] > r.outcome.energies[j] {
                *hits += 1;
            }
            *total += 1;
        }
        penalties[k].push(bessel_penalty(n, eta0, &r.signal_lambdas)?);
    }

    let class_counts: Vec<usize> = detect_counts.iter().map(|c| c.trials() as usize).collect();
    let weights = effective_weights(&scenario.class_priors, &class_counts)?;
    let occupied: Vec<usize> = (0..k0).filter(|&k| class_counts[k] > 0).collect();
    let per_class_probs: Vec<_> =
        occupied.iter().map(|&k| detect_counts[k].probabilities()).collect();
    let occupied_weights: Vec<f64> = occupied.iter().map(|&k| weights[k]).collect();
    let (pd_upper, pd_lower) = pd_bounds(&per_class_probs, &occupied_weights)?;

    let mut pc_frechet = vec![0.0; k0];
    let mut pc_bessel = Vec::with_capacity(k0);
    for k in 0..k0 {
        if class_counts[k] == 0 {
            pc_bessel.push(pc_lower_bessel(0.0, &[]));
            continue;
        }
        let probs = detect_counts[k].probabilities();
        let detection_marginal = probs.marginal(k);
        let ratios: Vec<f64> = (0..k0)
            .filter(|&j| j != k)
            .map(|j| {
                let (hits, total) = ratio_counts[k][j];
                hits as f64 / total.max(1) as f64
            })
            .collect();
        pc_frechet[k] = pc_lower_frechet(detection_marginal, &ratios);
        pc_bessel.push(pc_lower_bessel(detection_marginal, &penalties[k]));
    }

    Ok(BoundReport {
        regime: scenario.regime,
        gamma_bar,
        pfa_upper,
        pd_upper,
        pd_lower,
        pc_lower_frechet: pc_frechet,
        pc_lower_bessel: pc_bessel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{axis_subspace, UnionModel};
    use crate::noise::NoiseTruth;
    use nalgebra::DMatrix;

    fn reference_scenario(regime: Regime, n0: Option<usize>, trials: usize) -> Scenario {
        let union = UnionModel::new(vec![
            axis_subspace(4, &[0, 1]),
            axis_subspace(4, &[1, 2]),
            axis_subspace(4, &[2, 3]),
        ])
        .unwrap();
        Scenario {
            union,
            noise: NoiseTruth::new(1.0, DMatrix::identity(4, 4)).unwrap(),
            regime,
            n0,
            snr_db: 10.0,
            class_priors: Scenario::uniform_priors(3),
            trials,
            seed: 20_240_901,
        }
    }

    #[test]
    fn calibration_matches_chi2_quantile() {
        // Single subspace, n = 2, known noise: the null statistic is
        // chi^2_2 / 2, so the 0.9 quantile is -ln(0.1).
        let union = UnionModel::new(vec![axis_subspace(4, &[0, 1])]).unwrap();
        let mut scenario = reference_scenario(Regime::Known, None, 100);
        scenario.union = union;
        scenario.class_priors = vec![1.0];
        let gamma = calibrate_threshold(&scenario, 0.1, 100_000).unwrap();
        assert!((gamma - 2.302585).abs() < 0.05, "gamma {gamma}");

        // achieved P_FA under a fresh run stays at or below target + 3 SE
        let run = run_trials(&scenario, gamma).unwrap();
        let se = run.summary.pfa_se.max(1e-6);
        assert!(run.summary.pfa <= 0.1 + 3.0 * se, "pfa {}", run.summary.pfa);
    }

    #[test]
    fn calibration_edge_cases() {
        let scenario = reference_scenario(Regime::Known, None, 10);
        assert!(matches!(
            calibrate_threshold(&scenario, 0.0, 1000),
            Err(Error::InvalidConfig { .. })
        ));
        assert!(matches!(
            calibrate_threshold(&scenario, 0.001, 100),
            Err(Error::TooFewTrials { .. })
        ));
        // target 1: threshold is the smallest observed statistic
        let g1 = calibrate_threshold(&scenario, 1.0, 1000).unwrap();
        let g01 = calibrate_threshold(&scenario, 0.1, 1000).unwrap();
        let g001 = calibrate_threshold(&scenario, 0.01, 1000).unwrap();
        assert!(g1 < g01 && g01 < g001, "{g1} {g01} {g001}");
    }

    #[test]
    fn run_trials_reproducible() {
        let scenario = reference_scenario(Regime::UnknownCovariance, Some(32), 300);
        let a = run_trials(&scenario, 0.05).unwrap();
        let b = run_trials(&scenario, 0.05).unwrap();
        assert_eq!(a.summary.pfa, b.summary.pfa);
        assert_eq!(a.summary.pd, b.summary.pd);
        for (x, y) in a.signal_records.iter().zip(&b.signal_records) {
            assert_eq!(x.outcome.statistic, y.outcome.statistic);
            assert_eq!(x.hypothesis, y.hypothesis);
        }
    }

    #[test]
    fn high_snr_detects_and_classifies() {
        let mut scenario = reference_scenario(Regime::Known, None, 2000);
        scenario.snr_db = 60.0;
        let gamma = calibrate_threshold(&scenario, 0.1, 20_000).unwrap();
        let run = run_trials(&scenario, gamma).unwrap();
        assert!(run.summary.pd >= 0.999, "pd {}", run.summary.pd);
        assert!(run.summary.pc >= 0.99, "pc {}", run.summary.pc);
    }

    #[test]
    fn classification_never_beats_detection() {
        for (regime, n0) in [
            (Regime::Known, None),
            (Regime::UnknownCovariance, Some(16)),
            (Regime::UnknownStatistics, Some(16)),
        ] {
            let scenario = reference_scenario(regime, n0, 2000);
            let gamma = calibrate_threshold(&scenario, 0.1, 20_000).unwrap();
            let run = run_trials(&scenario, gamma).unwrap();
            assert!(
                run.summary.pc <= run.summary.pd + 1e-12,
                "{regime:?}: pc {} pd {}",
                run.summary.pc,
                run.summary.pd
            );
        }
    }

    #[test]
    fn null_pfa_within_union_bound() {
        let scenario = reference_scenario(Regime::Known, None, 5000);
        let gamma = 2.3026;
        let run = run_trials(&scenario, gamma).unwrap();
        let report = bound_report(&scenario, gamma, &run, 0.25).unwrap();
        assert!(
            run.summary.pfa <= report.pfa_upper + 3.0 * run.summary.pfa_se,
            "pfa {} vs bound {}",
            run.summary.pfa,
            report.pfa_upper
        );
    }

    #[test]
    fn sandwich_holds_sample_exactly() {
        for (regime, n0) in [
            (Regime::Known, None),
            (Regime::UnknownCovariance, Some(24)),
            (Regime::UnknownStatistics, Some(24)),
        ] {
            let scenario = reference_scenario(regime, n0, 2000);
            let gamma = calibrate_threshold(&scenario, 0.2, 5_000).unwrap();
            let run = run_trials(&scenario, gamma).unwrap();
            let report = bound_report(&scenario, gamma, &run, 0.25).unwrap();

            // union / de Caen bounds reduced from the same records bracket
            // the empirical detection rate without statistical slack
            assert!(
                run.summary.pd <= report.pd_upper + 1e-12,
                "{regime:?}: pd {} upper {}",
                run.summary.pd,
                report.pd_upper
            );
            assert!(
                run.summary.pd >= report.pd_lower - 1e-12,
                "{regime:?}: pd {} lower {}",
                run.summary.pd,
                report.pd_lower
            );

            // per-class Frechet lower bounds cannot exceed per-class rates
            for (k, cls) in run.summary.per_class.iter().enumerate() {
                assert!(
                    cls.pc >= report.pc_lower_frechet[k] - 1e-12,
                    "{regime:?} class {k}: pc {} frechet {}",
                    cls.pc,
                    report.pc_lower_frechet[k]
                );
            }

            // unknown regimes: MC union bound also dominates empirical pfa
            if regime != Regime::Known {
                assert!(run.summary.pfa <= report.pfa_upper + 1e-12);
            }

            // bessel bound is valid (never above the empirical rate by more
            // than MC noise) and no tighter than frechet on this geometry
            let frechet_agg = report.pc_frechet_weighted(&run.summary.weights);
            let bessel_agg = report.pc_bessel_weighted(&run.summary.weights);
            assert!(bessel_agg <= frechet_agg + 1e-12, "{regime:?}");
        }
    }

    #[test]
    fn lambda_fields_populated_for_signal_trials() {
        let scenario = reference_scenario(Regime::Known, None, 50);
        let run = run_trials(&scenario, 1.0).unwrap();
        for r in &run.signal_records {
            assert_eq!(r.signal_lambdas.len(), 2);
            assert!(r.whitened_signal_energy > 0.0);
            assert!(r.signal_lambdas.iter().all(|&l| l >= 0.0));
        }
        for r in &run.null_records {
            assert!(r.signal_lambdas.is_empty());
            assert_eq!(r.whitened_signal_energy, 0.0);
        }
    }
}
