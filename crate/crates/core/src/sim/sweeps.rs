//! Sweep experiments over operating points, subspace geometry, noise
//! geometry, SNR, and training budget.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{principal_angles, rotated_subspace, Subspace, UnionModel};
use crate::mc::{child_rng, Stream};
use crate::noise::{random_spd_covariance, NoiseTruth, Regime};
use crate::sim::engine::{bound_report, calibrate_threshold, run_trials, Summary};
use crate::sim::scenario::Scenario;
use crate::bounds::BoundReport;

/// The eta0 value used for the Bessel classification bound throughout.
pub const DEFAULT_ETA0: f64 = 0.25;

/// One calibrated operating point with empirical rates and bounds.
#[derive(Debug, Clone)]
pub struct CurvePoint {
    pub gamma_bar: f64,
    pub target_pfa: f64,
    pub summary: Summary,
    pub report: BoundReport,
}

impl CurvePoint {
    /// Header of the ROC CSV serialization.
    pub const CSV_HEADER: &'static str = "gamma_bar,target_pfa,pfa,pfa_se,pd,pd_se,pc,pc_se,pfa_ub,pd_ub,pd_lb,pc_lb_frechet_mean,pc_lb_bessel_mean";

    /// Class-weighted Frechet classification lower bound.
    pub fn pc_lb_frechet_mean(&self) -> f64 {
        self.report.pc_frechet_weighted(&self.summary.weights)
    }

    /// Class-weighted Bessel classification lower bound (per-trial means).
    pub fn pc_lb_bessel_mean(&self) -> f64 {
        self.report.pc_bessel_weighted(&self.summary.weights)
    }

    /// Detection-minus-classification gap at this point.
    pub fn gap(&self) -> f64 {
        self.summary.pd - self.summary.pc
    }

    pub fn csv_row(&self) -> String {
        let s = &self.summary;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.gamma_bar,
            self.target_pfa,
            s.pfa,
            s.pfa_se,
            s.pd,
            s.pd_se,
            s.pc,
            s.pc_se,
            self.report.pfa_upper,
            self.report.pd_upper,
            self.report.pd_lower,
            self.pc_lb_frechet_mean(),
            self.pc_lb_bessel_mean()
        )
    }
}

/// Calibrates and evaluates one operating point.
pub fn operating_point(
    scenario: &Scenario,
    target_pfa: f64,
    calibration_trials: usize,
) -> Result<CurvePoint> {
    let gamma_bar = calibrate_threshold(scenario, target_pfa, calibration_trials)?;
    let run = run_trials(scenario, gamma_bar)?;
    let report = bound_report(scenario, gamma_bar, &run, DEFAULT_ETA0)?;
    Ok(CurvePoint { gamma_bar, target_pfa, summary: run.summary, report })
}

/// ROC sweep: one calibrated operating point per target false-alarm level.
/// Evaluation trials share random streams across grid points, so detection
/// rates are monotone along the calibrated thresholds by construction.
pub fn roc_sweep(
    scenario: &Scenario,
    target_pfas: &[f64],
    calibration_trials: usize,
) -> Result<Vec<CurvePoint>> {
    if target_pfas.is_empty() {
        return Err(Error::InvalidConfig { what: "empty target_pfa grid".into() });
    }
    target_pfas
        .iter()
        .map(|&p| operating_point(scenario, p, calibration_trials))
        .collect()
}

/// Configuration of the subspace-angle sweep. Subspace `swept_index` is
/// rebuilt per grid entry by rotating `base_index`'s basis toward the
/// supplied complement directions.
#[derive(Debug, Clone)]
pub struct AngleSweepConfig {
    /// Scenario holding the fixed subspaces (the swept slot's initial
    /// content is ignored).
    pub scenario: Scenario,
    /// Index of the subspace being swept.
    pub swept_index: usize,
    /// The subspace the sweep angles are measured from.
    pub base_index: usize,
    /// The fixed "far" subspace tracked by the angle-sum diagnostic.
    pub other_index: usize,
    /// Orthonormal directions orthogonal to the base subspace.
    pub complement: DMatrix<f64>,
    /// One target-angle vector (length n) per grid point.
    pub angle_grid: Vec<Vec<f64>>,
    /// Optional per-point complement frames (same length as `angle_grid`);
    /// grid points fall back to `complement` when absent. Varying the
    /// frame lets the sweep leave the straight path between two fixed
    /// subspaces.
    pub complements: Option<Vec<DMatrix<f64>>>,
    pub target_pfa: f64,
    pub calibration_trials: usize,
}

/// Builds a sweep from the base subspace to the subspace at `end_angles`
/// that bulges away from the straight path in between: at fraction `t` the
/// target angles are `t * end_angles` and the complement frame is rotated
/// within its own span by `rho_max * sin(pi t)` (a rotation of the frame's
/// first two columns). With `rho_max = 0` this is the straight path.
///
/// Returns per-point angle vectors and complement frames for
/// [`AngleSweepConfig`].
pub fn off_geodesic_grid(
    end_angles: &[f64],
    complement: &DMatrix<f64>,
    rho_max: f64,
    fractions: &[f64],
) -> Result<(Vec<Vec<f64>>, Vec<DMatrix<f64>>)> {
    if complement.ncols() < 2 && rho_max != 0.0 {
        return Err(Error::InvalidConfig {
            what: "complement frame rotation needs at least two directions".into(),
        });
    }
    let mut angle_grid = Vec::with_capacity(fractions.len());
    let mut complements = Vec::with_capacity(fractions.len());
    for &t in fractions {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidConfig {
                what: format!("sweep fraction {t} outside [0, 1]"),
            });
        }
        angle_grid.push(end_angles.iter().map(|a| a * t).collect());
        let rho = rho_max * (std::f64::consts::PI * t).sin();
        let mut frame = complement.clone();
        if rho != 0.0 {
            let (c, s) = (rho.cos(), rho.sin());
            let col0 = complement.column(0) * c + complement.column(1) * s;
            let col1 = complement.column(0) * (-s) + complement.column(1) * c;
            frame.set_column(0, &col0);
            frame.set_column(1, &col1);
        }
        complements.push(frame);
    }
    Ok((angle_grid, complements))
}

/// Per-grid-point result of the angle sweep.
#[derive(Debug, Clone)]
pub struct AnglePoint {
    pub requested_angles: Vec<f64>,
    /// Smallest principal angle between the whitened base and swept
    /// subspaces (whitened by the true noise covariance).
    pub whitened_angle_min: f64,
    /// Sum of the smallest whitened principal angles the swept subspace
    /// makes with the base and with the other fixed subspace.
    pub whitened_angle_sum: f64,
    /// Near-duplicate diagnostic from the union.
    pub duplicate_flag: bool,
    pub point: CurvePoint,
}

impl AnglePoint {
    pub fn csv_header(n: usize, k0: usize) -> String {
        let mut cols: Vec<String> =
            CurvePoint::CSV_HEADER.split(',').map(|s| s.to_string()).collect();
        for i in 1..=n {
            cols.push(format!("requested_angle_{i}"));
        }
        cols.push("whitened_angle_min".into());
        cols.push("whitened_angle_sum".into());
        for k in 1..=k0 {
            cols.push(format!("pc_class_{k}"));
        }
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut fields = vec![self.point.csv_row()];
        for a in &self.requested_angles {
            fields.push(format!("{a}"));
        }
        fields.push(format!("{}", self.whitened_angle_min));
        fields.push(format!("{}", self.whitened_angle_sum));
        for cls in &self.point.summary.per_class {
            fields.push(format!("{}", cls.pc));
        }
        fields.join(",")
    }
}

/// Sweeps one subspace through a grid of principal angles, recalibrating
/// the threshold at every grid point. Whitened angles are measured with the
/// exact whitener of the true covariance.
pub fn angle_sweep(config: &AngleSweepConfig) -> Result<Vec<AnglePoint>> {
    let base = config.scenario.union.subspace(config.base_index).clone();
    let whitener = config.scenario.noise.exact_whitener()?;
    if let Some(frames) = &config.complements {
        if frames.len() != config.angle_grid.len() {
            return Err(Error::InvalidConfig {
                what: format!(
                    "{} complement frames for {} grid points",
                    frames.len(),
                    config.angle_grid.len()
                ),
            });
        }
    }
    let mut points = Vec::with_capacity(config.angle_grid.len());
    for (idx, angles) in config.angle_grid.iter().enumerate() {
        let frame = config
            .complements
            .as_ref()
            .map(|frames| &frames[idx])
            .unwrap_or(&config.complement);
        let swept = rotated_subspace(&base, angles, frame)?;
        let scenario = config.scenario.with_subspace(config.swept_index, swept)?;
        let duplicate_flag = !scenario.union.near_duplicate_pairs().is_empty();

        let whitened: Vec<Subspace> = scenario
            .union
            .subspaces()
            .iter()
            .map(|s| Subspace::orthonormalize(&whitener.whiten_matrix(s.basis())?))
            .collect::<Result<_>>()?;
        let to_base =
            principal_angles(&whitened[config.swept_index], &whitened[config.base_index])?;
        let to_other =
            principal_angles(&whitened[config.swept_index], &whitened[config.other_index])?;

        let point = operating_point(&scenario, config.target_pfa, config.calibration_trials)?;
        points.push(AnglePoint {
            requested_angles: angles.clone(),
            whitened_angle_min: to_base.min_angle(),
            whitened_angle_sum: to_base.min_angle() + to_other.min_angle(),
            duplicate_flag,
            point,
        });
    }
    Ok(points)
}

/// Configuration of the noise-geometry experiment: two subspaces are built
/// from perturbed eigenvectors of the noise covariance (one from the
/// trailing, one from the leading eigenvectors) and a third from a random
/// Gaussian basis.
#[derive(Debug, Clone)]
pub struct NoiseGeometryConfig {
    pub ambient_dim: usize,
    pub subspace_dim: usize,
    pub sigma2: f64,
    pub snr_db: f64,
    /// Eigenvalue spread of the random covariance; 1.0 gives the identity
    /// spectrum control.
    pub condition_target: f64,
    /// Scale of the Gaussian perturbation added to each eigenvector.
    pub perturbation: f64,
    pub regime: Regime,
    pub n0: Option<usize>,
    pub trials: usize,
    pub target_pfa: f64,
    pub calibration_trials: usize,
    pub seed: u64,
}

/// Per-subspace outcome of the noise-geometry experiment.
#[derive(Debug, Clone)]
pub struct SubspaceGeometryStats {
    /// Mean whitened signal norm over the subspace's trials.
    pub mean_whitened_norm: f64,
    pub pd: f64,
    pub pd_se: f64,
    pub pc: f64,
    pub pc_se: f64,
}

#[derive(Debug, Clone)]
pub struct NoiseGeometryReport {
    pub gamma_bar: f64,
    pub per_subspace: Vec<SubspaceGeometryStats>,
}

impl NoiseGeometryReport {
    pub const CSV_HEADER: &'static str = "subspace,mean_whitened_norm,pd,pd_se,pc,pc_se";

    pub fn csv_rows(&self) -> Vec<String> {
        self.per_subspace
            .iter()
            .enumerate()
            .map(|(k, s)| {
                format!(
                    "{},{},{},{},{},{}",
                    k + 1,
                    s.mean_whitened_norm,
                    s.pd,
                    s.pd_se,
                    s.pc,
                    s.pc_se
                )
            })
            .collect()
    }
}

/// Builds the eigen-aligned union for the noise-geometry experiment: the
/// first subspace from the trailing eigenvectors of R (least noise
/// amplification after whitening), the second from the leading
/// eigenvectors, the third from a random Gaussian basis.
pub fn noise_geometry_experiment(config: &NoiseGeometryConfig) -> Result<NoiseGeometryReport> {
    let m = config.ambient_dim;
    let n = config.subspace_dim;
    // the trailing and leading eigenvector blocks must not overlap
    if m < 2 * n {
        return Err(Error::InsufficientAmbientDim { ambient_dim: m, needed: 2 * n });
    }
    let mut rng = child_rng(config.seed, Stream::Geometry.id(), 0);
    let covariance = random_spd_covariance(m, config.condition_target, &mut rng)?;
    let (_, vectors) = crate::noise::eig_sym(&covariance)?;

    // Perturbed eigenvector blocks: trailing block for S1, leading for S2.
    let mut build_from_eigvecs = |cols: Vec<usize>| -> Result<Subspace> {
        let mut raw = DMatrix::zeros(m, n);
        for (j, &c) in cols.iter().enumerate() {
            let noise_dir = crate::noise::standard_normal_vector(m, &mut rng);
            let col = vectors.column(c) + noise_dir * config.perturbation;
            raw.set_column(j, &col);
        }
        Subspace::orthonormalize(&raw)
    };
    let trailing: Vec<usize> = (m - n..m).collect();
    let leading: Vec<usize> = (0..n).collect();
    let s1 = build_from_eigvecs(trailing)?;
    let s2 = build_from_eigvecs(leading)?;
    let raw3 = DMatrix::from_fn(m, n, |_, _| {
        use rand::Rng;
        use rand_distr::StandardNormal;
        rng.sample::<f64, _>(StandardNormal)
    });
    let s3 = Subspace::orthonormalize(&raw3)?;

    let union = UnionModel::new(vec![s1, s2, s3])?;
    let scenario = Scenario {
        union,
        noise: NoiseTruth::new(config.sigma2, covariance)?,
        regime: config.regime,
        n0: config.n0,
        snr_db: config.snr_db,
        class_priors: Scenario::uniform_priors(3),
        trials: config.trials,
        seed: config.seed,
    };
    let gamma_bar = calibrate_threshold(&scenario, config.target_pfa, config.calibration_trials)?;
    let run = run_trials(&scenario, gamma_bar)?;
    let per_subspace = run
        .summary
        .per_class
        .iter()
        .map(|c| SubspaceGeometryStats {
            mean_whitened_norm: c.mean_whitened_norm,
            pd: c.pd,
            pd_se: c.pd_se,
            pc: c.pc,
            pc_se: c.pc_se,
        })
        .collect();
    Ok(NoiseGeometryReport { gamma_bar, per_subspace })
}

/// ROC sweep repeated at several SNR levels, for the detection-versus-
/// classification gap comparison.
#[derive(Debug, Clone)]
pub struct GapCurve {
    pub snr_db: f64,
    pub points: Vec<CurvePoint>,
}

impl GapCurve {
    pub fn mean_gap(&self) -> f64 {
        self.points.iter().map(|p| p.gap()).sum::<f64>() / self.points.len().max(1) as f64
    }
}

pub fn gap_experiment(
    scenario: &Scenario,
    snr_grid: &[f64],
    target_pfas: &[f64],
    calibration_trials: usize,
) -> Result<Vec<GapCurve>> {
    snr_grid
        .iter()
        .map(|&snr_db| {
            let s = scenario.with_snr_db(snr_db);
            Ok(GapCurve { snr_db, points: roc_sweep(&s, target_pfas, calibration_trials)? })
        })
        .collect()
}

/// ROC sweeps of the unknown-covariance detector at several training
/// budgets, with the known-statistics sweep as the reference curve.
#[derive(Debug, Clone)]
pub struct N0Sweep {
    pub known: Vec<CurvePoint>,
    pub per_n0: Vec<(usize, Vec<CurvePoint>)>,
}

impl N0Sweep {
    /// Mean absolute detection-rate distance of a budget's curve from the
    /// known-statistics curve.
    pub fn mean_abs_gap(&self, index: usize) -> f64 {
        let curve = &self.per_n0[index].1;
        curve
            .iter()
            .zip(&self.known)
            .map(|(a, b)| (a.summary.pd - b.summary.pd).abs())
            .sum::<f64>()
            / curve.len().max(1) as f64
    }
}

pub fn n0_sweep(
    scenario: &Scenario,
    n0_grid: &[usize],
    target_pfas: &[f64],
    calibration_trials: usize,
) -> Result<N0Sweep> {
    let known = roc_sweep(
        &scenario.with_regime(Regime::Known, None),
        target_pfas,
        calibration_trials,
    )?;
    let per_n0 = n0_grid
        .iter()
        .map(|&n0| {
            let s = scenario.with_regime(Regime::UnknownCovariance, Some(n0));
            Ok((n0, roc_sweep(&s, target_pfas, calibration_trials)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(N0Sweep { known, per_n0 })
}

/// Spearman rank correlation between two equal-length samples.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let rank = |v: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).expect("finite values"));
        let mut ranks = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for &k in &idx[i..=j] {
                ranks[k] = avg;
            }
            i = j + 1;
        }
        ranks
    };
    let rx = rank(x);
    let ry = rank(y);
    let mean = (n as f64 - 1.0) / 2.0;
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for i in 0..n {
        let a = rx[i] - mean;
        let b = ry[i] - mean;
        num += a * b;
        dx += a * a;
        dy += b * b;
    }
    if dx == 0.0 || dy == 0.0 {
        return 0.0;
    }
    num / (dx * dy).sqrt()
}
