//! Monte-Carlo experiment harness: scenarios, trials, threshold
//! calibration, and the sweep experiments (ROC grids, subspace-angle
//! sweeps, noise-geometry comparisons, SNR gap curves, training-budget
//! sweeps).

pub mod engine;
pub mod presets;
pub mod scenario;
pub mod sweeps;

pub use engine::{
    bound_report, calibrate_threshold, prepare_known, run_trial, run_trials, ClassSummary,
    Summary, TrialRecord, TrialRun,
};
pub use scenario::{sample_signal, Hypothesis, Scenario};
pub use sweeps::{
    angle_sweep, gap_experiment, n0_sweep, noise_geometry_experiment, off_geodesic_grid,
    operating_point, roc_sweep, spearman, AnglePoint, AngleSweepConfig, CurvePoint, GapCurve,
    N0Sweep, NoiseGeometryConfig, NoiseGeometryReport, SubspaceGeometryStats, DEFAULT_ETA0,
};
