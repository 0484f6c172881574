//! Published reference experiment coordinates.
//!
//! The sweep experiments need concrete subspaces, a noise covariance, and
//! seeds. These constructors pin the exact values used by the acceptance
//! suite and mirrored by the TOML configs shipped with the CLI, so runs
//! are comparable across machines.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::geometry::{axis_subspace, Subspace, UnionModel};
use crate::noise::{NoiseTruth, Regime};
use crate::sim::scenario::Scenario;
use crate::sim::sweeps::{off_geodesic_grid, AngleSweepConfig, NoiseGeometryConfig};

/// Trials per operating point.
pub const REFERENCE_TRIALS: usize = 10_000;

/// Null trials used to calibrate each threshold.
pub const REFERENCE_CALIBRATION_TRIALS: usize = 50_000;

/// Experiment seed of the reference scenario.
pub const REFERENCE_SEED: u64 = 99_117;

/// Target false-alarm grid of the reference ROC sweeps.
pub const REFERENCE_PFA_GRID: [f64; 6] = [0.02, 0.05, 0.1, 0.2, 0.3, 0.5];

/// Three 2-dimensional subspaces of R^4 with pairwise principal angles
/// (45, 45), (45, 45), and (90, 90) degrees: a well-separated union where
/// every mutual geometry effect is visible but no pair is degenerate.
pub fn packed_union() -> UnionModel {
    let r = 0.5f64.sqrt();
    let s1 = axis_subspace(4, &[0, 1]);
    let s2 = Subspace::from_orthonormal(DMatrix::from_columns(&[
        DVector::from_column_slice(&[r, 0.0, r, 0.0]),
        DVector::from_column_slice(&[0.0, r, 0.0, r]),
    ]))
    .expect("columns are orthonormal");
    let s3 = Subspace::from_orthonormal(DMatrix::from_columns(&[
        DVector::from_column_slice(&[r, 0.0, -r, 0.0]),
        DVector::from_column_slice(&[0.0, r, 0.0, -r]),
    ]))
    .expect("columns are orthonormal");
    UnionModel::new(vec![s1, s2, s3]).expect("consistent dimensions")
}

/// The reference scenario: the packed union in white noise at 10 dB SNR,
/// uniform priors, 10^4 trials per point.
pub fn reference_scenario(regime: Regime, n0: Option<usize>) -> Scenario {
    Scenario {
        union: packed_union(),
        noise: NoiseTruth::new(1.0, DMatrix::identity(4, 4)).expect("identity is SPD"),
        regime,
        n0,
        snr_db: 10.0,
        class_priors: Scenario::uniform_priors(3),
        trials: REFERENCE_TRIALS,
        seed: REFERENCE_SEED,
    }
}

/// End angles of the reference angle sweep (the far subspace's position
/// relative to the base subspace).
pub const SWEEP_END_ANGLES: [f64; 2] = [1.30, 1.45];

/// Peak complement-frame rotation of the off-geodesic sweep path.
pub const SWEEP_RHO_MAX: f64 = std::f64::consts::FRAC_PI_2 * 0.9;

/// Path fractions of the 10-point reference sweep.
pub fn sweep_fractions() -> Vec<f64> {
    (0..10).map(|i| 0.08 + (0.97 - 0.08) * i as f64 / 9.0).collect()
}

/// Reference angle sweep: the middle subspace travels from next to the
/// base subspace to next to the far subspace along the off-geodesic path,
/// in white noise at 10 dB. The swept slot's initial content is a
/// placeholder; `angle_sweep` rebuilds it per grid point.
pub fn angle_sweep_reference() -> Result<AngleSweepConfig> {
    let base = axis_subspace(4, &[0, 1]);
    let complement = axis_subspace(4, &[2, 3]).basis().clone();
    let far = crate::geometry::rotated_subspace(&base, &SWEEP_END_ANGLES, &complement)?;
    let placeholder = crate::geometry::rotated_subspace(&base, &[0.1, 0.12], &complement)?;
    let union = UnionModel::new(vec![base, placeholder, far])?;
    let (angle_grid, complements) =
        off_geodesic_grid(&SWEEP_END_ANGLES, &complement, SWEEP_RHO_MAX, &sweep_fractions())?;
    Ok(AngleSweepConfig {
        scenario: Scenario {
            union,
            noise: NoiseTruth::new(1.0, DMatrix::identity(4, 4))?,
            regime: Regime::Known,
            n0: None,
            snr_db: 10.0,
            class_priors: Scenario::uniform_priors(3),
            trials: REFERENCE_TRIALS,
            seed: 555,
        },
        swept_index: 1,
        base_index: 0,
        other_index: 2,
        complement,
        angle_grid,
        complements: Some(complements),
        target_pfa: 0.1,
        calibration_trials: REFERENCE_CALIBRATION_TRIALS,
    })
}

/// Reference noise-geometry experiment (the identity-spectrum control uses
/// `condition_target = 1`).
pub fn noise_geometry_reference(
    condition_target: f64,
    regime: Regime,
    n0: Option<usize>,
) -> NoiseGeometryConfig {
    NoiseGeometryConfig {
        ambient_dim: 4,
        subspace_dim: 2,
        sigma2: 1.0,
        snr_db: 10.0,
        condition_target,
        perturbation: 0.05,
        regime,
        n0,
        trials: REFERENCE_TRIALS,
        target_pfa: 0.1,
        calibration_trials: REFERENCE_CALIBRATION_TRIALS,
        seed: 4,
    }
}

/// Three seeded random 2-dimensional subspaces of R^8 for the direct-sum
/// baseline comparison at 5 dB SNR.
pub fn direct_sum_reference_union() -> UnionModel {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let mut rng = crate::mc::child_rng(777, crate::mc::Stream::Geometry.id(), 0);
    let subspaces = (0..3)
        .map(|_| {
            let raw = DMatrix::from_fn(8, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
            Subspace::orthonormalize(&raw).expect("full rank with probability one")
        })
        .collect();
    UnionModel::new(subspaces).expect("consistent dimensions")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::principal_angles;

    #[test]
    fn packed_union_has_designed_angles() {
        let union = packed_union();
        let check = |i: usize, j: usize, want: f64| {
            let pa = principal_angles(union.subspace(i), union.subspace(j)).unwrap();
            for &a in &pa.angles {
                assert!((a - want).abs() < 1e-12, "{i}-{j}: {a} vs {want}");
            }
        };
        check(0, 1, std::f64::consts::FRAC_PI_4);
        check(0, 2, std::f64::consts::FRAC_PI_4);
        check(1, 2, std::f64::consts::FRAC_PI_2);
        assert!(union.near_duplicate_pairs().is_empty());
    }

    #[test]
    fn sweep_reference_is_well_formed() {
        let config = angle_sweep_reference().unwrap();
        assert_eq!(config.angle_grid.len(), 10);
        let frames = config.complements.as_ref().unwrap();
        assert_eq!(frames.len(), 10);
        config.scenario.validate().unwrap();
    }
}
