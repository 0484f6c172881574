//! Strict TOML experiment configuration.
//!
//! Unknown keys are rejected everywhere so a typo cannot silently
//! misconfigure an experiment. Paths are resolved relative to the config
//! file's directory.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Deserialize;

use uniondet_core::error::{Error, Result};
use uniondet_core::geometry::{Subspace, UnionModel};
use uniondet_core::mc::{child_rng, Stream};
use uniondet_core::noise::{random_spd_covariance, NoiseTruth, Regime};
use uniondet_core::sim::{off_geodesic_grid, AngleSweepConfig, NoiseGeometryConfig, Scenario};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub plot: bool,
    #[serde(default)]
    pub workers: usize,
    pub union: UnionSection,
    pub noise: NoiseSection,
    pub signal: SignalSection,
    pub trials: TrialsSection,
    #[serde(default)]
    pub roc: Option<RocSection>,
    #[serde(default)]
    pub angle_sweep: Option<AngleSweepSection>,
    #[serde(default)]
    pub noise_geometry: Option<NoiseGeometrySection>,
    #[serde(default)]
    pub gap: Option<GapSection>,
    #[serde(default)]
    pub n0_sweep: Option<N0SweepSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnionSection {
    pub ambient_dim: usize,
    pub subspace_dim: usize,
    /// Inline bases: one `m x n` matrix per subspace, row-major nested
    /// arrays. Exactly one of `bases` / `bases_files` must be present.
    #[serde(default)]
    pub bases: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default)]
    pub bases_files: Option<Vec<PathBuf>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub regime: String,
    pub sigma2: f64,
    #[serde(default)]
    pub n0: Option<usize>,
    pub covariance: CovarianceSpec,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum CovarianceSpec {
    #[serde(rename = "identity")]
    Identity,
    #[serde(rename = "file")]
    File { path: PathBuf },
    #[serde(rename = "random")]
    Random { condition: f64, seed: u64 },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSection {
    pub snr_db: f64,
    #[serde(default)]
    pub priors: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialsSection {
    pub count: usize,
    pub calibration: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RocSection {
    pub target_pfa: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleSweepSection {
    pub target_pfa: f64,
    /// 1-based indices into the union.
    pub swept_index: usize,
    pub base_index: usize,
    pub other_index: usize,
    /// Angles of the sweep's far end relative to the base subspace.
    pub end_angles: Vec<f64>,
    /// Path fractions in [0, 1], one grid point each.
    pub fractions: Vec<f64>,
    /// Peak rotation of the complement frame along the path (0 = straight).
    #[serde(default)]
    pub complement_rotation: f64,
    /// Orthonormal complement directions (`m x n`, row-major nested).
    pub complement: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseGeometrySection {
    pub target_pfa: f64,
    pub condition: f64,
    pub perturbation: f64,
    pub seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapSection {
    pub snr_db: Vec<f64>,
    pub target_pfa: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct N0SweepSection {
    pub n0: Vec<usize>,
    pub target_pfa: Vec<f64>,
}

impl RunConfig {
    /// Parses and structurally validates a config file.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig { what: format!("{}: {e}", path.display()) })?;
        let config: RunConfig = toml::from_str(&text).map_err(|e| Error::InvalidConfig {
            what: format!("{}: {e}", path.display()),
        })?;
        let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok((config, base_dir))
    }

    pub fn regime(&self) -> Result<Regime> {
        match self.noise.regime.as_str() {
            "known" => Ok(Regime::Known),
            "unknown-cov" => Ok(Regime::UnknownCovariance),
            "unknown-stats" => Ok(Regime::UnknownStatistics),
            other => Err(Error::InvalidConfig {
                what: format!("unknown regime '{other}' (known | unknown-cov | unknown-stats)"),
            }),
        }
    }

    fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
        let nrows = rows.len();
        let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
        if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::InvalidConfig { what: format!("{what}: ragged or empty matrix") });
        }
        Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }

    pub fn build_union(&self, base_dir: &Path) -> Result<UnionModel> {
        let (m, n) = (self.union.ambient_dim, self.union.subspace_dim);
        let raw: Vec<DMatrix<f64>> = match (&self.union.bases, &self.union.bases_files) {
            (Some(inline), None) => inline
                .iter()
                .enumerate()
                .map(|(k, rows)| Self::matrix_from_rows(rows, &format!("union.bases[{k}]")))
                .collect::<Result<_>>()?,
            (None, Some(files)) => files
                .iter()
                .map(|f| uniondet_core::io::read_matrix(&base_dir.join(f)))
                .collect::<Result<_>>()?,
            _ => {
                return Err(Error::InvalidConfig {
                    what: "union needs exactly one of 'bases' or 'bases_files'".into(),
                })
            }
        };
        let subspaces = raw
            .into_iter()
            .enumerate()
            .map(|(k, mat)| {
                if mat.shape() != (m, n) {
                    return Err(Error::InvalidConfig {
                        what: format!(
                            "union basis {} is {}x{}, expected {m}x{n}",
                            k + 1,
                            mat.nrows(),
                            mat.ncols()
                        ),
                    });
                }
                Subspace::orthonormalize(&mat)
            })
            .collect::<Result<Vec<_>>>()?;
        UnionModel::new(subspaces)
    }

    pub fn build_covariance(&self, base_dir: &Path) -> Result<DMatrix<f64>> {
        let m = self.union.ambient_dim;
        match &self.noise.covariance {
            CovarianceSpec::Identity => Ok(DMatrix::identity(m, m)),
            CovarianceSpec::File { path } => uniondet_core::io::read_matrix(&base_dir.join(path)),
            CovarianceSpec::Random { condition, seed } => {
                let mut rng = child_rng(*seed, Stream::Geometry.id(), 0);
                random_spd_covariance(m, *condition, &mut rng)
            }
        }
    }

    /// Builds the full scenario, honoring a seed override (CLI flag or the
    /// UOS_SEED environment variable).
    pub fn build_scenario(&self, base_dir: &Path, seed_override: Option<u64>) -> Result<Scenario> {
        let union = self.build_union(base_dir)?;
        let covariance = self.build_covariance(base_dir)?;
        let priors = match &self.signal.priors {
            Some(p) if !p.is_empty() => p.clone(),
            _ => Scenario::uniform_priors(union.count()),
        };
        let scenario = Scenario {
            union,
            noise: NoiseTruth::new(self.noise.sigma2, covariance)?,
            regime: self.regime()?,
            n0: self.noise.n0,
            snr_db: self.signal.snr_db,
            class_priors: priors,
            trials: self.trials.count,
            seed: seed_override.unwrap_or(self.seed),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn build_angle_sweep(
        &self,
        base_dir: &Path,
        seed_override: Option<u64>,
    ) -> Result<AngleSweepConfig> {
        let section = self.angle_sweep.as_ref().ok_or_else(|| Error::InvalidConfig {
            what: "config has no [angle_sweep] section".into(),
        })?;
        let scenario = self.build_scenario(base_dir, seed_override)?;
        let k0 = scenario.union.count();
        let index = |label: &str, v: usize| -> Result<usize> {
            if v == 0 || v > k0 {
                return Err(Error::InvalidConfig {
                    what: format!("angle_sweep.{label} = {v} out of range 1..={k0}"),
                });
            }
            Ok(v - 1)
        };
        let complement = Self::matrix_from_rows(&section.complement, "angle_sweep.complement")?;
        let (angle_grid, complements) = off_geodesic_grid(
            &section.end_angles,
            &complement,
            section.complement_rotation,
            &section.fractions,
        )?;
        Ok(AngleSweepConfig {
            scenario,
            swept_index: index("swept_index", section.swept_index)?,
            base_index: index("base_index", section.base_index)?,
            other_index: index("other_index", section.other_index)?,
            complement,
            angle_grid,
            complements: Some(complements),
            target_pfa: section.target_pfa,
            calibration_trials: self.trials.calibration,
        })
    }

    pub fn build_noise_geometry(&self, seed_override: Option<u64>) -> Result<NoiseGeometryConfig> {
        let section = self.noise_geometry.as_ref().ok_or_else(|| Error::InvalidConfig {
            what: "config has no [noise_geometry] section".into(),
        })?;
        Ok(NoiseGeometryConfig {
            ambient_dim: self.union.ambient_dim,
            subspace_dim: self.union.subspace_dim,
            sigma2: self.noise.sigma2,
            snr_db: self.signal.snr_db,
            condition_target: section.condition,
            perturbation: section.perturbation,
            regime: self.regime()?,
            n0: self.noise.n0,
            trials: self.trials.count,
            target_pfa: section.target_pfa,
            calibration_trials: self.trials.calibration,
            seed: seed_override.unwrap_or(section.seed),
        })
    }
}

/// Validates a target false-alarm probability coming from flags or config.
pub fn check_target_pfa(p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidConfig {
            what: format!("target_pfa must lie in (0, 1], got {p}"),
        });
    }
    Ok(p)
}
