//! Experiment description: geometry, noise truth, regime, signal level,
//! class priors, trial budget, and seed.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::UnionModel;
use crate::noise::{NoiseTruth, Regime};

/// Which hypothesis generated a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    /// Noise only.
    Null,
    /// Signal from the given subspace (0-based index).
    Class(usize),
}

/// Full description of one Monte-Carlo experiment.
///
/// The noise truth holds the actual `(sigma^2, R)` generating the data. In
/// the unknown regimes the detector never sees `R`; it receives a fresh set
/// of `N0` training snapshots drawn from `N(0, R)` on every trial, so
/// trials are i.i.d. and binomial standard errors are valid.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub union: UnionModel,
    pub noise: NoiseTruth,
    pub regime: Regime,
    pub n0: Option<usize>,
    pub snr_db: f64,
    pub class_priors: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

impl Scenario {
    /// Validates the cross-field constraints.
    pub fn validate(&self) -> Result<()> {
        let m = self.union.ambient_dim();
        if self.noise.ambient_dim() != m {
            return Err(Error::DimensionMismatch {
                expected: format!("covariance {m}x{m}"),
                got: format!("{0}x{0}", self.noise.ambient_dim()),
            });
        }
        if !(self.noise.sigma2() > 0.0) {
            return Err(Error::InvalidConfig { what: "sigma2 must be positive".into() });
        }
        if !self.snr_db.is_finite() {
            return Err(Error::InvalidConfig { what: "snr_db must be finite".into() });
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig { what: "trials must be >= 1".into() });
        }
        if self.class_priors.len() != self.union.count() {
            return Err(Error::InvalidConfig {
                what: format!(
                    "{} priors for {} subspaces",
                    self.class_priors.len(),
                    self.union.count()
                ),
            });
        }
        if self.class_priors.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidConfig { what: "priors must be nonnegative".into() });
        }
        let total: f64 = self.class_priors.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig {
                what: format!("priors must sum to 1, got {total}"),
            });
        }
        match self.regime {
            Regime::Known => {}
            Regime::UnknownCovariance | Regime::UnknownStatistics => {
                let n0 = self.n0.ok_or_else(|| Error::InvalidConfig {
                    what: "unknown noise regimes need n0".into(),
                })?;
                if n0 <= m {
                    return Err(Error::TooFewSamples { samples: n0, ambient_dim: m });
                }
            }
        }
        Ok(())
    }

    /// Uniform priors over the union's subspaces.
    pub fn uniform_priors(k0: usize) -> Vec<f64> {
        vec![1.0 / k0 as f64; k0]
    }

    /// Linear SNR value.
    pub fn snr_linear(&self) -> f64 {
        10.0f64.powf(self.snr_db / 10.0)
    }

    /// Derived scenario with a different SNR.
    pub fn with_snr_db(&self, snr_db: f64) -> Scenario {
        Scenario { snr_db, ..self.clone() }
    }

    /// Derived scenario with a different regime / training budget.
    pub fn with_regime(&self, regime: Regime, n0: Option<usize>) -> Scenario {
        Scenario { regime, n0, ..self.clone() }
    }

    /// Derived scenario with one subspace replaced.
    pub fn with_subspace(&self, index: usize, s: crate::geometry::Subspace) -> Result<Scenario> {
        Ok(Scenario { union: self.union.with_subspace(index, s)?, ..self.clone() })
    }

    /// Draws a class index from the priors.
    pub fn sample_class(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (k, &p) in self.class_priors.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        self.class_priors.len() - 1
    }
}

/// Draws a signal from subspace `k` at the exact requested SNR: the
/// coefficient vector is uniform on the sphere of radius
/// `sqrt(snr_linear * sigma^2)`, so `||x||^2 = snr_linear * sigma^2`
/// deterministically (the basis is orthonormal).
pub fn sample_signal(
    union: &UnionModel,
    k: usize,
    snr_db: f64,
    sigma2: f64,
    rng: &mut ChaCha8Rng,
) -> DVector<f64> {
    let n = union.subspace_dim();
    let radius = (10.0f64.powf(snr_db / 10.0) * sigma2).sqrt();
    let mut g = crate::noise::standard_normal_vector(n, rng);
    let mut norm = g.norm();
    while norm == 0.0 {
        g = crate::noise::standard_normal_vector(n, rng);
        norm = g.norm();
    }
    let theta = g * (radius / norm);
    union.subspace(k).basis() * theta
}
