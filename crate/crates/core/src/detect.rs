//! GLRT decision rules for signal and active-subspace detection.
//!
//! All three noise regimes share the same selection rule: whiten the
//! observation, project it onto each whitened subspace, and pick the
//! subspace capturing the most energy. They differ only in the
//! normalization of the decision statistic:
//!
//! - known statistics: projected energy over `2 sigma^2`;
//! - unknown covariance: projected energy over `N0 sigma^2 + ||z||^2`
//!   (empirically whitened);
//! - unknown statistics: projected energy over `||z||^2` (a ratio in
//!   `[0, 1]`, invariant to observation scale).
//!
//! One outcome type serves both the binary (signal present?) and the
//! multiple-hypothesis (which subspace?) reading: the selection rule is
//! identical, so the caller interprets the detection flag and the selected
//! index as needed.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{Subspace, UnionModel};
use crate::noise::{NoiseModel, Regime, Whitener};

/// T_z(P) = z^T P z / z^T z.
pub fn stat_quad(z: &DVector<f64>, p: &DMatrix<f64>) -> Result<f64> {
    let denom = z.dot(z);
    if denom == 0.0 {
        return Err(Error::DivisionByZero);
    }
    Ok(quad_form(z, p) / denom)
}

/// T_z^eta(P) = z^T P z / eta.
pub fn stat_quad_over_const(z: &DVector<f64>, p: &DMatrix<f64>, eta: f64) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::DomainError { what: format!("eta must be positive, got {eta}") });
    }
    Ok(quad_form(z, p) / eta)
}

/// T_z(P, Q) = z^T P z / z^T Q z.
pub fn stat_ratio(z: &DVector<f64>, p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<f64> {
    let denom = quad_form(z, q);
    if denom == 0.0 {
        return Err(Error::DivisionByZero);
    }
    Ok(quad_form(z, p) / denom)
}

/// T-bar_z^eta(P) = z^T P z / (eta + z^T z).
pub fn stat_quad_over_const_plus_norm(z: &DVector<f64>, p: &DMatrix<f64>, eta: f64) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::DomainError { what: format!("eta must be positive, got {eta}") });
    }
    Ok(quad_form(z, p) / (eta + z.dot(z)))
}

fn quad_form(z: &DVector<f64>, p: &DMatrix<f64>) -> f64 {
    (p * z).dot(z)
}

/// Union geometry combined with a whitener, ready for detection.
///
/// The projectors are built from the whitened bases `G_k = W H_k` (with W
/// either the exact `R^{-1/2}` or the empirical `Sigma^{-1/2}`), as
/// `P_k = G_k (G_k^T G_k)^{-1} G_k^T`, realized through an orthonormal
/// basis of each whitened span. The raw whitened bases are retained for
/// coefficient estimation.
#[derive(Debug, Clone)]
pub struct PreparedUnion {
    union: UnionModel,
    whitener: Whitener,
    regime: Regime,
    sigma2: Option<f64>,
    n0: Option<usize>,
    whitened_bases: Vec<DMatrix<f64>>,
    ortho_bases: Vec<Subspace>,
}

impl PreparedUnion {
    /// Whitens all bases of `model` according to `noise` and builds the
    /// per-subspace projectors.
    pub fn prepare(model: &UnionModel, noise: &NoiseModel) -> Result<Self> {
        let whitener = noise.whitener()?;
        if whitener.matrix().nrows() != model.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0} whitener", model.ambient_dim()),
                got: format!("{0}x{1}", whitener.matrix().nrows(), whitener.matrix().ncols()),
            });
        }
        let mut whitened_bases = Vec::with_capacity(model.count());
        let mut ortho_bases = Vec::with_capacity(model.count());
        for s in model.subspaces() {
            let g = whitener.whiten_matrix(s.basis())?;
            let ortho = Subspace::orthonormalize(&g)?;
            whitened_bases.push(g);
            ortho_bases.push(ortho);
        }
        Ok(PreparedUnion {
            union: model.clone(),
            regime: noise.regime(),
            sigma2: noise.sigma2(),
            n0: noise.training_count(),
            whitener,
            whitened_bases,
            ortho_bases,
        })
    }

    pub fn union(&self) -> &UnionModel {
        &self.union
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn sigma2(&self) -> Option<f64> {
        self.sigma2
    }

    pub fn training_count(&self) -> Option<usize> {
        self.n0
    }

    pub fn whitener(&self) -> &Whitener {
        &self.whitener
    }

    pub fn count(&self) -> usize {
        self.union.count()
    }

    pub fn ambient_dim(&self) -> usize {
        self.union.ambient_dim()
    }

    pub fn subspace_dim(&self) -> usize {
        self.union.subspace_dim()
    }

    /// Whitened basis `G_k` (columns generally not orthonormal).
    pub fn whitened_basis(&self, k: usize) -> &DMatrix<f64> {
        &self.whitened_bases[k]
    }

    /// Orthonormal basis of the k-th whitened subspace.
    pub fn whitened_subspace(&self, k: usize) -> &Subspace {
        &self.ortho_bases[k]
    }

    /// Projection matrix onto the k-th whitened subspace.
    pub fn projector(&self, k: usize) -> DMatrix<f64> {
        self.ortho_bases[k].projector()
    }

    /// Whitened observation `z = W y`.
    pub fn whiten(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.whitener.whiten(y)
    }

    /// Projected energies `z^T P_k z` for a whitened observation, computed
    /// as `||Q_k^T z||^2` through the orthonormal bases.
    pub fn energies(&self, z: &DVector<f64>) -> Vec<f64> {
        self.ortho_bases
            .iter()
            .map(|q| (q.basis().transpose() * z).norm_squared())
            .collect()
    }

    fn require(&self, expected: Regime) -> Result<()> {
        if self.regime != expected {
            return Err(Error::RegimeMismatch {
                expected: expected.name().into(),
                got: self.regime.name().into(),
            });
        }
        Ok(())
    }
}

/// Index of the maximal energy; exact ties resolved to the lowest index so
/// runs are reproducible.
pub fn argmax_energy(energies: &[f64]) -> usize {
    let mut best = 0usize;
    for (k, &e) in energies.iter().enumerate().skip(1) {
        if e > energies[best] {
            best = k;
        }
    }
    best
}

/// Whitened observation together with its per-subspace energies and the
/// per-subspace decision-statistic values for the prepared regime. All
/// statistics share one positive denominator, so their argmax coincides
/// with the energy argmax.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub z: DVector<f64>,
    pub energies: Vec<f64>,
    pub statistics: Vec<f64>,
}

/// Whitens `y` and evaluates every subspace's statistic under the prepared
/// regime. Fails with `DivisionByZero` in the unknown-statistics regime
/// when the observation is zero.
pub fn evaluate(prep: &PreparedUnion, y: &DVector<f64>) -> Result<Evaluation> {
    let z = prep.whiten(y)?;
    let energies = prep.energies(&z);
    let denom = match prep.regime {
        Regime::Known => 2.0 * prep.sigma2.expect("known regime carries sigma2"),
        Regime::UnknownCovariance => {
            let n0 = prep.n0.expect("unknown-cov regime carries N0") as f64;
            n0 * prep.sigma2.expect("unknown-cov regime carries sigma2") + z.dot(&z)
        }
        Regime::UnknownStatistics => {
            let d = z.dot(&z);
            if d == 0.0 {
                return Err(Error::DivisionByZero);
            }
            d
        }
    };
    let statistics = energies.iter().map(|e| e / denom).collect();
    Ok(Evaluation { z, energies, statistics })
}

impl Evaluation {
    /// Applies the threshold to the maximal statistic.
    pub fn decide(&self, threshold: f64) -> DetectionOutcome {
        let khat = argmax_energy(&self.energies);
        let statistic = self.statistics[khat];
        let signal_detected = statistic > threshold;
        DetectionOutcome {
            energies: self.energies.clone(),
            khat,
            statistic,
            threshold,
            signal_detected,
            active_subspace: signal_detected.then_some(khat),
        }
    }
}

/// Result of one detection decision.
#[derive(Debug, Clone)]
pub struct DetectionOutcome {
    /// Whitened-domain projected energies, one per subspace.
    pub energies: Vec<f64>,
    /// Selected subspace index (argmax of energies, lowest index on ties).
    pub khat: usize,
    /// Decision statistic evaluated at the selected subspace.
    pub statistic: f64,
    /// Threshold the statistic was compared against.
    pub threshold: f64,
    /// Whether the statistic exceeded the threshold.
    pub signal_detected: bool,
    /// Selected subspace when a signal was declared, `None` otherwise.
    pub active_subspace: Option<usize>,
}

/// Decision rule for known noise statistics: max projected energy over
/// `2 sigma^2` against the threshold.
pub fn glrt_known(prep: &PreparedUnion, y: &DVector<f64>, gamma_bar: f64) -> Result<DetectionOutcome> {
    prep.require(Regime::Known)?;
    Ok(evaluate(prep, y)?.decide(gamma_bar))
}

/// Decision rule for unknown covariance (known variance): max projected
/// energy over `N0 sigma^2 + ||z||^2` with the empirical whitener.
pub fn glrt_unknown_cov(prep: &PreparedUnion, y: &DVector<f64>, gamma_bar: f64) -> Result<DetectionOutcome> {
    prep.require(Regime::UnknownCovariance)?;
    Ok(evaluate(prep, y)?.decide(gamma_bar))
}

/// Decision rule for fully unknown statistics: max projected energy over
/// `||z||^2`. The statistic lies in `[0, 1]` and is invariant to scaling
/// of the observation. A zero observation has no defined ratio.
pub fn glrt_unknown_stats(prep: &PreparedUnion, y: &DVector<f64>, gamma_bar: f64) -> Result<DetectionOutcome> {
    prep.require(Regime::UnknownStatistics)?;
    Ok(evaluate(prep, y)?.decide(gamma_bar))
}

/// Dispatches to the decision rule matching the prepared regime.
pub fn glrt(prep: &PreparedUnion, y: &DVector<f64>, gamma_bar: f64) -> Result<DetectionOutcome> {
    match prep.regime {
        Regime::Known => glrt_known(prep, y, gamma_bar),
        Regime::UnknownCovariance => glrt_unknown_cov(prep, y, gamma_bar),
        Regime::UnknownStatistics => glrt_unknown_stats(prep, y, gamma_bar),
    }
}

/// Maximum-likelihood coefficient estimate of the observation in subspace
/// `k`: the least-squares solution of `G_k theta ~ z` in the whitened
/// domain, equal to `(H_k^T R^{-1} H_k)^{-1} H_k^T R^{-1} y` (or the
/// empirical analog). `H_k theta` is the oblique projection of `y`.
pub fn ml_coefficients(prep: &PreparedUnion, y: &DVector<f64>, k: usize) -> Result<DVector<f64>> {
    if k >= prep.count() {
        return Err(Error::InvalidConfig { what: format!("subspace index {k} out of range") });
    }
    let z = prep.whiten(y)?;
    let g = &prep.whitened_bases[k];
    let svd = g.clone().svd(true, true);
    svd.solve(&z, crate::geometry::RANK_TOL).map_err(|_| Error::RankDeficient {
        rank_bound: 0,
        needed: g.ncols(),
    })
}

/// Union consisting of the single direct sum of all member subspaces
/// (orthonormalized concatenation of the bases). This is the model the
/// classical subspace detector uses in place of the union.
pub fn direct_sum_model(model: &UnionModel) -> Result<UnionModel> {
    let m = model.ambient_dim();
    let total = model.count() * model.subspace_dim();
    if total > m {
        return Err(Error::InsufficientAmbientDim { ambient_dim: m, needed: total });
    }
    let mut concat = DMatrix::zeros(m, total);
    let mut col = 0;
    for s in model.subspaces() {
        for j in 0..s.dim() {
            concat.set_column(col, &s.basis().column(j));
            col += 1;
        }
    }
    let sum = Subspace::orthonormalize(&concat)?;
    UnionModel::new(vec![sum])
}

/// Classical single-subspace baseline over the direct sum: same statistic
/// family as the matching regime, but the selected-subspace notion is
/// meaningless, so `active_subspace` is always `None`.
pub fn baseline_directsum(prep: &PreparedUnion, y: &DVector<f64>, gamma_bar: f64) -> Result<DetectionOutcome> {
    if prep.count() != 1 {
        return Err(Error::InvalidConfig {
            what: "direct-sum baseline expects a single-subspace prepared union".into(),
        });
    }
    let mut outcome = glrt(prep, y, gamma_bar)?;
    outcome.active_subspace = None;
    Ok(outcome)
}
