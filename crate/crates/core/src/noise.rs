//! Colored Gaussian noise models and whitening.
//!
//! Noise is N(0, sigma^2 R) with R a full-rank covariance. Depending on how
//! much of (sigma^2, R) is known, detection either whitens with the true
//! R^{-1/2} or with the inverse square root of a sample covariance formed
//! from signal-free training snapshots. The inverse square root is computed
//! from the symmetric eigendecomposition, `Q diag(lambda)^{-1/2} Q^T`, so
//! the whitener itself is symmetric.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Symmetry tolerance for inputs to the eigendecomposition.
pub const SYM_TOL: f64 = 1e-8;

/// Relative eigenvalue cutoff below which a matrix is treated as singular.
pub const SPD_TOL: f64 = 1e-12;

/// How much is known about the noise statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// sigma^2 and R both known.
    Known,
    /// sigma^2 known, R estimated from training samples.
    UnknownCovariance,
    /// Neither sigma^2 nor R known; R estimated from training samples.
    UnknownStatistics,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Known => "known",
            Regime::UnknownCovariance => "unknown-cov",
            Regime::UnknownStatistics => "unknown-stats",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Noise knowledge available to the detector for one decision.
#[derive(Debug, Clone)]
pub enum NoiseModel {
    Known { sigma2: f64, covariance: DMatrix<f64> },
    UnknownCovariance { sigma2: f64, training_samples: DMatrix<f64> },
    UnknownStatistics { training_samples: DMatrix<f64> },
}

impl NoiseModel {
    pub fn regime(&self) -> Regime {
        match self {
            NoiseModel::Known { .. } => Regime::Known,
            NoiseModel::UnknownCovariance { .. } => Regime::UnknownCovariance,
            NoiseModel::UnknownStatistics { .. } => Regime::UnknownStatistics,
        }
    }

    pub fn sigma2(&self) -> Option<f64> {
        match self {
            NoiseModel::Known { sigma2, .. } | NoiseModel::UnknownCovariance { sigma2, .. } => {
                Some(*sigma2)
            }
            NoiseModel::UnknownStatistics { .. } => None,
        }
    }

    pub fn training_count(&self) -> Option<usize> {
        match self {
            NoiseModel::Known { .. } => None,
            NoiseModel::UnknownCovariance { training_samples, .. }
            | NoiseModel::UnknownStatistics { training_samples } => {
                Some(training_samples.ncols())
            }
        }
    }

    /// The whitener the detector will use: R^{-1/2} when R is known, the
    /// inverse square root of the sample covariance otherwise.
    pub fn whitener(&self) -> Result<Whitener> {
        match self {
            NoiseModel::Known { covariance, .. } => inverse_sqrt(covariance),
            NoiseModel::UnknownCovariance { training_samples, .. }
            | NoiseModel::UnknownStatistics { training_samples } => {
                let sigma = sample_covariance(training_samples)?;
                inverse_sqrt(&sigma)
            }
        }
    }
}

/// Symmetric inverse square root of an SPD matrix, with a fingerprint of
/// the matrix it was built from.
#[derive(Debug, Clone)]
pub struct Whitener {
    inv_sqrt: DMatrix<f64>,
    source_hash: u64,
}

impl Whitener {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.inv_sqrt
    }

    pub fn source_hash(&self) -> u64 {
        self.source_hash
    }

    /// Applies the whitener to a vector.
    pub fn whiten(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.inv_sqrt.ncols() {
            return Err(Error::DimensionMismatch {
                expected: format!("vector of length {}", self.inv_sqrt.ncols()),
                got: format!("length {}", v.len()),
            });
        }
        Ok(&self.inv_sqrt * v)
    }

    /// Applies the whitener to each column of a matrix (e.g. a basis).
    pub fn whiten_matrix(&self, mat: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if mat.nrows() != self.inv_sqrt.ncols() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} rows", self.inv_sqrt.ncols()),
                got: format!("{} rows", mat.nrows()),
            });
        }
        Ok(&self.inv_sqrt * mat)
    }
}

/// FNV-1a over the f64 bit patterns, column-major.
fn matrix_fingerprint(a: &DMatrix<f64>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in a.iter() {
        for byte in v.to_bits().to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted
/// nonincreasing (`lambda_1 >= ... >= lambda_m`), as `a = Q diag(lambda) Q^T`.
pub fn eig_sym(a: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (m, n) = a.shape();
    if m != n {
        return Err(Error::DimensionMismatch {
            expected: "square matrix".into(),
            got: format!("{m}x{n}"),
        });
    }
    let max_asymmetry = (a - a.transpose()).amax();
    if max_asymmetry > SYM_TOL {
        return Err(Error::NotSymmetric { max_asymmetry });
    }
    // Work on the symmetrized matrix so tiny asymmetries cannot leak through.
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .expect("eigenvalues are finite")
    });
    let values = DVector::from_fn(m, |i, _| eig.eigenvalues[order[i]]);
    let mut vectors = DMatrix::zeros(m, m);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

fn spd_eig(a: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (values, vectors) = eig_sym(a)?;
    let max_eig = values[0];
    let min_eig = values[values.len() - 1];
    if !(max_eig > 0.0) || min_eig <= SPD_TOL * max_eig {
        return Err(Error::NotPositiveDefinite { min_eig, max_eig });
    }
    Ok((values, vectors))
}

/// Symmetric inverse square root `Q diag(lambda)^{-1/2} Q^T` of an SPD
/// matrix.
pub fn inverse_sqrt(a: &DMatrix<f64>) -> Result<Whitener> {
    let (values, vectors) = spd_eig(a)?;
    let scaled = scale_columns(&vectors, &values.map(|l| l.sqrt().recip()));
    let w = &scaled * vectors.transpose();
    // Enforce exact symmetry; the product is symmetric up to rounding.
    let inv_sqrt = (&w + w.transpose()) * 0.5;
    Ok(Whitener { inv_sqrt, source_hash: matrix_fingerprint(a) })
}

/// Symmetric square root `Q diag(lambda)^{1/2} Q^T` of an SPD matrix.
pub fn sqrt_spd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (values, vectors) = spd_eig(a)?;
    let scaled = scale_columns(&vectors, &values.map(|l| l.sqrt()));
    let s = &scaled * vectors.transpose();
    Ok((&s + s.transpose()) * 0.5)
}

fn scale_columns(q: &DMatrix<f64>, scale: &DVector<f64>) -> DMatrix<f64> {
    let mut out = q.clone();
    for j in 0..out.ncols() {
        let s = scale[j];
        for i in 0..out.nrows() {
            out[(i, j)] *= s;
        }
    }
    out
}

/// Sample covariance `(1/N0) Xi Xi^T` of training snapshots stored as
/// columns. Requires strictly more samples than the ambient dimension so
/// the estimate is non-singular with probability one.
pub fn sample_covariance(training_samples: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (m, n0) = training_samples.shape();
    if n0 <= m {
        return Err(Error::TooFewSamples { samples: n0, ambient_dim: m });
    }
    Ok(training_samples * training_samples.transpose() / n0 as f64)
}

/// Ground-truth noise distribution used by simulations.
#[derive(Debug, Clone)]
pub struct NoiseTruth {
    sigma2: f64,
    covariance: DMatrix<f64>,
    sqrt_cov: DMatrix<f64>,
}

impl NoiseTruth {
    pub fn new(sigma2: f64, covariance: DMatrix<f64>) -> Result<Self> {
        if !(sigma2 >= 0.0) {
            return Err(Error::InvalidConfig { what: "sigma2 must be nonnegative".into() });
        }
        let sqrt_cov = sqrt_spd(&covariance)?;
        Ok(NoiseTruth { sigma2, covariance, sqrt_cov })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn ambient_dim(&self) -> usize {
        self.covariance.nrows()
    }

    /// One draw of N(0, sigma^2 R) via `sigma R^{1/2} g`.
    pub fn sample_noise(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let g = standard_normal_vector(self.ambient_dim(), rng);
        (&self.sqrt_cov * g) * self.sigma2.sqrt()
    }

    /// N0 training snapshots of N(0, R), as columns.
    pub fn sample_training(&self, n0: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = self.ambient_dim();
        let g = DMatrix::from_fn(m, n0, |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.sqrt_cov * g
    }

    /// The exact whitener R^{-1/2} for the true covariance.
    pub fn exact_whitener(&self) -> Result<Whitener> {
        inverse_sqrt(&self.covariance)
    }
}

/// One draw of N(0, sigma^2 R).
pub fn sample_noise(sigma2: f64, covariance: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> Result<DVector<f64>> {
    Ok(NoiseTruth::new(sigma2, covariance.clone())?.sample_noise(rng))
}

pub fn standard_normal_vector(m: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Random orthogonal matrix: QR of a Gaussian matrix with the R diagonal
/// forced positive so the factor is unique.
pub fn random_orthogonal(m: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..m {
        if r[(j, j)] < 0.0 {
            for i in 0..m {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Random SPD covariance `Q diag(lambda) Q^T` with a random orthogonal Q and
/// eigenvalues log-uniformly spaced on `[1, condition_target]`.
pub fn random_spd_covariance(m: usize, condition_target: f64, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
    if m == 0 {
        return Err(Error::InvalidConfig { what: "m must be positive".into() });
    }
    if !(condition_target >= 1.0) {
        return Err(Error::InvalidConfig { what: "condition_target must be >= 1".into() });
    }
    let q = random_orthogonal(m, rng);
    let lambda = DVector::from_fn(m, |i, _| {
        if m == 1 {
            1.0
        } else {
            condition_target.powf(i as f64 / (m - 1) as f64)
        }
    });
    let scaled = scale_columns(&q, &lambda);
    let a = &scaled * q.transpose();
    Ok((&a + a.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{rng, rand_matrix};

    #[test]
    fn eig_sym_identity_and_diag() {
        let (vals, _) = eig_sym(&DMatrix::identity(3, 3)).unwrap();
        assert!(vals.iter().all(|&l| (l - 1.0).abs() < 1e-14));

        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 4.0]));
        let (vals, vecs) = eig_sym(&d).unwrap();
        assert!((vals[0] - 4.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        // eigenvectors are +/- the axes, swapped to match the sorted values
        assert!((vecs[(1, 0)].abs() - 1.0).abs() < 1e-12);
        assert!((vecs[(0, 1)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eig_sym_reconstructs_random_spd() {
        let mut r = rng(31);
        for _ in 0..10 {
            let g = rand_matrix(&mut r, 5, 5);
            let a = &g * g.transpose() + DMatrix::identity(5, 5) * 0.1;
            let (vals, vecs) = eig_sym(&a).unwrap();
            let rebuilt = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
            assert!((rebuilt - &a).amax() < 1e-8 * a.amax());
            for w in vals.as_slice().windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn eig_sym_rejects_asymmetric() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        match eig_sym(&a) {
            Err(Error::NotSymmetric { .. }) => {}
            other => panic!("expected NotSymmetric, got {other:?}"),
        }
    }

    #[test]
    fn inverse_sqrt_simple_cases() {
        let w = inverse_sqrt(&DMatrix::identity(3, 3)).unwrap();
        assert!((w.matrix() - DMatrix::identity(3, 3)).amax() < 1e-14);

        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&[4.0, 9.0]));
        let w = inverse_sqrt(&d).unwrap();
        let expected =
            DMatrix::from_diagonal(&DVector::from_column_slice(&[0.5, 1.0 / 3.0]));
        assert!((w.matrix() - expected).amax() < 1e-14);
    }

    #[test]
    fn inverse_sqrt_residual_random_spd() {
        let mut r = rng(37);
        for _ in 0..10 {
            let g = rand_matrix(&mut r, 6, 6);
            let a = &g * g.transpose() + DMatrix::identity(6, 6) * 0.05;
            let w = inverse_sqrt(&a).unwrap();
            let residual = w.matrix() * &a * w.matrix() - DMatrix::identity(6, 6);
            assert!(residual.amax() < 1e-8, "residual {:e}", residual.amax());
            assert!((w.matrix() - w.matrix().transpose()).amax() < 1e-10);
        }
    }

    #[test]
    fn inverse_sqrt_handles_wide_conditioning() {
        let mut r = rng(41);
        let cov = random_spd_covariance(5, 1e6, &mut r).unwrap();
        let w = inverse_sqrt(&cov).unwrap();
        let residual = w.matrix() * &cov * w.matrix() - DMatrix::identity(5, 5);
        assert!(residual.amax() < 1e-8, "residual {:e}", residual.amax());
    }

    #[test]
    fn inverse_sqrt_rejects_indefinite() {
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, -1.0]));
        match inverse_sqrt(&d) {
            Err(Error::NotPositiveDefinite { .. }) => {}
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
        // Zero matrix: downstream of all-zero training samples.
        match inverse_sqrt(&DMatrix::zeros(3, 3)) {
            Err(Error::NotPositiveDefinite { .. }) => {}
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn sample_covariance_counts_and_zero() {
        let zeros = DMatrix::zeros(3, 5);
        let s = sample_covariance(&zeros).unwrap();
        assert!(s.amax() == 0.0);

        let square = DMatrix::identity(4, 4);
        match sample_covariance(&square) {
            Err(Error::TooFewSamples { samples: 4, ambient_dim: 4 }) => {}
            other => panic!("expected TooFewSamples, got {other:?}"),
        }
    }

    #[test]
    fn sample_covariance_converges() {
        // 1e5 samples from N(0, diag(2, 1)): entrywise within 5% of truth
        // (absolute tolerance scaled by the largest entry).
        let truth = DMatrix::from_diagonal(&DVector::from_column_slice(&[2.0, 1.0]));
        let noise = NoiseTruth::new(1.0, truth.clone()).unwrap();
        let mut r = rng(43);
        let xi = noise.sample_training(100_000, &mut r);
        let s = sample_covariance(&xi).unwrap();
        assert!((s - &truth).amax() < 0.05 * truth.amax());
    }

    #[test]
    fn whiten_identity_and_diag() {
        let w = inverse_sqrt(&DMatrix::identity(2, 2)).unwrap();
        let v = DVector::from_column_slice(&[3.0, -1.0]);
        assert!((w.whiten(&v).unwrap() - &v).amax() < 1e-14);

        let w4 = inverse_sqrt(&DMatrix::from_diagonal(&DVector::from_column_slice(&[4.0]))).unwrap();
        let out = w4.whiten(&DVector::from_column_slice(&[2.0])).unwrap();
        assert!((out[0] - 1.0).abs() < 1e-14);

        match w4.whiten(&DVector::from_column_slice(&[1.0, 2.0])) {
            Err(Error::DimensionMismatch { .. }) => {}
            other => panic!("expected DimensionMismatch, got {other:?}"),
        }
    }

    #[test]
    fn whitened_noise_has_identity_covariance() {
        let mut r = rng(47);
        let cov = random_spd_covariance(3, 50.0, &mut r).unwrap();
        let noise = NoiseTruth::new(1.0, cov.clone()).unwrap();
        let w = noise.exact_whitener().unwrap();

        // Analytic: W (sigma^2 R) W = sigma^2 I.
        let analytic = w.matrix() * &cov * w.matrix();
        assert!((analytic - DMatrix::identity(3, 3)).amax() < 1e-8);

        // Monte Carlo: sample covariance of 1e5 whitened draws near identity.
        let n = 100_000;
        let mut acc = DMatrix::zeros(3, 3);
        for _ in 0..n {
            let z = w.whiten(&noise.sample_noise(&mut r)).unwrap();
            acc += &z * z.transpose();
        }
        acc /= n as f64;
        assert!((acc - DMatrix::identity(3, 3)).amax() < 0.05);
    }

    #[test]
    fn sample_noise_reproducible_and_scaled() {
        let cov = DMatrix::identity(3, 3);
        let a = sample_noise(1.0, &cov, &mut rng(5)).unwrap();
        let b = sample_noise(1.0, &cov, &mut rng(5)).unwrap();
        assert_eq!(a, b);

        let zero = sample_noise(0.0, &cov, &mut rng(5)).unwrap();
        assert!(zero.amax() == 0.0);
    }

    #[test]
    fn sample_noise_covariance_matches_truth() {
        let mut r = rng(53);
        let cov = random_spd_covariance(3, 8.0, &mut r).unwrap();
        let sigma2 = 2.5;
        let noise = NoiseTruth::new(sigma2, cov.clone()).unwrap();
        let n = 100_000;
        let mut acc = DMatrix::zeros(3, 3);
        for _ in 0..n {
            let v = noise.sample_noise(&mut r);
            acc += &v * v.transpose();
        }
        acc /= n as f64;
        let truth = cov * sigma2;
        assert!((acc - &truth).amax() < 0.05 * truth.amax());
    }

    #[test]
    fn random_spd_spectrum_by_construction() {
        let mut r = rng(59);
        let a = random_spd_covariance(4, 1.0, &mut r).unwrap();
        let (vals, _) = eig_sym(&a).unwrap();
        assert!(vals.iter().all(|&l| (l - 1.0).abs() < 1e-10));

        let b = random_spd_covariance(5, 123.0, &mut r).unwrap();
        let (vals, _) = eig_sym(&b).unwrap();
        let ratio = vals[0] / vals[4];
        assert!((ratio - 123.0).abs() < 1e-8 * 123.0, "ratio {ratio}");
        assert!(inverse_sqrt(&b).is_ok());
    }

    #[test]
    fn covariance_estimate_improves_with_samples() {
        // Frobenius error vs truth decreases on average over 20 seeds as
        // N0 grows through {8, 50, 200, 1e5}.
        let m = 4;
        let schedule = [8usize, 50, 200, 100_000];
        let mut mean_err = [0.0f64; 4];
        for seed in 0..20u64 {
            let mut r = rng(1000 + seed);
            let cov = random_spd_covariance(m, 10.0, &mut r).unwrap();
            let noise = NoiseTruth::new(1.0, cov.clone()).unwrap();
            for (i, &n0) in schedule.iter().enumerate() {
                let xi = noise.sample_training(n0, &mut r);
                let s = sample_covariance(&xi).unwrap();
                mean_err[i] += (s - &cov).norm() / 20.0;
            }
        }
        for w in mean_err.windows(2) {
            assert!(w[1] < w[0], "errors not decreasing: {mean_err:?}");
        }
    }

    #[test]
    fn whitener_fingerprint_tracks_source() {
        let a = DMatrix::identity(3, 3);
        let b = DMatrix::identity(3, 3) * 2.0;
        let wa = inverse_sqrt(&a).unwrap();
        let wb = inverse_sqrt(&b).unwrap();
        assert_ne!(wa.source_hash(), wb.source_hash());
        assert_eq!(wa.source_hash(), inverse_sqrt(&a).unwrap().source_hash());
    }
}
