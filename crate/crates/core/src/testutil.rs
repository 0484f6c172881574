//! Deterministic helpers shared by unit and integration tests.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::mc::child_rng;

/// Seeded generator for tests.
pub fn rng(seed: u64) -> ChaCha8Rng {
    child_rng(seed, 0, 0)
}

/// Matrix with i.i.d. standard normal entries.
pub fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Random orthogonal matrix from the QR of a Gaussian matrix, with the sign
/// convention that makes the factorization unique (positive R diagonal).
pub fn rand_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    crate::noise::random_orthogonal(n, rng)
}
