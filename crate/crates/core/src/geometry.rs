//! Subspace representation and geometry.
//!
//! Provides orthonormal bases for linear subspaces of R^m, projection
//! matrices, principal angles between subspaces (computed from the SVD of
//! the cross-Gramian), controlled-angle subspace construction for
//! experiments, and SVD-based basis learning from labeled samples.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value cutoff used for all rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Orthonormality tolerance for validating bases supplied as-is.
pub const ORTHO_TOL: f64 = 1e-10;

/// A linear subspace of R^m stored as an m x n matrix with orthonormal
/// columns. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Wraps a matrix whose columns are already orthonormal.
    ///
    /// Fails with `NotOrthogonal` if `basis^T basis` deviates from the
    /// identity by more than `ORTHO_TOL` in max norm.
    pub fn from_orthonormal(basis: DMatrix<f64>) -> Result<Self> {
        let (m, n) = basis.shape();
        if n == 0 || m < n {
            return Err(Error::DimensionMismatch {
                expected: "m >= n >= 1".into(),
                got: format!("{m}x{n}"),
            });
        }
        let gram = basis.transpose() * &basis;
        let max_violation = max_abs_diff_from_identity(&gram);
        if max_violation > ORTHO_TOL {
            return Err(Error::NotOrthogonal { max_violation });
        }
        Ok(Subspace { basis })
    }

    /// Canonical orthonormal basis for the column space of `raw_basis`.
    ///
    /// Uses a thin SVD; column signs are fixed so the largest-magnitude
    /// entry of each basis vector is positive, making the result
    /// deterministic and reproducible.
    pub fn orthonormalize(raw_basis: &DMatrix<f64>) -> Result<Self> {
        let (m, n) = raw_basis.shape();
        if n == 0 || m < n {
            return Err(Error::DimensionMismatch {
                expected: "m >= n >= 1".into(),
                got: format!("{m}x{n}"),
            });
        }
        let svd = raw_basis.clone().svd(true, false);
        let sv = &svd.singular_values;
        let smax = sv.max();
        let rank = sv.iter().filter(|&&s| s > RANK_TOL * smax).count();
        if rank < n {
            return Err(Error::RankDeficient { rank_bound: rank, needed: n });
        }
        let mut u = svd.u.expect("svd requested with u").columns(0, n).into_owned();
        fix_column_signs(&mut u);
        Ok(Subspace { basis: u })
    }

    /// The orthonormal basis matrix (m x n).
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Ambient dimension m.
    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Subspace dimension n.
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Projection matrix onto the subspace: P = B B^T (symmetric,
    /// idempotent, trace n for an orthonormal basis).
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// Projection onto the orthogonal complement: I - P.
    pub fn complement_projector(&self) -> DMatrix<f64> {
        let m = self.ambient_dim();
        DMatrix::identity(m, m) - self.projector()
    }
}

/// Flips each column so its largest-magnitude entry is positive.
/// Ties resolved by the lowest row index (the first maximal entry).
fn fix_column_signs(mat: &mut DMatrix<f64>) {
    for j in 0..mat.ncols() {
        let mut best = 0usize;
        let mut best_abs = 0.0f64;
        for i in 0..mat.nrows() {
            let a = mat[(i, j)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if mat[(best, j)] < 0.0 {
            for i in 0..mat.nrows() {
                mat[(i, j)] = -mat[(i, j)];
            }
        }
    }
}

fn max_abs_diff_from_identity(gram: &DMatrix<f64>) -> f64 {
    let n = gram.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

/// Principal angles between two subspaces together with the associated
/// principal vector pairs. Angles are nondecreasing in `[0, pi/2]`.
#[derive(Debug, Clone)]
pub struct PrincipalAngleSet {
    /// Angles in radians, sorted nondecreasing.
    pub angles: Vec<f64>,
    /// Principal vectors in the first subspace, one column per angle.
    pub left_vectors: DMatrix<f64>,
    /// Principal vectors in the second subspace, one column per angle.
    pub right_vectors: DMatrix<f64>,
}

impl PrincipalAngleSet {
    /// Smallest principal angle.
    pub fn min_angle(&self) -> f64 {
        self.angles[0]
    }

    /// Sum of all principal angles.
    pub fn sum(&self) -> f64 {
        self.angles.iter().sum()
    }
}

/// Principal angles between `a` and `b` via the SVD of `A^T B`.
///
/// The singular values of the cross-Gramian are the cosines of the angles.
/// Angles below pi/4 are recomputed from the sine route (the SVD of
/// `B - A (A^T B)`), which keeps small angles accurate where `acos` near 1
/// would lose half the precision. When the subspaces have different
/// dimensions the result has `min(dim_a, dim_b)` angles.
pub fn principal_angles(a: &Subspace, b: &Subspace) -> Result<PrincipalAngleSet> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("ambient dim {}", a.ambient_dim()),
            got: format!("ambient dim {}", b.ambient_dim()),
        });
    }
    let cross = a.basis().transpose() * b.basis();
    let svd = cross.clone().svd(true, true);
    let count = svd.singular_values.len();
    // Cosines come out nonincreasing, so acos is nondecreasing.
    let mut angles: Vec<f64> = svd
        .singular_values
        .iter()
        .map(|&s| s.clamp(0.0, 1.0).acos())
        .collect();

    if angles.iter().any(|&x| x < std::f64::consts::FRAC_PI_4) {
        // Sine route: singular values of the residual of B against A are
        // the sines, nondecreasing once sorted ascending; the smallest
        // `count` of them pair with the angles in ascending order.
        let residual = b.basis() - a.basis() * &cross;
        let res_svd = residual.svd(false, false);
        let mut sines: Vec<f64> = res_svd.singular_values.iter().copied().collect();
        sines.sort_by(|x, y| x.partial_cmp(y).expect("finite singular values"));
        for (i, angle) in angles.iter_mut().enumerate() {
            if *angle < std::f64::consts::FRAC_PI_4 && i < sines.len() {
                *angle = sines[i].clamp(0.0, 1.0).asin();
            }
        }
    }

    let u = svd.u.expect("svd with u");
    let vt = svd.v_t.expect("svd with v_t");
    let left = a.basis() * u.columns(0, count).into_owned();
    let right = b.basis() * vt.transpose().columns(0, count).into_owned();
    Ok(PrincipalAngleSet { angles, left_vectors: left, right_vectors: right })
}

/// A union of `K0` subspaces of common dimension in a common ambient space.
#[derive(Debug, Clone)]
pub struct UnionModel {
    subspaces: Vec<Subspace>,
}

impl UnionModel {
    /// Builds a union, checking that all members share ambient and subspace
    /// dimensions.
    pub fn new(subspaces: Vec<Subspace>) -> Result<Self> {
        let first = subspaces.first().ok_or_else(|| Error::InvalidConfig {
            what: "union must contain at least one subspace".into(),
        })?;
        let (m, n) = (first.ambient_dim(), first.dim());
        for (k, s) in subspaces.iter().enumerate() {
            if s.ambient_dim() != m || s.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: format!("{m}x{n}"),
                    got: format!("subspace {k}: {}x{}", s.ambient_dim(), s.dim()),
                });
            }
        }
        Ok(UnionModel { subspaces })
    }

    pub fn subspaces(&self) -> &[Subspace] {
        &self.subspaces
    }

    pub fn subspace(&self, k: usize) -> &Subspace {
        &self.subspaces[k]
    }

    /// Number of subspaces K0.
    pub fn count(&self) -> usize {
        self.subspaces.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.subspaces[0].ambient_dim()
    }

    pub fn subspace_dim(&self) -> usize {
        self.subspaces[0].dim()
    }

    /// Replaces subspace `k`, keeping the rest.
    pub fn with_subspace(&self, k: usize, s: Subspace) -> Result<Self> {
        let mut subspaces = self.subspaces.clone();
        subspaces[k] = s;
        UnionModel::new(subspaces)
    }

    /// Diagnostic for effectively duplicated members: returns every pair
    /// whose principal angles are all below `1e-8`. Such pairs make the
    /// active-subspace problem ill-posed but are not rejected structurally.
    pub fn near_duplicate_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for i in 0..self.count() {
            for j in (i + 1)..self.count() {
                let pa = principal_angles(&self.subspaces[i], &self.subspaces[j])
                    .expect("same ambient dim by construction");
                if pa.angles.iter().all(|&a| a < 1e-8) {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }
}

/// Builds a subspace at prescribed principal angles from `base`.
///
/// Column `i` of the result is `cos(phi_i) * base_i + sin(phi_i) * comp_i`,
/// where the `comp_i` are caller-supplied orthonormal directions orthogonal
/// to `base`. Supplying the directions explicitly (rather than drawing them
/// internally) keeps sweep experiments exactly reproducible under a seed.
pub fn rotated_subspace(
    base: &Subspace,
    target_angles: &[f64],
    complement_directions: &DMatrix<f64>,
) -> Result<Subspace> {
    let m = base.ambient_dim();
    let n = base.dim();
    if m < 2 * n {
        return Err(Error::InsufficientAmbientDim { ambient_dim: m, needed: 2 * n });
    }
    if target_angles.len() != n || complement_directions.shape() != (m, n) {
        return Err(Error::DimensionMismatch {
            expected: format!("{n} angles and {m}x{n} directions"),
            got: format!(
                "{} angles and {}x{} directions",
                target_angles.len(),
                complement_directions.nrows(),
                complement_directions.ncols()
            ),
        });
    }
    if target_angles.iter().any(|&a| !(0.0..=std::f64::consts::FRAC_PI_2 + 1e-12).contains(&a)) {
        return Err(Error::InvalidConfig { what: "target angles must lie in [0, pi/2]".into() });
    }
    let comp_gram = complement_directions.transpose() * complement_directions;
    let comp_violation = max_abs_diff_from_identity(&comp_gram);
    let cross = base.basis().transpose() * complement_directions;
    let cross_violation = cross.amax();
    let max_violation = comp_violation.max(cross_violation);
    if max_violation > ORTHO_TOL {
        return Err(Error::NotOrthogonal { max_violation });
    }
    let mut cols = DMatrix::zeros(m, n);
    for i in 0..n {
        let (c, s) = (target_angles[i].cos(), target_angles[i].sin());
        let col = base.basis().column(i) * c + complement_directions.column(i) * s;
        cols.set_column(i, &col);
    }
    // Columns are orthonormal by construction; keep them as-is so the
    // column-to-angle pairing survives.
    Subspace::from_orthonormal(cols)
}

/// Learns a basis from samples: the span of the top-`dim` left singular
/// vectors of the m x p sample matrix (columns are samples).
pub fn learn_basis_svd(samples: &DMatrix<f64>, dim: usize) -> Result<Subspace> {
    let (m, p) = samples.shape();
    if dim == 0 || dim > m {
        return Err(Error::InvalidConfig { what: format!("dim {dim} out of range for ambient {m}") });
    }
    if p < dim {
        return Err(Error::RankDeficient { rank_bound: p, needed: dim });
    }
    let svd = samples.clone().svd(true, false);
    let sv = &svd.singular_values;
    let smax = sv.max();
    if smax <= 0.0 {
        return Err(Error::RankDeficient { rank_bound: 0, needed: dim });
    }
    let rank = sv.iter().filter(|&&s| s > RANK_TOL * smax).count();
    if rank < dim {
        return Err(Error::RankDeficient { rank_bound: rank, needed: dim });
    }
    let mut u = svd.u.expect("svd with u").columns(0, dim).into_owned();
    fix_column_signs(&mut u);
    Subspace::from_orthonormal(u)
}

/// Convenience: basis from coordinate axes `e_{i}` for each index.
pub fn axis_subspace(m: usize, axes: &[usize]) -> Subspace {
    let mut basis = DMatrix::zeros(m, axes.len());
    for (j, &i) in axes.iter().enumerate() {
        basis[(i, j)] = 1.0;
    }
    Subspace::from_orthonormal(basis).expect("axis vectors are orthonormal")
}

/// Span of a single vector (normalized).
pub fn span_of_vector(v: &DVector<f64>) -> Result<Subspace> {
    let norm = v.norm();
    if norm <= 0.0 {
        return Err(Error::RankDeficient { rank_bound: 0, needed: 1 });
    }
    let basis = DMatrix::from_column_slice(v.len(), 1, v.as_slice()) / norm;
    Subspace::from_orthonormal(basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{rng, rand_matrix, rand_orthogonal};

    fn e(m: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(m);
        v[i] = 1.0;
        v
    }

    #[test]
    fn orthonormalize_spans_same_space() {
        // columns {e1, e1+e2} in R^3 span the same plane as {e1, e2}
        let raw = DMatrix::from_columns(&[e(3, 0), e(3, 0) + e(3, 1)]);
        let s = Subspace::orthonormalize(&raw).unwrap();
        let target = axis_subspace(3, &[0, 1]);
        let pa = principal_angles(&s, &target).unwrap();
        assert!(pa.angles.iter().all(|&a| a < 1e-10), "angles {:?}", pa.angles);
        let gram = s.basis().transpose() * s.basis();
        assert!(max_abs_diff_from_identity(&gram) < 1e-12);
    }

    #[test]
    fn orthonormalize_identity_case() {
        let q = rand_orthogonal(&mut rng(7), 5);
        let input = q.columns(0, 3).into_owned();
        let s = Subspace::orthonormalize(&input).unwrap();
        let inp = Subspace::from_orthonormal(input).unwrap();
        let pa = principal_angles(&s, &inp).unwrap();
        assert!(pa.angles.iter().all(|&a| a < 1e-10));
        let gram = s.basis().transpose() * s.basis();
        assert!(max_abs_diff_from_identity(&gram) < 1e-12);
    }

    #[test]
    fn orthonormalize_rejects_dependent_columns() {
        let raw = DMatrix::from_columns(&[e(3, 0), 2.0 * e(3, 0)]);
        match Subspace::orthonormalize(&raw) {
            Err(Error::RankDeficient { .. }) => {}
            other => panic!("expected RankDeficient, got {other:?}"),
        }
    }

    #[test]
    fn projector_of_axis_span() {
        let s = axis_subspace(2, &[0]);
        let p = s.projector();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!((p - expected).amax() < 1e-15);
        let c = s.complement_projector();
        let expected_c = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        assert!((c - expected_c).amax() < 1e-15);
    }

    #[test]
    fn projector_identities_hold_for_random_subspaces() {
        let mut r = rng(11);
        for _ in 0..20 {
            let raw = rand_matrix(&mut r, 6, 3);
            let s = Subspace::orthonormalize(&raw).unwrap();
            let p = s.projector();
            assert!((&p * &p - &p).amax() < 1e-10, "idempotent");
            assert!((&p - p.transpose()).amax() < 1e-12, "symmetric");
            assert!((p.trace() - 3.0).abs() < 1e-10, "trace = n");
            let c = s.complement_projector();
            assert!((&p + &c - DMatrix::identity(6, 6)).amax() < 1e-12);
            assert!((c.trace() - 3.0).abs() < 1e-10, "trace = m - n");
        }
    }

    #[test]
    fn projector_acts_as_identity_on_span_and_zero_on_complement() {
        let mut r = rng(13);
        let raw = rand_matrix(&mut r, 4, 2);
        let s = Subspace::orthonormalize(&raw).unwrap();
        let p = s.projector();
        // v in the span, w in the orthogonal complement (from the
        // complement projector applied to a random vector).
        let coeff = DVector::from_column_slice(&[0.3, -1.7]);
        let v = s.basis() * coeff;
        assert!((&p * &v - &v).norm() < 1e-10);
        let g = DVector::from_fn(4, |i, _| (i as f64 + 1.0).sin());
        let w = s.complement_projector() * g;
        assert!((&p * &w).norm() < 1e-10);
    }

    #[test]
    fn principal_angles_identical_and_orthogonal() {
        let a = axis_subspace(4, &[0, 1]);
        let pa = principal_angles(&a, &a).unwrap();
        assert!(pa.angles.iter().all(|&x| x.abs() < 1e-12));
        let b = axis_subspace(4, &[2, 3]);
        let pb = principal_angles(&a, &b).unwrap();
        for &x in &pb.angles {
            assert!((x - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        }
    }

    #[test]
    fn principal_angle_of_plane_rotation() {
        let a = axis_subspace(3, &[0]);
        let v = DVector::from_column_slice(&[0.3f64.cos(), 0.3f64.sin(), 0.0]);
        let b = span_of_vector(&v).unwrap();
        let pa = principal_angles(&a, &b).unwrap();
        assert_eq!(pa.angles.len(), 1);
        assert!((pa.angles[0] - 0.3).abs() < 1e-10);
    }

    #[test]
    fn principal_angles_symmetric_and_rotation_invariant() {
        let mut r = rng(17);
        for _ in 0..10 {
            let a = Subspace::orthonormalize(&rand_matrix(&mut r, 6, 2)).unwrap();
            let b = Subspace::orthonormalize(&rand_matrix(&mut r, 6, 2)).unwrap();
            let ab = principal_angles(&a, &b).unwrap();
            let ba = principal_angles(&b, &a).unwrap();
            for (x, y) in ab.angles.iter().zip(ba.angles.iter()) {
                assert!((x - y).abs() < 1e-10, "symmetry");
            }
            let q = rand_orthogonal(&mut r, 6);
            let qa = Subspace::from_orthonormal(&q * a.basis()).unwrap();
            let qb = Subspace::from_orthonormal(&q * b.basis()).unwrap();
            let rot = principal_angles(&qa, &qb).unwrap();
            for (x, y) in ab.angles.iter().zip(rot.angles.iter()) {
                assert!((x - y).abs() < 1e-8, "rotation invariance");
            }
        }
    }

    #[test]
    fn principal_vectors_match_cosines() {
        let mut r = rng(19);
        let a = Subspace::orthonormalize(&rand_matrix(&mut r, 5, 2)).unwrap();
        let b = Subspace::orthonormalize(&rand_matrix(&mut r, 5, 2)).unwrap();
        let pa = principal_angles(&a, &b).unwrap();
        for i in 0..pa.angles.len() {
            let u = pa.left_vectors.column(i);
            let v = pa.right_vectors.column(i);
            assert!((u.dot(&v) - pa.angles[i].cos()).abs() < 1e-8);
        }
        // sorted nondecreasing
        for w in pa.angles.windows(2) {
            assert!(w[0] <= w[1] + 1e-10);
        }
    }

    #[test]
    fn rotated_subspace_roundtrips_angles() {
        let base = axis_subspace(4, &[0, 1]);
        let comp = axis_subspace(4, &[2, 3]).basis().clone();

        let s0 = rotated_subspace(&base, &[0.0, 0.0], &comp).unwrap();
        let pa0 = principal_angles(&base, &s0).unwrap();
        assert!(pa0.angles.iter().all(|&a| a < 1e-10));

        let half_pi = std::f64::consts::FRAC_PI_2;
        let s90 = rotated_subspace(&base, &[half_pi, half_pi], &comp).unwrap();
        let pa90 = principal_angles(&base, &s90).unwrap();
        assert!(pa90.angles.iter().all(|&a| (a - half_pi).abs() < 1e-10));

        let s = rotated_subspace(&base, &[0.2, 0.5], &comp).unwrap();
        let pa = principal_angles(&base, &s).unwrap();
        assert!((pa.angles[0] - 0.2).abs() < 1e-8, "got {:?}", pa.angles);
        assert!((pa.angles[1] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn rotated_subspace_random_direction_roundtrip() {
        let mut r = rng(23);
        for _ in 0..10 {
            let q = rand_orthogonal(&mut r, 6);
            let base = Subspace::from_orthonormal(q.columns(0, 2).into_owned()).unwrap();
            let comp = q.columns(2, 2).into_owned();
            let want = [0.15, 0.9];
            let s = rotated_subspace(&base, &want, &comp).unwrap();
            let pa = principal_angles(&base, &s).unwrap();
            assert!((pa.angles[0] - want[0]).abs() < 1e-8);
            assert!((pa.angles[1] - want[1]).abs() < 1e-8);
        }
    }

    #[test]
    fn rotated_subspace_rejects_bad_inputs() {
        let base = axis_subspace(4, &[0, 1]);
        // complement not orthogonal to base
        let bad = DMatrix::from_columns(&[e(4, 0), e(4, 3)]);
        match rotated_subspace(&base, &[0.1, 0.2], &bad) {
            Err(Error::NotOrthogonal { .. }) => {}
            other => panic!("expected NotOrthogonal, got {other:?}"),
        }
        // ambient too small
        let small = axis_subspace(3, &[0, 1]);
        let comp3 = DMatrix::from_columns(&[e(3, 2), e(3, 2)]);
        match rotated_subspace(&small, &[0.1, 0.2], &comp3) {
            Err(Error::InsufficientAmbientDim { .. }) => {}
            other => panic!("expected InsufficientAmbientDim, got {other:?}"),
        }
    }

    #[test]
    fn learn_basis_recovers_noiseless_subspace() {
        let mut r = rng(29);
        let truth = Subspace::orthonormalize(&rand_matrix(&mut r, 10, 2)).unwrap();
        let coeffs = rand_matrix(&mut r, 2, 20);
        let samples = truth.basis() * coeffs;
        let learned = learn_basis_svd(&samples, 2).unwrap();
        let pa = principal_angles(&learned, &truth).unwrap();
        assert!(pa.angles.iter().all(|&a| a < 1e-8), "angles {:?}", pa.angles);
    }

    #[test]
    fn learn_basis_exact_on_orthonormal_input() {
        let truth = axis_subspace(5, &[1, 3]);
        let learned = learn_basis_svd(truth.basis(), 2).unwrap();
        let pa = principal_angles(&learned, &truth).unwrap();
        assert!(pa.angles.iter().all(|&a| a < 1e-12));
    }

    #[test]
    fn learn_basis_too_few_samples() {
        let samples = DMatrix::from_column_slice(4, 1, &[1.0, 0.0, 0.0, 0.0]);
        match learn_basis_svd(&samples, 2) {
            Err(Error::RankDeficient { .. }) => {}
            other => panic!("expected RankDeficient, got {other:?}"),
        }
    }

    #[test]
    fn union_model_flags_duplicates() {
        let s1 = axis_subspace(4, &[0, 1]);
        let s2 = axis_subspace(4, &[0, 1]);
        let s3 = axis_subspace(4, &[2, 3]);
        let union = UnionModel::new(vec![s1, s2, s3]).unwrap();
        assert_eq!(union.near_duplicate_pairs(), vec![(0, 1)]);
    }

    #[test]
    fn union_model_rejects_mixed_dims() {
        let s1 = axis_subspace(4, &[0, 1]);
        let s2 = axis_subspace(4, &[2]);
        match UnionModel::new(vec![s1, s2]) {
            Err(Error::DimensionMismatch { .. }) => {}
            other => panic!("expected DimensionMismatch, got {other:?}"),
        }
    }
}
