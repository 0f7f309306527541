//! Matrix decompositions and orthogonal projectors.
//!
//! Matrices are nalgebra's; the SVD itself is delegated to faer, and every
//! factorization is checked for reconstruction and
//! orthonormality before it is returned. No routine here forms a Gram matrix
//! to extract singular vectors, and none inverts a matrix.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::Matrix;

/// Tolerance on `‖UᵀU − I‖_F` accepted at API boundaries.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

const SVD_RESIDUAL_TOL: f64 = 1e-10;

/// Full thin SVD `A = U diag(S) Vᵀ` holding all `min(n, m)` triples.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub singular_values: DVector<f64>,
    pub v: Matrix,
}

/// Rank-`s` truncated SVD: the `s` leading singular triples of a matrix.
///
/// Ties at `σ_s = σ_{s+1}` are broken arbitrarily, so only the spanned
/// subspaces and the singular values are meaningful, never the signs or the
/// particular basis.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// `n × s`, orthonormal columns.
    pub u: Matrix,
    /// `s` values, nonincreasing and nonnegative.
    pub singular_values: DVector<f64>,
    /// `m × s`, orthonormal columns.
    pub v: Matrix,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `Û Ŝ V̂ᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (mut col, s) in us.column_iter_mut().zip(self.singular_values.iter()) {
            col *= *s;
        }
        us * self.v.transpose()
    }

    /// `‖Ŝ‖²`, the energy captured by the truncation.
    pub fn energy(&self) -> f64 {
        self.singular_values.norm_squared()
    }
}

pub fn svd_full(a: &Matrix) -> Result<Svd> {
    let (n, m) = a.shape();
    let p = n.min(m);
    if p == 0 {
        return Ok(Svd {
            u: Matrix::zeros(n, 0),
            singular_values: DVector::zeros(0),
            v: Matrix::zeros(m, 0),
        });
    }
    let failed = || Error::SvdNoConvergence { rows: n, cols: m };
    let fa = faer::Mat::<f64>::from_fn(n, m, |i, j| a[(i, j)]);
    let svd = fa.svd().map_err(|_| failed())?;
    let (fu, fv, fs) = (svd.U(), svd.V(), svd.S().column_vector());
    let out = Svd {
        u: Matrix::from_fn(n, p, |i, j| fu[(i, j)]),
        singular_values: DVector::from_fn(p, |i, _| fs[i]),
        v: Matrix::from_fn(m, p, |i, j| fv[(i, j)]),
    };

    let mut us = out.u.clone();
    for (mut col, s) in us.column_iter_mut().zip(out.singular_values.iter()) {
        col *= *s;
    }
    let residual = (a - us * out.v.transpose()).norm();
    let ok = residual <= SVD_RESIDUAL_TOL * a.norm().max(1.0)
        && gram_deviation(&out.u) <= SVD_RESIDUAL_TOL
        && gram_deviation(&out.v) <= SVD_RESIDUAL_TOL;
    if !ok {
        return Err(failed());
    }
    Ok(out)
}

/// Leading `s` singular triples of `a`. `s = 0` yields empty factors.
pub fn svd_trunc(a: &Matrix, s: usize) -> Result<TruncatedSvd> {
    let (n, m) = a.shape();
    if s > n.min(m) {
        return Err(Error::InvalidRank(format!(
            "truncation rank {s} exceeds min({n}, {m})"
        )));
    }
    if s == 0 {
        return Ok(TruncatedSvd {
            u: Matrix::zeros(n, 0),
            singular_values: DVector::zeros(0),
            v: Matrix::zeros(m, 0),
        });
    }
    let full = svd_full(a)?;
    Ok(TruncatedSvd {
        u: full.u.columns(0, s).into_owned(),
        singular_values: full.singular_values.rows(0, s).into_owned(),
        v: full.v.columns(0, s).into_owned(),
    })
}

/// `‖UᵀU − I‖_F`.
pub fn gram_deviation(u: &Matrix) -> f64 {
    let g = u.transpose() * u;
    (g - Matrix::identity(u.ncols(), u.ncols())).norm()
}

fn check_orthonormal(u: &Matrix) -> Result<()> {
    let deviation = gram_deviation(u);
    if deviation > ORTHONORMAL_TOL {
        return Err(Error::NotOrthonormal {
            deviation,
            tol: ORTHONORMAL_TOL,
        });
    }
    Ok(())
}

/// `P_U A = U Uᵀ A`.
pub fn apply_proj(u: &Matrix, a: &Matrix) -> Result<Matrix> {
    check_orthonormal(u)?;
    if u.nrows() != a.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "projector of size {} applied to {} rows",
            u.nrows(),
            a.nrows()
        )));
    }
    Ok(proj(u, a))
}

/// `P_U^⊥ A = A − U Uᵀ A`.
pub fn apply_proj_perp(u: &Matrix, a: &Matrix) -> Result<Matrix> {
    Ok(a - apply_proj(u, a)?)
}

// Unchecked variants for frames already validated upstream.
pub(crate) fn proj(u: &Matrix, a: &Matrix) -> Matrix {
    u * (u.transpose() * a)
}

pub(crate) fn proj_perp(u: &Matrix, a: &Matrix) -> Matrix {
    a - proj(u, a)
}

/// `A P_V^⊥` for `v` with orthonormal columns: removes the row-space component along `v`.
pub(crate) fn proj_perp_rows(a: &Matrix, v: &Matrix) -> Matrix {
    a - (a * v) * v.transpose()
}

/// Orthonormal basis `Q` (`n × (n − s)`) of the orthogonal complement of the
/// range of `u`, so that `[U Q]` is orthogonal.
pub fn orth_complement(u: &Matrix) -> Result<Matrix> {
    let (n, s) = u.shape();
    if s >= n {
        return Err(Error::InvalidRank(format!(
            "no orthogonal complement for {s} columns in dimension {n}"
        )));
    }
    check_orthonormal(u)?;
    complement_basis(u)
}

/// Like [`orth_complement`] but returns an `n × 0` basis when `u` is square.
pub(crate) fn complement_basis(u: &Matrix) -> Result<Matrix> {
    let (n, s) = u.shape();
    if s >= n {
        return Ok(Matrix::zeros(n, 0));
    }
    let perp = Matrix::identity(n, n) - u * u.transpose();
    let svd = svd_full(&perp)?;
    let q = svd.u.columns(0, n - s).into_owned();
    // one correction sweep pushes QᵀU down to rounding level
    Ok(proj_perp(u, &q))
}

/// Haar-distributed point on `St(p, n)`: sign-normalized QR of a Gaussian matrix.
pub fn random_stiefel<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Matrix {
    assert!(p <= n, "St({p}, {n}) is empty");
    if p == 0 {
        return Matrix::zeros(n, 0);
    }
    let g = Matrix::from_fn(n, p, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if r[(j, j)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn randn(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(n, m, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn diagonal_singular_values() {
        let svd = svd_full(&Matrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]))).unwrap();
        assert_eq!(svd.singular_values.as_slice(), &[2.0, 1.0]);
    }

    #[test]
    fn zero_matrix_has_orthonormal_factors() {
        for (n, m) in [(3, 3), (4, 2), (2, 5)] {
            let svd = svd_full(&Matrix::zeros(n, m)).unwrap();
            assert!(svd.singular_values.iter().all(|&s| s == 0.0));
            assert!(gram_deviation(&svd.u) <= 1e-12);
            assert!(gram_deviation(&svd.v) <= 1e-12);
            let t = svd_trunc(&Matrix::zeros(n, m), n.min(m)).unwrap();
            assert!(gram_deviation(&t.u) <= 1e-12);
        }
    }

    #[test]
    fn random_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (n, m) in [(5, 7), (7, 5), (1, 4), (6, 6)] {
            let a = randn(n, m, &mut rng);
            let svd = svd_full(&a).unwrap();
            let t = TruncatedSvd {
                u: svd.u.clone(),
                singular_values: svd.singular_values.clone(),
                v: svd.v.clone(),
            };
            assert!((&a - t.reconstruct()).norm() <= 1e-10 * a.norm().max(1.0));
            assert!(gram_deviation(&svd.u) <= 1e-12);
            assert!(gram_deviation(&svd.v) <= 1e-12);
            let sv = svd.singular_values.as_slice();
            assert!(sv.windows(2).all(|w| w[0] >= w[1]));
            assert!(sv.iter().all(|&s| s >= 0.0));
        }
    }

    #[test]
    fn empty_matrix_svd() {
        let svd = svd_full(&Matrix::zeros(3, 0)).unwrap();
        assert_eq!(svd.u.shape(), (3, 0));
        assert_eq!(svd.v.shape(), (0, 0));
    }

    #[test]
    fn truncation_of_diagonal() {
        let a = Matrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let t = svd_trunc(&a, 1).unwrap();
        assert_eq!(t.singular_values.as_slice(), &[3.0]);
        let captured = proj(&t.u, &a).norm_squared();
        assert!((captured - 9.0).abs() < 1e-12);
        assert!(captured >= 14.0 / 3.0);
    }

    #[test]
    fn truncation_at_full_rank_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = randn(6, 2, &mut rng) * randn(2, 5, &mut rng);
        let t = svd_trunc(&a, 2).unwrap();
        assert!((proj(&t.u, &a) - &a).norm() <= 1e-12 * a.norm());
        assert!((t.reconstruct() - &a).norm() <= 1e-12 * a.norm());
    }

    #[test]
    fn truncation_rank_bounds() {
        assert!(matches!(
            svd_trunc(&Matrix::zeros(3, 2), 3),
            Err(Error::InvalidRank(_))
        ));
        let t = svd_trunc(&Matrix::zeros(3, 2), 0).unwrap();
        assert_eq!(t.u.shape(), (3, 0));
        assert_eq!(t.v.shape(), (2, 0));
    }

    #[test]
    fn truncation_beats_random_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = randn(6, 4, &mut rng);
        let t = svd_trunc(&a, 2).unwrap();
        let best = proj(&t.u, &a).norm();
        for _ in 0..1000 {
            let u = random_stiefel(6, 2, &mut rng);
            assert!(best >= proj(&u, &a).norm() - 1e-12);
        }
    }

    #[test]
    fn eckart_young_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = randn(7, 5, &mut rng);
        let full = svd_full(&a).unwrap();
        for s in 0..=5 {
            let t = svd_trunc(&a, s).unwrap();
            let err = (&a - t.reconstruct()).norm_squared();
            let tail: f64 = full.singular_values.iter().skip(s).map(|x| x * x).sum();
            assert!((err - tail).abs() <= 1e-10 * a.norm_squared());
        }
    }

    #[test]
    fn projector_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = random_stiefel(5, 2, &mut rng);
        let a = randn(5, 3, &mut rng);
        let p = apply_proj(&u, &a).unwrap();
        let q = apply_proj_perp(&u, &a).unwrap();
        assert!((&p + &q - &a).norm() <= 1e-14 * a.norm());
        assert!((apply_proj(&u, &p).unwrap() - &p).norm() <= 1e-14 * a.norm());
        assert!(p.dot(&q).abs() <= 1e-12 * a.norm_squared());

        let full = random_stiefel(5, 5, &mut rng);
        assert!((apply_proj(&full, &a).unwrap() - &a).norm() <= 1e-12 * a.norm());
        assert!(apply_proj_perp(&full, &a).unwrap().norm() <= 1e-12 * a.norm());

        let in_range = &u * randn(2, 4, &mut rng);
        assert!(apply_proj_perp(&u, &in_range).unwrap().norm() <= 1e-12 * in_range.norm());
    }

    #[test]
    fn projector_rejects_non_orthonormal() {
        let u = Matrix::from_column_slice(2, 1, &[1.0, 1.0]);
        assert!(matches!(
            apply_proj(&u, &Matrix::zeros(2, 2)),
            Err(Error::NotOrthonormal { .. })
        ));
    }

    #[test]
    fn complement_of_unit_vector() {
        let e1 = Matrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let q = orth_complement(&e1).unwrap();
        assert_eq!(q.shape(), (2, 1));
        assert!((q[(0, 0)]).abs() <= 1e-15);
        assert!((q[(1, 0)].abs() - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn complement_of_identity_columns() {
        let u = Matrix::identity(5, 2);
        let q = orth_complement(&u).unwrap();
        let expected = Matrix::identity(5, 5).columns(2, 3).into_owned();
        // same subspace: projectors agree
        assert!((&q * q.transpose() - &expected * expected.transpose()).norm() <= 1e-12);
    }

    #[test]
    fn complement_of_random_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let u = random_stiefel(5, 2, &mut rng);
        let q = orth_complement(&u).unwrap();
        assert_eq!(q.shape(), (5, 3));
        assert!((q.transpose() * &u).norm() <= 1e-12);
        assert!(gram_deviation(&q) <= 1e-12);
    }

    #[test]
    fn complement_errors() {
        assert!(matches!(
            orth_complement(&Matrix::identity(3, 3)),
            Err(Error::InvalidRank(_))
        ));
        assert_eq!(
            complement_basis(&Matrix::identity(3, 3)).unwrap().shape(),
            (3, 0)
        );
        let full = complement_basis(&Matrix::zeros(3, 0)).unwrap();
        assert!(gram_deviation(&full) <= 1e-12);
        assert_eq!(full.shape(), (3, 3));
    }

    #[test]
    fn random_stiefel_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for (n, p) in [(5, 1), (5, 3), (4, 4), (3, 0)] {
            let u = random_stiefel(n, p, &mut rng);
            assert_eq!(u.shape(), (n, p));
            assert!(gram_deviation(&u) <= 1e-12);
        }
    }
}
