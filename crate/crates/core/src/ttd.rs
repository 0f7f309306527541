//! Tensor-train decompositions of third-order tensors.
//!
//! A decomposition `X = X1 · X2 · X3` stores a first factor `n1 × r1`, a
//! middle core `r1 × n2 × r2` and a last factor `r2 × n3`. The tangent-cone
//! machinery needs two gauge-fixed versions of the same tensor, see
//! [`CanonicalTtPair`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{gram_deviation, svd_full, svd_trunc};
use crate::tensor3::{contract3, Dims, Tensor3};
use crate::Matrix;

/// Relative singular-value threshold below which a core counts as rank deficient.
pub const RANK_DEFICIENCY_TOL: f64 = 1e-12;

/// A tensor-train decomposition `first · middle · last`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ttd {
    pub first: Matrix,
    pub middle: Tensor3,
    pub last: Matrix,
}

impl Ttd {
    pub fn new(first: Matrix, middle: Tensor3, last: Matrix) -> Result<Self> {
        let [r1, _, r2] = middle.dims();
        if first.ncols() != r1 || last.nrows() != r2 {
            return Err(Error::ShapeMismatch(format!(
                "cores {}x{}, {:?}, {}x{} do not chain",
                first.nrows(),
                first.ncols(),
                middle.dims(),
                last.nrows(),
                last.ncols()
            )));
        }
        Ok(Self {
            first,
            middle,
            last,
        })
    }

    pub fn dims(&self) -> Dims {
        [self.first.nrows(), self.middle.dims()[1], self.last.ncols()]
    }

    /// Nominal ranks `(r1, r2)` as stored.
    pub fn ranks(&self) -> (usize, usize) {
        (self.first.ncols(), self.last.nrows())
    }

    pub fn reconstruct(&self) -> Tensor3 {
        contract3(&self.first, &self.middle, &self.last).expect("cores chain by construction")
    }
}

/// The two orthogonal decompositions of one tensor used by the tangent-cone
/// parametrization.
///
/// * `left` is `X1′ · X2′ · X3` with `X1′` having orthonormal columns and the
///   right unfolding of `X2′` having orthonormal columns.
/// * `right` is `X1 · X2″ · X3″` with the left unfolding of `X2″` and `X3″`
///   both having orthonormal rows.
#[derive(Debug, Clone)]
pub struct CanonicalTtPair {
    pub left: Ttd,
    pub right: Ttd,
}

impl CanonicalTtPair {
    pub fn dims(&self) -> Dims {
        self.left.dims()
    }

    pub fn ranks(&self) -> (usize, usize) {
        self.left.ranks()
    }

    pub fn tensor(&self) -> Tensor3 {
        self.left.reconstruct()
    }

    /// Gram deviations of the four orthonormal factors, in the order
    /// `X1′`, `X2′^R`, `(X2″^L)ᵀ`, `X3″ᵀ`.
    pub fn stiefel_residuals(&self) -> [f64; 4] {
        [
            gram_deviation(&self.left.first),
            gram_deviation(&self.left.middle.unfold_right()),
            gram_deviation(&self.right.middle.unfold_left().transpose()),
            gram_deviation(&self.right.last.transpose()),
        ]
    }
}

fn check_targets(dims: Dims, (k1, k2): (usize, usize)) -> Result<()> {
    let [n1, n2, n3] = dims;
    if k1 == 0 || k2 == 0 || k1 > n1.min(n2 * n3) || k2 > n3.min(n1 * n2) {
        return Err(Error::InvalidRank(format!(
            "target ranks ({k1}, {k2}) outside [1, min(n1, n2·n3)] × [1, min(n3, n1·n2)] for {dims:?}"
        )));
    }
    Ok(())
}

/// TT-SVD: two successive truncated SVDs of unfoldings.
///
/// The second rank is capped at `k1·n2`, the largest rank the middle core can
/// carry after the first truncation.
pub fn tt_svd(t: &Tensor3, targets: (usize, usize)) -> Result<Ttd> {
    let dims = t.dims();
    check_targets(dims, targets)?;
    let [_, n2, n3] = dims;
    let (k1, k2) = targets;

    let first_svd = svd_trunc(&t.unfold_left(), k1)?;
    let mut rest = first_svd.v.transpose();
    for (mut row, s) in rest.row_iter_mut().zip(first_svd.singular_values.iter()) {
        row *= *s;
    }
    let rest = Tensor3::fold_left(&rest, [k1, n2, n3])?;

    let k2 = k2.min(k1 * n2);
    let second = svd_trunc(&rest.unfold_right(), k2)?;
    let middle = Tensor3::fold_right(&second.u, [k1, n2, k2])?;
    let mut last = second.v.transpose();
    for (mut row, s) in last.row_iter_mut().zip(second.singular_values.iter()) {
        row *= *s;
    }
    Ttd::new(first_svd.u, middle, last)
}

fn numerical_rank(m: &Matrix, tol: f64) -> Result<usize> {
    let sv = svd_full(m)?.singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > tol * smax).count())
}

/// `(rank(T^L), rank(T^R))`, counting singular values above `tol · σ_max`.
pub fn tt_rank(t: &Tensor3, tol: f64) -> Result<(usize, usize)> {
    Ok((
        numerical_rank(&t.unfold_left(), tol)?,
        numerical_rank(&t.unfold_right(), tol)?,
    ))
}

fn check_full_rank(r: &Matrix, which: &'static str) -> Result<()> {
    let sv = svd_full(r)?.singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    if ratio < RANK_DEFICIENCY_TOL {
        return Err(Error::RankDeficient {
            which,
            ratio,
            tol: RANK_DEFICIENCY_TOL,
        });
    }
    Ok(())
}

/// Brings a decomposition into both orthogonal forms by QR sweeps.
///
/// Fails with [`Error::RankDeficient`] when any transfer factor is
/// numerically singular, which means the stored ranks overstate the TT-rank.
pub fn canonicalize(d: &Ttd) -> Result<CanonicalTtPair> {
    let [n1, n2, n3] = d.dims();
    let (r1, r2) = d.ranks();
    if r1 == 0 || r2 == 0 || r1 > n1.min(n2 * r2) || r2 > n3.min(n2 * r1) {
        return Err(Error::InvalidRank(format!(
            "ranks ({r1}, {r2}) cannot be full TT-rank for {:?}",
            d.dims()
        )));
    }

    // left-to-right sweep
    let qr = d.first.clone().qr();
    let (q1, t1) = (qr.q(), qr.r());
    check_full_rank(&t1, "first factor")?;
    let core = d.middle.left_mul(&t1)?;
    let qr = core.unfold_right().qr();
    let (q2, t2) = (qr.q(), qr.r());
    check_full_rank(&t2, "middle core (right unfolding)")?;
    let left = Ttd::new(q1, Tensor3::fold_right(&q2, [r1, n2, r2])?, &t2 * &d.last)?;

    // right-to-left sweep via QR of transposes
    let qr = d.last.transpose().qr();
    let (q3, t3) = (qr.q(), qr.r());
    check_full_rank(&t3, "last factor")?;
    let core = d.middle.right_mul(&t3.transpose())?;
    let qr = core.unfold_left().transpose().qr();
    let (q2, t2) = (qr.q(), qr.r());
    check_full_rank(&t2, "middle core (left unfolding)")?;
    let right = Ttd::new(
        &d.first * t2.transpose(),
        Tensor3::fold_left(&q2.transpose(), [r1, n2, r2])?,
        q3.transpose(),
    )?;

    Ok(CanonicalTtPair { left, right })
}

/// Tensor with independent standard normal entries.
pub fn random_tensor<R: Rng + ?Sized>(dims: Dims, rng: &mut R) -> Tensor3 {
    let n = dims.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    Tensor3::new(dims, data).expect("length matches dims")
}

fn random_matrix<R: Rng + ?Sized>(r: usize, c: usize, rng: &mut R) -> Matrix {
    let data: Vec<f64> = (0..r * c).map(|_| rng.sample(StandardNormal)).collect();
    Matrix::from_vec(r, c, data)
}

/// Random decomposition with standard normal cores, drawn in the order
/// first factor, middle core, last factor (each in column-major /
/// first-index-fastest order).
pub fn random_tt_with_rng<R: Rng + ?Sized>(
    dims: Dims,
    (r1, r2): (usize, usize),
    rng: &mut R,
) -> Result<(Tensor3, Ttd)> {
    let [n1, n2, n3] = dims;
    if r1 == 0 || r2 == 0 || r1 > n1.min(n2 * r2) || r2 > n3.min(n2 * r1) {
        return Err(Error::InvalidRank(format!(
            "ranks ({r1}, {r2}) not attainable for {dims:?}"
        )));
    }
    let first = random_matrix(n1, r1, rng);
    let middle = random_tensor([r1, n2, r2], rng);
    let last = random_matrix(r2, n3, rng);
    let ttd = Ttd::new(first, middle, last)?;
    Ok((ttd.reconstruct(), ttd))
}

/// Seeded variant of [`random_tt_with_rng`] using ChaCha8.
pub fn random_tt(dims: Dims, ranks: (usize, usize), seed: u64) -> Result<(Tensor3, Ttd)> {
    random_tt_with_rng(dims, ranks, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_err(a: &Tensor3, b: &Tensor3) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    fn rank_one() -> Tensor3 {
        let a = [1.0, -2.0, 0.5];
        let b = [3.0, 1.0];
        let c = [2.0, 0.0, -1.0, 4.0];
        Tensor3::from_fn([3, 2, 4], |i, j, k| a[i] * b[j] * c[k])
    }

    #[test]
    fn tt_svd_rank_one_is_exact() {
        let t = rank_one();
        let d = tt_svd(&t, (1, 1)).unwrap();
        assert!(rel_err(&d.reconstruct(), &t) <= 1e-12);
    }

    #[test]
    fn tt_svd_recovers_generated_tensor() {
        let (t, _) = random_tt([5, 5, 5], (2, 2), 3).unwrap();
        let d = tt_svd(&t, (2, 2)).unwrap();
        assert_eq!(d.ranks(), (2, 2));
        assert!(rel_err(&d.reconstruct(), &t) <= 1e-10);
    }

    #[test]
    fn tt_svd_full_targets_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = random_tensor([3, 4, 5], &mut rng);
        let d = tt_svd(&t, (3, 5)).unwrap();
        assert!(rel_err(&d.reconstruct(), &t) <= 1e-12);
    }

    #[test]
    fn tt_svd_truncation_respects_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = random_tensor([4, 4, 4], &mut rng);
        let d = tt_svd(&t, (2, 3)).unwrap();
        let (r1, r2) = tt_rank(&d.reconstruct(), 1e-10).unwrap();
        assert!(r1 <= 2 && r2 <= 3);
    }

    #[test]
    fn tt_svd_rejects_bad_targets() {
        let t = Tensor3::zeros([3, 2, 4]);
        assert!(tt_svd(&t, (0, 1)).is_err());
        assert!(tt_svd(&t, (4, 1)).is_err());
        assert!(tt_svd(&t, (1, 7)).is_err());
    }

    #[test]
    fn tt_rank_cases() {
        assert_eq!(tt_rank(&Tensor3::zeros([3, 3, 3]), 1e-10).unwrap(), (0, 0));
        assert_eq!(tt_rank(&rank_one(), 1e-10).unwrap(), (1, 1));
        let (t, _) = random_tt([5, 5, 5], (2, 2), 11).unwrap();
        assert_eq!(tt_rank(&t, 1e-10).unwrap(), (2, 2));
        let (t, _) = random_tt([4, 3, 5], (1, 1), 12).unwrap();
        assert_eq!(tt_rank(&t, 1e-10).unwrap(), (1, 1));
    }

    #[test]
    fn random_tt_is_deterministic() {
        let a = random_tt([4, 3, 5], (2, 3), 99).unwrap();
        let b = random_tt([4, 3, 5], (2, 3), 99).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        let c = random_tt([4, 3, 5], (2, 3), 100).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn random_tt_rejects_unattainable_ranks() {
        assert!(random_tt([3, 3, 3], (4, 1), 0).is_err());
        assert!(random_tt([3, 1, 3], (1, 2), 0).is_err());
        assert!(random_tt([3, 3, 3], (0, 1), 0).is_err());
    }

    #[test]
    fn canonical_forms_are_orthogonal_and_consistent() {
        for seed in 0..20 {
            let (t, d) = random_tt([5, 5, 5], (2, 2), seed).unwrap();
            let pair = canonicalize(&d).unwrap();
            for r in pair.stiefel_residuals() {
                assert!(r <= 1e-12, "residual {r}");
            }
            assert!(rel_err(&pair.left.reconstruct(), &t) <= 1e-12);
            assert!(rel_err(&pair.right.reconstruct(), &t) <= 1e-12);
        }
    }

    #[test]
    fn canonicalize_is_gauge_stable() {
        let (t, d) = random_tt([4, 3, 5], (2, 3), 21).unwrap();
        let once = canonicalize(&d).unwrap();
        let twice = canonicalize(&once.left).unwrap();
        assert!(rel_err(&twice.left.reconstruct(), &t) <= 1e-12);
        assert!(rel_err(&twice.right.reconstruct(), &t) <= 1e-12);
        // first factor spans the same column space
        let p1 = &once.left.first * once.left.first.transpose();
        let p2 = &twice.left.first * twice.left.first.transpose();
        assert!((p1 - p2).norm() <= 1e-12);
    }

    #[test]
    fn canonicalize_rank_one_normalizes_first_factor() {
        let t = rank_one();
        let d = tt_svd(&t, (1, 1)).unwrap();
        let pair = canonicalize(&d).unwrap();
        let a = Matrix::from_column_slice(3, 1, &[1.0, -2.0, 0.5]);
        let a = &a / a.norm();
        let x = &pair.left.first;
        assert!((x - &a).norm() <= 1e-12 || (x + &a).norm() <= 1e-12);
    }

    #[test]
    fn canonicalize_detects_rank_deficiency() {
        let (_, d) = random_tt([5, 5, 5], (2, 2), 7).unwrap();
        let mut first = d.first.clone();
        let col = first.column(0).into_owned();
        first.set_column(1, &(col * 2.0));
        let bad = Ttd::new(first, d.middle.clone(), d.last.clone()).unwrap();
        assert!(matches!(
            canonicalize(&bad),
            Err(Error::RankDeficient { .. })
        ));

        let mut last = d.last.clone();
        let row = last.row(0).into_owned();
        last.set_row(1, &(row * -3.0));
        let bad = Ttd::new(d.first.clone(), d.middle.clone(), last).unwrap();
        assert!(matches!(
            canonicalize(&bad),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn ttd_new_rejects_mismatch() {
        assert!(Ttd::new(
            Matrix::zeros(3, 2),
            Tensor3::zeros([1, 2, 2]),
            Matrix::zeros(2, 3)
        )
        .is_err());
    }
}
