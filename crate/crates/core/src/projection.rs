//! Approximate projection onto the tangent cone.
//!
//! The free frames `U1` and `V3` are found by alternating truncated SVDs;
//! every other parameter then follows in closed form, so the result is always
//! a feasible point `Ỹ` with `⟨Y − Ỹ, Ỹ⟩ = 0`. Each half-step maximizes
//! `‖Ỹ‖` over one frame with the other fixed, so the tracked quantity
//! `η = ‖Ỹ‖² − ‖P_T Y‖²` never decreases.
//!
//! The SVDs are taken of thin matrices expressed in coordinates of the
//! orthogonal complements of `X1′` and `X3″ᵀ`: their singular values equal
//! those of the full projected matrices, and the mapped singular vectors are
//! admissible frames even when the input vanishes.

use crate::error::{Error, Result};
use crate::linalg::{complement_basis, svd_trunc, TruncatedSvd};
use crate::tangent::{
    assemble, check_frames, params_from_split, tangent_space_part, TangentParams, TangentSplit,
};
use crate::tensor3::{Dims, Tensor3};
use crate::ttd::CanonicalTtPair;
use crate::Matrix;

/// Order of the two frame updates inside one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `U1` then `V3`; taken when `s2/(n3 − r2) > s1/(n1 − r1)`.
    UFirst,
    /// `V3` then `U1`; taken otherwise, ties included.
    VFirst,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Branch::UFirst => "u-first",
            Branch::VFirst => "v-first",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlternatingOptions {
    /// Iteration continues while `|η_new − η_old| > eps`.
    pub eps: f64,
    /// Upper bound on the number of iterations.
    pub i_max: usize,
}

impl Default for AlternatingOptions {
    fn default() -> Self {
        Self {
            eps: 1e-16,
            i_max: 10,
        }
    }
}

/// Output of [`alternating_uv`].
#[derive(Debug, Clone)]
pub struct FrameSearch {
    pub u1: Matrix,
    pub v3: Matrix,
    /// `η_new` after each iteration.
    pub eta_trace: Vec<f64>,
    pub iterations: usize,
    pub branch: Branch,
}

/// Result of [`approx_project`].
#[derive(Debug, Clone)]
pub struct ProjectionResult {
    pub y_tilde: Tensor3,
    pub params: TangentParams,
    pub eta_trace: Vec<f64>,
    pub iterations: usize,
    /// Angle-condition constant `sqrt(max ratio)`; `None` at a smooth point.
    pub omega: Option<f64>,
    /// `‖P_T Y‖` for the tangent space of the fixed-rank manifold.
    pub tangent_space_norm: f64,
    /// `None` when there is no gap to search over.
    pub branch: Option<Branch>,
}

fn gap_ratio(s: usize, n: usize, r: usize) -> f64 {
    if s == 0 {
        0.0
    } else {
        s as f64 / (n - r) as f64
    }
}

pub fn select_branch(dims: Dims, ranks: (usize, usize), gaps: (usize, usize)) -> Branch {
    let [n1, _, n3] = dims;
    if gap_ratio(gaps.1, n3, ranks.1) > gap_ratio(gaps.0, n1, ranks.0) {
        Branch::UFirst
    } else {
        Branch::VFirst
    }
}

fn validate_bounds(dims: Dims, r: (usize, usize), k: (usize, usize)) -> Result<(usize, usize)> {
    let [n1, _, n3] = dims;
    if k.0 < r.0 || k.1 < r.1 {
        return Err(Error::InvalidRank(format!(
            "rank bound {k:?} below the TT-rank {r:?} of the base point"
        )));
    }
    let s = (k.0 - r.0, k.1 - r.1);
    if s.0 > n1 - r.0 || s.1 > n3 - r.1 {
        return Err(Error::InvalidRank(format!(
            "rank bound {k:?} exceeds ({n1}, {n3}) for dims {dims:?}"
        )));
    }
    Ok(s)
}

/// `sqrt(max{(k1 − r1)/(n1 − r1), (k2 − r2)/(n3 − r2)})`.
pub fn omega_bound(n: Dims, r: (usize, usize), k: (usize, usize)) -> Result<f64> {
    omega_ratio(n, r, k).map(f64::sqrt)
}

/// The larger gap ratio `max{(k1 − r1)/(n1 − r1), (k2 − r2)/(n3 − r2)}`, i.e.
/// the square of [`omega_bound`]; equals 1/3 for `n = (5,5,5)`, `r = (2,2)`,
/// `k = (3,3)`.
pub fn omega_ratio(n: Dims, r: (usize, usize), k: (usize, usize)) -> Result<f64> {
    let [n1, _, n3] = n;
    if r == k {
        return Err(Error::UndefinedBound(format!(
            "TT-rank {r:?} equals the bound; the base point is smooth"
        )));
    }
    if r.0 >= n1 || r.1 >= n3 {
        return Err(Error::UndefinedBound(format!(
            "TT-rank {r:?} leaves no complement in dims {n:?}"
        )));
    }
    let s = validate_bounds(n, r, k)?;
    Ok(gap_ratio(s.0, n1, r.0).max(gap_ratio(s.1, n3, r.1)))
}

/// Angle constant `1/(6·sqrt(n1·n2·n3))` of the earlier diagrammatic approximate projection.
pub fn kutschan_omega(n: Dims) -> f64 {
    let vol = (n[0] * n[1] * n[2]) as f64;
    1.0 / (6.0 * vol.sqrt())
}

/// `⟨Y, Ỹ⟩ / (‖Y‖‖Ỹ‖)`, clamped to `[−1, 1]`.
pub fn angle_value(y: &Tensor3, y_tilde: &Tensor3) -> Result<f64> {
    let (ny, nt) = (y.norm(), y_tilde.norm());
    if ny == 0.0 || nt == 0.0 {
        return Err(Error::ZeroInput);
    }
    Ok((y.inner(y_tilde)? / (ny * nt)).clamp(-1.0, 1.0))
}

fn hstack(a: &Matrix, b: &Matrix) -> Matrix {
    debug_assert_eq!(a.nrows(), b.nrows());
    let mut m = Matrix::zeros(a.nrows(), a.ncols() + b.ncols());
    m.columns_mut(0, a.ncols()).copy_from(a);
    m.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    m
}

fn vstack(a: &Matrix, b: &Matrix) -> Matrix {
    debug_assert_eq!(a.ncols(), b.ncols());
    let mut m = Matrix::zeros(a.nrows() + b.nrows(), a.ncols());
    m.rows_mut(0, a.nrows()).copy_from(a);
    m.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    m
}

/// Rank-`s` truncated SVD, zero-padding columns (or rows) first when `s`
/// exceeds the smaller dimension so the frame is always complete.
fn truncated_padded(m: &Matrix, s: usize) -> Result<TruncatedSvd> {
    let (rows, cols) = m.shape();
    if s <= rows.min(cols) {
        return svd_trunc(m, s);
    }
    let padded = if cols < s {
        hstack(m, &Matrix::zeros(rows, s - cols))
    } else {
        vstack(m, &Matrix::zeros(s - rows, cols))
    };
    let mut t = svd_trunc(&padded, s)?;
    t.u = t.u.rows(0, rows).into_owned();
    t.v = t.v.rows(0, cols).into_owned();
    Ok(t)
}

struct FrameUpdater<'a> {
    y: &'a Tensor3,
    split: TangentSplit,
    /// orthonormal basis of range(X1′)^⊥, `n1 × (n1 − r1)`
    q1: Matrix,
    /// orthonormal basis of range(X3″ᵀ)^⊥, `n3 × (n3 − r2)`
    q3: Matrix,
    gaps: (usize, usize),
}

impl<'a> FrameUpdater<'a> {
    fn new(y: &'a Tensor3, x: &CanonicalTtPair, gaps: (usize, usize)) -> Result<Self> {
        Ok(Self {
            y,
            split: TangentSplit::new(y, x)?,
            q1: complement_basis(&x.left.first)?,
            q3: complement_basis(&x.right.last.transpose())?,
            gaps,
        })
    }

    /// Leading `s1` left singular vectors of `P⊥_{X1′}[(Y·V3ᵀ)^L, left_residual]`
    /// and the captured energy `‖S‖²`.
    fn update_u1(&self, v3: &Matrix) -> Result<(Matrix, f64)> {
        let y_v = self.y.right_mul(&v3.transpose())?.unfold_left();
        let a = self.q1.transpose() * hstack(&y_v, &self.split.left_residual);
        let t = truncated_padded(&a, self.gaps.0)?;
        Ok((&self.q1 * &t.u, t.energy()))
    }

    /// Leading `s2` right singular vectors of `[(U1ᵀ·Y)^R; right_residual] P⊥_{X3″ᵀ}`,
    /// returned as the rows of `V3`, and `‖S‖²`.
    fn update_v3(&self, u1: &Matrix) -> Result<(Matrix, f64)> {
        let u_y = self.y.left_mul(&u1.transpose())?.unfold_right();
        let b = vstack(&u_y, &self.split.right_residual) * &self.q3;
        let t = truncated_padded(&b, self.gaps.1)?;
        Ok(((&self.q3 * &t.v).transpose(), t.energy()))
    }
}

/// Alternating truncated SVDs for `U1 ∈ St(s1, n1)` and `V3ᵀ ∈ St(s2, n3)`.
///
/// The initial frames are the full complement bases, so the first half-step
/// sees the whole orthogonal complement of the base point.
pub fn alternating_uv(
    y: &Tensor3,
    x: &CanonicalTtPair,
    gaps: (usize, usize),
    opts: AlternatingOptions,
) -> Result<FrameSearch> {
    let updater = FrameUpdater::new(y, x, gaps)?;
    let u1 = updater.q1.clone();
    let v3 = updater.q3.transpose();
    run_alternating(&updater, x, u1, v3, opts)
}

/// [`alternating_uv`] started from caller-supplied admissible frames (any
/// number of columns).
pub fn alternating_uv_from(
    y: &Tensor3,
    x: &CanonicalTtPair,
    gaps: (usize, usize),
    u1: Matrix,
    v3: Matrix,
    opts: AlternatingOptions,
) -> Result<FrameSearch> {
    check_frames(x, &u1, &v3)?;
    let updater = FrameUpdater::new(y, x, gaps)?;
    run_alternating(&updater, x, u1, v3, opts)
}

fn run_alternating(
    up: &FrameUpdater<'_>,
    x: &CanonicalTtPair,
    mut u1: Matrix,
    mut v3: Matrix,
    opts: AlternatingOptions,
) -> Result<FrameSearch> {
    let (s1, s2) = up.gaps;
    let [n1, _, n3] = x.dims();
    let (r1, r2) = x.ranks();
    if s1 + s2 == 0 {
        return Err(Error::InvalidRank("both rank gaps are zero".into()));
    }
    if s1 > n1 - r1 || s2 > n3 - r2 {
        return Err(Error::InvalidRank(format!(
            "gaps ({s1}, {s2}) exceed the complement dimensions ({}, {})",
            n1 - r1,
            n3 - r2
        )));
    }
    if opts.eps.is_nan() || opts.eps <= 0.0 || opts.i_max == 0 {
        return Err(Error::InvalidRank(format!(
            "need eps > 0 and i_max ≥ 1, got eps = {:e}, i_max = {}",
            opts.eps, opts.i_max
        )));
    }
    let branch = select_branch(x.dims(), x.ranks(), up.gaps);

    // eta_old starts at 0 and eta_new at ∞, so the first iteration always runs
    let mut eta_old = 0.0;
    let mut eta_new = f64::INFINITY;
    let mut trace = Vec::new();
    let mut i = 0;
    while i < opts.i_max && (eta_new - eta_old).abs() > opts.eps {
        eta_old = eta_new;
        i += 1;
        eta_new = match branch {
            Branch::UFirst => {
                u1 = up.update_u1(&v3)?.0;
                let (v, energy) = up.update_v3(&u1)?;
                v3 = v;
                energy + (u1.transpose() * &up.split.left_residual).norm_squared()
            }
            Branch::VFirst => {
                v3 = up.update_v3(&u1)?.0;
                let (u, energy) = up.update_u1(&v3)?;
                u1 = u;
                energy + (&up.split.right_residual * v3.transpose()).norm_squared()
            }
        };
        trace.push(eta_new);
    }

    Ok(FrameSearch {
        u1,
        v3,
        eta_trace: trace,
        iterations: i,
        branch,
    })
}

/// Approximate projection of `Y` onto the tangent cone at `X` to the set of
/// tensors with TT-rank at most `k`.
pub fn approx_project(
    y: &Tensor3,
    x: &CanonicalTtPair,
    k: (usize, usize),
    opts: AlternatingOptions,
) -> Result<ProjectionResult> {
    let dims = x.dims();
    if y.dims() != dims {
        return Err(Error::ShapeMismatch(format!(
            "tensor {:?} against base point {dims:?}",
            y.dims()
        )));
    }
    let r = x.ranks();
    let gaps = validate_bounds(dims, r, k)?;
    let split = TangentSplit::new(y, x)?;
    let tangent_space_norm = split.tangent_norm_squared().sqrt();

    if gaps == (0, 0) {
        let [n1, _, n3] = dims;
        let params = params_from_split(y, x, &split, &Matrix::zeros(n1, 0), &Matrix::zeros(0, n3))?;
        return Ok(ProjectionResult {
            y_tilde: tangent_space_part(&split, x)?,
            params,
            eta_trace: Vec::new(),
            iterations: 0,
            omega: None,
            tangent_space_norm,
            branch: None,
        });
    }

    let search = alternating_uv(y, x, gaps, opts)?;
    let params = params_from_split(y, x, &split, &search.u1, &search.v3)?;
    let y_tilde = assemble(&params, x)?;
    Ok(ProjectionResult {
        y_tilde,
        params,
        eta_trace: search.eta_trace,
        iterations: search.iterations,
        omega: omega_bound(dims, r, k).ok(),
        tangent_space_norm,
        branch: Some(search.branch),
    })
}
