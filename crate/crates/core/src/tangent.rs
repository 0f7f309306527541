//! Parametrization of the tangent cone at a point of TT-rank `(r1, r2)`.
//!
//! Fix the two canonical forms `X = X1′·X2′·X3 = X1·X2″·X3″`. Every element of
//! the tangent cone to the set of tensors with TT-rank at most
//! `(r1 + s1, r2 + s2)` can be written as the sum of six mutually orthogonal
//! TT terms
//!
//! ```text
//! G = W1·X2″·X3″ + X1′·X2′·W3 + X1′·W2·X3″      (tangent space of the manifold)
//!   + U1·V2·X3″  + X1′·U2·V3  + U1·Z2·V3        (rank-increasing directions)
//! ```
//!
//! where `U1 ∈ St(s1, n1)` and `V3ᵀ ∈ St(s2, n3)` are the free frames and the
//! remaining parameters satisfy the orthogonality conditions checked by
//! [`TangentParams::residuals`]. For fixed frames the map from the other six
//! parameters to `G` is linear, and [`closed_form_params`] returns the
//! parameters of the orthogonal projection of `Y` onto that subspace.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    complement_basis, gram_deviation, proj_perp, proj_perp_rows, random_stiefel, ORTHONORMAL_TOL,
};
use crate::tensor3::{contract3, Tensor3};
use crate::ttd::CanonicalTtPair;
use crate::Matrix;

/// Parameters of one tangent-cone element.
///
/// Shapes: `u1` `n1×s1`, `w1` `n1×r1`, `u2` `r1×n2×s2`, `w2` `r1×n2×r2`,
/// `z2` `s1×n2×s2`, `v2` `s1×n2×r2`, `w3` `r2×n3`, `v3` `s2×n3`. A zero gap
/// `s_i = 0` gives empty factors whose terms vanish.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentParams {
    pub u1: Matrix,
    pub w1: Matrix,
    pub u2: Tensor3,
    pub w2: Tensor3,
    pub z2: Tensor3,
    pub v2: Tensor3,
    pub w3: Matrix,
    pub v3: Matrix,
}

/// Residual norms of the parameter constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamResiduals {
    /// `‖U1ᵀU1 − I‖`.
    pub u1_gram: f64,
    /// `‖U1ᵀX1′‖`.
    pub u1_orth: f64,
    /// `‖W1ᵀX1′‖`.
    pub w1_orth: f64,
    /// `‖(U2^R)ᵀX2′^R‖`.
    pub u2_orth: f64,
    /// `‖W3X3″ᵀ‖`.
    pub w3_orth: f64,
    /// `‖V3V3ᵀ − I‖`.
    pub v3_gram: f64,
    /// `‖V3X3″ᵀ‖`.
    pub v3_orth: f64,
    /// `‖V2^L(X2″^L)ᵀ‖`.
    pub v2_orth: f64,
}

impl ParamResiduals {
    pub fn max(&self) -> f64 {
        [
            self.u1_gram,
            self.u1_orth,
            self.w1_orth,
            self.u2_orth,
            self.w3_orth,
            self.v3_gram,
            self.v3_orth,
            self.v2_orth,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

impl TangentParams {
    /// `(s1, s2)`.
    pub fn gaps(&self) -> (usize, usize) {
        (self.u1.ncols(), self.v3.nrows())
    }

    /// All-zero parameters for the given frames.
    pub fn zeros(x: &CanonicalTtPair, u1: Matrix, v3: Matrix) -> Self {
        let [n1, n2, n3] = x.dims();
        let (r1, r2) = x.ranks();
        let (s1, s2) = (u1.ncols(), v3.nrows());
        Self {
            u1,
            w1: Matrix::zeros(n1, r1),
            u2: Tensor3::zeros([r1, n2, s2]),
            w2: Tensor3::zeros([r1, n2, r2]),
            z2: Tensor3::zeros([s1, n2, s2]),
            v2: Tensor3::zeros([s1, n2, r2]),
            w3: Matrix::zeros(r2, n3),
            v3,
        }
    }

    fn check_shapes(&self, x: &CanonicalTtPair) -> Result<()> {
        let [n1, n2, n3] = x.dims();
        let (r1, r2) = x.ranks();
        let (s1, s2) = self.gaps();
        let ok = self.u1.nrows() == n1
            && self.w1.shape() == (n1, r1)
            && self.u2.dims() == [r1, n2, s2]
            && self.w2.dims() == [r1, n2, r2]
            && self.z2.dims() == [s1, n2, s2]
            && self.v2.dims() == [s1, n2, r2]
            && self.w3.shape() == (r2, n3)
            && self.v3.ncols() == n3;
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "tangent parameters with gaps ({s1}, {s2}) do not fit dims {:?} and ranks ({r1}, {r2})",
                x.dims()
            )))
        }
    }

    pub fn residuals(&self, x: &CanonicalTtPair) -> Result<ParamResiduals> {
        self.check_shapes(x)?;
        let x1 = &x.left.first;
        let x2_r = x.left.middle.unfold_right();
        let x2_l = x.right.middle.unfold_left();
        let x3 = &x.right.last;
        Ok(ParamResiduals {
            u1_gram: gram_deviation(&self.u1),
            u1_orth: (self.u1.transpose() * x1).norm(),
            w1_orth: (self.w1.transpose() * x1).norm(),
            u2_orth: (self.u2.unfold_right().transpose() * &x2_r).norm(),
            w3_orth: (&self.w3 * x3.transpose()).norm(),
            v3_gram: gram_deviation(&self.v3.transpose()),
            v3_orth: (&self.v3 * x3.transpose()).norm(),
            v2_orth: (self.v2.unfold_left() * x2_l.transpose()).norm(),
        })
    }

    /// Errors with [`Error::Inadmissible`] if any constraint is violated by
    /// more than `tol` (scaled by the size of the parameter involved).
    pub fn check(&self, x: &CanonicalTtPair, tol: f64) -> Result<()> {
        let r = self.residuals(x)?;
        let s = |norm: f64| tol * norm.max(1.0);
        let checks = [
            ("U1 orthonormality", r.u1_gram, tol),
            ("U1ᵀX1′ = 0", r.u1_orth, tol),
            ("W1ᵀX1′ = 0", r.w1_orth, s(self.w1.norm())),
            ("(U2^R)ᵀX2′^R = 0", r.u2_orth, s(self.u2.norm())),
            ("W3X3″ᵀ = 0", r.w3_orth, s(self.w3.norm())),
            ("V3 orthonormality", r.v3_gram, tol),
            ("V3X3″ᵀ = 0", r.v3_orth, tol),
            ("V2^L(X2″^L)ᵀ = 0", r.v2_orth, s(self.v2.norm())),
        ];
        for (name, value, limit) in checks {
            if value.is_nan() || value > limit {
                return Err(Error::Inadmissible(format!(
                    "{name} violated: residual {value:e} > {limit:e}"
                )));
            }
        }
        Ok(())
    }

    /// Largest relative difference between corresponding parameters.
    pub fn relative_distance(&self, other: &Self) -> f64 {
        fn rel(a: f64, b: f64) -> f64 {
            a / b.max(1e-300)
        }
        let m = |a: &Matrix, b: &Matrix| {
            if a.shape() != b.shape() {
                f64::INFINITY
            } else {
                rel((a - b).norm(), a.norm().max(b.norm()).max(1.0))
            }
        };
        let t = |a: &Tensor3, b: &Tensor3| {
            if a.dims() != b.dims() {
                f64::INFINITY
            } else {
                rel((a - b).norm(), a.norm().max(b.norm()).max(1.0))
            }
        };
        [
            m(&self.u1, &other.u1),
            m(&self.w1, &other.w1),
            t(&self.u2, &other.u2),
            t(&self.w2, &other.w2),
            t(&self.z2, &other.z2),
            t(&self.v2, &other.v2),
            m(&self.w3, &other.w3),
            m(&self.v3, &other.v3),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Admissibility of the free frames: `U1 ∈ St(s1, n1)` with `U1ᵀX1′ = 0`,
/// `V3ᵀ ∈ St(s2, n3)` with `V3X3″ᵀ = 0`.
pub fn check_frames(x: &CanonicalTtPair, u1: &Matrix, v3: &Matrix) -> Result<()> {
    let [n1, _, n3] = x.dims();
    if u1.nrows() != n1 || v3.ncols() != n3 {
        return Err(Error::ShapeMismatch(format!(
            "frames {}x{} and {}x{} for dims {:?}",
            u1.nrows(),
            u1.ncols(),
            v3.nrows(),
            v3.ncols(),
            x.dims()
        )));
    }
    let checks = [
        ("U1 orthonormality", gram_deviation(u1)),
        ("U1ᵀX1′ = 0", (u1.transpose() * &x.left.first).norm()),
        ("V3 orthonormality", gram_deviation(&v3.transpose())),
        ("V3X3″ᵀ = 0", (v3 * x.right.last.transpose()).norm()),
    ];
    for (name, value) in checks {
        if value.is_nan() || value > ORTHONORMAL_TOL {
            return Err(Error::Inadmissible(format!(
                "{name} violated: residual {value:e} > {ORTHONORMAL_TOL:e}"
            )));
        }
    }
    Ok(())
}

fn check_dims(y: &Tensor3, x: &CanonicalTtPair) -> Result<()> {
    if y.dims() != x.dims() {
        return Err(Error::ShapeMismatch(format!(
            "tensor {:?} against base point {:?}",
            y.dims(),
            x.dims()
        )));
    }
    Ok(())
}

/// Frame-independent pieces of a tensor `Y` relative to the base point.
///
/// `w1`, `w2`, `w3` are the tangent-space parameters of `Y`;
/// `left_residual` is `(Y·X3″ᵀ)^L P⊥_{(X2″^L)ᵀ}` (`n1 × n2·r2`) and
/// `right_residual` is `P⊥_{X2′^R}(X1′ᵀ·Y)^R` (`r1·n2 × n3`). The
/// rank-increasing parameters for given frames are `U1ᵀ·left_residual`,
/// `right_residual·V3ᵀ` and `U1ᵀ·Y·V3ᵀ`.
#[derive(Debug, Clone)]
pub struct TangentSplit {
    pub w1: Matrix,
    pub w2: Tensor3,
    pub w3: Matrix,
    pub left_residual: Matrix,
    pub right_residual: Matrix,
}

impl TangentSplit {
    pub fn new(y: &Tensor3, x: &CanonicalTtPair) -> Result<Self> {
        check_dims(y, x)?;
        let x1 = &x.left.first;
        let x2_r = x.left.middle.unfold_right();
        let x2_l = x.right.middle.unfold_left();
        let x3 = &x.right.last;

        let y_x3 = y.right_mul(&x3.transpose())?; // n1 × n2 × r2
        let x1_y = y.left_mul(&x1.transpose())?; // r1 × n2 × n3

        let y_x3_l = y_x3.unfold_left();
        let x1_y_r = x1_y.unfold_right();

        let w1 = proj_perp(x1, &(&y_x3_l * x2_l.transpose()));
        let w2 = y_x3.left_mul(&x1.transpose())?;
        let w3 = proj_perp_rows(&(x2_r.transpose() * &x1_y_r), &x3.transpose());
        let left_residual = proj_perp_rows(&y_x3_l, &x2_l.transpose());
        let right_residual = proj_perp(&x2_r, &x1_y_r);
        Ok(Self {
            w1,
            w2,
            w3,
            left_residual,
            right_residual,
        })
    }

    /// `‖P_T Y‖²` for the tangent space of the fixed-rank manifold.
    pub fn tangent_norm_squared(&self) -> f64 {
        self.w1.norm_squared() + self.w2.norm_squared() + self.w3.norm_squared()
    }
}

/// The six terms of the expansion, in the order
/// `W1·X2″·X3″, X1′·X2′·W3, X1′·W2·X3″, U1·V2·X3″, X1′·U2·V3, U1·Z2·V3`.
pub fn terms(p: &TangentParams, x: &CanonicalTtPair) -> Result<[Tensor3; 6]> {
    p.check_shapes(x)?;
    let (x1p, x2p) = (&x.left.first, &x.left.middle);
    let (x2pp, x3pp) = (&x.right.middle, &x.right.last);
    Ok([
        contract3(&p.w1, x2pp, x3pp)?,
        contract3(x1p, x2p, &p.w3)?,
        contract3(x1p, &p.w2, x3pp)?,
        contract3(&p.u1, &p.v2, x3pp)?,
        contract3(x1p, &p.u2, &p.v3)?,
        contract3(&p.u1, &p.z2, &p.v3)?,
    ])
}

/// Tolerance used by [`assemble`] when validating parameters.
pub const ASSEMBLE_TOL: f64 = 1e-8;

/// Sum of the six orthogonal terms.
pub fn assemble(p: &TangentParams, x: &CanonicalTtPair) -> Result<Tensor3> {
    p.check(x, ASSEMBLE_TOL)?;
    let [a, b, c, d, e, f] = terms(p, x)?;
    Ok(&(&(&a + &b) + &(&c + &d)) + &(&e + &f))
}

/// Block form: `[X1′ U1 W1] · [[X2′ U2 W2]; [0 Z2 V2]; [0 0 X2″]] · [W3; V3; X3″]`.
pub fn assemble_block(p: &TangentParams, x: &CanonicalTtPair) -> Result<Tensor3> {
    p.check(x, ASSEMBLE_TOL)?;
    let [n1, n2, n3] = x.dims();
    let (r1, r2) = x.ranks();
    let (s1, s2) = p.gaps();
    let (rows, cols) = (2 * r1 + s1, 2 * r2 + s2);

    let mut first = Matrix::zeros(n1, rows);
    first.columns_mut(0, r1).copy_from(&x.left.first);
    first.columns_mut(r1, s1).copy_from(&p.u1);
    first.columns_mut(r1 + s1, r1).copy_from(&p.w1);

    let mut last = Matrix::zeros(cols, n3);
    last.rows_mut(0, r2).copy_from(&p.w3);
    last.rows_mut(r2, s2).copy_from(&p.v3);
    last.rows_mut(r2 + s2, r2).copy_from(&x.right.last);

    let mut core = Tensor3::zeros([rows, n2, cols]);
    let mut place = |block: &Tensor3, row0: usize, col0: usize| {
        let [a, m, b] = block.dims();
        for k in 0..b {
            for j in 0..m {
                for i in 0..a {
                    core[(row0 + i, j, col0 + k)] = block[(i, j, k)];
                }
            }
        }
    };
    place(&x.left.middle, 0, 0);
    place(&p.u2, 0, r2);
    place(&p.w2, 0, r2 + s2);
    place(&p.z2, r1, r2);
    place(&p.v2, r1, r2 + s2);
    place(&x.right.middle, r1 + s1, r2 + s2);

    contract3(&first, &core, &last)
}

/// Parameters of a cone element `G` for given frames.
///
/// Uses the full-tensor contractions `G^L ((X2″·X3″)^L)ᵀ` and
/// `((X1′·X2′)^R)ᵀ G^R`, with the projectors that remove the leakage of the
/// other terms. For `G` assembled with the same frames this inverts
/// [`assemble`]; for other `G` it returns the parameters of the component of
/// `G` captured by these frames.
pub fn extract_params(
    g: &Tensor3,
    x: &CanonicalTtPair,
    u1: &Matrix,
    v3: &Matrix,
) -> Result<TangentParams> {
    check_dims(g, x)?;
    check_frames(x, u1, v3)?;
    let [n1, n2, n3] = x.dims();
    let (r1, r2) = x.ranks();
    let (s1, s2) = (u1.ncols(), v3.nrows());
    let x1p = &x.left.first;
    let x3pp = &x.right.last;
    let x2p_r = x.left.middle.unfold_right();
    let x2pp_l = x.right.middle.unfold_left();

    let right_rows = x.right.middle.right_mul(x3pp)?.unfold_left(); // r1 × n2n3
    let left_cols = x.left.middle.left_mul(x1p)?.unfold_right(); // n1n2 × r2

    let w1 = proj_perp(x1p, &(g.unfold_left() * right_rows.transpose()));
    let w3 = proj_perp_rows(
        &(left_cols.transpose() * g.unfold_right()),
        &x3pp.transpose(),
    );
    let g_x3 = g.right_mul(&x3pp.transpose())?;
    let w2 = g_x3.left_mul(&x1p.transpose())?;

    let x1_g_v3 = g.left_mul(&x1p.transpose())?.right_mul(&v3.transpose())?;
    let u2 = Tensor3::fold_right(&proj_perp(&x2p_r, &x1_g_v3.unfold_right()), [r1, n2, s2])?;
    let u1_g_x3 = g_x3.left_mul(&u1.transpose())?;
    let v2 = Tensor3::fold_left(
        &proj_perp_rows(&u1_g_x3.unfold_left(), &x2pp_l.transpose()),
        [s1, n2, r2],
    )?;
    let z2 = g.left_mul(&u1.transpose())?.right_mul(&v3.transpose())?;

    debug_assert_eq!(w1.shape(), (n1, r1));
    debug_assert_eq!(w3.shape(), (r2, n3));
    Ok(TangentParams {
        u1: u1.clone(),
        w1,
        u2,
        w2,
        z2,
        v2,
        w3,
        v3: v3.clone(),
    })
}

/// Parameters of the orthogonal projection of `Y` onto the cone elements
/// sharing the frames `(U1, V3)`.
pub fn closed_form_params(
    y: &Tensor3,
    x: &CanonicalTtPair,
    u1: &Matrix,
    v3: &Matrix,
) -> Result<TangentParams> {
    check_frames(x, u1, v3)?;
    let split = TangentSplit::new(y, x)?;
    params_from_split(y, x, &split, u1, v3)
}

pub(crate) fn params_from_split(
    y: &Tensor3,
    x: &CanonicalTtPair,
    split: &TangentSplit,
    u1: &Matrix,
    v3: &Matrix,
) -> Result<TangentParams> {
    let [_, n2, _] = x.dims();
    let (r1, r2) = x.ranks();
    let (s1, s2) = (u1.ncols(), v3.nrows());
    let u2 = Tensor3::fold_right(&(&split.right_residual * v3.transpose()), [r1, n2, s2])?;
    let v2 = Tensor3::fold_left(&(u1.transpose() * &split.left_residual), [s1, n2, r2])?;
    let z2 = y.left_mul(&u1.transpose())?.right_mul(&v3.transpose())?;
    Ok(TangentParams {
        u1: u1.clone(),
        w1: split.w1.clone(),
        u2,
        w2: split.w2.clone(),
        z2,
        v2,
        w3: split.w3.clone(),
        v3: v3.clone(),
    })
}

/// Haar-random admissible frames: `U1` with `s1` columns orthogonal to `X1′`
/// and `V3` with `s2` rows orthogonal to the rows of `X3″`.
pub fn random_frames<R: Rng + ?Sized>(
    x: &CanonicalTtPair,
    gaps: (usize, usize),
    rng: &mut R,
) -> Result<(Matrix, Matrix)> {
    let q1 = complement_basis(&x.left.first)?;
    let q3 = complement_basis(&x.right.last.transpose())?;
    if gaps.0 > q1.ncols() || gaps.1 > q3.ncols() {
        return Err(Error::InvalidRank(format!(
            "gaps {gaps:?} exceed the complement dimensions ({}, {})",
            q1.ncols(),
            q3.ncols()
        )));
    }
    let u1 = &q1 * random_stiefel(q1.ncols(), gaps.0, rng);
    let v3 = (&q3 * random_stiefel(q3.ncols(), gaps.1, rng)).transpose();
    Ok((u1, v3))
}

/// The feasible point `Y∥(U1, V3)`: `⟨Y − Y∥, Y∥⟩ = 0`.
pub fn y_parallel(y: &Tensor3, x: &CanonicalTtPair, u1: &Matrix, v3: &Matrix) -> Result<Tensor3> {
    assemble(&closed_form_params(y, x, u1, v3)?, x)
}

/// Orthogonal projection onto the tangent space of the fixed-rank manifold at `X`.
pub fn project_tangent_space(y: &Tensor3, x: &CanonicalTtPair) -> Result<Tensor3> {
    let split = TangentSplit::new(y, x)?;
    tangent_space_part(&split, x)
}

pub(crate) fn tangent_space_part(split: &TangentSplit, x: &CanonicalTtPair) -> Result<Tensor3> {
    let a = contract3(&split.w1, &x.right.middle, &x.right.last)?;
    let b = contract3(&x.left.first, &x.left.middle, &split.w3)?;
    let c = contract3(&x.left.first, &split.w2, &x.right.last)?;
    Ok(&(&a + &b) + &c)
}
