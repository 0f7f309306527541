//! Reference solvers for the exact projection onto the tangent cone.
//!
//! For fixed frames the optimal remaining parameters are known in closed
//! form, so the projection reduces to maximizing `‖Y∥(U1, V3)‖` over the two
//! Stiefel manifolds. Two independent maximizers are offered: random
//! multistart of the alternating SVD iteration, and an exhaustive angle grid
//! for the smallest configurations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::complement_basis;
use crate::projection::{alternating_uv, alternating_uv_from, AlternatingOptions};
use crate::tangent::{random_frames, tangent_space_part, y_parallel, TangentSplit};
use crate::tensor3::Tensor3;
use crate::ttd::CanonicalTtPair;
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    Grid,
    Multistart,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub y_hat: Tensor3,
    /// `‖Ŷ‖`
    pub value: f64,
    /// Maximizing `(U1, V3)`.
    pub best_frames: (Matrix, Matrix),
    pub starts_used: usize,
    pub method: OracleMethod,
}

const MULTISTART_ITERS: usize = 300;
const MULTISTART_REL_EPS: f64 = 1e-13;

fn gaps_of(x: &CanonicalTtPair, k: (usize, usize)) -> Result<(usize, usize)> {
    let [n1, _, n3] = x.dims();
    let (r1, r2) = x.ranks();
    if k.0 < r1 || k.1 < r2 || k.0 - r1 > n1 - r1 || k.1 - r2 > n3 - r2 {
        return Err(Error::InvalidRank(format!(
            "rank bound {k:?} incompatible with TT-rank ({r1}, {r2}) in dims {:?}",
            x.dims()
        )));
    }
    Ok((k.0 - r1, k.1 - r2))
}

fn finish(
    y: &Tensor3,
    x: &CanonicalTtPair,
    u1: Matrix,
    v3: Matrix,
    starts_used: usize,
    method: OracleMethod,
) -> Result<OracleResult> {
    let y_hat = y_parallel(y, x, &u1, &v3)?;
    Ok(OracleResult {
        value: y_hat.norm(),
        y_hat,
        best_frames: (u1, v3),
        starts_used,
        method,
    })
}

fn smooth_point(y: &Tensor3, x: &CanonicalTtPair, method: OracleMethod) -> Result<OracleResult> {
    let [n1, _, n3] = x.dims();
    let y_hat = tangent_space_part(&TangentSplit::new(y, x)?, x)?;
    Ok(OracleResult {
        value: y_hat.norm(),
        y_hat,
        best_frames: (Matrix::zeros(n1, 0), Matrix::zeros(0, n3)),
        starts_used: 0,
        method,
    })
}

/// Best of `n_starts` runs of the alternating iteration. Start 0 uses the
/// default full-complement frames; the rest use Haar-random admissible
/// frames drawn from `seed`. Ties keep the lowest start index.
pub fn exact_project_multistart(
    y: &Tensor3,
    x: &CanonicalTtPair,
    k: (usize, usize),
    n_starts: usize,
    seed: u64,
) -> Result<OracleResult> {
    if n_starts == 0 {
        return Err(Error::InvalidRank(
            "multistart needs at least one start".into(),
        ));
    }
    let gaps = gaps_of(x, k)?;
    if gaps == (0, 0) {
        return smooth_point(y, x, OracleMethod::Multistart);
    }
    let opts = AlternatingOptions {
        eps: MULTISTART_REL_EPS * y.norm_squared().max(f64::MIN_POSITIVE),
        i_max: MULTISTART_ITERS,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut best: Option<(f64, Matrix, Matrix)> = None;
    for start in 0..n_starts {
        let search = if start == 0 {
            alternating_uv(y, x, gaps, opts)?
        } else {
            let (u1, v3) = random_frames(x, gaps, &mut rng)?;
            alternating_uv_from(y, x, gaps, u1, v3, opts)?
        };
        let eta = *search.eta_trace.last().expect("at least one iteration");
        if best.as_ref().is_none_or(|(b, _, _)| eta > *b) {
            best = Some((eta, search.u1, search.v3));
        }
    }
    let (_, u1, v3) = best.expect("n_starts > 0");
    finish(y, x, u1, v3, n_starts, OracleMethod::Multistart)
}

/// Precomputed quadratic forms of `‖Y∥‖² − ‖P_T Y‖²` in complement coordinates.
struct GridObjective {
    /// `Q1ᵀ·left_residual`, `d1 × n2·r2`
    left: Matrix,
    /// `right_residual·Q3`, `r1·n2 × d3`
    right: Matrix,
    /// `Q1ᵀ·Y(:, j, :)·Q3` for every middle index `j`
    slices: Vec<Matrix>,
}

impl GridObjective {
    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut total = 0.0;
        for col in self.left.column_iter() {
            let v: f64 = col.iter().zip(a).map(|(c, w)| c * w).sum();
            total += v * v;
        }
        for row in self.right.row_iter() {
            let v: f64 = row.iter().zip(b).map(|(c, w)| c * w).sum();
            total += v * v;
        }
        for c in &self.slices {
            let mut v = 0.0;
            for (p, ap) in a.iter().enumerate() {
                for (q, bq) in b.iter().enumerate() {
                    v += ap * c[(p, q)] * bq;
                }
            }
            total += v * v;
        }
        total
    }
}

/// Unit vector in `d ≤ 2` dimensions at angle `t` (constant when `d = 1`).
fn direction(d: usize, t: f64) -> Vec<f64> {
    if d == 1 {
        vec![1.0]
    } else {
        vec![t.cos(), t.sin()]
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..60 {
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    if fa >= fb {
        a
    } else {
        b
    }
}

/// Exhaustive search over `θ_i = 2πi/resolution` for both frames, followed
/// by golden-section refinement within one cell.
///
/// Only for single-column gaps in complements of dimension at most two, where
/// each frame is parametrized by one angle.
pub fn exact_project_grid(
    y: &Tensor3,
    x: &CanonicalTtPair,
    k: (usize, usize),
    resolution: usize,
) -> Result<OracleResult> {
    let gaps = gaps_of(x, k)?;
    let [n1, n2, n3] = x.dims();
    let (r1, r2) = x.ranks();
    let (d1, d3) = (n1 - r1, n3 - r2);
    if gaps != (1, 1) || d1 > 2 || d3 > 2 {
        return Err(Error::InvalidRank(format!(
            "grid search needs unit gaps and complements of dimension ≤ 2, got gaps {gaps:?}, \
             complements ({d1}, {d3})"
        )));
    }
    if resolution < 4 {
        return Err(Error::InvalidRank(format!(
            "grid resolution {resolution} below 4"
        )));
    }
    let split = TangentSplit::new(y, x)?;
    let q1 = complement_basis(&x.left.first)?;
    let q3 = complement_basis(&x.right.last.transpose())?;
    let slices = (0..n2)
        .map(|j| {
            let yj = Matrix::from_fn(n1, n3, |i, l| y[(i, j, l)]);
            q1.transpose() * yj * &q3
        })
        .collect();
    let obj = GridObjective {
        left: q1.transpose() * &split.left_residual,
        right: &split.right_residual * &q3,
        slices,
    };

    let step = 2.0 * std::f64::consts::PI / resolution as f64;
    let steps = |d: usize| if d == 1 { 1 } else { resolution };
    let dirs3: Vec<Vec<f64>> = (0..steps(d3))
        .map(|i| direction(d3, step * i as f64))
        .collect();
    let (mut best, mut bt, mut bp) = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..steps(d1) {
        let t = step * i as f64;
        let a = direction(d1, t);
        for (j, b) in dirs3.iter().enumerate() {
            let v = obj.eval(&a, b);
            if v > best {
                (best, bt, bp) = (v, t, step * j as f64);
            }
        }
    }
    for _ in 0..3 {
        if d1 == 2 {
            let b = direction(d3, bp);
            bt = golden_max(|t| obj.eval(&direction(2, t), &b), bt - step, bt + step);
        }
        if d3 == 2 {
            let a = direction(d1, bt);
            bp = golden_max(|p| obj.eval(&a, &direction(2, p)), bp - step, bp + step);
        }
    }
    let a = Matrix::from_vec(d1, 1, direction(d1, bt));
    let b = Matrix::from_vec(d3, 1, direction(d3, bp));
    let u1 = &q1 * a;
    let v3 = (&q3 * b).transpose();
    let grid_points = steps(d1) * steps(d3);
    finish(y, x, u1, v3, grid_points, OracleMethod::Grid)
}
