//! Dense third-order tensors.
//!
//! Entries are stored first-index-fastest: `T(i, j, k)` lives at
//! `i + n1 * (j + n2 * k)`. With that order the left unfolding
//! `n1 × (n2·n3)` and the right unfolding `(n1·n2) × n3` are both plain
//! column-major reinterpretations of the same buffer.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::Matrix;

/// Dimensions `(n1, n2, n3)` of a third-order tensor.
pub type Dims = [usize; 3];

/// Dense real tensor of order three.
///
/// Zero-sized modes are allowed; they show up as the empty factors of
/// tangent parameters when a rank gap vanishes.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: Dims,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn new(dims: Dims, data: Vec<f64>) -> Result<Self> {
        let len = dims.iter().product::<usize>();
        if data.len() != len {
            return Err(Error::ShapeMismatch(format!(
                "{} entries for dims {:?} (expected {})",
                data.len(),
                dims,
                len
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Dims) -> Self {
        Self {
            dims,
            data: vec![0.0; dims.iter().product()],
        }
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dims.iter().product());
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { dims, data }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Raw entries in first-index-fastest order.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.dims[0] && j < self.dims[1] && k < self.dims[2]);
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    /// Left unfolding `n1 × (n2·n3)`; entry `(i, j + n2·k)` is `T(i, j, k)`.
    pub fn unfold_left(&self) -> Matrix {
        let [n1, n2, n3] = self.dims;
        Matrix::from_column_slice(n1, n2 * n3, &self.data)
    }

    /// Right unfolding `(n1·n2) × n3`; entry `(i + n1·j, k)` is `T(i, j, k)`.
    pub fn unfold_right(&self) -> Matrix {
        let [n1, n2, n3] = self.dims;
        Matrix::from_column_slice(n1 * n2, n3, &self.data)
    }

    /// Inverse of [`Tensor3::unfold_left`].
    pub fn fold_left(m: &Matrix, dims: Dims) -> Result<Self> {
        let [n1, n2, n3] = dims;
        if m.nrows() != n1 || m.ncols() != n2 * n3 {
            return Err(Error::ShapeMismatch(format!(
                "left fold of a {}x{} matrix into {:?}",
                m.nrows(),
                m.ncols(),
                dims
            )));
        }
        Ok(Self {
            dims,
            data: m.as_slice().to_vec(),
        })
    }

    /// Inverse of [`Tensor3::unfold_right`].
    pub fn fold_right(m: &Matrix, dims: Dims) -> Result<Self> {
        let [n1, n2, n3] = dims;
        if m.nrows() != n1 * n2 || m.ncols() != n3 {
            return Err(Error::ShapeMismatch(format!(
                "right fold of a {}x{} matrix into {:?}",
                m.nrows(),
                m.ncols(),
                dims
            )));
        }
        Ok(Self {
            dims,
            data: m.as_slice().to_vec(),
        })
    }

    /// `M · T`: contracts the first mode with the columns of `m` (`p × n1`),
    /// giving a `p × n2 × n3` tensor.
    pub fn left_mul(&self, m: &Matrix) -> Result<Self> {
        let [n1, n2, n3] = self.dims;
        if m.ncols() != n1 {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix applied to mode 1 of {:?}",
                m.nrows(),
                m.ncols(),
                self.dims
            )));
        }
        Self::fold_left(&(m * self.unfold_left()), [m.nrows(), n2, n3])
    }

    /// `T · M`: contracts the last mode with the rows of `m` (`n3 × q`),
    /// giving an `n1 × n2 × q` tensor.
    pub fn right_mul(&self, m: &Matrix) -> Result<Self> {
        let [n1, n2, n3] = self.dims;
        if m.nrows() != n3 {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix applied to mode 3 of {:?}",
                m.nrows(),
                m.ncols(),
                self.dims
            )));
        }
        Self::fold_right(&(self.unfold_right() * m), [n1, n2, m.ncols()])
    }

    /// Frobenius inner product.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        if self.dims != other.dims {
            return Err(Error::ShapeMismatch(format!(
                "inner product of {:?} and {:?}",
                self.dims, other.dims
            )));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn norm_squared(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            dims: self.dims,
            data: self.data.iter().map(|a| c * a).collect(),
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.dims, other.dims, "tensor dimensions differ");
        Self {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

/// `A · B · C` for a matrix `A` (`n1 × r1`), a core `B` (`r1 × n2 × r2`) and a
/// matrix `C` (`r2 × n3`). Evaluated as `A (B · C)^L` with `B · C = [B^R C]`.
pub fn contract3(a: &Matrix, b: &Tensor3, c: &Matrix) -> Result<Tensor3> {
    let [r1, _, r2] = b.dims();
    if a.ncols() != r1 || c.nrows() != r2 {
        return Err(Error::ShapeMismatch(format!(
            "contraction of {}x{}, {:?}, {}x{}",
            a.nrows(),
            a.ncols(),
            b.dims(),
            c.nrows(),
            c.ncols()
        )));
    }
    b.right_mul(c)?.left_mul(a)
}

impl Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;

    fn index(&self, (i, j, k): (usize, usize, usize)) -> &f64 {
        &self.data[self.offset(i, j, k)]
    }
}

impl IndexMut<(usize, usize, usize)> for Tensor3 {
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut f64 {
        let o = self.offset(i, j, k);
        &mut self.data[o]
    }
}

impl Add for &Tensor3 {
    type Output = Tensor3;

    fn add(self, rhs: &Tensor3) -> Tensor3 {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Tensor3 {
    type Output = Tensor3;

    fn sub(self, rhs: &Tensor3) -> Tensor3 {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Neg for &Tensor3 {
    type Output = Tensor3;

    fn neg(self) -> Tensor3 {
        self.scale(-1.0)
    }
}

impl Mul<&Tensor3> for f64 {
    type Output = Tensor3;

    fn mul(self, rhs: &Tensor3) -> Tensor3 {
        rhs.scale(self)
    }
}
