//! Tensor-product spaces and dense operators on them.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest total dimension accepted by [`make_space`].
pub const MAX_DIM: usize = 4096;

/// Ordered tensor product of finite factors. The first factor is the most
/// significant index in the flattened basis.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HilbertSpace {
    factor_dims: Vec<usize>,
    total_dim: usize,
}

impl HilbertSpace {
    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn num_factors(&self) -> usize {
        self.factor_dims.len()
    }

    /// Flattened basis index of a product state given per-factor levels.
    pub fn index_of(&self, levels: &[usize]) -> usize {
        debug_assert_eq!(levels.len(), self.factor_dims.len());
        levels
            .iter()
            .zip(&self.factor_dims)
            .fold(0, |acc, (&l, &d)| acc * d + l)
    }

    /// Per-factor levels of a flattened basis index.
    pub fn levels_of(&self, mut index: usize) -> Vec<usize> {
        let mut levels = vec![0; self.factor_dims.len()];
        for (slot, &d) in levels.iter_mut().zip(&self.factor_dims).rev() {
            *slot = index % d;
            index /= d;
        }
        levels
    }
}

pub fn make_space(factor_dims: &[usize]) -> Result<HilbertSpace> {
    if factor_dims.is_empty() {
        return Err(Error::InvalidDimension(0));
    }
    let mut total: usize = 1;
    for &d in factor_dims {
        if d == 0 {
            return Err(Error::InvalidDimension(d));
        }
        total = total
            .checked_mul(d)
            .filter(|&t| t <= MAX_DIM)
            .ok_or(Error::DimensionOverflow {
                dim: factor_dims.iter().fold(1usize, |a, &b| a.saturating_mul(b)),
                limit: MAX_DIM,
            })?;
    }
    Ok(HilbertSpace {
        factor_dims: factor_dims.to_vec(),
        total_dim: total,
    })
}

/// A dense operator bound to a space.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    space: HilbertSpace,
    matrix: DMatrix<C64>,
}

impl Operator {
    pub fn new(space: &HilbertSpace, matrix: DMatrix<C64>) -> Result<Self> {
        let n = space.total_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(Self {
            space: space.clone(),
            matrix,
        })
    }

    pub fn identity(space: &HilbertSpace) -> Self {
        let n = space.total_dim();
        Self {
            space: space.clone(),
            matrix: DMatrix::identity(n, n),
        }
    }

    pub fn zeros(space: &HilbertSpace) -> Self {
        let n = space.total_dim();
        Self {
            space: space.clone(),
            matrix: DMatrix::zeros(n, n),
        }
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn dagger(&self) -> Self {
        Self {
            space: self.space.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            space: self.space.clone(),
            matrix: &self.matrix * c,
        }
    }

    pub fn compose(&self, rhs: &Operator) -> Result<Self> {
        self.same_space(rhs)?;
        Ok(Self {
            space: self.space.clone(),
            matrix: &self.matrix * &rhs.matrix,
        })
    }

    pub fn plus(&self, rhs: &Operator) -> Result<Self> {
        self.same_space(rhs)?;
        Ok(Self {
            space: self.space.clone(),
            matrix: &self.matrix + &rhs.matrix,
        })
    }

    /// Hermiticity within `rel_tol` relative to the largest entry.
    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        let scale = self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return true;
        }
        let dev = (&self.matrix - self.matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        dev <= rel_tol * scale
    }

    pub(crate) fn same_space(&self, other: &Operator) -> Result<()> {
        if self.space != other.space {
            return Err(Error::ShapeMismatch {
                expected: self.space.total_dim(),
                found: other.space.total_dim(),
            });
        }
        Ok(())
    }
}

/// Lifts a single-factor matrix to the full space, identity elsewhere.
pub fn embed(local: &DMatrix<C64>, factor_index: usize, space: &HilbertSpace) -> Result<Operator> {
    let dims = space.factor_dims();
    if factor_index >= dims.len() {
        return Err(Error::FactorIndex {
            index: factor_index,
            len: dims.len(),
        });
    }
    let d = dims[factor_index];
    if local.nrows() != d || local.ncols() != d {
        return Err(Error::ShapeMismatch {
            expected: d,
            found: local.nrows().max(local.ncols()),
        });
    }
    let left: usize = dims[..factor_index].iter().product();
    let right: usize = dims[factor_index + 1..].iter().product();
    let n = space.total_dim();
    let mut m = DMatrix::zeros(n, n);
    for l in 0..left {
        for r in 0..right {
            for i in 0..d {
                for j in 0..d {
                    let v = local[(i, j)];
                    if v != C64::new(0.0, 0.0) {
                        let row = (l * d + i) * right + r;
                        let col = (l * d + j) * right + r;
                        m[(row, col)] = v;
                    }
                }
            }
        }
    }
    Operator::new(space, m)
}

/// Truncated annihilation operator on `dim` Fock levels.
pub fn destroy(dim: usize) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    m
}

/// `|i><j|` on a `dim`-level factor.
pub fn transition(dim: usize, i: usize, j: usize) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(dim, dim);
    m[(i, j)] = C64::new(1.0, 0.0);
    m
}

pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}
