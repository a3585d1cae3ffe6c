use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::space::{HilbertSpace, Operator, C64};
use crate::error::{Error, Result};

pub const TRACE_TOL: f64 = 1e-9;
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    space: HilbertSpace,
    matrix: DMatrix<C64>,
}

impl DensityMatrix {
    /// Validates trace, Hermiticity and positivity.
    pub fn new(space: &HilbertSpace, matrix: DMatrix<C64>) -> Result<Self> {
        let n = space.total_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                found: matrix.nrows(),
            });
        }
        let rho = Self {
            space: space.clone(),
            matrix,
        };
        rho.check(0.0, TRACE_TOL)?;
        Ok(rho)
    }

    pub(crate) fn from_raw(space: &HilbertSpace, matrix: DMatrix<C64>) -> Self {
        Self {
            space: space.clone(),
            matrix,
        }
    }

    pub fn from_pure(psi: &PureState) -> Self {
        let v = psi.amplitudes();
        Self {
            space: psi.space().clone(),
            matrix: v * v.adjoint(),
        }
    }

    pub fn basis(space: &HilbertSpace, index: usize) -> Self {
        Self::from_pure(&PureState::basis(space, index))
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        SymmetricEigen::new(herm)
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks the density-matrix invariants with the given trace tolerance.
    pub fn check(&self, t: f64, trace_tol: f64) -> Result<()> {
        let tr = self.trace();
        if (tr.re - 1.0).abs() > trace_tol || tr.im.abs() > trace_tol {
            return Err(Error::Invariant {
                t,
                what: format!("trace {tr} differs from 1 by more than {trace_tol:e}"),
            });
        }
        let dev = (&self.matrix - self.matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if dev > HERMITIAN_TOL {
            return Err(Error::Invariant {
                t,
                what: format!("non-Hermitian by {dev:e}"),
            });
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < -POSITIVITY_TOL {
            return Err(Error::Invariant {
                t,
                what: format!("negative eigenvalue {min_eig:e}"),
            });
        }
        Ok(())
    }

    /// Reduced state on the listed factors, in the listed order.
    pub fn partial_trace_keep(&self, keep: &[usize]) -> DMatrix<C64> {
        partial_trace_keep(&self.space, &self.matrix, keep)
    }
}

pub(crate) fn partial_trace_keep(
    space: &HilbertSpace,
    m: &DMatrix<C64>,
    keep: &[usize],
) -> DMatrix<C64> {
    let dims = space.factor_dims();
    let kept_dim: usize = keep.iter().map(|&k| dims[k]).product();
    let mut out = DMatrix::zeros(kept_dim, kept_dim);
    let n = space.total_dim();
    let reduced_index = |levels: &[usize]| keep.iter().fold(0, |acc, &k| acc * dims[k] + levels[k]);
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();
    for i in 0..n {
        let li = space.levels_of(i);
        for j in 0..n {
            let v = m[(i, j)];
            if v == C64::new(0.0, 0.0) {
                continue;
            }
            let lj = space.levels_of(j);
            if traced.iter().all(|&k| li[k] == lj[k]) {
                out[(reduced_index(&li), reduced_index(&lj))] += v;
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    space: HilbertSpace,
    amplitudes: DVector<C64>,
}

impl PureState {
    /// Normalizes the amplitudes; a zero vector is rejected.
    pub fn new(space: &HilbertSpace, amplitudes: DVector<C64>) -> Result<Self> {
        let n = space.total_dim();
        if amplitudes.len() != n {
            return Err(Error::ShapeMismatch {
                expected: n,
                found: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Invariant {
                t: 0.0,
                what: "state vector has zero or non-finite norm".into(),
            });
        }
        Ok(Self {
            space: space.clone(),
            amplitudes: amplitudes / C64::new(norm, 0.0),
        })
    }

    pub(crate) fn from_raw(space: &HilbertSpace, amplitudes: DVector<C64>) -> Self {
        Self {
            space: space.clone(),
            amplitudes,
        }
    }

    pub fn basis(space: &HilbertSpace, index: usize) -> Self {
        let mut v = DVector::zeros(space.total_dim());
        v[index] = C64::new(1.0, 0.0);
        Self {
            space: space.clone(),
            amplitudes: v,
        }
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }
}

/// Anything an expectation value can be taken in.
pub trait QuantumState {
    fn space(&self) -> &HilbertSpace;
    fn expectation(&self, op: &DMatrix<C64>) -> C64;
}

impl QuantumState for DensityMatrix {
    fn space(&self) -> &HilbertSpace {
        &self.space
    }

    fn expectation(&self, op: &DMatrix<C64>) -> C64 {
        // Tr(A rho) without forming the product
        let n = op.nrows();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for k in 0..n {
                acc += op[(i, k)] * self.matrix[(k, i)];
            }
        }
        acc
    }
}

impl QuantumState for PureState {
    fn space(&self) -> &HilbertSpace {
        &self.space
    }

    fn expectation(&self, op: &DMatrix<C64>) -> C64 {
        self.amplitudes.dotc(&(op * &self.amplitudes))
    }
}

pub fn expect<S: QuantumState>(op: &Operator, state: &S) -> Result<C64> {
    if op.space() != state.space() {
        return Err(Error::ShapeMismatch {
            expected: state.space().total_dim(),
            found: op.space().total_dim(),
        });
    }
    Ok(state.expectation(op.matrix()))
}
