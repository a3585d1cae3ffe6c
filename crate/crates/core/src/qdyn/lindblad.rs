//! Master-equation integration.
//!
//! Hamiltonians and collapse operators are sums of fixed operators times
//! scalar envelopes, `X(t) = Σ_m c_m(t) X_m`. The scalar form covers coherent
//! input fields entering through a displaced output operator, which is how
//! detector ports see interference between the drive and re-emitted light.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::ode::{Control, Dopri5};
use super::space::{HilbertSpace, Operator, C64};
use super::state::DensityMatrix;
use crate::error::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone)]
pub enum Coefficient {
    Constant(C64),
    Envelope(Arc<dyn Fn(f64) -> C64 + Send + Sync>),
}

impl Coefficient {
    pub fn envelope<F: Fn(f64) -> C64 + Send + Sync + 'static>(f: F) -> Self {
        Coefficient::Envelope(Arc::new(f))
    }

    #[inline]
    pub fn at(&self, t: f64) -> C64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Envelope(f) => f(t),
        }
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Envelope(_) => write!(f, "Envelope(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Term {
    pub op: Operator,
    pub coeff: Coefficient,
}

/// `Σ_m c_m(t) O_m` over one space.
#[derive(Clone, Debug)]
pub struct TdOperator {
    space: HilbertSpace,
    terms: Vec<Term>,
}

impl TdOperator {
    pub fn zero(space: &HilbertSpace) -> Self {
        Self {
            space: space.clone(),
            terms: Vec::new(),
        }
    }

    pub fn constant(op: Operator) -> Self {
        Self {
            space: op.space().clone(),
            terms: vec![Term {
                op,
                coeff: Coefficient::Constant(C64::new(1.0, 0.0)),
            }],
        }
    }

    pub fn with_term(mut self, op: Operator, coeff: Coefficient) -> Result<Self> {
        if op.space() != &self.space {
            return Err(Error::ShapeMismatch {
                expected: self.space.total_dim(),
                found: op.space().total_dim(),
            });
        }
        self.terms.push(Term { op, coeff });
        Ok(self)
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn at(&self, t: f64) -> Operator {
        let n = self.space.total_dim();
        let mut m = DMatrix::zeros(n, n);
        for term in &self.terms {
            m += term.op.matrix() * term.coeff.at(t);
        }
        Operator::new(&self.space, m).expect("terms share the space")
    }
}

impl From<Operator> for TdOperator {
    fn from(op: Operator) -> Self {
        TdOperator::constant(op)
    }
}

/// Non-zero entries of an operator, for products against dense states.
#[derive(Clone, Debug)]
pub(crate) struct SparseOp {
    entries: Vec<(usize, usize, C64)>,
}

impl SparseOp {
    pub(crate) fn from_dense(m: &DMatrix<C64>) -> Self {
        let mut entries = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v != ZERO {
                    entries.push((i, j, v));
                }
            }
        }
        Self { entries }
    }

    /// out += c · S · M, with M and out column-major n×n.
    #[inline]
    fn left(&self, c: C64, m: &[C64], out: &mut [C64], n: usize) {
        for &(i, j, v) in &self.entries {
            let cv = c * v;
            for col in 0..n {
                out[col * n + i] += cv * m[col * n + j];
            }
        }
    }

    /// out += c · S† · M
    #[inline]
    fn left_dagger(&self, c: C64, m: &[C64], out: &mut [C64], n: usize) {
        for &(i, j, v) in &self.entries {
            let cv = c * v.conj();
            for col in 0..n {
                out[col * n + j] += cv * m[col * n + i];
            }
        }
    }

    /// out += c · M · S
    #[inline]
    fn right(&self, c: C64, m: &[C64], out: &mut [C64], n: usize) {
        for &(i, j, v) in &self.entries {
            let cv = c * v;
            let (src, dst) = (i * n, j * n);
            for row in 0..n {
                out[dst + row] += cv * m[src + row];
            }
        }
    }

    /// out += c · M · S†
    #[inline]
    fn right_dagger(&self, c: C64, m: &[C64], out: &mut [C64], n: usize) {
        for &(i, j, v) in &self.entries {
            let cv = c * v.conj();
            let (src, dst) = (j * n, i * n);
            for row in 0..n {
                out[dst + row] += cv * m[src + row];
            }
        }
    }

    /// out += c · S · v for a vector.
    #[inline]
    pub(crate) fn apply(&self, c: C64, v: &[C64], out: &mut [C64]) {
        for &(i, j, x) in &self.entries {
            out[i] += c * x * v[j];
        }
    }

    /// out += c · S† · v
    #[inline]
    pub(crate) fn apply_dagger(&self, c: C64, v: &[C64], out: &mut [C64]) {
        for &(i, j, x) in &self.entries {
            out[j] += c * x.conj() * v[i];
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct SparseTd {
    pub(crate) terms: Vec<(SparseOp, Coefficient)>,
}

impl SparseTd {
    pub(crate) fn new(op: &TdOperator) -> Self {
        Self {
            terms: op
                .terms()
                .iter()
                .map(|t| (SparseOp::from_dense(t.op.matrix()), t.coeff.clone()))
                .collect(),
        }
    }

    pub(crate) fn coeffs(&self, t: f64) -> Vec<C64> {
        self.terms.iter().map(|(_, c)| c.at(t)).collect()
    }
}

/// Generator of the Lindblad flow on flattened density matrices.
pub(crate) struct LindbladKernel {
    pub(crate) n: usize,
    pub(crate) hamiltonian: SparseTd,
    pub(crate) collapses: Vec<SparseTd>,
}

impl LindbladKernel {
    pub(crate) fn new(h: &TdOperator, collapses: &[TdOperator]) -> Result<Self> {
        let space = h.space();
        for c in collapses {
            if c.space() != space {
                return Err(Error::ShapeMismatch {
                    expected: space.total_dim(),
                    found: c.space().total_dim(),
                });
            }
        }
        Ok(Self {
            n: space.total_dim(),
            hamiltonian: SparseTd::new(h),
            collapses: collapses.iter().map(SparseTd::new).collect(),
        })
    }

    /// Writes `dρ/dt` and, per collapse, `L ρ` into `lrho[k]`.
    fn rhs(&self, t: f64, rho: &[C64], drho: &mut [C64], lrho: &mut [Vec<C64>], scratch: &mut Vec<C64>) {
        let n = self.n;
        drho.iter_mut().for_each(|z| *z = ZERO);
        let mi = C64::new(0.0, -1.0);
        for (op, c) in &self.hamiltonian.terms {
            let c = c.at(t);
            if c == ZERO {
                continue;
            }
            op.left(mi * c, rho, drho, n);
            op.right(-mi * c, rho, drho, n);
        }
        let half = C64::new(-0.5, 0.0);
        for (k, col) in self.collapses.iter().enumerate() {
            let cs = col.coeffs(t);
            let x = &mut lrho[k];
            x.iter_mut().for_each(|z| *z = ZERO);
            for ((op, _), &c) in col.terms.iter().zip(&cs) {
                if c != ZERO {
                    op.left(c, rho, x, n);
                }
            }
            // L ρ L†
            for ((op, _), &c) in col.terms.iter().zip(&cs) {
                if c != ZERO {
                    op.right_dagger(c.conj(), x, drho, n);
                }
            }
            // -½ L† (L ρ)
            for ((op, _), &c) in col.terms.iter().zip(&cs) {
                if c != ZERO {
                    op.left_dagger(half * c.conj(), x, drho, n);
                }
            }
            // -½ (ρ L†) L
            scratch.iter_mut().for_each(|z| *z = ZERO);
            for ((op, _), &c) in col.terms.iter().zip(&cs) {
                if c != ZERO {
                    op.right_dagger(c.conj(), rho, scratch, n);
                }
            }
            for ((op, _), &c) in col.terms.iter().zip(&cs) {
                if c != ZERO {
                    op.right(half * c, scratch, drho, n);
                }
            }
        }
    }

    /// out += (L_k ρ) L_j† given `x = L_k ρ`.
    fn sandwich(&self, j: usize, t: f64, x: &[C64], out: &mut [C64]) {
        let col = &self.collapses[j];
        for (op, c) in &col.terms {
            let c = c.at(t);
            if c != ZERO {
                op.right_dagger(c.conj(), x, out, self.n);
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct MasterOptions {
    /// Per-step tolerance of the adaptive stepper.
    pub step_tol: f64,
    /// Bound on `|Tr ρ − 1|` at every output time.
    pub trace_tol: f64,
    /// Channel pairs `(j, k)` for which `∫ L_j ρ L_k† dt` is accumulated.
    pub monitors: Vec<(usize, usize)>,
    /// Times at which envelopes have kinks or jumps.
    pub breakpoints: Vec<f64>,
    /// Projectors onto top Fock levels whose population must stay below
    /// `truncation_limit`.
    pub truncation_guards: Vec<Operator>,
    pub truncation_limit: f64,
    pub max_step: f64,
}

impl Default for MasterOptions {
    fn default() -> Self {
        Self {
            step_tol: 1e-8,
            trace_tol: 1e-7,
            monitors: Vec::new(),
            breakpoints: Vec::new(),
            truncation_guards: Vec::new(),
            truncation_limit: 1e-4,
            max_step: f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MasterSolution {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// Cumulative `∫ ⟨L_k† L_k⟩ dt` per channel at each output time.
    pub emission: Vec<Vec<f64>>,
    /// Final value of each requested monitor.
    pub monitors: Vec<DMatrix<C64>>,
}

pub(crate) struct RawSolution {
    pub(crate) times: Vec<f64>,
    pub(crate) states: Vec<DMatrix<C64>>,
    pub(crate) emission: Vec<Vec<f64>>,
    pub(crate) monitors: Vec<DMatrix<C64>>,
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() || t_grid.windows(2).any(|w| !(w[1] > w[0])) || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::TimeGrid);
    }
    Ok(())
}

/// Linear propagation without physical-state checks; `rho0` may be any
/// operator (used to build superoperators column by column).
pub(crate) fn propagate(
    kernel: &LindbladKernel,
    rho0: &DMatrix<C64>,
    t_grid: &[f64],
    opts: &MasterOptions,
    mut on_output: impl FnMut(f64, &DMatrix<C64>) -> Result<()>,
) -> Result<RawSolution> {
    check_grid(t_grid)?;
    let n = kernel.n;
    let nn = n * n;
    let n_ch = kernel.collapses.len();
    for &(j, k) in &opts.monitors {
        if j >= n_ch || k >= n_ch {
            return Err(Error::FactorIndex {
                index: j.max(k),
                len: n_ch,
            });
        }
    }
    let n_mon = opts.monitors.len();
    let len = nn + n_ch + n_mon * nn;
    let mut y0 = vec![ZERO; len];
    y0[..nn].copy_from_slice(rho0.as_slice());

    let mut lrho: Vec<Vec<C64>> = vec![vec![ZERO; nn]; n_ch];
    let mut scratch = vec![ZERO; nn];
    let monitors = opts.monitors.clone();
    let rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
        let (rho, _) = y.split_at(nn);
        let (drho, rest) = dy.split_at_mut(nn);
        kernel.rhs(t, rho, drho, &mut lrho, &mut scratch);
        let (dem, dmon) = rest.split_at_mut(n_ch);
        for (k, x) in lrho.iter().enumerate() {
            // Tr(L ρ L†) = Σ_ij (Lρ)_ij conj(L_ij)
            let mut tr = ZERO;
            let col = &kernel.collapses[k];
            for (op, c) in &col.terms {
                let c = c.at(t);
                if c == ZERO {
                    continue;
                }
                for &(i, j, v) in &op.entries {
                    tr += x[j * n + i] * (c * v).conj();
                }
            }
            dem[k] = C64::new(tr.re, 0.0);
        }
        for (m, &(j, k)) in monitors.iter().enumerate() {
            let out = &mut dmon[m * nn..(m + 1) * nn];
            out.iter_mut().for_each(|z| *z = ZERO);
            kernel.sandwich(k, t, &lrho[j], out);
        }
    };

    let mut solver = Dopri5::with_tol(opts.step_tol);
    solver.h_max = opts.max_step;
    let mut times = Vec::with_capacity(t_grid.len());
    let mut states = Vec::with_capacity(t_grid.len());
    let mut emission = Vec::with_capacity(t_grid.len());
    let mut next = 0;
    let push = |t: f64, y: &[C64], times: &mut Vec<f64>, states: &mut Vec<DMatrix<C64>>, emission: &mut Vec<Vec<f64>>| {
        times.push(t);
        states.push(DMatrix::from_column_slice(n, n, &y[..nn]));
        emission.push(y[nn..nn + n_ch].iter().map(|z| z.re).collect());
    };
    // Grid points at the start time are emitted before integrating.
    let t0 = t_grid[0];
    push(t0, &y0, &mut times, &mut states, &mut emission);
    on_output(t0, states.last().unwrap())?;
    next += 1;
    let t_end = *t_grid.last().unwrap();
    let mut buf = vec![ZERO; len];
    let y_final = if t_end > t0 {
        solver.integrate(rhs, t0, y0, t_end, &opts.breakpoints, |step| {
            while next < t_grid.len() && t_grid[next] <= step.t1() + 1e-12 * step.t1().abs().max(1.0) {
                step.eval_into(t_grid[next], &mut buf);
                push(t_grid[next], &buf, &mut times, &mut states, &mut emission);
                on_output(t_grid[next], states.last().unwrap())?;
                next += 1;
            }
            Ok(Control::Continue)
        })?
    } else {
        y0
    };
    let monitors = (0..n_mon)
        .map(|m| DMatrix::from_column_slice(n, n, &y_final[nn + n_ch + m * nn..nn + n_ch + (m + 1) * nn]))
        .collect();
    Ok(RawSolution {
        times,
        states,
        emission,
        monitors,
    })
}

/// Removes the anti-Hermitian rounding residue the stepper accumulates.
fn hermitian_part(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Integrates `dρ/dt = −i[H,ρ] + Σ_k (L_k ρ L_k† − ½{L_k†L_k, ρ})` and reports
/// ρ on `t_grid`, checking every output against the density-matrix invariants.
pub fn evolve_master(
    rho0: &DensityMatrix,
    hamiltonian: &TdOperator,
    collapses: &[TdOperator],
    t_grid: &[f64],
    opts: &MasterOptions,
) -> Result<MasterSolution> {
    if hamiltonian.space() != rho0.space() {
        return Err(Error::ShapeMismatch {
            expected: rho0.space().total_dim(),
            found: hamiltonian.space().total_dim(),
        });
    }
    for term in hamiltonian.terms() {
        if let Coefficient::Constant(c) = term.coeff {
            if c.im == 0.0 && !term.op.is_hermitian(1e-12) {
                return Err(Error::InvalidParams("Hamiltonian term is not Hermitian".into()));
            }
        }
    }
    let kernel = LindbladKernel::new(hamiltonian, collapses)?;
    let space = rho0.space().clone();
    let guards: Vec<DMatrix<C64>> = opts.truncation_guards.iter().map(|g| g.matrix().clone()).collect();
    let raw = propagate(&kernel, rho0.matrix(), t_grid, opts, |t, m| {
        let rho = DensityMatrix::from_raw(&space, hermitian_part(m));
        // a truncation overflow also spoils positivity, so report it first
        for g in &guards {
            let p = crate::qdyn::state::QuantumState::expectation(&rho, g).re;
            if p > opts.truncation_limit {
                return Err(Error::Truncation { t, population: p });
            }
        }
        rho.check(t, opts.trace_tol)
    })?;
    Ok(MasterSolution {
        times: raw.times,
        states: raw
            .states
            .into_iter()
            .map(|m| DensityMatrix::from_raw(&space, hermitian_part(&m)))
            .collect(),
        emission: raw.emission,
        monitors: raw.monitors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qdyn::space::{destroy, embed, make_space, transition};

    #[test]
    fn free_evolution_is_identity() {
        let s = make_space(&[3, 2]).unwrap();
        let mut psi = nalgebra::DVector::zeros(6);
        psi[1] = C64::new(0.6, 0.0);
        psi[4] = C64::new(0.0, 0.8);
        let rho0 = DensityMatrix::from_pure(&crate::qdyn::state::PureState::new(&s, psi).unwrap());
        let sol = evolve_master(
            &rho0,
            &TdOperator::zero(&s),
            &[],
            &[0.0, 1.0, 5.0, 10.0],
            &MasterOptions::default(),
        )
        .unwrap();
        for rho in &sol.states {
            assert!((rho.matrix() - rho0.matrix()).norm() < 1e-14);
        }
    }

    #[test]
    fn two_level_decay_matches_exponential() {
        let s = make_space(&[2]).unwrap();
        let gamma: f64 = 0.37;
        let lower = embed(&transition(2, 0, 1), 0, &s).unwrap().scale(C64::new((2.0 * gamma).sqrt(), 0.0));
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
        let sol = evolve_master(
            &DensityMatrix::basis(&s, 1),
            &TdOperator::zero(&s),
            &[lower.into()],
            &grid,
            &MasterOptions::default(),
        )
        .unwrap();
        for (t, rho) in sol.times.iter().zip(&sol.states) {
            let pe = rho.matrix()[(1, 1)].re;
            assert!((pe - (-2.0 * gamma * t).exp()).abs() < 1e-6, "t={t}");
        }
        for (t, em) in sol.times.iter().zip(&sol.emission) {
            assert!((em[0] - (1.0 - (-2.0 * gamma * t).exp())).abs() < 1e-6);
        }
    }

    #[test]
    fn monitor_tracks_emitted_state() {
        // decay |e> -> |g|: the accumulated jump state is |g><g|
        let s = make_space(&[2]).unwrap();
        let lower = embed(&transition(2, 0, 1), 0, &s).unwrap();
        let opts = MasterOptions {
            monitors: vec![(0, 0)],
            ..Default::default()
        };
        let sol = evolve_master(&DensityMatrix::basis(&s, 1), &TdOperator::zero(&s), &[lower.into()], &[0.0, 40.0], &opts).unwrap();
        assert!((sol.monitors[0][(0, 0)].re - 1.0).abs() < 1e-6);
    }

    #[test]
    fn non_increasing_grid_rejected() {
        let s = make_space(&[2]).unwrap();
        let r = evolve_master(&DensityMatrix::basis(&s, 0), &TdOperator::zero(&s), &[], &[0.0, 1.0, 1.0], &MasterOptions::default());
        assert!(matches!(r, Err(Error::TimeGrid)));
    }

    #[test]
    fn truncation_guard_fires_on_strong_drive() {
        let s = make_space(&[3]).unwrap();
        let a = embed(&destroy(3), 0, &s).unwrap();
        let drive = a.plus(&a.dagger()).unwrap().scale(C64::new(2.0, 0.0));
        let top = embed(&transition(3, 2, 2), 0, &s).unwrap();
        let opts = MasterOptions {
            truncation_guards: vec![top],
            ..Default::default()
        };
        let r = evolve_master(&DensityMatrix::basis(&s, 0), &drive.into(), &[], &[0.0, 1.0, 2.0], &opts);
        assert!(matches!(r, Err(Error::Truncation { .. })), "{r:?}");
    }
}
