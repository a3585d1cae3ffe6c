//! Finite-dimensional open-system dynamics.

pub mod jump;
pub mod lindblad;
pub mod ode;
pub mod space;
pub mod state;

pub use jump::{evolve_jump, JumpOptions, JumpRecord, Trajectory};
pub use lindblad::{evolve_master, Coefficient, MasterOptions, MasterSolution, TdOperator, Term};
pub use space::{destroy, embed, kron, make_space, transition, HilbertSpace, Operator, C64, MAX_DIM};
pub use state::{expect, DensityMatrix, PureState, QuantumState};
