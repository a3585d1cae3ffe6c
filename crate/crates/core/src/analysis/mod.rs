//! From click streams to fidelities, thresholds and inferred tables.

pub mod filter;
pub mod herald;
pub mod inference;
pub mod poisson;
pub mod tables;
pub mod tally;
pub mod thresholds;

pub use filter::{filter_afterpulse, filter_stream, DEFAULT_DEAD_NS};
pub use herald::{herald_atoms, segment, swap_heralded, DarkCounts, Segmented, Trial, WindowClass, DEFAULT_MIN_REFLECTIONS};
pub use inference::{
    heralded_gap, infer_pa, ApTarget, ForwardModel, InferenceInput, InferenceReport, InferenceSettings, LossModel, Measured,
    PapTarget, Posterior,
};
pub use poisson::{apply_photons, compose_poisson, heralded_weights, poisson_weights};
pub use tables::{
    build_tables, collect_cells, false_detection_correct, Cell, CorrectedCounts, FalseRate, FidelityEstimate, ProbabilityTable,
    TableReport, TableSettings,
};
pub use tally::Tally;
pub use thresholds::{cardinal_copies_fidelity, classical_threshold, ThresholdKind, ThresholdResult};
