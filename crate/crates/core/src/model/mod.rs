//! The swap-gate model: a Λ-atom chirally coupled to two counter-propagating
//! resonator modes.

pub mod assembly;
pub mod channel;
pub mod envelope;
pub mod interferometer;
pub mod params;
pub mod prepare;
pub mod qubit;
pub mod scatter;

pub use assembly::{build_system, build_system_with_source, ChannelTag, Input, ModelAssembly};
pub use envelope::PulseShape;
pub use interferometer::{beam_splitter, interferometer, Direction};
pub use params::{gamma_1d, mhz_to_rad_per_ns, Rates, SystemParams};
pub use qubit::{bloch_of, flip_frame, state_fidelity, AtomicQubit, Axis, Cardinal, PhotonicQubit};
pub use scatter::{scatter_analytic, Mode, Pole, ScatterOutcome};
pub use channel::{sprint_channel, ChannelOptions, ChannelOutcome, Instrument, PhotonSource};
pub use prepare::{prepare_atom, Preparation, PreparationQuality, PreparationRecipe, PUMPED_STATE};
