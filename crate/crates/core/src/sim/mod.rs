//! Monte Carlo replica of the experiment, from pulse trains to click streams.

pub mod campaign;
pub mod chain;
pub mod events;
pub mod sequence;
pub mod trial;

pub use campaign::{run_campaign, trial_rng, Campaign, CampaignPlan, CampaignOptions, Scenario};
pub use chain::{Delivery, DetectionChain, Side};
pub use events::{read_events, read_truth, write_events, write_header, write_records, write_truth, ClickRecord, EventStream, StreamHeader};
pub use sequence::{Layout, Port, Pulse, Role, SequenceSpec};
pub use trial::{
    draw_level, g_scale_levels, run_resolved, run_trial, sample_pulse_photons, InstrumentBank, PhotonLedger, PulseLabel,
    PulseTruth, ResolvedTrial, TrialOutcome, TrialSetup, TrialSpec,
};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// SHA-256 of the canonical JSON form (object keys sorted) of `value`.
pub fn digest<T: Serialize>(value: &T) -> String {
    let canonical = serde_json::to_value(value).expect("serializable value").to_string();
    Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}
