//! Run configuration: one TOML file, validated in full before anything runs.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use sprint_core::analysis::{InferenceSettings, DEFAULT_DEAD_NS, DEFAULT_MIN_REFLECTIONS};
use sprint_core::model::{Cardinal, SystemParams};
use sprint_core::sim::{digest, CampaignOptions, DetectionChain, Pulse, Role, Scenario, SequenceSpec};

use crate::error::{validation, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub n_trials: u64,
    pub seed: u64,
    /// Output directory; `--out` and `SPRINT_OUT` take precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Prepared states, cycled trial by trial.
    #[serde(default = "all_states")]
    pub basis: Vec<Cardinal>,
    #[serde(default)]
    pub campaign: CampaignOptions,
    pub params: SystemParams,
    pub chain: ChainConfig,
    #[serde(default)]
    pub sequence: SequenceConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

fn all_states() -> Vec<Cardinal> {
    Cardinal::ALL.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub fiber_transmission: f64,
    pub path_efficiency: f64,
    /// Per-detector efficiencies; drawn from `spcm_range` with the run seed
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spcm_efficiencies: Option<Vec<f64>>,
    #[serde(default = "spcm_range")]
    pub spcm_range: [f64; 2],
    pub detectors_per_side: usize,
    pub circulator_split: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defect_loss: Option<[f64; 2]>,
    pub false_click_rate: f64,
    #[serde(default)]
    pub afterpulse_probability: f64,
}

fn spcm_range() -> [f64; 2] {
    DetectionChain::SPCM_RANGE
}

/// Changes to the canonical pulse sequence. A full `pulses` list replaces the
/// canonical one; the `*_mean` keys then apply on top of it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SequenceConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pulses: Option<Vec<Pulse>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub storage_delay: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_tail: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dark_start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detection_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub swap_in_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub swap_out_mean: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub dead_ns: i64,
    pub min_reflections: u32,
    pub bootstrap: usize,
    pub bootstrap_seed: u64,
    /// Wrong-preparation probability removed from single-swap tables;
    /// defaults to the crosstalk `epsilon`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub false_prep: Option<f64>,
    pub inference: InferenceSettings,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            dead_ns: DEFAULT_DEAD_NS,
            min_reflections: DEFAULT_MIN_REFLECTIONS,
            bootstrap: 1000,
            bootstrap_seed: 0,
            false_prep: None,
            inference: InferenceSettings::default(),
        }
    }
}

impl SequenceConfig {
    pub fn resolve(&self) -> SequenceSpec {
        let mut seq = SequenceSpec::canonical();
        if let Some(p) = &self.pulses {
            seq.pulses = p.clone();
        }
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut seq.period, self.period);
        set(&mut seq.storage_delay, self.storage_delay);
        set(&mut seq.window_tail, self.window_tail);
        set(&mut seq.dark_start, self.dark_start);
        for p in &mut seq.pulses {
            let mean = match p.role {
                Role::Detection => self.detection_mean,
                Role::SwapIn => self.swap_in_mean,
                Role::SwapOut => self.swap_out_mean,
                Role::Erasure => None,
            };
            set(&mut p.mean_photons, mean);
        }
        seq
    }

    fn resolved(seq: &SequenceSpec) -> Self {
        Self {
            pulses: Some(seq.pulses.clone()),
            period: Some(seq.period),
            storage_delay: Some(seq.storage_delay),
            window_tail: Some(seq.window_tail),
            dark_start: Some(seq.dark_start),
            ..Default::default()
        }
    }
}

impl ChainConfig {
    fn resolve(&self, seed: u64) -> CliResult<DetectionChain> {
        let n = 2 * self.detectors_per_side;
        let spcm_efficiencies = match &self.spcm_efficiencies {
            Some(e) => e.clone(),
            None => {
                let [lo, hi] = self.spcm_range;
                if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                    return Err(validation(format!("chain.spcm_range: [{lo}, {hi}] is not an interval in [0, 1]")));
                }
                // a stream of its own, away from the per-trial streams
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(u64::MAX);
                (0..n).map(|_| rand::Rng::random_range(&mut rng, lo..=hi)).collect()
            }
        };
        let chain = DetectionChain {
            fiber_transmission: self.fiber_transmission,
            path_efficiency: self.path_efficiency,
            spcm_efficiencies,
            detectors_per_side: self.detectors_per_side,
            circulator_split: self.circulator_split,
            defect_loss: self.defect_loss,
            false_click_rate: self.false_click_rate,
            afterpulse_probability: self.afterpulse_probability,
        };
        chain.validate().map_err(|e| validation(format!("chain: {e}")))?;
        Ok(chain)
    }
}

/// A validated configuration with every derived value filled in.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: RunConfig,
    pub chain: DetectionChain,
    pub sequence: SequenceSpec,
    pub digest: String,
}

impl Resolved {
    pub fn false_prep(&self) -> Option<f64> {
        match self.config.scenario {
            Scenario::DoubleSwap => None,
            _ => Some(self.config.analysis.false_prep.unwrap_or(self.config.params.epsilon)),
        }
    }
}

pub fn parse(text: &str) -> CliResult<RunConfig> {
    let de = toml::Deserializer::new(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let msg = inner.message().trim().to_owned();
        if path == "." || path.is_empty() {
            validation(msg)
        } else {
            validation(format!("{path}: {msg}"))
        }
    })
}

pub fn load(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| validation(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        crate::error::CliError::Validation(m) => validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

impl RunConfig {
    /// Checks every block and fills in the drawn and default values. The
    /// digest covers everything except the output directory.
    pub fn resolve(&self) -> CliResult<Resolved> {
        self.params.validate().map_err(|e| validation(format!("params: {e}")))?;
        if self.basis.is_empty() {
            return Err(validation("basis: at least one state is required"));
        }
        let c = &self.campaign;
        if !(0.0..=1.0).contains(&c.p_present) {
            return Err(validation(format!("campaign.p_present: {} is not a probability", c.p_present)));
        }
        if !(c.step_tol > 0.0) {
            return Err(validation("campaign.step_tol: must be positive"));
        }
        let chain = self.chain.resolve(self.seed)?;
        let sequence = self.sequence.resolve();
        sequence.validate().map_err(|e| validation(format!("sequence: {e}")))?;
        let a = &self.analysis;
        if a.dead_ns < 0 {
            return Err(validation("analysis.dead_ns: must be non-negative"));
        }
        if let Some(q) = a.false_prep {
            if !(0.0..0.5).contains(&q) {
                return Err(validation(format!("analysis.false_prep: {q} must lie in [0, 0.5)")));
            }
        }
        let mut config = self.clone();
        config.chain.spcm_efficiencies = Some(chain.spcm_efficiencies.clone());
        config.sequence = SequenceConfig::resolved(&sequence);
        let mut hashed = config.clone();
        hashed.output_dir = None;
        let digest = digest(&hashed);
        Ok(Resolved {
            config,
            chain,
            sequence,
            digest,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const NOMINAL: &str = include_str!("../profiles/nominal.params");

    #[test]
    fn shipped_profile_resolves() {
        let r = parse(NOMINAL).unwrap().resolve().unwrap();
        assert_eq!(r.config.params, SystemParams::nominal());
        assert_eq!(r.sequence, SequenceSpec::canonical());
        assert_eq!(r.chain.spcm_efficiencies.len(), 10);
        assert!(r.chain.spcm_efficiencies.iter().all(|e| (0.55..=0.60).contains(e)));
    }

    #[test]
    fn unknown_key_is_named_with_its_path() {
        let text = NOMINAL.replace("kappa_i =", "kappa_j =");
        match parse(&text) {
            Err(crate::error::CliError::Validation(m)) => assert!(m.contains("params") && m.contains("kappa_j"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_scenario_is_rejected() {
        let text = NOMINAL.replace("scenario = \"double_swap\"", "scenario = \"triple_swap\"");
        assert!(matches!(parse(&text), Err(crate::error::CliError::Validation(m)) if m.contains("triple_swap")));
    }

    #[test]
    fn out_of_range_values_fail_resolution() {
        let text = NOMINAL.replace("epsilon = 0.045", "epsilon = 0.7");
        assert!(parse(&text).unwrap().resolve().is_err());
    }

    #[test]
    fn output_dir_does_not_enter_the_digest() {
        let mut c = parse(NOMINAL).unwrap();
        let a = c.resolve().unwrap().digest;
        c.output_dir = Some("elsewhere".into());
        assert_eq!(c.resolve().unwrap().digest, a);
        c.seed += 1;
        assert_ne!(c.resolve().unwrap().digest, a);
    }

    #[test]
    fn mean_overrides_apply_by_role() {
        let mut c = parse(NOMINAL).unwrap();
        c.sequence.swap_in_mean = Some(0.3);
        let seq = c.resolve().unwrap().sequence;
        assert_eq!(seq.swap_in().mean_photons, 0.3);
        assert_eq!(seq.swap_out().mean_photons, SequenceSpec::canonical().swap_out().mean_photons);
    }
}
