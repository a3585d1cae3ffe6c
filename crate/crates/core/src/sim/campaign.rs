//! Campaigns: many trials over the six cardinal preparations.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chain::DetectionChain;
use super::events::{ClickRecord, EventStream, StreamHeader, FORMAT};
use super::trial::TrialOutcome;
use super::sequence::{Layout, Port, SequenceSpec};
use super::trial::{draw_level, g_scale_levels, run_resolved, InstrumentBank, ResolvedTrial, TrialSetup, TrialSpec};
use super::digest;
use crate::error::{Error, Result};
use crate::model::{Axis, Cardinal, SystemParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Atom prepared, then read out by a probe on the prepared axis.
    AtomToPhotonSameAxis,
    /// Atom prepared, then read out by a probe from the ↑z port.
    AtomToPhotonFixed,
    /// Photon written into the atom and read back out.
    DoubleSwap,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::AtomToPhotonSameAxis, Scenario::AtomToPhotonFixed, Scenario::DoubleSwap];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::AtomToPhotonSameAxis => "atom_to_photon_same_axis",
            Scenario::AtomToPhotonFixed => "atom_to_photon_fixed",
            Scenario::DoubleSwap => "double_swap",
        }
    }

    /// Swap-out probe port for a trial preparing `c`.
    pub fn probe(self, c: Cardinal) -> Port {
        match (self, c.axis()) {
            (Scenario::AtomToPhotonSameAxis, Axis::X | Axis::Y) => Port::EquatorPlus,
            _ => Port::UpZ,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown scenario {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignOptions {
    /// Probability that an atom is in the mode volume for a trial.
    pub p_present: f64,
    pub step_tol: f64,
}

impl Default for CampaignOptions {
    fn default() -> Self {
        Self {
            p_present: 1.0,
            step_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Campaign {
    pub stream: EventStream,
    pub truth: Vec<TrialOutcome>,
}

/// Random stream of one trial; independent of execution order.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// A campaign ready to run: header fixed, instruments built. Trials can be
/// generated in any order and in chunks.
#[derive(Clone, Debug)]
pub struct CampaignPlan {
    header: StreamHeader,
    setup: TrialSetup,
    p_present: f64,
    /// Per schedule entry: the empty-cavity trial, then one per coupling level.
    kinds: Vec<Vec<ResolvedTrial>>,
}

impl CampaignPlan {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        scenario: Scenario,
        basis_list: &[Cardinal],
        n_trials: u64,
        params: &SystemParams,
        chain: &DetectionChain,
        sequence: &SequenceSpec,
        seed: u64,
        opts: &CampaignOptions,
    ) -> Result<Self> {
        params.validate()?;
        chain.validate()?;
        sequence.validate()?;
        if basis_list.is_empty() {
            return Err(Error::InvalidParams("basis list is empty".into()));
        }
        if !(0.0..=1.0).contains(&opts.p_present) {
            return Err(Error::InvalidParams("p_present must lie in [0, 1]".into()));
        }
        let header = StreamHeader {
            format: FORMAT.into(),
            seed,
            params_digest: digest(params),
            scenario,
            schedule: basis_list.to_vec(),
            n_trials,
            sequence: sequence.clone(),
            chain: chain.clone(),
            params: params.clone(),
            config_digest: None,
        };
        let mut plan = Self {
            header,
            setup: TrialSetup {
                sequence: sequence.clone(),
                params: params.clone(),
                chain: chain.clone(),
                bank: InstrumentBank::default(),
            },
            p_present: opts.p_present,
            kinds: Vec::new(),
        };
        if n_trials > 0 {
            let specs: Vec<TrialSpec> = (0..basis_list.len() as u64).map(|i| plan.spec(i, true)).collect();
            let requests = TrialSetup::requests(sequence, params, &specs)?;
            plan.setup.bank = InstrumentBank::build(params, &requests, opts.step_tol)?;
            let levels = g_scale_levels(params);
            plan.kinds = specs
                .iter()
                .map(|s| {
                    std::iter::once(0.0)
                        .chain(levels.iter().copied())
                        .map(|g| plan.setup.resolve(s, g))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
        }
        Ok(plan)
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }

    /// Same campaign seen through a different detection chain. The
    /// instrument bank is shared, since it does not depend on the chain.
    pub fn with_chain(&self, chain: &DetectionChain) -> Result<Self> {
        chain.validate()?;
        let mut plan = self.clone();
        plan.header.chain = chain.clone();
        plan.setup.chain = chain.clone();
        Ok(plan)
    }

    /// Records the digest of the configuration behind this campaign in the
    /// stream header.
    pub fn stamp(&mut self, config_digest: &str) {
        self.header.config_digest = Some(config_digest.to_owned());
    }

    pub fn spec(&self, trial: u64, atom_present: bool) -> TrialSpec {
        let prepared = self.header.prepared(trial);
        TrialSpec {
            trial,
            prepared,
            layout: Layout::for_axis(prepared.axis()),
            probe: Some(self.header.scenario.probe(prepared)),
            atom_present,
        }
    }

    /// Runs the trials in `range`, returning their time-sorted clicks and
    /// ground truth.
    pub fn run(&self, range: Range<u64>) -> Result<(Vec<ClickRecord>, Vec<TrialOutcome>)> {
        if range.end > self.header.n_trials {
            return Err(Error::InvalidParams(format!(
                "trial range ends at {} but the campaign has {} trials",
                range.end, self.header.n_trials
            )));
        }
        let results = range
            .into_par_iter()
            .map(|trial| {
                let mut rng = trial_rng(self.header.seed, trial);
                let present = rng.random::<f64>() < self.p_present;
                let kind = &self.kinds[(trial % self.kinds.len() as u64) as usize];
                let level = draw_level(kind.len() - 1, present, &mut rng).map_or(0, |i| i + 1);
                run_resolved(&self.setup, &self.spec(trial, present), &kind[level], &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut records = Vec::new();
        let mut truth = Vec::with_capacity(results.len());
        for (clicks, outcome) in results {
            records.extend(clicks);
            truth.push(outcome);
        }
        records.sort();
        Ok((records, truth))
    }
}

#[allow(clippy::too_many_arguments)]
pub fn run_campaign(
    scenario: Scenario,
    basis_list: &[Cardinal],
    n_trials: u64,
    params: &SystemParams,
    chain: &DetectionChain,
    sequence: &SequenceSpec,
    seed: u64,
    opts: &CampaignOptions,
) -> Result<Campaign> {
    let plan = CampaignPlan::new(scenario, basis_list, n_trials, params, chain, sequence, seed, opts)?;
    let (records, truth) = plan.run(0..n_trials)?;
    Ok(Campaign {
        stream: EventStream {
            header: plan.header,
            records,
        },
        truth,
    })
}
