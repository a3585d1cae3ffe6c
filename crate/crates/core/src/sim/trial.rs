//! One repetition of the sequence: photons in, atom updated, clicks out.

use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chain::{Delivery, DetectionChain, Side};
use super::events::ClickRecord;
use super::sequence::{Layout, Port, Pulse, Role, SequenceSpec};
use crate::error::{Error, Result};
use crate::model::{bloch_of, Cardinal, Instrument, PulseShape, SystemParams};
use crate::qdyn::C64;

/// Number of bins used to discretize a per-trial coupling scale.
pub const G_SCALE_BINS: usize = 8;
const AFTERPULSE_DELAY_NS: [f64; 2] = [20.0, 200.0];

pub fn sample_pulse_photons<R: Rng>(pulse: &Pulse, rng: &mut R) -> u32 {
    if pulse.mean_photons <= 0.0 {
        return 0;
    }
    let d = Poisson::new(pulse.mean_photons).expect("validated mean");
    d.sample(rng) as u32
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseLabel {
    Reflected,
    Transmitted,
    NoClick,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseTruth {
    pub role: Role,
    pub photons: u32,
    /// Photons leaving the resonator toward each bank.
    pub exits: [u32; 2],
    pub cavity_lost: u32,
    /// Signal clicks on each bank, background excluded.
    pub clicks: [u32; 2],
    /// Reflection bookkeeping for pole-port pulses.
    pub label: Option<PulseLabel>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhotonLedger {
    pub injected: u64,
    pub cavity_loss: u64,
    pub chain_loss: u64,
    pub detected: u64,
}

/// Simulator ground truth for one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: u64,
    pub atom_present: bool,
    pub prepared: Cardinal,
    pub g_scale: f64,
    pub initial_atom: Cardinal,
    pub pulses: Vec<PulseTruth>,
    /// Logical Bloch vector of the atom after the sequence.
    pub final_atom_bloch: [f64; 3],
    pub photons: PhotonLedger,
    pub background_clicks: u32,
    pub afterpulses: u32,
}

#[derive(Clone, Debug)]
struct BankEntry {
    shape: PulseShape,
    photon: Vector2<C64>,
    g_scale: f64,
    instrument: Instrument,
}

/// Per-photon instruments for every pulse shape, input state and coupling
/// scale a campaign needs.
#[derive(Clone, Debug, Default)]
pub struct InstrumentBank {
    entries: Vec<BankEntry>,
}

fn same_photon(a: &Vector2<C64>, b: &Vector2<C64>) -> bool {
    (a - b).norm() < 1e-12
}

impl InstrumentBank {
    /// Builds instruments for the distinct `(duration, photon, g_scale)`
    /// requests in parallel.
    pub fn build(params: &SystemParams, requests: &[(PulseShape, Vector2<C64>, f64)], step_tol: f64) -> Result<Self> {
        let mut unique: Vec<(PulseShape, Vector2<C64>, f64)> = Vec::new();
        for r in requests {
            if !unique.iter().any(|u| u.0 == r.0 && same_photon(&u.1, &r.1) && u.2 == r.2) {
                unique.push(*r);
            }
        }
        let entries = unique
            .par_iter()
            .map(|(shape, photon, g_scale)| {
                let p = params.with_g_scale(*g_scale);
                let instrument = Instrument::build(&p, photon[1], photon[0], shape, step_tol)?;
                Ok(BankEntry {
                    shape: *shape,
                    photon: *photon,
                    g_scale: *g_scale,
                    instrument,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, shape: &PulseShape, photon: &Vector2<C64>, g_scale: f64) -> Result<&Instrument> {
        self.index(shape, photon, g_scale).map(|i| &self.entries[i].instrument)
    }

    fn index(&self, shape: &PulseShape, photon: &Vector2<C64>, g_scale: f64) -> Result<usize> {
        self.entries
            .iter()
            .position(|e| e.shape == *shape && e.g_scale == g_scale && same_photon(&e.photon, photon))
            .ok_or_else(|| {
                Error::InvalidParams(format!("no instrument for a {} ns pulse at g scale {g_scale}", shape.duration))
            })
    }
}

/// Bank entry and read-out basis of every pulse for one kind of trial at one
/// coupling scale.
#[derive(Clone, Debug)]
pub struct ResolvedTrial {
    pub g_scale: f64,
    steps: Vec<(usize, [Vector2<C64>; 2], Option<Side>)>,
}

/// Draws the coupling-scale level of a trial: `None` for an empty cavity,
/// otherwise an index into the levels. Consumes a draw only when there is a
/// choice.
pub fn draw_level<R: Rng>(n_levels: usize, atom_present: bool, rng: &mut R) -> Option<usize> {
    if !atom_present {
        None
    } else if n_levels == 1 {
        Some(0)
    } else {
        Some(rng.random_range(0..n_levels))
    }
}

/// Coupling scales a trial can draw: the bin centres of the configured range,
/// or just 1.
pub fn g_scale_levels(params: &SystemParams) -> Vec<f64> {
    match params.g_scale_range {
        None => vec![1.0],
        Some([lo, hi]) => (0..G_SCALE_BINS)
            .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / G_SCALE_BINS as f64)
            .collect(),
    }
}

/// Everything shared by the trials of one campaign.
#[derive(Clone, Debug)]
pub struct TrialSetup {
    pub sequence: SequenceSpec,
    pub params: SystemParams,
    pub chain: DetectionChain,
    pub bank: InstrumentBank,
}

/// What distinguishes one trial from another.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialSpec {
    pub trial: u64,
    pub prepared: Cardinal,
    pub layout: Layout,
    /// Port of the swap-out probe, overriding the sequence.
    pub probe: Option<Port>,
    pub atom_present: bool,
}

impl TrialSetup {
    /// Port of pulse `p` in this trial.
    pub fn port(&self, p: &Pulse, spec: &TrialSpec) -> Port {
        match (p.role, spec.probe) {
            (Role::SwapOut, Some(port)) => port,
            _ => p.port,
        }
    }

    /// Bank basis for pulse `p`: swap-out light passes the layout optics,
    /// everything else is read in the pole basis.
    pub fn readout(&self, p: &Pulse, spec: &TrialSpec) -> [Vector2<C64>; 2] {
        if p.role == Role::SwapOut {
            spec.layout.basis()
        } else {
            Layout::Poles.basis()
        }
    }

    /// Instrument requests for every trial kind in `specs`.
    pub fn requests(sequence: &SequenceSpec, params: &SystemParams, specs: &[TrialSpec]) -> Result<Vec<(PulseShape, Vector2<C64>, f64)>> {
        let mut levels = g_scale_levels(params);
        levels.push(0.0);
        let mut out = Vec::new();
        for spec in specs {
            for p in &sequence.pulses {
                let port = match (p.role, spec.probe) {
                    (Role::SwapOut, Some(port)) => port,
                    _ => p.port,
                };
                let q = Pulse { port, ..p.clone() };
                let photon = q.photon(&spec.layout, spec.prepared);
                let shape = p.shape()?;
                for &g in &levels {
                    out.push((shape, photon, g));
                }
            }
        }
        Ok(out)
    }
}

impl TrialSetup {
    pub fn resolve(&self, spec: &TrialSpec, g_scale: f64) -> Result<ResolvedTrial> {
        let steps = self
            .sequence
            .pulses
            .iter()
            .map(|p| {
                let q = Pulse {
                    port: self.port(p, spec),
                    ..p.clone()
                };
                let photon = q.photon(&spec.layout, spec.prepared);
                let idx = self.bank.index(&p.shape()?, &photon, g_scale)?;
                Ok((idx, self.readout(p, spec), q.reflection_side()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ResolvedTrial { g_scale, steps })
    }
}

fn prob(m: &Matrix2<C64>) -> f64 {
    m.trace().re.max(0.0)
}

/// Runs one trial with its own random stream. Clicks are stamped with the
/// trial offset `trial × period`.
pub fn run_trial<R: Rng>(setup: &TrialSetup, spec: &TrialSpec, rng: &mut R) -> Result<(Vec<ClickRecord>, TrialOutcome)> {
    let levels = g_scale_levels(&setup.params);
    let g_scale = draw_level(levels.len(), spec.atom_present, rng).map_or(0.0, |i| levels[i]);
    let resolved = setup.resolve(spec, g_scale)?;
    run_resolved(setup, spec, &resolved, rng)
}

/// As [`run_trial`], with the coupling scale already drawn and the pulses
/// resolved against the bank.
pub fn run_resolved<R: Rng>(
    setup: &TrialSetup,
    spec: &TrialSpec,
    resolved: &ResolvedTrial,
    rng: &mut R,
) -> Result<(Vec<ClickRecord>, TrialOutcome)> {
    let seq = &setup.sequence;
    let chain = &setup.chain;
    let offset = spec.trial as f64 * seq.period;
    let g_scale = resolved.g_scale;
    let initial_atom = if rng.random::<bool>() { Cardinal::UpZ } else { Cardinal::DownZ };
    let mut rho = initial_atom.projector();
    let mut clicks = Vec::new();
    let mut ledger = PhotonLedger::default();
    let mut pulses = Vec::with_capacity(seq.pulses.len());
    let mut afterpulses = 0;
    let stamp = |t: f64, id: usize| ClickRecord {
        t_ns: (offset + t).round() as i64,
        detector_id: id as u32,
        side: chain.detector_side(id),
    };

    for (p, (idx, basis, reflection)) in seq.pulses.iter().zip(&resolved.steps) {
        let inst = &setup.bank.entries[*idx].instrument;
        let k = sample_pulse_photons(p, rng);
        let mut truth = PulseTruth {
            role: p.role,
            photons: k,
            exits: [0; 2],
            cavity_lost: 0,
            clicks: [0; 2],
            label: None,
        };
        ledger.injected += k as u64;
        for _ in 0..k {
            let outs = [inst.detect(&rho, &basis[0]), inst.detect(&rho, &basis[1]), inst.lose(&rho)];
            let ps = [prob(&outs[0]), prob(&outs[1]), prob(&outs[2])];
            let total: f64 = ps.iter().sum();
            if !(total > 0.0) {
                return Err(Error::Invariant {
                    t: p.start,
                    what: "instrument with no outcome probability".into(),
                });
            }
            let mut u = rng.random::<f64>() * total;
            let mut pick = 2;
            for (i, pi) in ps.iter().enumerate() {
                if u < *pi {
                    pick = i;
                    break;
                }
                u -= pi;
            }
            rho = outs[pick] / C64::new(ps[pick], 0.0);
            if pick == 2 {
                truth.cavity_lost += 1;
                ledger.cavity_loss += 1;
                continue;
            }
            truth.exits[pick] += 1;
            let delivery = chain.deliver(Side::from_index(pick), rng);
            let t = p.start + p.duration * rng.random::<f64>();
            let afterpulse = rng.random::<f64>() < chain.afterpulse_probability;
            let [lo, hi] = AFTERPULSE_DELAY_NS;
            let delay = rng.random_range(lo..hi);
            match delivery {
                Delivery::Lost => ledger.chain_loss += 1,
                Delivery::Click { detector } => {
                    ledger.detected += 1;
                    truth.clicks[pick] += 1;
                    clicks.push(stamp(t, detector));
                    if afterpulse {
                        clicks.push(stamp(t + delay, detector));
                        afterpulses += 1;
                    }
                }
            }
        }
        truth.label = reflection.map(|s| {
            if truth.clicks[s.index()] > 0 {
                PulseLabel::Reflected
            } else if truth.clicks[s.other().index()] > 0 {
                PulseLabel::Transmitted
            } else {
                PulseLabel::NoClick
            }
        });
        pulses.push(truth);
    }

    let mut background = 0;
    if chain.false_click_rate > 0.0 {
        let n = Poisson::new(chain.false_click_rate * seq.period).expect("positive rate").sample(rng) as u32;
        for _ in 0..n {
            let t = rng.random::<f64>() * seq.period;
            let id = rng.random_range(0..chain.n_detectors());
            clicks.push(stamp(t.min(seq.period - 1.0), id));
        }
        background = n;
    }
    clicks.sort();
    let b = bloch_of(&rho);
    Ok((
        clicks,
        TrialOutcome {
            trial: spec.trial,
            atom_present: spec.atom_present,
            prepared: spec.prepared,
            g_scale,
            initial_atom,
            pulses,
            final_atom_bloch: [b.x, b.y, b.z],
            photons: ledger,
            background_clicks: background,
            afterpulses,
        },
    ))
}
