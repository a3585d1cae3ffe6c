//! Recovering the photon-to-atom table from the atom-to-photon and
//! round-trip measurements by alternating grid sweeps.

use serde::{Deserialize, Serialize};

use super::poisson::{apply_photons, heralded_weights, poisson_weights, TAIL};
use super::tables::ProbabilityTable;
use crate::error::{Error, Result};
use crate::model::Cardinal;
use crate::sim::{Port, Role, SequenceSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferenceSettings {
    pub grid: usize,
    pub max_iters: usize,
    pub tolerance: f64,
    pub write_mean: f64,
    /// Mean photon number and target pole of each detection pulse before the
    /// swaps.
    pub detection_pulses: Vec<(f64, Cardinal)>,
    /// Per-photon probability that a write photon produces a herald click.
    pub herald_efficiency: f64,
}

impl Default for InferenceSettings {
    fn default() -> Self {
        let seq = SequenceSpec::canonical();
        let detection_pulses = seq
            .pulses
            .iter()
            .take_while(|p| p.role != Role::SwapIn)
            .filter(|p| p.role == Role::Detection)
            .map(|p| {
                let target = if p.port == Port::UpZ { Cardinal::UpZ } else { Cardinal::DownZ };
                (p.mean_photons, target)
            })
            .collect();
        Self {
            grid: 201,
            max_iters: 50,
            tolerance: 1e-4,
            write_mean: seq.swap_in().mean_photons,
            detection_pulses,
            herald_efficiency: 0.2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApTarget {
    Average,
    /// `P_RR`
    Down,
    /// `P_TT`
    Up,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PapTarget {
    Average,
    State(Cardinal),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measured<T> {
    pub target: T,
    pub value: f64,
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceInput {
    pub ap: Vec<Measured<ApTarget>>,
    pub pap: Vec<Measured<PapTarget>>,
    pub heralded: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub value: f64,
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub pa_table: ProbabilityTable,
    pub ap_table: ProbabilityTable,
    pub f_pa: Posterior,
    pub f_ap: Posterior,
    pub iterations: usize,
    pub converged: bool,
    /// Posterior means `(P_tt, P_ntnt, P_RR, P_TT)` after each iteration.
    pub trace: Vec<[f64; 4]>,
    pub settings_digest: String,
}

/// Round-trip fidelities predicted from a photon-to-atom table and an
/// atom-to-photon table.
#[derive(Clone, Debug)]
pub struct ForwardModel {
    detection: Vec<(Vec<f64>, bool)>,
    write: Vec<f64>,
}

impl ForwardModel {
    pub fn new(settings: &InferenceSettings, heralded: bool) -> Self {
        let detection = settings
            .detection_pulses
            .iter()
            .map(|(mean, target)| (poisson_weights(*mean, TAIL), target.is_up()))
            .collect();
        let write = if heralded {
            heralded_weights(settings.write_mean, settings.herald_efficiency, TAIL)
        } else {
            poisson_weights(settings.write_mean, TAIL)
        };
        Self { detection, write }
    }

    /// Probability that the atom sits in ↓z when the write pulse arrives,
    /// starting unpolarized.
    pub fn pumped_down(&self, pa: &ProbabilityTable) -> f64 {
        let mut down = 0.5;
        for (w, up) in &self.detection {
            if *up {
                down = 1.0 - apply_photons(1.0 - down, pa, w);
            } else {
                down = apply_photons(down, pa, w);
            }
        }
        down
    }

    /// Probability of reading back the written state, per cardinal in
    /// `Cardinal::ALL` order.
    pub fn states(&self, pa: &ProbabilityTable, ap: &ProbabilityTable) -> [f64; 6] {
        let down = self.pumped_down(pa);
        let mut out = [0.0; 6];
        for (i, c) in Cardinal::ALL.iter().enumerate() {
            let prior = match *c {
                Cardinal::DownZ => down,
                Cardinal::UpZ => 1.0 - down,
                _ => 0.5,
            };
            let written = apply_photons(prior, pa, &self.write);
            let (same, other) = if c.is_up() {
                (ap.entries[1], ap.entries[0])
            } else {
                (ap.entries[0], ap.entries[1])
            };
            out[i] = written * same + (1.0 - written) * (1.0 - other);
        }
        out
    }

    pub fn average(states: &[f64; 6]) -> f64 {
        states.iter().sum::<f64>() / 6.0
    }

    pub fn predict(&self, target: PapTarget, states: &[f64; 6]) -> f64 {
        match target {
            PapTarget::Average => Self::average(states),
            PapTarget::State(c) => states[Cardinal::ALL.iter().position(|x| *x == c).expect("cardinal")],
        }
    }
}

fn gauss(pred: f64, m: &Measured<impl Copy>) -> f64 {
    let z = (pred - m.value) / m.sd;
    (-0.5 * z * z).exp()
}

struct Grid {
    axis: Vec<f64>,
}

impl Grid {
    fn means(&self, w: &[f64]) -> Result<(f64, f64, Posterior)> {
        let n = self.axis.len();
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err(Error::NonConvergence {
                iterations: 0,
                last_shift: f64::NAN,
            });
        }
        let (mut a, mut b, mut avg, mut avg2) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let p = w[i * n + j] / total;
                let f = 0.5 * (self.axis[i] + self.axis[j]);
                a += p * self.axis[i];
                b += p * self.axis[j];
                avg += p * f;
                avg2 += p * f * f;
            }
        }
        Ok((
            a,
            b,
            Posterior {
                value: avg,
                sd: (avg2 - avg * avg).max(0.0).sqrt(),
            },
        ))
    }
}

pub fn infer_pa(input: &InferenceInput, settings: &InferenceSettings) -> Result<InferenceReport> {
    if settings.grid < 2 || settings.max_iters == 0 {
        return Err(Error::InvalidParams("grid needs ≥ 2 points and at least one iteration".into()));
    }
    if input.pap.is_empty() || input.pap.iter().any(|m| !(m.sd > 0.0)) {
        return Err(Error::InvalidParams("round-trip measurements need positive errors".into()));
    }
    if input.ap.iter().any(|m| !(m.sd > 0.0)) {
        return Err(Error::InvalidParams("measurement errors must be positive".into()));
    }
    let n = settings.grid;
    let grid = Grid {
        axis: (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    };
    let model = ForwardModel::new(settings, input.heralded);
    let ap_prior: Vec<f64> = (0..n * n)
        .map(|k| {
            let t = ProbabilityTable::new(grid.axis[k / n], grid.axis[k % n]);
            input
                .ap
                .iter()
                .map(|m| {
                    let pred = match m.target {
                        ApTarget::Average => t.average(),
                        ApTarget::Down => t.entries[0],
                        ApTarget::Up => t.entries[1],
                    };
                    gauss(pred, m)
                })
                .product()
        })
        .collect();
    let score = |pa: &ProbabilityTable, ap: &ProbabilityTable| {
        let s = model.states(pa, ap);
        input.pap.iter().map(|m| gauss(model.predict(m.target, &s), m)).product::<f64>()
    };
    let mut ap_w = ap_prior.clone();
    let mut pa_w = vec![0.0; n * n];
    let mut trace: Vec<[f64; 4]> = Vec::new();
    let mut converged = false;
    let mut last_shift = f64::INFINITY;
    let mut f_pa = Posterior { value: 0.0, sd: 0.0 };
    let mut f_ap = Posterior { value: 0.0, sd: 0.0 };
    let mut iterations = 0;
    for it in 0..settings.max_iters {
        iterations = it + 1;
        let (rr, tt, _) = grid.means(&ap_w)?;
        let ap_mean = ProbabilityTable::new(rr, tt);
        for k in 0..n * n {
            pa_w[k] = score(&ProbabilityTable::new(grid.axis[k / n], grid.axis[k % n]), &ap_mean);
        }
        let (ptt, pnn, fpa) = grid.means(&pa_w)?;
        let pa_mean = ProbabilityTable::new(ptt, pnn);
        for k in 0..n * n {
            ap_w[k] = ap_prior[k] * score(&pa_mean, &ProbabilityTable::new(grid.axis[k / n], grid.axis[k % n]));
        }
        let (rr2, tt2, fap) = grid.means(&ap_w)?;
        let cur = [ptt, pnn, rr2, tt2];
        f_pa = fpa;
        f_ap = fap;
        if let Some(prev) = trace.last() {
            last_shift = cur.iter().zip(prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            trace.push(cur);
            if last_shift < settings.tolerance {
                converged = true;
                break;
            }
        } else {
            trace.push(cur);
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            last_shift,
        });
    }
    let last = trace.last().copied().expect("at least one iteration");
    Ok(InferenceReport {
        pa_table: ProbabilityTable::new(last[0], last[1]),
        ap_table: ProbabilityTable::new(last[2], last[3]),
        f_pa,
        f_ap,
        iterations,
        converged,
        trace,
        settings_digest: crate::sim::digest(&(settings, input.heralded)),
    })
}

/// Intracavity loss acting on the write photon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossModel {
    /// Probability that the write photon is lost inside the resonator.
    pub loss: f64,
    /// Fraction of those losses that happen before the photon reaches the
    /// atom.
    pub pre_atom_fraction: f64,
    /// Heralded photon-to-atom fidelity.
    pub heralded_fidelity: f64,
}

/// Heralded minus unheralded inferred fidelity: a photon lost before the atom
/// leaves it as uninformed as vacuum, while later losses do not touch the
/// stored state.
pub fn heralded_gap(m: &LossModel) -> f64 {
    m.loss * m.pre_atom_fraction * (m.heralded_fidelity - 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_tables_read_back_perfectly_when_heralded() {
        let s = InferenceSettings {
            herald_efficiency: 1.0,
            ..Default::default()
        };
        let m = ForwardModel::new(&s, true);
        let id = ProbabilityTable::identity();
        for f in m.states(&id, &id) {
            assert!((f - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gap_limits() {
        let base = LossModel {
            loss: 0.0,
            pre_atom_fraction: 0.5,
            heralded_fidelity: 0.75,
        };
        assert_eq!(heralded_gap(&base), 0.0);
        assert_eq!(
            heralded_gap(&LossModel {
                loss: 0.3,
                pre_atom_fraction: 0.0,
                ..base
            }),
            0.0
        );
    }

    #[test]
    fn bad_errors_rejected() {
        let input = InferenceInput {
            ap: vec![],
            pap: vec![Measured {
                target: PapTarget::Average,
                value: 0.6,
                sd: 0.0,
            }],
            heralded: true,
        };
        assert!(infer_pa(&input, &InferenceSettings::default()).is_err());
    }
}
