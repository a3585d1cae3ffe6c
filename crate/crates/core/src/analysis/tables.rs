//! Per-state outcome statistics and fidelities with errors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::herald::{swap_heralded, DarkCounts, Trial};
use crate::error::{Error, Result};
use crate::model::{Axis, Cardinal, PUMPED_STATE};
use crate::sim::{Role, SequenceSpec, Side};

/// Two conditional probabilities of getting the expected outcome. For
/// photonic tables the entries are `(P_RR, P_TT)`, for atomic tables
/// `(P_tt, P_ntnt)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTable {
    pub entries: [f64; 2],
}

impl ProbabilityTable {
    pub fn new(first: f64, second: f64) -> Self {
        Self { entries: [first, second] }
    }

    pub fn identity() -> Self {
        Self::new(1.0, 1.0)
    }

    pub fn average(&self) -> f64 {
        0.5 * (self.entries[0] + self.entries[1])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityEstimate {
    pub value: f64,
    pub std_err: f64,
    pub n_trials: u64,
    /// 95% percentile interval from the bootstrap.
    pub interval: [f64; 2],
}

/// Background rate per bank, in clicks per ns.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FalseRate {
    pub per_ns: [f64; 2],
    pub variance: [f64; 2],
}

impl FalseRate {
    pub fn zero() -> Self {
        Self {
            per_ns: [0.0; 2],
            variance: [0.0; 2],
        }
    }

    pub fn from_dark(dark: &DarkCounts) -> Self {
        if dark.exposure_ns <= 0.0 {
            return Self::zero();
        }
        let e = dark.exposure_ns;
        Self {
            per_ns: dark.clicks.map(|c| c as f64 / e),
            variance: dark.clicks.map(|c| c as f64 / (e * e)),
        }
    }
}

/// Counts after background subtraction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrectedCounts {
    pub counts: [f64; 2],
    pub variance: [f64; 2],
}

/// Subtracts the expected background from the per-bank counts of `n_trials`
/// windows of length `window_ns`. Fails instead of correcting when the
/// background accounts for all observed clicks.
pub fn false_detection_correct(raw: [u64; 2], n_trials: u64, window_ns: f64, rate: &FalseRate) -> Result<CorrectedCounts> {
    let exposure = n_trials as f64 * window_ns;
    let expected = rate.per_ns.map(|r| r * exposure);
    let observed = (raw[0] + raw[1]) as f64;
    let false_total = expected[0] + expected[1];
    if false_total > 0.0 && false_total >= observed {
        return Err(Error::FalseRate {
            bin: "all".into(),
            false_rate: false_total,
            observed,
        });
    }
    let mut counts = [0.0; 2];
    let mut variance = [0.0; 2];
    for s in 0..2 {
        counts[s] = (raw[s] as f64 - expected[s]).max(0.0);
        variance[s] = raw[s] as f64 + rate.variance[s] * exposure * exposure;
    }
    Ok(CorrectedCounts { counts, variance })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TableSettings {
    /// Require the swap-in herald click.
    pub heralded: bool,
    pub false_rate: Option<FalseRate>,
    /// Probability that a heralded preparation left the wrong state.
    pub false_prep: Option<f64>,
    /// Known extra loss toward each bank to undo.
    pub compensate_defect: Option<[f64; 2]>,
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for TableSettings {
    fn default() -> Self {
        Self {
            heralded: true,
            false_rate: None,
            false_prep: None,
            compensate_defect: None,
            bootstrap: 1000,
            seed: 0,
        }
    }
}

/// Read-out clicks of the accepted trials of one prepared state.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub n_trials: u64,
    /// Per-bank clicks of the trials that clicked at all.
    pub clicked: Vec<[u32; 2]>,
}

impl Cell {
    pub fn totals(&self) -> [u64; 2] {
        self.clicked.iter().fold([0, 0], |acc, c| [acc[0] + c[0] as u64, acc[1] + c[1] as u64])
    }

    fn resample<R: Rng>(&self, rng: &mut R) -> [u64; 2] {
        let mut acc = [0u64; 2];
        let k = self.clicked.len() as u64;
        for _ in 0..self.n_trials {
            let i = rng.random_range(0..self.n_trials);
            if i < k {
                let c = self.clicked[i as usize];
                acc[0] += c[0] as u64;
                acc[1] += c[1] as u64;
            }
        }
        acc
    }

    pub fn merge(&mut self, other: &Cell) {
        self.n_trials += other.n_trials;
        self.clicked.extend_from_slice(&other.clicked);
    }
}

/// Accepted trials sorted into cells by prepared state, in `Cardinal::ALL`
/// order.
pub fn collect_cells(trials: &[Trial], seq: &SequenceSpec, heralded: bool) -> [Cell; 6] {
    let readout = seq.pulses.iter().position(|p| p.role == Role::SwapOut).expect("validated sequence");
    let herald_side = Side::from_index(if PUMPED_STATE.is_up() { 1 } else { 0 });
    let mut cells: [Cell; 6] = Default::default();
    for t in trials {
        if heralded && !swap_heralded(t, seq, herald_side) {
            continue;
        }
        let idx = Cardinal::ALL.iter().position(|c| *c == t.prepared).expect("cardinal");
        let cell = &mut cells[idx];
        cell.n_trials += 1;
        let c = t.counts[readout];
        if c[0] + c[1] > 0 {
            cell.clicked.push(c);
        }
    }
    cells
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    /// Per prepared state, in `Cardinal::ALL` order; `None` for states not in
    /// the basis list.
    pub states: Vec<(Cardinal, Option<FidelityEstimate>)>,
    /// Per measured axis: `(down correct, up correct)`.
    pub tables: Vec<(Axis, ProbabilityTable)>,
    pub poles: Option<FidelityEstimate>,
    pub equator: Option<FidelityEstimate>,
    pub average: FidelityEstimate,
}

fn cell_fidelity(
    c: Cardinal,
    raw: [u64; 2],
    n_trials: u64,
    window_ns: f64,
    s: &TableSettings,
    strict: bool,
) -> Result<f64> {
    let mut counts = raw.map(|x| x as f64);
    if let Some(rate) = &s.false_rate {
        match false_detection_correct(raw, n_trials, window_ns, rate) {
            Ok(cc) => counts = cc.counts,
            Err(e) if strict => return Err(e),
            Err(_) => counts = [0.0; 2],
        }
    }
    if let Some(d) = s.compensate_defect {
        counts = [counts[0] / (1.0 - d[0]), counts[1] / (1.0 - d[1])];
    }
    let total = counts[0] + counts[1];
    if !(total > 0.0) {
        if strict {
            return Err(Error::EmptyCell(c.name().into()));
        }
        return Ok(f64::NAN);
    }
    let correct = if c.is_up() { counts[1] } else { counts[0] };
    let mut f = correct / total;
    if let Some(q) = s.false_prep {
        f = (f - q) / (1.0 - 2.0 * q);
    }
    Ok(f.clamp(0.0, 1.0))
}

fn summarize(values: &[f64], point: f64, n_trials: u64) -> FidelityEstimate {
    let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.len() < 2 {
        return FidelityEstimate {
            value: point,
            std_err: f64::NAN,
            n_trials,
            interval: [f64::NAN; 2],
        };
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    let mut sorted = v.clone();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| sorted[((p * (sorted.len() - 1) as f64).round() as usize).min(sorted.len() - 1)];
    FidelityEstimate {
        value: point,
        std_err: var.sqrt(),
        n_trials,
        interval: [q(0.025), q(0.975)],
    }
}

/// Fidelity per prepared state and averages over the basis list, with
/// bootstrap errors over trials.
pub fn build_tables(cells: &[Cell; 6], seq: &SequenceSpec, basis_list: &[Cardinal], s: &TableSettings) -> Result<TableReport> {
    let readout = seq.swap_out();
    let window_ns = readout.duration + seq.window_tail;
    let included: Vec<usize> = (0..6).filter(|&i| basis_list.contains(&Cardinal::ALL[i])).collect();
    if included.is_empty() {
        return Err(Error::InvalidParams("basis list is empty".into()));
    }
    let mut point = [f64::NAN; 6];
    for &i in &included {
        let cell = &cells[i];
        if cell.n_trials == 0 || cell.clicked.is_empty() {
            return Err(Error::EmptyCell(Cardinal::ALL[i].name().into()));
        }
        point[i] = cell_fidelity(Cardinal::ALL[i], cell.totals(), cell.n_trials, window_ns, s, true)?;
    }
    let group = |f: &[f64; 6], pred: &dyn Fn(Cardinal) -> bool| {
        let v: Vec<f64> = included.iter().filter(|&&i| pred(Cardinal::ALL[i])).map(|&i| f[i]).collect();
        if v.is_empty() {
            None
        } else {
            Some(v.iter().sum::<f64>() / v.len() as f64)
        }
    };
    let poles = |c: Cardinal| c.is_pole();
    let equator = |c: Cardinal| !c.is_pole();
    let all = |_: Cardinal| true;
    let samples: Vec<[f64; 9]> = (0..s.bootstrap)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
            rng.set_stream(b as u64);
            let mut f = [f64::NAN; 6];
            for &i in &included {
                let raw = cells[i].resample(&mut rng);
                f[i] = cell_fidelity(Cardinal::ALL[i], raw, cells[i].n_trials, window_ns, s, false).unwrap_or(f64::NAN);
            }
            [
                f[0],
                f[1],
                f[2],
                f[3],
                f[4],
                f[5],
                group(&f, &poles).unwrap_or(f64::NAN),
                group(&f, &equator).unwrap_or(f64::NAN),
                group(&f, &all).unwrap_or(f64::NAN),
            ]
        })
        .collect();
    let column = |k: usize| samples.iter().map(|x| x[k]).collect::<Vec<_>>();
    let states = (0..6)
        .map(|i| {
            let c = Cardinal::ALL[i];
            let est = included.contains(&i).then(|| summarize(&column(i), point[i], cells[i].n_trials));
            (c, est)
        })
        .collect();
    let mut tables = Vec::new();
    for axis in [Axis::Z, Axis::X, Axis::Y] {
        let d = Cardinal::ALL.iter().position(|c| *c == Cardinal::new(axis, false)).unwrap();
        let u = Cardinal::ALL.iter().position(|c| *c == Cardinal::new(axis, true)).unwrap();
        if included.contains(&d) && included.contains(&u) {
            tables.push((axis, ProbabilityTable::new(point[d], point[u])));
        }
    }
    let n_of = |pred: &dyn Fn(Cardinal) -> bool| {
        included.iter().filter(|&&i| pred(Cardinal::ALL[i])).map(|&i| cells[i].n_trials).sum::<u64>()
    };
    Ok(TableReport {
        states,
        tables,
        poles: group(&point, &poles).map(|v| summarize(&column(6), v, n_of(&poles))),
        equator: group(&point, &equator).map(|v| summarize(&column(7), v, n_of(&equator))),
        average: summarize(&column(8), group(&point, &all).expect("non-empty"), n_of(&all)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(correct: u32, wrong: u32, down: bool, extra_trials: u64) -> Cell {
        let mut clicked = Vec::new();
        let (c, w) = if down { ([1, 0], [0, 1]) } else { ([0, 1], [1, 0]) };
        clicked.extend(std::iter::repeat_n(c, correct as usize));
        clicked.extend(std::iter::repeat_n(w, wrong as usize));
        Cell {
            n_trials: (correct + wrong) as u64 + extra_trials,
            clicked,
        }
    }

    #[test]
    fn zero_false_rate_changes_nothing() {
        let c = false_detection_correct([40, 10], 1000, 70.0, &FalseRate::zero()).unwrap();
        assert_eq!(c.counts, [40.0, 10.0]);
    }

    #[test]
    fn overwhelming_background_is_flagged() {
        let rate = FalseRate {
            per_ns: [1e-3, 1e-3],
            variance: [0.0; 2],
        };
        assert!(matches!(
            false_detection_correct([3, 2], 100, 70.0, &rate),
            Err(Error::FalseRate { .. })
        ));
    }

    #[test]
    fn reported_pole_breakdown_reproduced() {
        // cells sized so the binomial errors match the quoted ones
        let mut cells: [Cell; 6] = Default::default();
        cells[5] = cell(161, 69, true, 5000); // ↓z: 70%
        cells[4] = cell(246, 37, false, 5000); // ↑z: 87%
        let s = TableSettings {
            seed: 4,
            ..Default::default()
        };
        let r = build_tables(&cells, &SequenceSpec::canonical(), &[Cardinal::UpZ, Cardinal::DownZ], &s).unwrap();
        let down = r.states[5].1.unwrap();
        let up = r.states[4].1.unwrap();
        assert!((down.value - 0.70).abs() < 0.005 && (down.std_err - 0.03).abs() < 0.005, "{down:?}");
        assert!((up.value - 0.87).abs() < 0.005 && (up.std_err - 0.02).abs() < 0.005, "{up:?}");
        assert_eq!(r.tables, vec![(Axis::Z, ProbabilityTable::new(down.value, up.value))]);
    }

    #[test]
    fn false_preparation_correction_inverts_mixing() {
        let mut cells: [Cell; 6] = Default::default();
        // true fidelity 0.9 seen through q = 0.05 mixing: 0.9·0.95 + 0.1·0.05 = 0.86
        cells[4] = cell(860, 140, false, 0);
        let s = TableSettings {
            false_prep: Some(0.05),
            bootstrap: 0,
            ..Default::default()
        };
        let r = build_tables(&cells, &SequenceSpec::canonical(), &[Cardinal::UpZ], &s).unwrap();
        assert!((r.average.value - 0.9).abs() < 1e-12);
    }

    #[test]
    fn missing_state_is_an_empty_cell() {
        let cells: [Cell; 6] = Default::default();
        let r = build_tables(&cells, &SequenceSpec::canonical(), &[Cardinal::UpX], &TableSettings::default());
        assert!(matches!(r, Err(Error::EmptyCell(_))));
    }
}
