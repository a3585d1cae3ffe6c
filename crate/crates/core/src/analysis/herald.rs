//! Splitting a click stream into trials and deciding which held an atom.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Cardinal;
use crate::sim::{ClickRecord, Role, SequenceSpec, Side, StreamHeader};

pub const DEFAULT_MIN_REFLECTIONS: u32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowClass {
    Reflected,
    Transmitted,
    Empty,
}

/// Click counts of one trial, per pulse window and bank.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub trial: u64,
    pub prepared: Cardinal,
    pub counts: Vec<[u32; 2]>,
}

impl Trial {
    pub fn classify(&self, seq: &SequenceSpec, pulse: usize) -> Option<WindowClass> {
        let side = seq.pulses[pulse].reflection_side()?;
        let c = self.counts[pulse];
        Some(if c[side.index()] > 0 {
            WindowClass::Reflected
        } else if c[side.other().index()] > 0 {
            WindowClass::Transmitted
        } else {
            WindowClass::Empty
        })
    }

    /// Reflections in detection pulses `(before, after)` the swap pair. The
    /// erasure pulse is not a detection pulse and never counts.
    pub fn reflections(&self, seq: &SequenceSpec) -> (u32, u32) {
        let swap_in = seq.swap_in().start;
        let swap_out = seq.swap_out().start;
        let mut before = 0;
        let mut after = 0;
        for (i, p) in seq.pulses.iter().enumerate() {
            if p.role != Role::Detection || self.classify(seq, i) != Some(WindowClass::Reflected) {
                continue;
            }
            if p.start < swap_in {
                before += 1;
            } else if p.start > swap_out {
                after += 1;
            }
        }
        (before, after)
    }

    pub fn accepted(&self, seq: &SequenceSpec, min_reflections: u32) -> bool {
        let (b, a) = self.reflections(seq);
        b >= 1 && a >= 1 && b + a >= min_reflections
    }
}

/// Background clicks seen in the dark interval of every period.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DarkCounts {
    pub clicks: [u64; 2],
    pub exposure_ns: f64,
}

impl DarkCounts {
    pub fn merge(&mut self, other: &DarkCounts) {
        self.clicks[0] += other.clicks[0];
        self.clicks[1] += other.clicks[1];
        self.exposure_ns += other.exposure_ns;
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Segmented {
    /// Trials with at least one click inside a pulse window, in order.
    pub trials: Vec<Trial>,
    pub dark: DarkCounts,
}

fn check_windows(seq: &SequenceSpec) -> Result<Vec<(f64, f64)>> {
    let w = seq.windows();
    if w.windows(2).any(|p| p[1].0 < p[0].1) || w.last().is_some_and(|l| l.1 > seq.dark_start) {
        return Err(Error::Sequence("overlapping pulse windows".into()));
    }
    Ok(w)
}

/// Groups clicks from the trials in `range` by trial and pulse window.
pub fn segment(records: &[ClickRecord], header: &StreamHeader, range: Range<u64>) -> Result<Segmented> {
    let seq = &header.sequence;
    let windows = check_windows(seq)?;
    let mut trials: BTreeMap<u64, Vec<[u32; 2]>> = BTreeMap::new();
    let mut dark = DarkCounts {
        clicks: [0; 2],
        exposure_ns: (range.end.saturating_sub(range.start)) as f64 * seq.dark_duration(),
    };
    for r in records {
        let trial = (r.t_ns as f64 / seq.period).floor() as u64;
        if !range.contains(&trial) {
            continue;
        }
        let t = r.t_ns as f64 - trial as f64 * seq.period;
        if t >= seq.dark_start {
            dark.clicks[r.side.index()] += 1;
            continue;
        }
        let idx = windows.partition_point(|w| w.0 <= t);
        if idx == 0 || t >= windows[idx - 1].1 {
            continue;
        }
        let counts = trials.entry(trial).or_insert_with(|| vec![[0; 2]; windows.len()]);
        counts[idx - 1][r.side.index()] += 1;
    }
    Ok(Segmented {
        trials: trials
            .into_iter()
            .map(|(trial, counts)| Trial {
                trial,
                prepared: header.prepared(trial),
                counts,
            })
            .collect(),
        dark,
    })
}

/// Trials passing the reflection herald.
pub fn herald_atoms(records: &[ClickRecord], header: &StreamHeader, min_reflections: u32) -> Result<Vec<Trial>> {
    let seg = segment(records, header, 0..header.n_trials)?;
    Ok(seg
        .trials
        .into_iter()
        .filter(|t| t.accepted(&header.sequence, min_reflections))
        .collect())
}

/// Whether the swap-in window shows the herald click on `side`.
pub fn swap_heralded(trial: &Trial, seq: &SequenceSpec, side: Side) -> bool {
    let i = seq.pulses.iter().position(|p| p.role == Role::SwapIn).expect("validated sequence");
    trial.counts[i][side.index()] > 0
}
