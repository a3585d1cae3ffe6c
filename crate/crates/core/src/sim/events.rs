//! Line-delimited click streams and their ground-truth sidecars.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::campaign::Scenario;
use super::chain::{DetectionChain, Side};
use super::sequence::SequenceSpec;
use super::trial::TrialOutcome;
use crate::error::{Error, Result};
use crate::model::{Cardinal, SystemParams};

pub const FORMAT: &str = "sprint-events/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClickRecord {
    pub t_ns: i64,
    pub detector_id: u32,
    pub side: Side,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamHeader {
    pub format: String,
    pub seed: u64,
    pub params_digest: String,
    pub scenario: Scenario,
    /// Trial `i` prepares `schedule[i % schedule.len()]`.
    pub schedule: Vec<Cardinal>,
    pub n_trials: u64,
    pub sequence: SequenceSpec,
    pub chain: DetectionChain,
    pub params: SystemParams,
    /// Digest of the run configuration that produced the stream, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
}

impl StreamHeader {
    pub fn prepared(&self, trial: u64) -> Cardinal {
        self.schedule[(trial % self.schedule.len() as u64) as usize]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventStream {
    pub header: StreamHeader,
    pub records: Vec<ClickRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    header: StreamHeader,
}

impl EventStream {
    pub fn is_sorted(&self) -> bool {
        self.records.windows(2).all(|w| w[0].t_ns <= w[1].t_ns)
    }

    /// Trial index and time within the period of each click.
    pub fn trial_of(&self, rec: &ClickRecord) -> (u64, f64) {
        let period = self.header.sequence.period;
        let trial = (rec.t_ns as f64 / period).floor().max(0.0);
        (trial as u64, rec.t_ns as f64 - trial * period)
    }
}

pub fn write_events<W: Write>(stream: &EventStream, mut sink: W) -> Result<()> {
    write_header(&stream.header, &mut sink)?;
    write_records(&stream.records, &mut sink)?;
    sink.flush()?;
    Ok(())
}

/// First line of a stream; records follow with [`write_records`].
pub fn write_header<W: Write>(header: &StreamHeader, mut sink: W) -> Result<()> {
    let head = HeaderLine { header: header.clone() };
    serde_json::to_writer(&mut sink, &head).map_err(std::io::Error::from)?;
    sink.write_all(b"\n")?;
    Ok(())
}

pub fn write_records<W: Write>(records: &[ClickRecord], mut sink: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut sink, r).map_err(std::io::Error::from)?;
        sink.write_all(b"\n")?;
    }
    Ok(())
}

/// Parses a stream, validating every record against the header. Unsorted
/// input is sorted with a warning.
pub fn read_events<R: BufRead>(source: R) -> Result<EventStream> {
    let mut header: Option<StreamHeader> = None;
    let mut records = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| Error::MalformedRecord { line: lineno, reason };
        let Some(h) = &header else {
            let parsed: HeaderLine = serde_json::from_str(&line).map_err(|e| malformed(format!("bad header: {e}")))?;
            if parsed.header.format != FORMAT {
                return Err(malformed(format!("unsupported format {:?}", parsed.header.format)));
            }
            if parsed.header.schedule.is_empty() {
                return Err(malformed("empty preparation schedule".into()));
            }
            parsed.header.chain.validate().map_err(|e| malformed(e.to_string()))?;
            header = Some(parsed.header);
            continue;
        };
        let rec: ClickRecord = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let n = h.chain.n_detectors();
        if rec.detector_id as usize >= n {
            return Err(malformed(format!("detector_id {} outside the {n} configured detectors", rec.detector_id)));
        }
        if h.chain.detector_side(rec.detector_id as usize) != rec.side {
            return Err(malformed(format!("detector {} is not on side {:?}", rec.detector_id, rec.side)));
        }
        if rec.t_ns < 0 {
            return Err(malformed("negative timestamp".into()));
        }
        records.push(rec);
    }
    let header = header.ok_or(Error::MalformedRecord {
        line: 1,
        reason: "missing header".into(),
    })?;
    let mut stream = EventStream { header, records };
    if !stream.is_sorted() {
        log::warn!("event stream not time-sorted; sorting {} records", stream.records.len());
        stream.records.sort();
    }
    Ok(stream)
}

pub fn write_truth<W: Write>(outcomes: &[TrialOutcome], mut sink: W) -> Result<()> {
    for o in outcomes {
        serde_json::to_writer(&mut sink, o).map_err(std::io::Error::from)?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    Ok(())
}

pub fn read_truth<R: BufRead>(source: R) -> Result<Vec<TrialOutcome>> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: i + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}
