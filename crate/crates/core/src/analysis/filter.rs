use std::collections::HashMap;

use crate::sim::{ClickRecord, EventStream};

pub const DEFAULT_DEAD_NS: i64 = 200;

/// Keeps a click only if it comes at least `dead_ns` after the previous kept
/// click on the same detector. Expects time-sorted input.
pub fn filter_afterpulse(records: &[ClickRecord], dead_ns: i64) -> Vec<ClickRecord> {
    let mut last: HashMap<u32, i64> = HashMap::new();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        match last.get(&r.detector_id) {
            Some(&t) if r.t_ns - t < dead_ns => {}
            _ => {
                last.insert(r.detector_id, r.t_ns);
                out.push(*r);
            }
        }
    }
    out
}

pub fn filter_stream(stream: &EventStream, dead_ns: i64) -> EventStream {
    EventStream {
        header: stream.header.clone(),
        records: filter_afterpulse(&stream.records, dead_ns),
    }
}
