//! Running totals for campaigns analysed in chunks of trials.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::filter::filter_afterpulse;
use super::herald::{segment, DarkCounts};
use super::tables::{collect_cells, Cell};
use crate::error::Result;
use crate::sim::{ClickRecord, StreamHeader};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub n_trials: u64,
    /// Trials passing the reflection herald.
    pub n_accepted: u64,
    /// Accepted trials that also carry the swap-in herald click.
    pub heralded: [Cell; 6],
    pub unheralded: [Cell; 6],
    pub dark: DarkCounts,
}

impl Tally {
    /// Adds the trials in `range`. `records` must be the time-sorted clicks of
    /// exactly those trials; chunks must not overlap.
    pub fn add(
        &mut self,
        records: &[ClickRecord],
        header: &StreamHeader,
        range: Range<u64>,
        dead_ns: i64,
        min_reflections: u32,
    ) -> Result<()> {
        let kept = filter_afterpulse(records, dead_ns);
        let seq = &header.sequence;
        let n = range.end.saturating_sub(range.start);
        let seg = segment(&kept, header, range)?;
        let accepted: Vec<_> = seg.trials.into_iter().filter(|t| t.accepted(seq, min_reflections)).collect();
        self.n_trials += n;
        self.n_accepted += accepted.len() as u64;
        self.dark.merge(&seg.dark);
        for (mine, theirs) in self.heralded.iter_mut().zip(collect_cells(&accepted, seq, true).iter()) {
            mine.merge(theirs);
        }
        for (mine, theirs) in self.unheralded.iter_mut().zip(collect_cells(&accepted, seq, false).iter()) {
            mine.merge(theirs);
        }
        Ok(())
    }

    pub fn cells(&self, heralded: bool) -> &[Cell; 6] {
        if heralded {
            &self.heralded
        } else {
            &self.unheralded
        }
    }

    pub fn pass_fraction(&self) -> f64 {
        if self.n_trials == 0 {
            0.0
        } else {
            self.n_accepted as f64 / self.n_trials as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Cardinal, SystemParams};
    use crate::sim::{CampaignOptions, CampaignPlan, DetectionChain, Scenario, SequenceSpec};

    #[test]
    fn chunks_add_up_to_the_whole() {
        let plan = CampaignPlan::new(
            Scenario::AtomToPhotonFixed,
            &Cardinal::ALL,
            600,
            &SystemParams::nominal(),
            &DetectionChain::ideal(),
            &SequenceSpec::canonical(),
            3,
            &CampaignOptions::default(),
        )
        .unwrap();
        let (all, _) = plan.run(0..600).unwrap();
        let mut whole = Tally::default();
        whole.add(&all, plan.header(), 0..600, 200, 3).unwrap();
        let mut parts = Tally::default();
        for r in [0..250, 250..600] {
            let (rec, _) = plan.run(r.clone()).unwrap();
            parts.add(&rec, plan.header(), r, 200, 3).unwrap();
        }
        assert_eq!(whole.n_trials, 600);
        assert_eq!(whole.n_accepted, parts.n_accepted);
        assert_eq!(whole.dark, parts.dark);
        for i in 0..6 {
            assert_eq!(whole.heralded[i].n_trials, parts.heralded[i].n_trials);
            assert_eq!(whole.unheralded[i].totals(), parts.unheralded[i].totals());
        }
    }
}
