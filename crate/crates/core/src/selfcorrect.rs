//! Relabelling of stored pseudo-labels by neighbour vote.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::classifier::{top_k_vote, LshDecision};
use crate::engine::TtdState;
use crate::error::{Error, Result};
use crate::memory::Label;

pub const MAX_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScReport {
    pub examined: usize,
    pub relabeled: usize,
    pub unchanged: usize,
    pub discarded: usize,
    /// `(from, to) -> count`. Discards to a known class are recorded with
    /// the known label as destination.
    #[serde(with = "flow_serde")]
    pub flow: BTreeMap<(Label, Label), usize>,
}

impl TtdState {
    /// One self-correction pass over the seen-class buffers.
    ///
    /// From every seen buffer `ceil(fraction * len)` entries are sampled
    /// uniformly. Each sampled entry is voted on by its joint bucket with
    /// itself left out. A known winner, or a winner whose buffer is already
    /// at capacity, discards the entry; a different seen winner with room
    /// receives it. No classes are created.
    pub fn self_correct(&mut self, fraction: f64) -> Result<ScReport> {
        if !(0.0..=MAX_FRACTION).contains(&fraction) {
            return Err(Error::invalid_argument(format!(
                "self-correction fraction must lie in [0, {MAX_FRACTION}], got {fraction}"
            )));
        }
        let mut report = ScReport::default();
        if fraction == 0.0 {
            return Ok(report);
        }

        let seen: Vec<(Label, Vec<u64>)> = self
            .memory
            .buffers()
            .filter(|b| b.label().is_seen() && !b.is_empty())
            .map(|b| (b.label(), b.slots().to_vec()))
            .collect();
        let mut sampled = Vec::new();
        for (_, slots) in &seen {
            let take = libm::ceil(fraction * slots.len() as f64) as usize;
            let picks = index::sample(&mut self.rng, slots.len(), take.min(slots.len()));
            sampled.extend(picks.into_iter().map(|i| slots[i]));
        }

        let capacity = self.memory.capacity();
        let k = self.config.classifier.vote_k;
        for seq in sampled {
            let Some(entry) = self.memory.entry(seq) else {
                continue;
            };
            report.examined += 1;
            let from = entry.label;
            let winner = {
                let joint = self
                    .joint_bucket(&entry.key, &entry.feature)
                    .into_iter()
                    .filter(|e| e.seq != seq);
                match top_k_vote(joint, &entry.feature, k) {
                    Some(LshDecision::Vote { label, .. }) => Some(label),
                    _ => None,
                }
            };
            match winner {
                None => report.unchanged += 1,
                Some(to) if to == from => report.unchanged += 1,
                Some(to) => {
                    let full = self.memory.buffer(to).is_some_and(|b| b.len() >= capacity);
                    if to.is_known() || full {
                        self.memory.remove(seq)?;
                        report.discarded += 1;
                    } else {
                        self.memory.relabel(seq, to)?;
                        report.relabeled += 1;
                    }
                    *report.flow.entry((from, to)).or_insert(0) += 1;
                }
            }
        }
        Ok(report)
    }
}

mod flow_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Flow {
        from: Label,
        to: Label,
        count: usize,
    }

    pub fn serialize<S: Serializer>(
        flow: &BTreeMap<(Label, Label), usize>,
        s: S,
    ) -> core::result::Result<S::Ok, S::Error> {
        let rows: Vec<Flow> = flow
            .iter()
            .map(|(&(from, to), &count)| Flow { from, to, count })
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> core::result::Result<BTreeMap<(Label, Label), usize>, D::Error> {
        let rows = Vec::<Flow>::deserialize(d)?;
        Ok(rows
            .into_iter()
            .map(|f| ((f.from, f.to), f.count))
            .collect())
    }
}
