//! Cosine prototype classifier, top-k bucket vote and EMA prototype updates.

use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::{Label, MemoryEntry};
use crate::vector::{cosine_mixed, euclidean_to_f64, norm_f32, squared_distance};

#[derive(Debug, Clone, PartialEq)]
pub struct Prototype {
    pub label: Label,
    pub vector: Vec<f64>,
    pub update_count: u64,
}

impl Prototype {
    pub fn new(label: Label, vector: Vec<f64>) -> Self {
        Self {
            label,
            vector,
            update_count: 0,
        }
    }

    /// `vector <- alpha * vector + (1 - alpha) * f`. Known prototypes are
    /// frozen and rejected.
    pub fn ema_update(&mut self, f: &[f32], alpha: f64) -> Result<()> {
        if self.label.is_known() {
            return Err(Error::FrozenPrototype(self.label.to_string()));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid_argument("EMA factor must lie in [0, 1]"));
        }
        if f.len() != self.vector.len() {
            return Err(Error::invalid_feature("dimension mismatch in EMA update"));
        }
        for (v, &x) in self.vector.iter_mut().zip(f) {
            *v = alpha * *v + (1.0 - alpha) * x as f64;
        }
        self.update_count += 1;
        Ok(())
    }
}

/// Prototypes ordered by label (known first, then seen, each by id).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PrototypeSet {
    protos: BTreeMap<Label, Prototype>,
}

impl PrototypeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, proto: Prototype) {
        self.protos.insert(proto.label, proto);
    }

    pub fn get(&self, label: Label) -> Option<&Prototype> {
        self.protos.get(&label)
    }

    pub(crate) fn get_mut(&mut self, label: Label) -> Option<&mut Prototype> {
        self.protos.get_mut(&label)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Prototype> {
        self.protos.values()
    }

    pub fn len(&self) -> usize {
        self.protos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.protos.is_empty()
    }

    /// Label of the prototype with the largest cosine similarity to `f`,
    /// together with that similarity. Ties go to the earliest label in
    /// [`Label`] order. Zero-norm prototypes never win.
    pub fn predict(&self, f: &[f32]) -> Result<(Label, f64)> {
        if norm_f32(f) == 0.0 {
            return Err(Error::invalid_feature("zero-norm feature has no direction"));
        }
        let mut best: Option<(Label, f64)> = None;
        for p in self.protos.values() {
            let Some(sim) = cosine_mixed(f, &p.vector) else {
                continue;
            };
            if best.is_none_or(|(_, b)| sim > b) {
                best = Some((p.label, sim));
            }
        }
        best.ok_or_else(|| Error::invalid_argument("no prototype available"))
    }

    /// Label of the prototype closest to `f` in Euclidean distance, with that
    /// distance. Ties go to the earliest label.
    pub fn nearest_euclidean(&self, f: &[f32]) -> Option<(Label, f64)> {
        let mut best: Option<(Label, f64)> = None;
        for p in self.protos.values() {
            let d = euclidean_to_f64(f, &p.vector);
            if best.is_none_or(|(_, b)| d < b) {
                best = Some((p.label, d));
            }
        }
        best
    }

    /// Cosine similarity of `f` to every prototype with a direction, in label order.
    pub fn similarities(&self, f: &[f32]) -> Result<Vec<(Label, f64)>> {
        if norm_f32(f) == 0.0 {
            return Err(Error::invalid_feature("zero-norm feature has no direction"));
        }
        Ok(self
            .protos
            .values()
            .filter_map(|p| cosine_mixed(f, &p.vector).map(|s| (p.label, s)))
            .collect())
    }
}

/// Outcome of the bucket classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LshDecision {
    Vote {
        label: Label,
        support: usize,
        mean_distance: f64,
    },
    Novel,
}

/// Majority vote over the `k` members nearest to `f` (Euclidean).
///
/// Members are ranked by distance, then sequence number. Among labels with
/// the top count the one whose voters are closest on average wins; any
/// remaining tie goes to the earliest label. Returns `None` for no members
/// or `k == 0`.
pub fn top_k_vote<'a, I>(members: I, f: &[f32], k: usize) -> Option<LshDecision>
where
    I: IntoIterator<Item = &'a MemoryEntry>,
{
    let mut ranked: Vec<(f64, u64, Label)> = members
        .into_iter()
        .map(|e| (libm::sqrt(squared_distance(f, &e.feature)), e.seq, e.label))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ranked.truncate(k);
    if ranked.is_empty() {
        return None;
    }
    let mut tally: BTreeMap<Label, (usize, f64)> = BTreeMap::new();
    for (d, _, label) in &ranked {
        let t = tally.entry(*label).or_insert((0, 0.0));
        t.0 += 1;
        t.1 += d;
    }
    let mut best: Option<(Label, usize, f64)> = None;
    for (label, (count, total)) in tally {
        let mean = total / count as f64;
        let better = match best {
            None => true,
            Some((_, bc, bm)) => count > bc || (count == bc && mean < bm),
        };
        if better {
            best = Some((label, count, mean));
        }
    }
    best.map(|(label, support, mean_distance)| LshDecision::Vote {
        label,
        support,
        mean_distance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Confidence above the boundary; prototype label used directly.
    Prototype,
    /// Low confidence; label taken from the bucket vote.
    LshVote,
    /// A fresh `Seen` class was allocated for this sample.
    Novel,
    /// Discovery was called for but the class cap is exhausted.
    CappedFallback,
    /// Oracle-label mode supplied the label of a would-be discovery.
    Annotated,
}

impl Route {
    pub fn as_str(&self) -> &'static str {
        match self {
            Route::Prototype => "prototype",
            Route::LshVote => "lsh_vote",
            Route::Novel => "novel",
            Route::CappedFallback => "capped_fallback",
            Route::Annotated => "annotated",
        }
    }
}

/// One processed stream sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub step: u64,
    pub ground_truth: Option<u32>,
    pub predicted: Label,
    /// Maximum prototype cosine similarity before any update.
    pub confidence: f64,
    pub route: Route,
}
