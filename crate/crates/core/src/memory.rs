//! Per-class bounded buffers, the bucket index over all stored entries, and
//! neighbour-bucket retrieval.
//!
//! Entries live in a single table keyed by their insertion sequence number.
//! Class buffers hold ordered slot lists of sequence numbers (the reservoir),
//! buckets hold the member set and a running feature sum. The sum is updated
//! on every insert and eviction so bucket means never need a rescan.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::HashKey;
use crate::vector::dot_f64;

/// Class label. Known classes come from the seed set; `Seen` classes are
/// allocated during the stream, numbered from 1.
///
/// Ordering puts every `Known` label before every `Seen` label, then orders
/// by id. All tie-breaks in the crate rely on this.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "lowercase")]
pub enum Label {
    Known(u32),
    Seen(u32),
}

impl Label {
    pub fn is_known(&self) -> bool {
        matches!(self, Label::Known(_))
    }

    pub fn is_seen(&self) -> bool {
        matches!(self, Label::Seen(_))
    }

    pub fn id(&self) -> u32 {
        match *self {
            Label::Known(id) | Label::Seen(id) => id,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Known(id) => write!(f, "{id}"),
            Label::Seen(id) => write!(f, "#C{id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryEntry {
    pub key: HashKey,
    pub feature: Vec<f32>,
    pub label: Label,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassBuffer {
    label: Label,
    slots: Vec<u64>,
    stream_count: u64,
    frozen: bool,
}

impl ClassBuffer {
    pub fn label(&self) -> Label {
        self.label
    }

    /// Sequence numbers of the stored entries, in slot order.
    pub fn slots(&self) -> &[u64] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn stream_count(&self) -> u64 {
        self.stream_count
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Bucket {
    members: BTreeSet<u64>,
    sum: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InsertOutcome {
    Stored { seq: u64 },
    Replaced { seq: u64, evicted: MemoryEntry },
    Rejected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Memory {
    capacity: usize,
    dim: usize,
    entries: BTreeMap<u64, MemoryEntry>,
    buffers: BTreeMap<Label, ClassBuffer>,
    buckets: BTreeMap<HashKey, Bucket>,
    next_seq: u64,
}

impl Memory {
    pub fn new(capacity: usize, dim: usize) -> Self {
        Self {
            capacity,
            dim,
            entries: BTreeMap::new(),
            buffers: BTreeMap::new(),
            buckets: BTreeMap::new(),
            next_seq: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn entry(&self, seq: u64) -> Option<&MemoryEntry> {
        self.entries.get(&seq)
    }

    /// All entries in sequence order.
    pub fn entries(&self) -> impl Iterator<Item = &MemoryEntry> {
        self.entries.values()
    }

    pub fn buffer(&self, label: Label) -> Option<&ClassBuffer> {
        self.buffers.get(&label)
    }

    pub fn buffers(&self) -> impl Iterator<Item = &ClassBuffer> {
        self.buffers.values()
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    pub fn bucket_keys(&self) -> impl Iterator<Item = &HashKey> {
        self.buckets.keys()
    }

    pub fn bucket_len(&self, key: &HashKey) -> usize {
        self.buckets.get(key).map_or(0, |b| b.members.len())
    }

    /// Arithmetic mean of the bucket's member features.
    pub fn bucket_mean(&self, key: &HashKey) -> Option<Vec<f64>> {
        let bucket = self.buckets.get(key)?;
        let n = bucket.members.len() as f64;
        Some(bucket.sum.iter().map(|s| s / n).collect())
    }

    /// Creates a frozen buffer for a known class. Used once, while seeding.
    pub(crate) fn seed_frozen(
        &mut self,
        label: Label,
        items: Vec<(HashKey, Vec<f32>)>,
    ) -> Result<()> {
        if !label.is_known() {
            return Err(Error::invalid_argument("only known classes are seeded"));
        }
        if self.buffers.contains_key(&label) {
            return Err(Error::FrozenBuffer(label.to_string()));
        }
        if items.len() > self.capacity {
            return Err(Error::invalid_argument(format!(
                "{} seed entries exceed capacity {}",
                items.len(),
                self.capacity
            )));
        }
        let mut buffer = ClassBuffer {
            label,
            slots: Vec::with_capacity(items.len()),
            stream_count: items.len() as u64,
            frozen: true,
        };
        for (key, feature) in items {
            self.check_dim(&feature)?;
            let seq = self.attach(key, feature, label);
            buffer.slots.push(seq);
        }
        self.buffers.insert(label, buffer);
        Ok(())
    }

    /// Reservoir insertion (Vitter's algorithm R) into a `Seen` class buffer.
    ///
    /// The class's stream counter is incremented first; when the buffer is
    /// full, `j` is drawn uniformly from `[0, stream_count)` and slot `j` is
    /// overwritten if `j < K`, otherwise the candidate is dropped.
    pub fn insert<R: Rng + ?Sized>(
        &mut self,
        key: HashKey,
        feature: Vec<f32>,
        label: Label,
        rng: &mut R,
    ) -> Result<InsertOutcome> {
        if label.is_known() {
            return Err(Error::FrozenBuffer(label.to_string()));
        }
        self.check_dim(&feature)?;
        let capacity = self.capacity;
        let buffer = self.buffers.entry(label).or_insert_with(|| ClassBuffer {
            label,
            slots: Vec::new(),
            stream_count: 0,
            frozen: false,
        });
        buffer.stream_count += 1;
        if buffer.slots.len() < capacity {
            let seq = self.attach(key, feature, label);
            self.buffer_mut(label).slots.push(seq);
            return Ok(InsertOutcome::Stored { seq });
        }
        let j = rng.random_range(0..buffer.stream_count);
        if j >= capacity as u64 {
            return Ok(InsertOutcome::Rejected);
        }
        let old = buffer.slots[j as usize];
        let evicted = self.detach(old);
        let seq = self.attach(key, feature, label);
        self.buffer_mut(label).slots[j as usize] = seq;
        Ok(InsertOutcome::Replaced { seq, evicted })
    }

    /// Removes an entry from memory entirely.
    pub fn remove(&mut self, seq: u64) -> Result<MemoryEntry> {
        let label = self
            .entries
            .get(&seq)
            .ok_or_else(|| Error::invalid_argument(format!("no entry with seq {seq}")))?
            .label;
        let buffer = self.buffer_mut(label);
        if buffer.frozen {
            return Err(Error::FrozenBuffer(label.to_string()));
        }
        buffer.slots.retain(|&s| s != seq);
        Ok(self.detach(seq))
    }

    /// Moves an entry to another `Seen` buffer, keeping its feature and key.
    pub fn relabel(&mut self, seq: u64, to: Label) -> Result<()> {
        if to.is_known() {
            return Err(Error::FrozenBuffer(to.to_string()));
        }
        let from = self
            .entries
            .get(&seq)
            .ok_or_else(|| Error::invalid_argument(format!("no entry with seq {seq}")))?
            .label;
        if from == to {
            return Ok(());
        }
        if self.buffer_mut(from).frozen {
            return Err(Error::FrozenBuffer(from.to_string()));
        }
        let dest_len = self.buffers.get(&to).map_or(0, ClassBuffer::len);
        if dest_len >= self.capacity {
            return Err(Error::invalid_argument(format!("buffer {to} is full")));
        }
        self.buffer_mut(from).slots.retain(|&s| s != seq);
        self.buffers
            .entry(to)
            .or_insert_with(|| ClassBuffer {
                label: to,
                slots: Vec::new(),
                stream_count: 0,
                frozen: false,
            })
            .slots
            .push(seq);
        if let Some(e) = self.entries.get_mut(&seq) {
            e.label = to;
        }
        Ok(())
    }

    /// Entries whose key equals `key`, in sequence order.
    pub fn query_bucket(&self, key: &HashKey) -> Vec<&MemoryEntry> {
        match self.buckets.get(key) {
            Some(b) => b.members.iter().map(|s| &self.entries[s]).collect(),
            None => Vec::new(),
        }
    }

    /// Up to `k` non-empty buckets closest in direction to the target bucket.
    ///
    /// Buckets are compared by the cosine between their mean features; the
    /// target itself is excluded. When the target bucket is empty the query
    /// feature's own direction stands in for its mean. Equal similarities are
    /// ordered by key. With `same_band` only buckets in the target's norm band
    /// are candidates.
    pub fn neighbor_buckets(
        &self,
        key: &HashKey,
        query: &[f32],
        k: usize,
        same_band: bool,
    ) -> Vec<HashKey> {
        if k == 0 {
            return Vec::new();
        }
        let anchor: Vec<f64> = match self.buckets.get(key) {
            Some(b) => b.sum.clone(),
            None => query.iter().map(|&x| x as f64).collect(),
        };
        let anchor_norm = libm::sqrt(dot_f64(&anchor, &anchor));
        let mut scored: Vec<(f64, HashKey)> = self
            .buckets
            .iter()
            .filter(|(k2, _)| *k2 != key && (!same_band || k2.norm_band() == key.norm_band()))
            .map(|(k2, b)| {
                let n = libm::sqrt(dot_f64(&b.sum, &b.sum));
                let sim = if anchor_norm > 0.0 && n > 0.0 {
                    dot_f64(&anchor, &b.sum) / (anchor_norm * n)
                } else {
                    f64::NEG_INFINITY
                };
                (sim, *k2)
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        scored.into_iter().take(k).map(|(_, key)| key).collect()
    }

    /// Union of the target bucket and its `k` nearest neighbour buckets.
    pub fn joint_bucket(
        &self,
        key: &HashKey,
        query: &[f32],
        k: usize,
        same_band: bool,
    ) -> Vec<&MemoryEntry> {
        let mut out = self.query_bucket(key);
        for nk in self.neighbor_buckets(key, query, k, same_band) {
            out.extend(self.query_bucket(&nk));
        }
        out
    }

    fn check_dim(&self, feature: &[f32]) -> Result<()> {
        if feature.len() != self.dim {
            return Err(Error::invalid_argument(format!(
                "feature dimension {} does not match memory dimension {}",
                feature.len(),
                self.dim
            )));
        }
        Ok(())
    }

    fn buffer_mut(&mut self, label: Label) -> &mut ClassBuffer {
        self.buffers
            .get_mut(&label)
            .expect("buffer exists for stored label")
    }

    fn attach(&mut self, key: HashKey, feature: Vec<f32>, label: Label) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        let dim = self.dim;
        let bucket = self.buckets.entry(key).or_insert_with(|| Bucket {
            members: BTreeSet::new(),
            sum: alloc::vec![0.0; dim],
        });
        bucket.members.insert(seq);
        for (s, &x) in bucket.sum.iter_mut().zip(&feature) {
            *s += x as f64;
        }
        self.entries.insert(
            seq,
            MemoryEntry {
                key,
                feature,
                label,
                seq,
            },
        );
        seq
    }

    fn detach(&mut self, seq: u64) -> MemoryEntry {
        let entry = self.entries.remove(&seq).expect("entry present");
        let bucket = self.buckets.get_mut(&entry.key).expect("bucket present");
        bucket.members.remove(&seq);
        if bucket.members.is_empty() {
            self.buckets.remove(&entry.key);
        } else {
            for (s, &x) in bucket.sum.iter_mut().zip(&entry.feature) {
                *s -= x as f64;
            }
        }
        entry
    }

    /// Rebuilds the bucket membership from scratch by scanning all entries.
    pub fn rebuilt_index(&self) -> BTreeMap<HashKey, Vec<u64>> {
        let mut out: BTreeMap<HashKey, Vec<u64>> = BTreeMap::new();
        for e in self.entries.values() {
            out.entry(e.key).or_default().push(e.seq);
        }
        out
    }

    /// Current bucket membership as maintained incrementally.
    pub fn index(&self) -> BTreeMap<HashKey, Vec<u64>> {
        self.buckets
            .iter()
            .map(|(k, b)| (*k, b.members.iter().copied().collect()))
            .collect()
    }

    // Raw access for the snapshot codec.

    pub(crate) fn raw_bucket_sums(&self) -> impl Iterator<Item = (&HashKey, &[f64])> {
        self.buckets.iter().map(|(k, b)| (k, b.sum.as_slice()))
    }

    pub(crate) fn restore(
        capacity: usize,
        dim: usize,
        next_seq: u64,
        entries: Vec<MemoryEntry>,
        buffers: Vec<(Label, Vec<u64>, u64, bool)>,
        sums: Vec<(HashKey, Vec<f64>)>,
    ) -> core::result::Result<Self, String> {
        let mut mem = Memory::new(capacity, dim);
        mem.next_seq = next_seq;
        for e in entries {
            if e.feature.len() != dim || e.seq >= next_seq {
                return Err(format!("entry {} is inconsistent", e.seq));
            }
            let bucket = mem.buckets.entry(e.key).or_insert_with(|| Bucket {
                members: BTreeSet::new(),
                sum: alloc::vec![0.0; dim],
            });
            bucket.members.insert(e.seq);
            if mem.entries.insert(e.seq, e).is_some() {
                return Err("duplicate entry sequence number".into());
            }
        }
        for (label, slots, stream_count, frozen) in buffers {
            for s in &slots {
                match mem.entries.get(s) {
                    Some(e) if e.label == label => {}
                    _ => return Err(format!("buffer {label} references a foreign entry")),
                }
            }
            mem.buffers.insert(
                label,
                ClassBuffer {
                    label,
                    slots,
                    stream_count,
                    frozen,
                },
            );
        }
        let listed: usize = mem.buffers.values().map(ClassBuffer::len).sum();
        if listed != mem.entries.len() {
            return Err("buffers and entries disagree".into());
        }
        if sums.len() != mem.buckets.len() {
            return Err("bucket count mismatch".into());
        }
        for (key, sum) in sums {
            match mem.buckets.get_mut(&key) {
                Some(b) if sum.len() == dim => b.sum = sum,
                _ => return Err(format!("unexpected bucket {key}")),
            }
        }
        Ok(mem)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::RngCore;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Every draw is zero, so uniform integer sampling returns the low end.
    struct ZeroRng;

    impl RngCore for ZeroRng {
        fn next_u32(&mut self) -> u32 {
            0
        }
        fn next_u64(&mut self) -> u64 {
            0
        }
        fn fill_bytes(&mut self, dst: &mut [u8]) {
            dst.fill(0);
        }
    }

    fn key(band: u64, bits: &[bool]) -> HashKey {
        HashKey::new(band, bits)
    }

    #[test]
    fn under_capacity_inserts_are_stored() {
        let mut mem = Memory::new(2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let k = key(1, &[true]);
        for _ in 0..2 {
            let out = mem
                .insert(k, vec![1.0, 0.0], Label::Seen(1), &mut rng)
                .unwrap();
            assert!(matches!(out, InsertOutcome::Stored { .. }));
        }
        assert_eq!(mem.buffer(Label::Seen(1)).unwrap().len(), 2);
    }

    #[test]
    fn full_buffer_replaces_slot_drawn_by_rng() {
        let mut mem = Memory::new(2, 2);
        let mut rng = ZeroRng;
        let k1 = key(1, &[true]);
        let k2 = key(2, &[false]);
        mem.insert(k1, vec![1.0, 0.0], Label::Seen(1), &mut rng)
            .unwrap();
        mem.insert(k1, vec![2.0, 0.0], Label::Seen(1), &mut rng)
            .unwrap();
        let out = mem
            .insert(k2, vec![0.0, 3.0], Label::Seen(1), &mut rng)
            .unwrap();
        match out {
            InsertOutcome::Replaced { seq, evicted } => {
                assert_eq!(evicted.seq, 0);
                assert_eq!(mem.buffer(Label::Seen(1)).unwrap().slots(), &[seq, 1]);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(mem.buffer(Label::Seen(1)).unwrap().len(), 2);
        let in_k1: Vec<u64> = mem.query_bucket(&k1).iter().map(|e| e.seq).collect();
        assert_eq!(in_k1, vec![1]);
        assert_eq!(mem.bucket_mean(&k1).unwrap(), vec![2.0, 0.0]);
    }

    #[test]
    fn known_labels_cannot_be_inserted() {
        let mut mem = Memory::new(4, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        mem.seed_frozen(Label::Known(0), vec![(key(0, &[true]), vec![0.5])])
            .unwrap();
        let err = mem.insert(key(0, &[true]), vec![0.1], Label::Known(0), &mut rng);
        assert!(matches!(err, Err(Error::FrozenBuffer(_))));
        let seq = mem.entries().next().unwrap().seq;
        assert!(matches!(mem.remove(seq), Err(Error::FrozenBuffer(_))));
    }

    #[test]
    fn query_is_exact_match() {
        let mut mem = Memory::new(10, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (k1, k2) = (key(0, &[true, false]), key(0, &[true, true]));
        mem.insert(k1, vec![1.0], Label::Seen(1), &mut rng).unwrap();
        mem.insert(k1, vec![2.0], Label::Seen(1), &mut rng).unwrap();
        mem.insert(k2, vec![3.0], Label::Seen(2), &mut rng).unwrap();
        let got: Vec<f32> = mem.query_bucket(&k1).iter().map(|e| e.feature[0]).collect();
        assert_eq!(got, vec![1.0, 2.0]);
        assert!(mem.query_bucket(&key(5, &[false, false])).is_empty());
    }

    fn angled(deg: f64) -> Vec<f32> {
        let r = deg.to_radians();
        vec![libm::cos(r) as f32, libm::sin(r) as f32]
    }

    #[test]
    fn neighbors_rank_by_mean_direction() {
        let mut mem = Memory::new(10, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let keys = [
            key(0, &[false, false]),
            key(0, &[false, true]),
            key(0, &[true, false]),
        ];
        for (k, deg) in keys.iter().zip([0.0, 10.0, 90.0]) {
            mem.insert(*k, angled(deg), Label::Seen(1), &mut rng)
                .unwrap();
        }
        let joint = mem.joint_bucket(&keys[0], &angled(0.0), 1, false);
        let got: Vec<HashKey> = joint.iter().map(|e| e.key).collect();
        assert_eq!(got, vec![keys[0], keys[1]]);

        let all = mem.joint_bucket(&keys[0], &angled(0.0), 5, false);
        assert_eq!(all.len(), 3);
    }

    #[test]
    fn empty_target_uses_query_direction() {
        let mut mem = Memory::new(10, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (a, b) = (key(0, &[false]), key(1, &[false]));
        mem.insert(a, angled(0.0), Label::Seen(1), &mut rng)
            .unwrap();
        mem.insert(b, angled(80.0), Label::Seen(2), &mut rng)
            .unwrap();
        let target = key(3, &[true]);
        assert_eq!(
            mem.neighbor_buckets(&target, &angled(85.0), 1, false),
            vec![b]
        );
        assert_eq!(
            mem.neighbor_buckets(&target, &angled(5.0), 1, false),
            vec![a]
        );
        // band restriction leaves nothing in band 3
        assert!(mem
            .neighbor_buckets(&target, &angled(5.0), 1, true)
            .is_empty());
    }

    #[test]
    fn equal_similarity_breaks_ties_by_key() {
        let mut mem = Memory::new(10, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let target = key(0, &[false, false]);
        let (x, y) = (key(0, &[true, true]), key(0, &[false, true]));
        mem.insert(target, angled(0.0), Label::Seen(1), &mut rng)
            .unwrap();
        mem.insert(x, angled(30.0), Label::Seen(1), &mut rng)
            .unwrap();
        mem.insert(y, angled(-30.0), Label::Seen(1), &mut rng)
            .unwrap();
        assert_eq!(
            mem.neighbor_buckets(&target, &angled(0.0), 1, false),
            vec![y]
        );
    }

    #[test]
    fn relabel_moves_between_buffers() {
        let mut mem = Memory::new(1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let k = key(0, &[true]);
        mem.insert(k, vec![1.0], Label::Seen(1), &mut rng).unwrap();
        mem.insert(k, vec![2.0], Label::Seen(2), &mut rng).unwrap();
        // destination full
        assert!(mem.relabel(0, Label::Seen(2)).is_err());
        mem.remove(1).unwrap();
        mem.relabel(0, Label::Seen(2)).unwrap();
        assert!(mem.buffer(Label::Seen(1)).unwrap().is_empty());
        assert_eq!(mem.buffer(Label::Seen(2)).unwrap().slots(), &[0]);
        assert_eq!(mem.entry(0).unwrap().label, Label::Seen(2));
        assert!(mem.relabel(0, Label::Known(1)).is_err());
    }
}
