//! The streaming engine: one [`TtdState`] owns the basis, the memory, the
//! prototypes and the RNG, and processes samples one at a time.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;
use core::hash::Hasher;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{
    top_k_vote, LshDecision, PredictionRecord, Prototype, PrototypeSet, Route,
};
use crate::error::{Error, Result};
use crate::hashing::{BasisConfig, BasisMode, DirectionBasis, HashKey};
use crate::memory::{Label, Memory, MemoryEntry};
use crate::vector::validate_feature;

/// Which bucket set must reach `min_occupancy` before a vote is trusted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoveltyScope {
    /// The sample's own bucket. Neighbour buckets only feed the vote.
    Target,
    /// The joint bucket (target plus neighbours).
    Joint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MemoryConfig {
    /// Per-class buffer capacity `K`.
    pub capacity: usize,
    pub min_occupancy: usize,
    pub neighbor_buckets: usize,
    /// Restrict neighbour buckets to the target's norm band.
    pub band_restricted: bool,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self {
            capacity: 20,
            min_occupancy: 1,
            neighbor_buckets: 3,
            band_restricted: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    /// Confidence boundary: prototypes decide when `u > boundary`.
    pub boundary: f64,
    pub vote_k: usize,
    /// EMA factor for seen-class prototypes.
    pub ema_alpha: f64,
    /// Maximum number of discoverable classes; `None` is unbounded.
    pub class_cap: Option<u32>,
    pub novelty_scope: NoveltyScope,
    /// Replace automatic ids with ground-truth annotations on discovery.
    pub oracle_labels: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            boundary: 0.7,
            vote_k: 10,
            ema_alpha: 0.9,
            class_cap: None,
            novelty_scope: NoveltyScope::Target,
            oracle_labels: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub basis: BasisConfig,
    pub memory: MemoryConfig,
    pub classifier: ClassifierConfig,
    /// Seed of the engine RNG (seed truncation, reservoir, self-correction).
    pub seed: u64,
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let c = &self.classifier;
        if !(0.0..=1.0).contains(&c.ema_alpha) {
            return Err(Error::invalid_argument(format!(
                "ema_alpha must lie in [0, 1], got {}",
                c.ema_alpha
            )));
        }
        if c.boundary.is_nan() {
            return Err(Error::invalid_argument("boundary must not be NaN"));
        }
        if c.vote_k == 0 {
            return Err(Error::invalid_argument("vote_k must be at least 1"));
        }
        if !(self.basis.kappa.is_finite() && self.basis.kappa > 0.0) {
            return Err(Error::invalid_argument("kappa must be positive and finite"));
        }
        if self.basis.directions == 0 {
            return Err(Error::invalid_argument(
                "at least one direction is required",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TtdState {
    pub(crate) config: EngineConfig,
    pub(crate) basis: DirectionBasis,
    pub(crate) memory: Memory,
    pub(crate) prototypes: PrototypeSet,
    pub(crate) rng: ChaCha8Rng,
    pub(crate) next_seen: u32,
    pub(crate) annotations: BTreeMap<u32, u32>,
    pub(crate) known_classes: BTreeSet<u32>,
    pub(crate) steps: u64,
}

impl TtdState {
    /// Builds a state from labelled seed features of the known classes.
    ///
    /// Each class keeps at most `K` seeds (a uniform subset drawn with the
    /// engine RNG, original order preserved); its prototype is the mean of
    /// all of its seeds. A PCA basis is fitted on the retained seeds. Known
    /// buffers are frozen.
    pub fn seeded(config: EngineConfig, seeds: &[(u32, Vec<f32>)]) -> Result<Self> {
        config.validate()?;
        let dim = seeds
            .first()
            .map(|(_, f)| f.len())
            .ok_or_else(|| Error::invalid_argument("seed set is empty"))?;
        if dim == 0 {
            return Err(Error::invalid_argument(
                "features must have positive dimension",
            ));
        }
        let mut by_class: BTreeMap<u32, Vec<&Vec<f32>>> = BTreeMap::new();
        for (class, f) in seeds {
            if f.len() != dim {
                return Err(Error::invalid_argument(format!(
                    "seed feature for class {class} has dimension {}, expected {dim}",
                    f.len()
                )));
            }
            validate_feature(f, dim)?;
            by_class.entry(*class).or_default().push(f);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let capacity = config.memory.capacity;
        let mut prototypes = PrototypeSet::new();
        let mut retained: Vec<(u32, Vec<Vec<f32>>)> = Vec::with_capacity(by_class.len());
        for (&class, feats) in &by_class {
            let mut mean = alloc::vec![0.0f64; dim];
            for f in feats {
                for (m, &x) in mean.iter_mut().zip(f.iter()) {
                    *m += x as f64;
                }
            }
            mean.iter_mut().for_each(|m| *m /= feats.len() as f64);
            prototypes.insert(Prototype::new(Label::Known(class), mean));

            let keep: Vec<Vec<f32>> = if feats.len() > capacity {
                let mut picked = index::sample(&mut rng, feats.len(), capacity).into_vec();
                picked.sort_unstable();
                picked.into_iter().map(|i| feats[i].clone()).collect()
            } else {
                feats.iter().map(|f| (*f).clone()).collect()
            };
            retained.push((class, keep));
        }

        let basis = match config.basis.mode {
            BasisMode::Random => DirectionBasis::new(&config.basis, dim, None)?,
            BasisMode::Pca => {
                let rows: Vec<Vec<f32>> = retained
                    .iter()
                    .flat_map(|(_, fs)| fs.iter().cloned())
                    .collect();
                DirectionBasis::new(&config.basis, dim, Some(&rows))?
            }
        };

        let mut memory = Memory::new(capacity, dim);
        for (class, feats) in retained {
            let items = feats
                .into_iter()
                .map(|f| (basis.hash_unchecked(&f), f))
                .collect();
            memory.seed_frozen(Label::Known(class), items)?;
        }

        Ok(Self {
            known_classes: by_class.keys().copied().collect(),
            config,
            basis,
            memory,
            prototypes,
            rng,
            next_seen: 1,
            annotations: BTreeMap::new(),
            steps: 0,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn basis(&self) -> &DirectionBasis {
        &self.basis
    }

    pub fn memory(&self) -> &Memory {
        &self.memory
    }

    /// Direct memory access for tooling and experiments. Known buffers stay
    /// frozen regardless.
    pub fn memory_mut(&mut self) -> &mut Memory {
        &mut self.memory
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn prototypes(&self) -> &PrototypeSet {
        &self.prototypes
    }

    pub fn known_classes(&self) -> &BTreeSet<u32> {
        &self.known_classes
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Number of processed stream samples.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Id the next discovered class would receive.
    pub fn next_seen_id(&self) -> u32 {
        self.next_seen
    }

    pub fn discovered_count(&self) -> u32 {
        self.next_seen - 1
    }

    pub fn hash(&self, f: &[f32]) -> Result<HashKey> {
        self.basis.hash_feature(f)
    }

    pub fn joint_bucket(&self, key: &HashKey, f: &[f32]) -> Vec<&MemoryEntry> {
        self.memory.joint_bucket(
            key,
            f,
            self.config.memory.neighbor_buckets,
            self.config.memory.band_restricted,
        )
    }

    /// Bucket classifier for a feature and its key.
    pub fn lsh_predict(&self, f: &[f32], key: &HashKey) -> LshDecision {
        let joint = self.joint_bucket(key, f);
        let occupancy = match self.config.classifier.novelty_scope {
            NoveltyScope::Target => self.memory.bucket_len(key),
            NoveltyScope::Joint => joint.len(),
        };
        if occupancy < self.config.memory.min_occupancy {
            return LshDecision::Novel;
        }
        top_k_vote(joint, f, self.config.classifier.vote_k).unwrap_or(LshDecision::Novel)
    }

    /// Processes one stream sample.
    ///
    /// `ground_truth` is only consulted in oracle-label mode, at the point
    /// where a new class would otherwise be allocated.
    pub fn step(&mut self, f: &[f32], ground_truth: Option<u32>) -> Result<PredictionRecord> {
        validate_feature(f, self.dim())?;
        let key = self.basis.hash_unchecked(f);
        let (proto_label, confidence) = self.prototypes.predict(f)?;

        let (predicted, route) = if confidence > self.config.classifier.boundary {
            if proto_label.is_seen() {
                self.absorb(proto_label, key, f)?;
            }
            (proto_label, Route::Prototype)
        } else {
            match self.lsh_predict(f, &key) {
                LshDecision::Vote { label, .. } => {
                    if label.is_seen() {
                        self.absorb(label, key, f)?;
                    }
                    (label, Route::LshVote)
                }
                LshDecision::Novel => self.discover(f, key, proto_label, ground_truth)?,
            }
        };

        let record = PredictionRecord {
            step: self.steps,
            ground_truth,
            predicted,
            confidence,
            route,
        };
        self.steps += 1;
        Ok(record)
    }

    fn discover(
        &mut self,
        f: &[f32],
        key: HashKey,
        proto_label: Label,
        ground_truth: Option<u32>,
    ) -> Result<(Label, Route)> {
        if self.config.classifier.oracle_labels {
            if let Some(class) = ground_truth {
                if self.known_classes.contains(&class) {
                    return Ok((Label::Known(class), Route::Annotated));
                }
                if let Some(&id) = self.annotations.get(&class) {
                    let label = Label::Seen(id);
                    self.absorb(label, key, f)?;
                    return Ok((label, Route::Annotated));
                }
            }
        }
        match self.allocate_new_class(f, key) {
            Ok(label) => {
                if self.config.classifier.oracle_labels {
                    if let Some(class) = ground_truth {
                        self.annotations.insert(class, label.id());
                    }
                }
                Ok((label, Route::Novel))
            }
            Err(Error::CapExhausted(_)) => {
                let joint = self.joint_bucket(&key, f);
                let label = match top_k_vote(joint, f, self.config.classifier.vote_k) {
                    Some(LshDecision::Vote { label, .. }) => label,
                    _ => proto_label,
                };
                Ok((label, Route::CappedFallback))
            }
            Err(e) => Err(e),
        }
    }

    /// Allocates the next `Seen` id with prototype `f` and stores `f` in its
    /// new buffer.
    pub fn allocate_new_class(&mut self, f: &[f32], key: HashKey) -> Result<Label> {
        let label = self.allocate_prototype(f)?;
        self.memory.insert(key, f.to_vec(), label, &mut self.rng)?;
        Ok(label)
    }

    pub(crate) fn allocate_prototype(&mut self, f: &[f32]) -> Result<Label> {
        if let Some(cap) = self.config.classifier.class_cap {
            if self.next_seen > cap {
                return Err(Error::CapExhausted(cap));
            }
        }
        let label = Label::Seen(self.next_seen);
        self.next_seen += 1;
        self.prototypes
            .insert(Prototype::new(label, f.iter().map(|&x| x as f64).collect()));
        Ok(label)
    }

    pub(crate) fn ema(&mut self, label: Label, f: &[f32]) -> Result<()> {
        let alpha = self.config.classifier.ema_alpha;
        let proto = self
            .prototypes
            .get_mut(label)
            .ok_or_else(|| Error::invalid_argument(format!("no prototype for {label}")))?;
        proto.ema_update(f, alpha)
    }

    fn absorb(&mut self, label: Label, key: HashKey, f: &[f32]) -> Result<()> {
        self.ema(label, f)?;
        self.memory.insert(key, f.to_vec(), label, &mut self.rng)?;
        Ok(())
    }

    /// Prediction without any state change, used for pre/post evaluation.
    ///
    /// Same gate as [`step`](Self::step); a sample that would be novel falls
    /// back to its nearest prototype.
    pub fn predict_frozen(&self, f: &[f32]) -> Result<(Label, Route, f64)> {
        validate_feature(f, self.dim())?;
        let (proto_label, confidence) = self.prototypes.predict(f)?;
        if confidence > self.config.classifier.boundary {
            return Ok((proto_label, Route::Prototype, confidence));
        }
        let key = self.basis.hash_unchecked(f);
        match self.lsh_predict(f, &key) {
            LshDecision::Vote { label, .. } => Ok((label, Route::LshVote, confidence)),
            LshDecision::Novel => Ok((proto_label, Route::Prototype, confidence)),
        }
    }

    /// Digest of the known prototypes and the known memory buffers.
    pub fn known_state_digest(&self) -> u64 {
        let mut h = Fnv64::default();
        for p in self.prototypes.iter().filter(|p| p.label.is_known()) {
            hash_prototype(&mut h, p);
        }
        for b in self.memory.buffers().filter(|b| b.label().is_known()) {
            hash_label(&mut h, b.label());
            for &seq in b.slots() {
                hash_entry(&mut h, self.memory.entry(seq).expect("slot entry"));
            }
        }
        h.finish()
    }

    /// Digest of memory, prototypes and the next seen id.
    pub fn state_digest(&self) -> u64 {
        let mut h = Fnv64::default();
        for p in self.prototypes.iter() {
            hash_prototype(&mut h, p);
        }
        for b in self.memory.buffers() {
            hash_label(&mut h, b.label());
            h.write_u64(b.stream_count());
            for &seq in b.slots() {
                hash_entry(&mut h, self.memory.entry(seq).expect("slot entry"));
            }
        }
        for (key, sum) in self.memory.raw_bucket_sums() {
            h.write_u64(key.norm_band());
            h.write_u64(key.packed_bits());
            sum.iter().for_each(|s| h.write_u64(s.to_bits()));
        }
        h.write_u32(self.next_seen);
        h.finish()
    }
}

fn hash_label(h: &mut Fnv64, label: Label) {
    h.write_u8(label.is_seen() as u8);
    h.write_u32(label.id());
}

fn hash_prototype(h: &mut Fnv64, p: &Prototype) {
    hash_label(h, p.label);
    h.write_u64(p.update_count);
    p.vector.iter().for_each(|x| h.write_u64(x.to_bits()));
}

fn hash_entry(h: &mut Fnv64, e: &MemoryEntry) {
    h.write_u64(e.seq);
    hash_label(h, e.label);
    e.feature.iter().for_each(|x| h.write_u32(x.to_bits()));
}

/// FNV-1a, 64 bit.
struct Fnv64(u64);

impl Default for Fnv64 {
    fn default() -> Self {
        Fnv64(0xcbf2_9ce4_8422_2325)
    }
}

impl Hasher for Fnv64 {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
}
