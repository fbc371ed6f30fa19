//! Binary state snapshots.
//!
//! Layout (little endian):
//!
//! ```text
//! "TTDS" u8:version
//! u32:len  config as JSON
//! u32:dim
//! [u8;32]:rng seed  u64:rng stream  u128:rng word position
//! u32:next seen id  u64:steps
//! u32:n  n x u32 known classes
//! u32:n  n x (u32 true class, u32 seen id) annotations
//! u32:n  n x (u32 tag, u32 id, u64 updates, dim x f64) prototypes
//! u64:capacity u64:next seq u64:n  n x (u32 tag, u32 id, u64 seq, dim x f32) entries
//! u32:n  n x (u32 tag, u32 id, u64 stream count, u8 frozen, u32 m, m x u64 slots) buffers
//! u32:n  n x (u64 band, u64 bits, u8 width, dim x f64) bucket sums
//! ```
//!
//! Label tags: 0 known, 1 seen. Hash keys of entries are recomputed from the
//! basis on load; the basis itself is regenerated from the config (a PCA
//! basis from the known entries).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classifier::{Prototype, PrototypeSet};
use crate::engine::{EngineConfig, TtdState};
use crate::error::{Error, Result};
use crate::hashing::{BasisMode, DirectionBasis, HashKey};
use crate::memory::{Label, Memory, MemoryEntry};

pub const MAGIC: &[u8; 4] = b"TTDS";
pub const VERSION: u8 = 1;

pub fn encode(state: &TtdState) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(MAGIC);
    w.u8(VERSION);
    let config = serde_json::to_vec(&state.config).expect("config serializes");
    w.u32(config.len() as u32);
    w.bytes(&config);
    let dim = state.dim();
    w.u32(dim as u32);

    w.bytes(&state.rng.get_seed());
    w.u64(state.rng.get_stream());
    w.u128(state.rng.get_word_pos());
    w.u32(state.next_seen);
    w.u64(state.steps);

    w.u32(state.known_classes.len() as u32);
    state.known_classes.iter().for_each(|&c| w.u32(c));
    w.u32(state.annotations.len() as u32);
    for (&class, &id) in &state.annotations {
        w.u32(class);
        w.u32(id);
    }

    w.u32(state.prototypes.len() as u32);
    for p in state.prototypes.iter() {
        w.label(p.label);
        w.u64(p.update_count);
        p.vector.iter().for_each(|&x| w.f64(x));
    }

    let mem = &state.memory;
    w.u64(mem.capacity() as u64);
    w.u64(mem.next_seq());
    w.u64(mem.len() as u64);
    for e in mem.entries() {
        w.label(e.label);
        w.u64(e.seq);
        e.feature.iter().for_each(|&x| w.f32(x));
    }
    let buffers: Vec<_> = mem.buffers().collect();
    w.u32(buffers.len() as u32);
    for b in buffers {
        w.label(b.label());
        w.u64(b.stream_count());
        w.u8(b.is_frozen() as u8);
        w.u32(b.len() as u32);
        b.slots().iter().for_each(|&s| w.u64(s));
    }
    let sums: Vec<_> = mem.raw_bucket_sums().collect();
    w.u32(sums.len() as u32);
    for (key, sum) in sums {
        w.u64(key.norm_band());
        w.u64(key.packed_bits());
        w.u8(key.width() as u8);
        sum.iter().for_each(|&x| w.f64(x));
    }
    w.0
}

pub fn decode(bytes: &[u8]) -> Result<TtdState> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::IncompatibleSnapshot("bad magic".into()));
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(Error::IncompatibleSnapshot(format!(
            "version {version}, expected {VERSION}"
        )));
    }
    let config_len = r.u32()? as usize;
    let config: EngineConfig =
        serde_json::from_slice(r.take(config_len)?).map_err(|e| corrupt(format!("config: {e}")))?;
    let dim = r.u32()? as usize;

    let mut seed = [0u8; 32];
    seed.copy_from_slice(r.take(32)?);
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(r.u64()?);
    rng.set_word_pos(r.u128()?);
    let next_seen = r.u32()?;
    let steps = r.u64()?;

    let known_classes: BTreeSet<u32> = (0..r.u32()?).map(|_| r.u32()).collect::<Result<_>>()?;
    let mut annotations = BTreeMap::new();
    for _ in 0..r.u32()? {
        annotations.insert(r.u32()?, r.u32()?);
    }

    let mut prototypes = PrototypeSet::new();
    for _ in 0..r.u32()? {
        let label = r.label()?;
        let update_count = r.u64()?;
        let vector = (0..dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        prototypes.insert(Prototype {
            label,
            vector,
            update_count,
        });
    }

    let capacity = r.u64()? as usize;
    let next_seq = r.u64()?;
    let n_entries = r.u64()?;
    let mut raw_entries = Vec::new();
    for _ in 0..n_entries {
        let label = r.label()?;
        let seq = r.u64()?;
        let feature = (0..dim).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
        raw_entries.push((label, seq, feature));
    }
    let mut buffers = Vec::new();
    for _ in 0..r.u32()? {
        let label = r.label()?;
        let stream_count = r.u64()?;
        let frozen = r.u8()? != 0;
        let slots = (0..r.u32()?).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        buffers.push((label, slots, stream_count, frozen));
    }
    let mut sums = Vec::new();
    for _ in 0..r.u32()? {
        let band = r.u64()?;
        let bits = r.u64()?;
        let width = r.u8()? as usize;
        if width == 0 || width > 64 {
            return Err(corrupt("bucket key width".into()));
        }
        let signs: Vec<bool> = (0..width)
            .map(|i| bits >> (width - 1 - i) & 1 == 1)
            .collect();
        let sum = (0..dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        sums.push((HashKey::new(band, &signs), sum));
    }
    if r.pos != bytes.len() {
        return Err(corrupt("trailing bytes".into()));
    }

    let basis = match config.basis.mode {
        BasisMode::Random => DirectionBasis::new(&config.basis, dim, None)?,
        BasisMode::Pca => {
            let rows: Vec<Vec<f32>> = raw_entries
                .iter()
                .filter(|(l, _, _)| l.is_known())
                .map(|(_, _, f)| f.clone())
                .collect();
            DirectionBasis::new(&config.basis, dim, Some(&rows))?
        }
    };
    let entries = raw_entries
        .into_iter()
        .map(|(label, seq, feature)| MemoryEntry {
            key: basis.hash_unchecked(&feature),
            feature,
            label,
            seq,
        })
        .collect();
    let memory =
        Memory::restore(capacity, dim, next_seq, entries, buffers, sums).map_err(corrupt)?;

    Ok(TtdState {
        config,
        basis,
        memory,
        prototypes,
        rng,
        next_seen,
        annotations,
        known_classes,
        steps,
    })
}

fn corrupt(msg: String) -> Error {
    Error::CorruptSnapshot(msg)
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }
    fn u128(&mut self, v: u128) {
        self.bytes(&v.to_le_bytes());
    }
    fn f32(&mut self, v: f32) {
        self.bytes(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }
    fn label(&mut self, l: Label) {
        self.u32(l.is_seen() as u32);
        self.u32(l.id());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| corrupt("unexpected end of snapshot".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut a = [0u8; N];
        a.copy_from_slice(self.take(N)?);
        Ok(a)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.array()?))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.array()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
    fn label(&mut self) -> Result<Label> {
        match (self.u32()?, self.u32()?) {
            (0, id) => Ok(Label::Known(id)),
            (1, id) => Ok(Label::Seen(id)),
            (tag, _) => Err(corrupt(format!("unknown label tag {tag}"))),
        }
    }
}
