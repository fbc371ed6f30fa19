//! Streaming test-time class discovery.
//!
//! The engine classifies a stream of feature vectors against a set of known
//! classes and allocates new class labels (`#C1`, `#C2`, ...) when a sample
//! looks like nothing stored so far. It combines:
//!
//! * a hash memory keyed by `(floor(kappa * |f|), sign(f . r_i))` ([`hashing`], [`memory`]),
//! * a cosine prototype classifier gated by a confidence threshold, falling
//!   back to a top-k vote over a bucket and its nearest neighbour buckets
//!   ([`classifier`], [`engine`]),
//! * periodic relabelling of stored pseudo-labels ([`selfcorrect`]),
//! * memory-free thresholding baselines ([`baselines`]),
//! * the evaluation metrics used to score a run ([`metrics`]).
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the experiment
//! harness and the command line live in the `ttd` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod classifier;
pub mod engine;
pub mod error;
pub mod hashing;
pub mod memory;
pub mod metrics;
pub mod selfcorrect;
pub mod snapshot;
mod vector;

pub use baselines::{BaselineKind, BaselineParams};
pub use classifier::{LshDecision, PredictionRecord, Prototype, PrototypeSet, Route};
pub use engine::{ClassifierConfig, EngineConfig, MemoryConfig, NoveltyScope, TtdState};
pub use error::{Error, Result};
pub use hashing::{BasisConfig, BasisMode, DirectionBasis, HashKey};
pub use memory::{InsertOutcome, Label, Memory, MemoryEntry};
pub use selfcorrect::ScReport;
