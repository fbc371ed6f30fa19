//! Memory-free thresholding baselines. They share prototypes, the class cap
//! and EMA updates with the main engine, but decide novelty from a single
//! scalar score.

use alloc::format;

use serde::{Deserialize, Serialize};

use crate::classifier::{PredictionRecord, Route};
use crate::engine::TtdState;
use crate::error::{Error, Result};
use crate::memory::Label;
use crate::vector::{euclidean_to_f64, norm_f32, validate_feature};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    /// Distance to the nearest prototype; novel above `tau`.
    Euclidean,
    /// Largest prototype cosine; novel below `tau`.
    Cosine,
    /// Feature norm; novel below `tau`.
    Magnitude,
    /// Softmax entropy (bits) of cosine logits; novel above `tau`.
    Entropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub kind: BaselineKind,
    pub tau: f64,
    /// Softmax temperature for [`BaselineKind::Entropy`].
    pub temperature: f64,
}

impl BaselineParams {
    pub fn new(kind: BaselineKind, tau: f64) -> Self {
        Self {
            kind,
            tau,
            temperature: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau.is_nan() {
            return Err(Error::invalid_argument("tau must not be NaN"));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::invalid_argument(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Shannon entropy in bits of `softmax(logits / temperature)`.
pub fn softmax_entropy_bits(logits: impl Iterator<Item = f64> + Clone, temperature: f64) -> f64 {
    let max = logits.clone().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logits
        .clone()
        .map(|l| libm::exp((l - max) / temperature))
        .sum();
    logits
        .map(|l| libm::exp((l - max) / temperature) / z)
        .filter(|&p| p > 0.0)
        .map(|p| -p * libm::log2(p))
        .sum()
}

impl TtdState {
    /// Novelty score of `f` under `params` and whether it signals a new class.
    pub fn baseline_score(&self, f: &[f32], params: &BaselineParams) -> Result<(f64, bool)> {
        validate_feature(f, self.dim())?;
        let tau = params.tau;
        Ok(match params.kind {
            BaselineKind::Euclidean => {
                let d = self
                    .prototypes
                    .iter()
                    .map(|p| euclidean_to_f64(f, &p.vector))
                    .fold(f64::INFINITY, f64::min);
                (d, d > tau)
            }
            BaselineKind::Cosine => {
                let (_, u) = self.prototypes.predict(f)?;
                (u, u < tau)
            }
            BaselineKind::Magnitude => {
                let m = norm_f32(f);
                (m, m < tau)
            }
            BaselineKind::Entropy => {
                let sims = self.prototypes.similarities(f)?;
                let h = softmax_entropy_bits(sims.iter().map(|s| s.1), params.temperature);
                (h, h > tau)
            }
        })
    }

    /// Label a non-novel sample would receive, with the record confidence
    /// (largest prototype cosine, 0 for a zero feature).
    ///
    /// The Euclidean baseline assigns by Euclidean distance, the metric it
    /// thresholds on. The others assign by cosine with the engine's
    /// tie-breaks.
    pub fn baseline_assign(&self, f: &[f32], params: &BaselineParams) -> Result<(Label, f64)> {
        validate_feature(f, self.dim())?;
        let euclid = || {
            self.prototypes
                .nearest_euclidean(f)
                .map(|(l, _)| l)
                .ok_or_else(|| Error::invalid_argument("no prototype available"))
        };
        if norm_f32(f) == 0.0 {
            return match params.kind {
                BaselineKind::Euclidean | BaselineKind::Magnitude => Ok((euclid()?, 0.0)),
                _ => Err(Error::invalid_feature("zero-norm feature has no direction")),
            };
        }
        let (cos_label, confidence) = self.prototypes.predict(f)?;
        match params.kind {
            BaselineKind::Euclidean => Ok((euclid()?, confidence)),
            _ => Ok((cos_label, confidence)),
        }
    }

    /// Frozen prediction for a baseline: the nearest-prototype label, no
    /// novelty test and no state change.
    pub fn baseline_predict_frozen(&self, f: &[f32], params: &BaselineParams) -> Result<Label> {
        self.baseline_assign(f, params).map(|(l, _)| l)
    }

    /// One stream step of a thresholding baseline.
    ///
    /// A non-novel sample takes its nearest prototype's label (see
    /// [`baseline_assign`](Self::baseline_assign)) and updates that prototype
    /// if it is a seen class. A novel sample allocates a new class with
    /// prototype `f`; when the cap is exhausted it falls back to the nearest
    /// prototype.
    pub fn baseline_step(
        &mut self,
        f: &[f32],
        ground_truth: Option<u32>,
        params: &BaselineParams,
    ) -> Result<PredictionRecord> {
        params.validate()?;
        let (_, novel) = self.baseline_score(f, params)?;
        let (proto_label, confidence) = self.baseline_assign(f, params)?;
        let (predicted, route) = if novel {
            match self.allocate_prototype(f) {
                Ok(label) => (label, Route::Novel),
                Err(Error::CapExhausted(_)) => (proto_label, Route::CappedFallback),
                Err(e) => return Err(e),
            }
        } else {
            if proto_label.is_seen() {
                self.ema(proto_label, f)?;
            }
            (proto_label, Route::Prototype)
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
}
