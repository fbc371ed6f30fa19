//! Gaussian stand-in for a frozen backbone's feature space.
//!
//! Each class `c` has a mean of norm `mean_norm * sigma` in a random
//! direction and isotropic noise `sigma`. The whole class distribution is
//! then multiplied by a scale `s_c`, which is 1 for known classes and
//! `unknown_norm_scale` for unknown ones, so unknown classes sit closer to the
//! origin while keeping the same angular spread.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledFeatures;
use crate::error::{Error, Result};

const MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub known_classes: u32,
    pub unknown_classes: u32,
    /// Seed-set samples per known class.
    pub seed_per_class: usize,
    /// Stream samples per class, known and unknown alike.
    pub stream_per_class: usize,
    pub sigma: f64,
    /// Minimum distance between scaled class means, in units of the larger
    /// of the two classes' scaled sigma.
    pub separation: f64,
    /// Mean norm in units of sigma, before scaling.
    pub mean_norm: f64,
    /// Norm multiplier applied to unknown classes.
    pub unknown_norm_scale: f64,
    pub shuffle_seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            dim: 64,
            known_classes: 7,
            unknown_classes: 3,
            seed_per_class: 50,
            stream_per_class: 200,
            sigma: 1.0,
            separation: 8.0,
            mean_norm: 16.0,
            unknown_norm_scale: 0.25,
            shuffle_seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synthetic spec: {m}")));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if self.known_classes == 0 {
            return bad("at least one known class is required");
        }
        if self.seed_per_class == 0 {
            return bad("seed_per_class must be positive");
        }
        for (name, v) in [
            ("sigma", self.sigma),
            ("mean_norm", self.mean_norm),
            ("unknown_norm_scale", self.unknown_norm_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(&format!("{name} must be positive and finite"));
            }
        }
        if !(self.separation.is_finite() && self.separation >= 0.0) {
            return bad("separation must be non-negative");
        }
        Ok(())
    }

    pub fn total_classes(&self) -> u32 {
        self.known_classes + self.unknown_classes
    }

    pub fn scale_of(&self, class: u32) -> f64 {
        if class < self.known_classes {
            1.0
        } else {
            self.unknown_norm_scale
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    /// Labeled samples of the known classes only.
    pub seed_set: LabeledFeatures,
    /// Known and unknown classes, shuffled.
    pub stream: LabeledFeatures,
    /// Scaled class means, indexed by class id.
    pub means: Vec<Vec<f64>>,
}

fn unit_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn separated(spec: &SyntheticSpec, means: &[Vec<f64>]) -> bool {
    for a in 0..means.len() {
        for b in a + 1..means.len() {
            let d = means[a]
                .iter()
                .zip(&means[b])
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            let unit = spec.sigma * spec.scale_of(a as u32).max(spec.scale_of(b as u32));
            if d < spec.separation * unit {
                return false;
            }
        }
    }
    true
}

fn draw(rng: &mut ChaCha8Rng, spec: &SyntheticSpec, class: u32, mean: &[f64]) -> Vec<f32> {
    let s = spec.scale_of(class);
    mean.iter()
        .map(|&m| {
            let n: f64 = rng.sample(StandardNormal);
            (m + s * spec.sigma * n) as f32
        })
        .collect()
}

/// Seed set and shuffled stream for `spec`, deterministic in `seed` and
/// `spec.shuffle_seed`.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = spec.total_classes();
    let mut means = None;
    for _ in 0..MAX_ATTEMPTS {
        let candidate: Vec<Vec<f64>> = (0..classes)
            .map(|c| {
                let r = spec.mean_norm * spec.sigma * spec.scale_of(c);
                unit_direction(&mut rng, spec.dim)
                    .into_iter()
                    .map(|x| x * r)
                    .collect()
            })
            .collect();
        if separated(spec, &candidate) {
            means = Some(candidate);
            break;
        }
    }
    let means = means.ok_or_else(|| {
        Error::Generation(format!(
            "no {classes} means {}σ apart in {} dimensions after {MAX_ATTEMPTS} attempts",
            spec.separation, spec.dim
        ))
    })?;

    let mut seed_set = LabeledFeatures::new(spec.dim);
    for c in 0..spec.known_classes {
        for _ in 0..spec.seed_per_class {
            let f = draw(&mut rng, spec, c, &means[c as usize]);
            seed_set.push(Some(c), f);
        }
    }
    let mut samples = Vec::with_capacity(classes as usize * spec.stream_per_class);
    for c in 0..classes {
        for _ in 0..spec.stream_per_class {
            samples.push((c, draw(&mut rng, spec, c, &means[c as usize])));
        }
    }
    samples.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.shuffle_seed));
    let mut stream = LabeledFeatures::new(spec.dim);
    for (c, f) in samples {
        stream.push(Some(c), f);
    }
    Ok(SyntheticData {
        seed_set,
        stream,
        means,
    })
}
