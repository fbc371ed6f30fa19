#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub struct Scenario {
    pub seeds: Vec<(u32, Vec<f32>)>,
    pub stream: Vec<(u32, Vec<f32>)>,
    pub known: u32,
}

/// Isotropic Gaussian clusters with means of norm `radius` in random
/// directions and unit noise; unknown classes are scaled by 0.3.
pub fn gaussian_scenario(
    seed: u64,
    dim: usize,
    known: u32,
    unknown: u32,
    per_class: usize,
    radius: f64,
) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<Vec<f64>> = (0..known + unknown)
        .map(|c| {
            let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let s = if c < known { 1.0 } else { 0.3 };
            v.iter().map(|x| x / n * radius * s).collect()
        })
        .collect();
    let draw = |c: u32, rng: &mut ChaCha8Rng| -> Vec<f32> {
        let s = if c < known { 1.0 } else { 0.3 };
        means[c as usize]
            .iter()
            .map(|m| (m + s * rng.sample::<f64, _>(StandardNormal)) as f32)
            .collect()
    };
    let seeds = (0..known)
        .flat_map(|c| (0..30).map(move |_| c))
        .collect::<Vec<_>>()
        .into_iter()
        .map(|c| (c, draw(c, &mut rng)))
        .collect();
    let mut stream: Vec<(u32, Vec<f32>)> = (0..known + unknown)
        .flat_map(|c| (0..per_class).map(move |_| c))
        .collect::<Vec<_>>()
        .into_iter()
        .map(|c| (c, draw(c, &mut rng)))
        .collect();
    stream.shuffle(&mut rng);
    Scenario {
        seeds,
        stream,
        known,
    }
}
