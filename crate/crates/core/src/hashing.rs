//! Hash keys built from the feature norm and the signs of projections onto a
//! fixed set of unit directions.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::{dot_mixed, norm_f32, validate_feature};

/// Sign bits are packed into a `u64`.
pub const MAX_DIRECTIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisMode {
    Random,
    Pca,
}

/// Replayable description of a basis. Directions are never stored; they are
/// regenerated from these parameters (and, for PCA, from the seed features).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BasisConfig {
    pub directions: usize,
    pub kappa: f64,
    pub seed: u64,
    pub mode: BasisMode,
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self {
            directions: 8,
            kappa: 1.0,
            seed: 0,
            mode: BasisMode::Random,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionBasis {
    directions: Vec<Vec<f64>>,
    scale_factor: f64,
    mode: BasisMode,
    seed: u64,
    dim: usize,
}

impl DirectionBasis {
    /// Builds `n` unit directions in `d` dimensions.
    ///
    /// Random mode draws i.i.d. standard normal components from a ChaCha8
    /// stream seeded with `seed` and normalizes each direction. PCA mode
    /// returns the top-`n` eigenvectors of the sample covariance of
    /// `pca_input`, each sign-fixed so its first nonzero component is positive.
    pub fn make_directions(
        n: usize,
        d: usize,
        seed: u64,
        mode: BasisMode,
        pca_input: Option<&[Vec<f32>]>,
    ) -> Result<Vec<Vec<f64>>> {
        if n == 0 || d == 0 {
            return Err(Error::invalid_argument(format!(
                "direction count and dimension must be positive (n={n}, d={d})"
            )));
        }
        if n > MAX_DIRECTIONS {
            return Err(Error::invalid_argument(format!(
                "at most {MAX_DIRECTIONS} directions are supported, got {n}"
            )));
        }
        match mode {
            BasisMode::Random => Ok(random_directions(n, d, seed)),
            BasisMode::Pca => {
                let rows = pca_input
                    .ok_or_else(|| Error::invalid_argument("PCA basis requires input features"))?;
                pca_directions(n, d, rows)
            }
        }
    }

    pub fn new(config: &BasisConfig, dim: usize, pca_input: Option<&[Vec<f32>]>) -> Result<Self> {
        if !(config.kappa.is_finite() && config.kappa > 0.0) {
            return Err(Error::invalid_argument(format!(
                "kappa must be positive and finite, got {}",
                config.kappa
            )));
        }
        let directions =
            Self::make_directions(config.directions, dim, config.seed, config.mode, pca_input)?;
        Ok(Self {
            directions,
            scale_factor: config.kappa,
            mode: config.mode,
            seed: config.seed,
            dim,
        })
    }

    /// Wraps explicit directions. Each is normalized; mostly useful in tests.
    pub fn from_directions(directions: Vec<Vec<f64>>, scale_factor: f64) -> Result<Self> {
        let dim = directions.first().map(Vec::len).unwrap_or(0);
        if directions.is_empty() || dim == 0 || directions.len() > MAX_DIRECTIONS {
            return Err(Error::invalid_argument("need 1..=64 non-empty directions"));
        }
        if !(scale_factor.is_finite() && scale_factor > 0.0) {
            return Err(Error::invalid_argument("kappa must be positive and finite"));
        }
        let mut out = Vec::with_capacity(directions.len());
        for mut r in directions {
            if r.len() != dim {
                return Err(Error::invalid_argument("directions differ in dimension"));
            }
            let norm = libm::sqrt(r.iter().map(|x| x * x).sum::<f64>());
            if !(norm.is_finite() && norm > 0.0) {
                return Err(Error::invalid_argument(
                    "direction has zero or non-finite norm",
                ));
            }
            r.iter_mut().for_each(|x| *x /= norm);
            out.push(r);
        }
        Ok(Self {
            directions: out,
            scale_factor,
            mode: BasisMode::Random,
            seed: 0,
            dim,
        })
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scale_factor(&self) -> f64 {
        self.scale_factor
    }

    pub fn mode(&self) -> BasisMode {
        self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Computes the bucket address of `f`.
    ///
    /// `norm_band = floor(kappa * |f|)`; sign bit `i` is set when
    /// `f . r_i >= 0`, so a zero projection counts as positive.
    pub fn hash_feature(&self, f: &[f32]) -> Result<HashKey> {
        validate_feature(f, self.dim)?;
        Ok(self.hash_unchecked(f))
    }

    pub(crate) fn hash_unchecked(&self, f: &[f32]) -> HashKey {
        let band = libm::floor(self.scale_factor * norm_f32(f));
        let norm_band = if band >= u64::MAX as f64 {
            u64::MAX
        } else {
            band as u64
        };
        let n = self.directions.len();
        let mut bits = 0u64;
        for (i, r) in self.directions.iter().enumerate() {
            if dot_mixed(f, r) >= 0.0 {
                bits |= 1 << (n - 1 - i);
            }
        }
        HashKey {
            norm_band,
            bits,
            width: n as u8,
        }
    }
}

fn random_directions(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
            out.push(v);
        }
    }
    out
}

fn pca_directions(n: usize, d: usize, rows: &[Vec<f32>]) -> Result<Vec<Vec<f64>>> {
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::invalid_argument(
            "PCA input rows must have dimension d",
        ));
    }
    if rows.len() < n {
        return Err(Error::InsufficientRank {
            rank: rows.len().saturating_sub(1),
            requested: n,
        });
    }
    let m = rows.len() as f64;
    let mut mean = alloc::vec![0.0f64; d];
    for r in rows {
        for (acc, &x) in mean.iter_mut().zip(r) {
            *acc += x as f64;
        }
    }
    mean.iter_mut().for_each(|x| *x /= m);

    let mut cov = DMatrix::<f64>::zeros(d, d);
    for r in rows {
        for i in 0..d {
            let ci = r[i] as f64 - mean[i];
            if ci == 0.0 {
                continue;
            }
            for j in i..d {
                cov[(i, j)] += ci * (r[j] as f64 - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / m;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let top = eig.eigenvalues[order[0]];
    let tol = if top > 0.0 {
        top * 1e-10
    } else {
        f64::MIN_POSITIVE
    };
    let rank = order.iter().filter(|&&i| eig.eigenvalues[i] > tol).count();
    if rank < n {
        return Err(Error::InsufficientRank { rank, requested: n });
    }

    let mut out = Vec::with_capacity(n);
    for &col in order.iter().take(n) {
        let mut v: Vec<f64> = eig.eigenvectors.column(col).iter().copied().collect();
        let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        v.iter_mut().for_each(|x| *x /= norm);
        if let Some(&first) = v.iter().find(|x| x.abs() > 1e-12) {
            if first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        out.push(v);
    }
    Ok(out)
}

/// Bucket address: a norm band followed by `width` sign bits.
///
/// Bit `i` is stored at position `width - 1 - i`, so the derived ordering is
/// lexicographic over `(norm_band, bit_0, bit_1, ...)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HashKey {
    norm_band: u64,
    bits: u64,
    width: u8,
}

impl HashKey {
    pub fn new(norm_band: u64, sign_bits: &[bool]) -> Self {
        assert!(sign_bits.len() <= MAX_DIRECTIONS, "too many sign bits");
        let n = sign_bits.len();
        let bits = sign_bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .fold(0u64, |acc, (i, _)| acc | (1 << (n - 1 - i)));
        Self {
            norm_band,
            bits,
            width: n as u8,
        }
    }

    pub fn norm_band(&self) -> u64 {
        self.norm_band
    }

    pub fn width(&self) -> usize {
        self.width as usize
    }

    pub fn sign_bit(&self, i: usize) -> bool {
        assert!(i < self.width(), "sign bit index out of range");
        self.bits >> (self.width() - 1 - i) & 1 == 1
    }

    pub fn sign_bits(&self) -> Vec<bool> {
        (0..self.width()).map(|i| self.sign_bit(i)).collect()
    }

    /// Packed sign bits, bit 0 most significant.
    pub fn packed_bits(&self) -> u64 {
        self.bits
    }
}

impl fmt::Display for HashKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.norm_band)?;
        for i in 0..self.width() {
            f.write_str(if self.sign_bit(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;
    use rand::Rng;

    fn axis_basis(kappa: f64) -> DirectionBasis {
        DirectionBasis::from_directions(vec![vec![1.0, 0.0], vec![0.0, 1.0]], kappa).unwrap()
    }

    #[test]
    fn hash_of_three_four() {
        let key = axis_basis(1.0).hash_feature(&[3.0, 4.0]).unwrap();
        assert_eq!(key.norm_band(), 5);
        assert_eq!(key.sign_bits(), vec![true, true]);
    }

    #[test]
    fn zero_projection_maps_to_positive_bit() {
        let key = axis_basis(2.0).hash_feature(&[-1.0, 0.0]).unwrap();
        assert_eq!(key.norm_band(), 2);
        assert_eq!(key.sign_bits(), vec![false, true]);
    }

    #[test]
    fn rejects_non_finite_and_wrong_dimension() {
        let basis = axis_basis(1.0);
        assert!(matches!(
            basis.hash_feature(&[f32::NAN, 1.0]),
            Err(Error::InvalidFeature(_))
        ));
        assert!(matches!(
            basis.hash_feature(&[f32::INFINITY, 1.0]),
            Err(Error::InvalidFeature(_))
        ));
        assert!(matches!(
            basis.hash_feature(&[1.0]),
            Err(Error::InvalidFeature(_))
        ));
    }

    #[test]
    fn random_directions_are_seeded_and_unit() {
        let a = DirectionBasis::make_directions(4, 8, 42, BasisMode::Random, None).unwrap();
        let b = DirectionBasis::make_directions(4, 8, 42, BasisMode::Random, None).unwrap();
        let bits =
            |v: &Vec<Vec<f64>>| -> Vec<u64> { v.iter().flatten().map(|x| x.to_bits()).collect() };
        assert_eq!(bits(&a), bits(&b));
        for r in &a {
            let norm = libm::sqrt(r.iter().map(|x| x * x).sum::<f64>());
            assert!((norm - 1.0).abs() < 1e-9);
        }
        let c = DirectionBasis::make_directions(4, 8, 43, BasisMode::Random, None).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn zero_count_or_dimension_is_invalid() {
        assert!(matches!(
            DirectionBasis::make_directions(0, 8, 1, BasisMode::Random, None),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            DirectionBasis::make_directions(2, 0, 1, BasisMode::Random, None),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            DirectionBasis::make_directions(65, 8, 1, BasisMode::Random, None),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn pca_without_input_or_rank_fails() {
        assert!(matches!(
            DirectionBasis::make_directions(2, 3, 0, BasisMode::Pca, None),
            Err(Error::InvalidArgument(_))
        ));
        // all rows on one line: rank 1
        let rows: Vec<Vec<f32>> = (0..10).map(|i| vec![i as f32, 0.0, 0.0]).collect();
        assert_eq!(
            DirectionBasis::make_directions(2, 3, 0, BasisMode::Pca, Some(&rows)),
            Err(Error::InsufficientRank {
                rank: 1,
                requested: 2
            })
        );
    }

    #[test]
    fn key_ordering_is_lexicographic() {
        let a = HashKey::new(1, &[false, true, true]);
        let b = HashKey::new(1, &[true, false, false]);
        let c = HashKey::new(2, &[false, false, false]);
        assert!(a < b && b < c);
        assert_eq!(a.to_string(), "1:011");
    }

    proptest! {
        #[test]
        fn signs_invariant_under_positive_scaling(
            f in proptest::collection::vec(-10.0f32..10.0, 16),
            c in 0.01f32..100.0,
            seed in any::<u64>(),
        ) {
            let basis = DirectionBasis::new(
                &BasisConfig { directions: 8, kappa: 1.0, seed, mode: BasisMode::Random },
                16,
                None,
            ).unwrap();
            let scaled: Vec<f32> = f.iter().map(|x| x * c).collect();
            // f32 rounding in the product can flip a projection that is
            // numerically zero, so only compare clearly non-degenerate cases.
            let margin = basis.directions().iter()
                .map(|r| dot_mixed(&f, r).abs())
                .fold(f64::INFINITY, f64::min);
            prop_assume!(margin > 1e-4 * norm_f32(&f));
            prop_assert_eq!(
                basis.hash_feature(&f).unwrap().sign_bits(),
                basis.hash_feature(&scaled).unwrap().sign_bits()
            );
        }

        #[test]
        fn band_is_monotone_in_norm(
            f in proptest::collection::vec(-5.0f32..5.0, 8),
            g in proptest::collection::vec(-5.0f32..5.0, 8),
            kappa in 0.1f64..4.0,
        ) {
            let basis = DirectionBasis::new(
                &BasisConfig { directions: 4, kappa, seed: 7, mode: BasisMode::Random },
                8,
                None,
            ).unwrap();
            let (kf, kg) = (basis.hash_feature(&f).unwrap(), basis.hash_feature(&g).unwrap());
            if norm_f32(&f) <= norm_f32(&g) {
                prop_assert!(kf.norm_band() <= kg.norm_band());
            } else {
                prop_assert!(kf.norm_band() >= kg.norm_band());
            }
        }
    }

    #[test]
    fn colliding_features_agree_on_every_side_and_band() {
        let basis = DirectionBasis::new(
            &BasisConfig {
                directions: 6,
                kappa: 0.5,
                seed: 3,
                mode: BasisMode::Random,
            },
            5,
            None,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let feats: Vec<Vec<f32>> = (0..2000)
            .map(|_| (0..5).map(|_| rng.random_range(-2.0f32..2.0)).collect())
            .collect();
        let keys: Vec<HashKey> = feats
            .iter()
            .map(|f| basis.hash_feature(f).unwrap())
            .collect();
        for i in 0..feats.len() {
            for j in (i + 1)..feats.len().min(i + 50) {
                if keys[i] != keys[j] {
                    continue;
                }
                let band = |f: &[f32]| libm::floor(0.5 * norm_f32(f));
                assert_eq!(band(&feats[i]), band(&feats[j]));
                for r in basis.directions() {
                    assert_eq!(
                        dot_mixed(&feats[i], r) >= 0.0,
                        dot_mixed(&feats[j], r) >= 0.0
                    );
                }
            }
        }
    }
}
