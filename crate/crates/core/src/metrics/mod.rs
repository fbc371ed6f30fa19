//! Evaluation metrics.
//!
//! * known-class accuracy and forgetting (`ka`, `kf`),
//! * agreement ratios and entropies for unknown classes (`ta`, `te`, `ca`, `ce`),
//! * clustering scores over all outcomes (`hca`, `ari`, `nmi`, `vm`).
//!
//! Per-class and per-cluster quantities are macro averaged; empty groups are
//! skipped. Absent metrics are `None`, never zero.

mod agreement;
mod hungarian;
mod known;
mod ncd;

pub use agreement::{agreement_metrics, AgreementMetrics};
pub use hungarian::{hungarian_assign, Assignment};
pub use known::{known_accuracy, known_forgetting};
pub use ncd::{adjusted_rand_index, hungarian_accuracy, ncd_metrics, NcdMetrics};

use alloc::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::memory::Label;

/// Ground truth and prediction for one evaluated sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledOutcome {
    pub true_class: u32,
    /// Whether `true_class` is one of the known (seeded) classes.
    pub true_known: bool,
    pub predicted: Label,
}

/// Shannon entropy in bits of a count histogram.
pub fn entropy_bits<I: IntoIterator<Item = usize>>(counts: I) -> f64 {
    entropy_with(counts, libm::log2)
}

/// Shannon entropy in nats of a count histogram.
pub fn entropy_nats<I: IntoIterator<Item = usize>>(counts: I) -> f64 {
    entropy_with(counts, libm::log)
}

fn entropy_with<I: IntoIterator<Item = usize>>(counts: I, log: fn(f64) -> f64) -> f64 {
    let counts: alloc::vec::Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let h: f64 = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            -p * log(p)
        })
        .sum();
    // a single outcome is exactly zero, never -0.0
    if h <= 0.0 {
        0.0
    } else {
        h
    }
}

/// Counts indexed by `(row, column)` with cached marginals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable<R: Ord + Copy, C: Ord + Copy> {
    cells: BTreeMap<(R, C), usize>,
    rows: BTreeMap<R, usize>,
    cols: BTreeMap<C, usize>,
    total: usize,
}

impl<R: Ord + Copy, C: Ord + Copy> Default for ContingencyTable<R, C> {
    fn default() -> Self {
        Self {
            cells: BTreeMap::new(),
            rows: BTreeMap::new(),
            cols: BTreeMap::new(),
            total: 0,
        }
    }
}

impl<R: Ord + Copy, C: Ord + Copy> ContingencyTable<R, C> {
    pub fn from_pairs<I: IntoIterator<Item = (R, C)>>(pairs: I) -> Self {
        let mut t = Self::default();
        for (r, c) in pairs {
            *t.cells.entry((r, c)).or_insert(0) += 1;
            *t.rows.entry(r).or_insert(0) += 1;
            *t.cols.entry(c).or_insert(0) += 1;
            t.total += 1;
        }
        t
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn get(&self, r: R, c: C) -> usize {
        self.cells.get(&(r, c)).copied().unwrap_or(0)
    }

    pub fn rows(&self) -> &BTreeMap<R, usize> {
        &self.rows
    }

    pub fn cols(&self) -> &BTreeMap<C, usize> {
        &self.cols
    }

    /// Non-zero cells.
    pub fn cells(&self) -> impl Iterator<Item = (R, C, usize)> + '_ {
        self.cells.iter().map(|(&(r, c), &n)| (r, c, n))
    }

    /// Non-zero cells of one row.
    pub fn row(&self, r: R) -> impl Iterator<Item = (C, usize)> + '_ {
        self.cells
            .iter()
            .filter(move |((rr, _), _)| *rr == r)
            .map(|(&(_, c), &n)| (c, n))
    }

    /// Non-zero cells of one column.
    pub fn col(&self, c: C) -> impl Iterator<Item = (R, usize)> + '_ {
        self.cells
            .iter()
            .filter(move |((_, cc), _)| *cc == c)
            .map(|(&(r, _), &n)| (r, n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_entropy_is_log2_k() {
        for k in 1..=16usize {
            let h = entropy_bits(core::iter::repeat_n(7, k));
            assert!((h - libm::log2(k as f64)).abs() < 1e-12, "k={k}");
        }
        assert_eq!(entropy_bits([0usize, 0]), 0.0);
        assert!((entropy_nats([1usize, 1]) - libm::log(2.0)).abs() < 1e-15);
    }

    #[test]
    fn contingency_marginals_sum_to_total() {
        let t = ContingencyTable::from_pairs([(1u32, 'a'), (1, 'b'), (2, 'a'), (1, 'a')]);
        assert_eq!(t.total(), 4);
        assert_eq!(t.get(1, 'a'), 2);
        assert_eq!(t.rows().values().sum::<usize>(), 4);
        assert_eq!(t.cols().values().sum::<usize>(), 4);
        assert_eq!(t.cells().map(|c| c.2).sum::<usize>(), 4);
    }
}
