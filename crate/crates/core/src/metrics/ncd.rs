use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{entropy_nats, hungarian_assign, ContingencyTable, LabeledOutcome};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NcdMetrics {
    pub hca: f64,
    pub ari: f64,
    pub nmi: f64,
    pub vm: f64,
}

/// Clustering scores of the predicted labels against the true classes over
/// all outcomes. Returns `None` for an empty input.
pub fn ncd_metrics(outcomes: &[LabeledOutcome]) -> Option<NcdMetrics> {
    if outcomes.is_empty() {
        return None;
    }
    let table = ContingencyTable::from_pairs(outcomes.iter().map(|o| (o.true_class, o.predicted)));
    let (nmi, vm) = nmi_and_v_measure(&table);
    Some(NcdMetrics {
        hca: hungarian_accuracy(&table).expect("counts are finite"),
        ari: adjusted_rand_index(&table),
        nmi,
        vm,
    })
}

/// Accuracy under the one-to-one cluster-to-class map that maximizes the
/// number of matched samples.
///
/// Only each class's `k` largest clusters can appear in some optimal
/// matching (`k` = the smaller side), so the solver sees at most `k^2`
/// clusters however fragmented the prediction is. The same holds with the
/// roles swapped.
pub fn hungarian_accuracy<R: Ord + Copy, C: Ord + Copy>(
    table: &ContingencyTable<R, C>,
) -> Result<f64> {
    if table.total() == 0 {
        return Ok(0.0);
    }
    let mut classes: Vec<R> = table.rows().keys().copied().collect();
    let mut clusters: Vec<C> = table.cols().keys().copied().collect();
    let k = classes.len().min(clusters.len());
    if clusters.len() > k {
        let mut keep = BTreeSet::new();
        for &r in &classes {
            keep.extend(top_k(table.row(r), k));
        }
        clusters = keep.into_iter().collect();
    } else if classes.len() > k {
        let mut keep = BTreeSet::new();
        for &c in &clusters {
            keep.extend(top_k(table.col(c), k));
        }
        classes = keep.into_iter().collect();
    }
    let cost: Vec<Vec<f64>> = clusters
        .iter()
        .map(|&c| classes.iter().map(|&r| -(table.get(r, c) as f64)).collect())
        .collect();
    let assignment = hungarian_assign(&cost)?;
    Ok(-assignment.total_cost / table.total() as f64)
}

/// Keys of the `k` largest counts, ties to the smaller key.
fn top_k<T: Ord + Copy>(counts: impl Iterator<Item = (T, usize)>, k: usize) -> Vec<T> {
    let mut v: Vec<(T, usize)> = counts.filter(|&(_, n)| n > 0).collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    v.into_iter().take(k).map(|(t, _)| t).collect()
}

fn comb2(n: usize) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

/// Adjusted Rand index from pair counts.
///
/// When the expected and maximal index coincide (both partitions are a
/// single cluster, or both are all singletons) the partitions are identical
/// and the index is 1.
pub fn adjusted_rand_index<R: Ord + Copy, C: Ord + Copy>(table: &ContingencyTable<R, C>) -> f64 {
    let index: f64 = table.cells().map(|(_, _, n)| comb2(n)).sum();
    let sum_rows: f64 = table.rows().values().map(|&n| comb2(n)).sum();
    let sum_cols: f64 = table.cols().values().map(|&n| comb2(n)).sum();
    let pairs = comb2(table.total());
    if pairs == 0.0 {
        return 1.0;
    }
    let expected = sum_rows * sum_cols / pairs;
    let max = (sum_rows + sum_cols) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// NMI (arithmetic normalization) and V-measure, natural logarithms.
fn nmi_and_v_measure<R: Ord + Copy, C: Ord + Copy>(table: &ContingencyTable<R, C>) -> (f64, f64) {
    let h_true = entropy_nats(table.rows().values().copied());
    let h_pred = entropy_nats(table.cols().values().copied());
    if h_true == 0.0 && h_pred == 0.0 {
        // one class and one cluster covering the same samples
        return (1.0, 1.0);
    }
    if h_true == 0.0 || h_pred == 0.0 {
        return (0.0, 0.0);
    }
    let n = table.total() as f64;
    let mut mi = 0.0;
    for (r, c, count) in table.cells() {
        let p_rc = count as f64 / n;
        let p_r = table.rows()[&r] as f64 / n;
        let p_c = table.cols()[&c] as f64 / n;
        mi += p_rc * libm::log(p_rc / (p_r * p_c));
    }
    let mi = mi.max(0.0);
    let nmi = (2.0 * mi / (h_true + h_pred)).clamp(0.0, 1.0);
    // H(U|V) = H(U) - I, H(V|U) = H(V) - I
    let homogeneity = mi / h_true;
    let completeness = mi / h_pred;
    let vm = if homogeneity + completeness == 0.0 {
        0.0
    } else {
        (2.0 * homogeneity * completeness / (homogeneity + completeness)).clamp(0.0, 1.0)
    };
    (nmi, vm)
}
