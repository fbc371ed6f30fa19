use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttd_core::metrics::{
    agreement_metrics, entropy_bits, hungarian_assign, known_accuracy, ncd_metrics, LabeledOutcome,
};
use ttd_core::Label;

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Minimum over all assignments of the zero-padded square matrix.
fn brute_min(cost: &[Vec<f64>]) -> f64 {
    let (r, c) = (cost.len(), cost[0].len());
    let n = r.max(c);
    let at = |i: usize, j: usize| if i < r && j < c { cost[i][j] } else { 0.0 };
    permutations(n)
        .iter()
        .map(|p| (0..n).map(|i| at(i, p[i])).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

fn check_assignment(cost: &[Vec<f64>]) {
    let a = hungarian_assign(cost).unwrap();
    let want = brute_min(cost);
    assert_eq!(a.total_cost, want, "{cost:?}");
    let cols: Vec<usize> = a.row_to_col.iter().flatten().copied().collect();
    let mut dedup = cols.clone();
    dedup.sort_unstable();
    dedup.dedup();
    assert_eq!(dedup.len(), cols.len(), "not injective");
    let sum: f64 = a
        .row_to_col
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|c| cost[i][c]))
        .sum();
    assert_eq!(sum, a.total_cost);
}

#[test]
fn hungarian_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..1000 {
        let cost: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..6).map(|_| rng.random_range(-50..50) as f64).collect())
            .collect();
        check_assignment(&cost);
    }
    for _ in 0..200 {
        let cost: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..7).map(|_| rng.random_range(0..20) as f64).collect())
            .collect();
        check_assignment(&cost);
        let t: Vec<Vec<f64>> = (0..7)
            .map(|j| (0..4).map(|i| cost[i][j]).collect())
            .collect();
        check_assignment(&t);
    }
    for _ in 0..200 {
        let cost: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let a = hungarian_assign(&cost).unwrap();
        assert!((a.total_cost - brute_min(&cost)).abs() < 1e-12);
    }
}

fn outcomes(truth: &[u32], pred: &[u32]) -> Vec<LabeledOutcome> {
    truth
        .iter()
        .zip(pred)
        .map(|(&t, &p)| LabeledOutcome {
            true_class: t,
            true_known: false,
            predicted: Label::Seen(p + 1),
        })
        .collect()
}

fn pair_ari(truth: &[u32], pred: &[u32]) -> f64 {
    let n = truth.len();
    let (mut a, mut b, mut c) = (0f64, 0f64, 0f64);
    for i in 0..n {
        for j in i + 1..n {
            let st = truth[i] == truth[j];
            let sp = pred[i] == pred[j];
            match (st, sp) {
                (true, true) => a += 1.0,
                (true, false) => b += 1.0,
                (false, true) => c += 1.0,
                _ => {}
            }
        }
    }
    let m = (n * (n - 1) / 2) as f64;
    let expected = (a + b) * (a + c) / m;
    let max = 0.5 * ((a + b) + (a + c));
    if max == expected {
        1.0
    } else {
        (a - expected) / (max - expected)
    }
}

fn entropy_oracle(truth: &[u32], pred: &[u32]) -> (f64, f64) {
    let n = truth.len() as f64;
    let mut joint: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    let mut pt: BTreeMap<u32, f64> = BTreeMap::new();
    let mut pp: BTreeMap<u32, f64> = BTreeMap::new();
    for (&t, &p) in truth.iter().zip(pred) {
        *joint.entry((t, p)).or_default() += 1.0 / n;
        *pt.entry(t).or_default() += 1.0 / n;
        *pp.entry(p).or_default() += 1.0 / n;
    }
    let h = |m: &BTreeMap<u32, f64>| -m.values().map(|p| p * p.ln()).sum::<f64>();
    let (ht, hp) = (h(&pt), h(&pp));
    if ht == 0.0 && hp == 0.0 {
        return (1.0, 1.0);
    }
    if ht == 0.0 || hp == 0.0 {
        return (0.0, 0.0);
    }
    let mi: f64 = joint
        .iter()
        .map(|(&(t, p), &q)| q * (q / (pt[&t] * pp[&p])).ln())
        .sum();
    let nmi = 2.0 * mi / (ht + hp);
    // H(T|P) = H(T,P) - H(P)
    let hj = -joint.values().map(|q| q * q.ln()).sum::<f64>();
    let homogeneity = 1.0 - (hj - hp) / ht;
    let completeness = 1.0 - (hj - ht) / hp;
    let vm = if homogeneity + completeness == 0.0 {
        0.0
    } else {
        2.0 * homogeneity * completeness / (homogeneity + completeness)
    };
    (nmi, vm)
}

fn brute_hca(truth: &[u32], pred: &[u32]) -> f64 {
    let classes: Vec<u32> = truth
        .iter()
        .copied()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let clusters: Vec<u32> = pred
        .iter()
        .copied()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = classes.len().max(clusters.len());
    let mut counts = vec![vec![0usize; n]; n];
    for (&t, &p) in truth.iter().zip(pred) {
        let i = clusters.iter().position(|&c| c == p).unwrap();
        let j = classes.iter().position(|&c| c == t).unwrap();
        counts[i][j] += 1;
    }
    let best = permutations(n)
        .iter()
        .map(|perm| (0..n).map(|i| counts[i][perm[i]]).sum::<usize>())
        .max()
        .unwrap();
    best as f64 / truth.len() as f64
}

fn random_partition(rng: &mut ChaCha8Rng) -> (Vec<u32>, Vec<u32>) {
    let kt = rng.random_range(1..=7u32);
    let kp = rng.random_range(1..=7u32);
    let noise = rng.random_range(0.0..1.0);
    let truth: Vec<u32> = (0..200).map(|_| rng.random_range(0..kt)).collect();
    let pred = truth
        .iter()
        .map(|&t| {
            if rng.random_bool(noise) {
                rng.random_range(0..kp)
            } else {
                t % kp
            }
        })
        .collect();
    (truth, pred)
}

#[test]
fn clustering_scores_match_independent_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..500 {
        let (truth, pred) = random_partition(&mut rng);
        let m = ncd_metrics(&outcomes(&truth, &pred)).unwrap();
        let (nmi, vm) = entropy_oracle(&truth, &pred);
        assert!((m.ari - pair_ari(&truth, &pred)).abs() < 1e-9);
        assert!((m.nmi - nmi).abs() < 1e-9, "{} vs {nmi}", m.nmi);
        assert!((m.vm - vm).abs() < 1e-9, "{} vs {vm}", m.vm);
        assert!((m.hca - brute_hca(&truth, &pred)).abs() < 1e-12);
    }
}

#[test]
fn uniform_entropy_is_log_k() {
    for k in 1..=64usize {
        assert!((entropy_bits(vec![3; k]) - (k as f64).log2()).abs() < 1e-12);
    }
}

fn arb_outcomes() -> impl Strategy<Value = Vec<LabeledOutcome>> {
    prop::collection::vec((0u32..6, 0u32..9), 1..120).prop_map(|v| {
        v.into_iter()
            .map(|(t, p)| LabeledOutcome {
                true_class: t,
                true_known: t < 3,
                predicted: if p < 3 {
                    Label::Known(p)
                } else {
                    Label::Seen(p - 2)
                },
            })
            .collect()
    })
}

fn all_ten(o: &[LabeledOutcome]) -> [Option<f64>; 9] {
    let a = agreement_metrics(o);
    let n = ncd_metrics(o);
    [
        known_accuracy(o),
        a.ta,
        a.te,
        a.ca,
        a.ce,
        n.map(|m| m.hca),
        n.map(|m| m.ari),
        n.map(|m| m.nmi),
        n.map(|m| m.vm),
    ]
}

fn distinct<T: Ord>(it: impl Iterator<Item = T>) -> usize {
    it.collect::<std::collections::BTreeSet<_>>().len()
}

proptest! {
    #[test]
    fn metric_ranges(o in arb_outcomes()) {
        let [ka, ta, te, ca, ce, hca, ari, nmi, vm] = all_ten(&o);
        for v in [ka, ta, ca, hca, nmi, vm].into_iter().flatten() {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
        }
        if let Some(ari) = ari {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&ari));
        }
        let unknown: Vec<_> = o.iter().filter(|x| !x.true_known).collect();
        if let Some(te) = te {
            let k = distinct(unknown.iter().map(|x| x.predicted));
            prop_assert!(te >= 0.0 && te <= (k as f64).log2() + 1e-12);
        }
        let seen: Vec<_> = o.iter().filter(|x| x.predicted.is_seen()).collect();
        if let Some(ce) = ce {
            let k = distinct(seen.iter().map(|x| x.true_class));
            prop_assert!(ce >= 0.0 && ce <= (k as f64).log2() + 1e-12);
        }
    }

    #[test]
    fn relabeling_seen_ids_changes_nothing(o in arb_outcomes(), perm in Just((1..=6u32).collect::<Vec<_>>()).prop_shuffle()) {
        let relabeled: Vec<LabeledOutcome> = o
            .iter()
            .map(|x| LabeledOutcome {
                predicted: match x.predicted {
                    Label::Seen(id) => Label::Seen(perm[id as usize - 1] + 10),
                    k => k,
                },
                ..*x
            })
            .collect();
        let (a, b) = (all_ten(&o), all_ten(&relabeled));
        for (x, y) in a.iter().zip(&b) {
            match (x, y) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12),
                _ => prop_assert_eq!(x.is_some(), y.is_some()),
            }
        }
    }

    #[test]
    fn ari_is_one_iff_identical_up_to_relabeling(truth in prop::collection::vec(0u32..4, 2..60), pred in prop::collection::vec(0u32..4, 60)) {
        let pred = &pred[..truth.len()];
        let mut fwd = BTreeMap::new();
        let mut back = BTreeMap::new();
        let bijective = truth.iter().zip(pred).all(|(t, p)| {
            *fwd.entry(t).or_insert(p) == p && *back.entry(p).or_insert(t) == t
        });
        let ari = ncd_metrics(&outcomes(&truth, pred)).unwrap().ari;
        prop_assert_eq!((ari - 1.0).abs() < 1e-12, bijective, "ari {}", ari);
        // a relabeled copy of the truth always scores 1
        let copy: Vec<u32> = truth.iter().map(|t| 3 - t).collect();
        prop_assert!((ncd_metrics(&outcomes(&truth, &copy)).unwrap().ari - 1.0).abs() < 1e-12);
    }
}
