use serde::{Deserialize, Serialize};

use super::{entropy_bits, ContingencyTable, LabeledOutcome};
use crate::memory::Label;

/// Agreement between unknown ground-truth classes and discovered clusters.
/// `ta`/`te` are absent without unknown-class samples, `ca`/`ce` without
/// seen-class predictions. Entropies are in bits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AgreementMetrics {
    pub ta: Option<f64>,
    pub te: Option<f64>,
    pub ca: Option<f64>,
    pub ce: Option<f64>,
}

/// Computes TA/TE over samples whose true class is unknown and CA/CE over
/// samples predicted as a seen class.
///
/// * TA: per true class, the largest share of its samples carrying a single
///   seen label.
/// * TE: per true class, the entropy of its predicted labels.
/// * CA: per seen cluster, the largest share of its samples from a single
///   unknown true class.
/// * CE: per seen cluster, the entropy of its true classes.
pub fn agreement_metrics(outcomes: &[LabeledOutcome]) -> AgreementMetrics {
    let mut out = AgreementMetrics::default();

    let by_truth = ContingencyTable::from_pairs(
        outcomes
            .iter()
            .filter(|o| !o.true_known)
            .map(|o| (o.true_class, o.predicted)),
    );
    if !by_truth.rows().is_empty() {
        let (mut ta, mut te) = (0.0, 0.0);
        for (&class, &n) in by_truth.rows() {
            let best = by_truth
                .row(class)
                .filter(|(p, _)| p.is_seen())
                .map(|(_, c)| c)
                .max()
                .unwrap_or(0);
            ta += best as f64 / n as f64;
            te += entropy_bits(by_truth.row(class).map(|(_, c)| c));
        }
        let k = by_truth.rows().len() as f64;
        out.ta = Some(ta / k);
        out.te = Some(te / k);
    }

    // (prediction, (true class, known?)) so known truths never count as a match
    let by_cluster = ContingencyTable::<Label, (u32, bool)>::from_pairs(
        outcomes
            .iter()
            .filter(|o| o.predicted.is_seen())
            .map(|o| (o.predicted, (o.true_class, o.true_known))),
    );
    if !by_cluster.rows().is_empty() {
        let (mut ca, mut ce) = (0.0, 0.0);
        for (&cluster, &n) in by_cluster.rows() {
            let best = by_cluster
                .row(cluster)
                .filter(|((_, known), _)| !known)
                .map(|(_, c)| c)
                .max()
                .unwrap_or(0);
            ca += best as f64 / n as f64;
            ce += entropy_bits(by_cluster.row(cluster).map(|(_, c)| c));
        }
        let k = by_cluster.rows().len() as f64;
        out.ca = Some(ca / k);
        out.ce = Some(ce / k);
    }
    out
}
