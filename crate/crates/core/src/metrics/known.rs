use alloc::collections::BTreeMap;

use super::LabeledOutcome;
use crate::memory::Label;

/// Macro-averaged accuracy over the known classes present in `outcomes`.
///
/// Only outcomes with a known ground truth are considered; a prediction
/// counts as correct only if it is exactly `Known(true_class)`.
pub fn known_accuracy(outcomes: &[LabeledOutcome]) -> Option<f64> {
    let mut per_class: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for o in outcomes.iter().filter(|o| o.true_known) {
        let e = per_class.entry(o.true_class).or_insert((0, 0));
        e.1 += 1;
        if o.predicted == Label::Known(o.true_class) {
            e.0 += 1;
        }
    }
    if per_class.is_empty() {
        return None;
    }
    let sum: f64 = per_class
        .values()
        .map(|&(hit, n)| hit as f64 / n as f64)
        .sum();
    Some(sum / per_class.len() as f64)
}

/// `ka_post - ka_pre`; negative values mean forgetting.
pub fn known_forgetting(ka_pre: f64, ka_post: f64) -> f64 {
    ka_post - ka_pre
}
