//! The three-phase experiment: seed, stream, frozen re-evaluation.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use ttd_core::metrics::{
    agreement_metrics, known_accuracy, known_forgetting, ncd_metrics, LabeledOutcome,
};
use ttd_core::{BaselineParams, Label, PredictionRecord, ScReport, TtdState};

use crate::config::{DataSource, ExperimentConfig};
use crate::dataset::{load_features, LabeledFeatures};
use crate::error::{Error, Result};
use crate::synthetic::generate_synthetic;

/// Cumulative real-time metrics after `step` samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: u64,
    pub ka: Option<f64>,
    pub ta: Option<f64>,
    pub te: Option<f64>,
    pub ca: Option<f64>,
    pub ce: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PostMetrics {
    pub ka: Option<f64>,
    pub ta: Option<f64>,
    pub te: Option<f64>,
    pub ca: Option<f64>,
    pub ce: Option<f64>,
    pub kf: Option<f64>,
    pub hca: Option<f64>,
    pub ari: Option<f64>,
    pub nmi: Option<f64>,
    pub vm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScEvent {
    /// Stream samples processed before the pass.
    pub step: u64,
    #[serde(flatten)]
    pub report: ScReport,
}

/// Wall-clock milliseconds per phase. Not covered by the determinism contract.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub seed_ms: f64,
    pub stream_ms: f64,
    pub post_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// False when the run aborted; the metrics are then partial.
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config: ExperimentConfig,
    pub stream_len: u64,
    pub ka_pre: Option<f64>,
    pub curves: Vec<CurvePoint>,
    pub realtime: CurvePoint,
    pub post: PostMetrics,
    pub sc_events: Vec<ScEvent>,
    pub discovered_classes: u32,
    pub timings: Timings,
}

impl EvaluationReport {
    fn empty(config: &ExperimentConfig) -> Self {
        Self {
            valid: false,
            error: None,
            config: config.clone(),
            stream_len: 0,
            ka_pre: None,
            curves: Vec::new(),
            realtime: CurvePoint::default(),
            post: PostMetrics::default(),
            sc_events: Vec::new(),
            discovered_classes: 0,
            timings: Timings::default(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON with the timing fields zeroed, for determinism comparisons.
    pub fn to_json_without_timings(&self) -> String {
        let mut r = self.clone();
        r.timings = Timings::default();
        r.to_json()
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub report: EvaluationReport,
    /// One record per stream sample, in order.
    pub records: Vec<PredictionRecord>,
    /// Frozen predictions from the post phase, one per stream sample.
    pub post_predictions: Vec<Label>,
    pub state: TtdState,
}

#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct RunFailure {
    pub error: Error,
    /// Report with `valid = false` and whatever was computed before the failure.
    pub partial: Box<EvaluationReport>,
}

/// Converts stream labels and predictions to metric outcomes, dropping
/// unlabeled samples.
pub fn outcomes<'a>(
    truth: impl IntoIterator<Item = Option<u32>>,
    predicted: impl IntoIterator<Item = &'a Label>,
    state: &TtdState,
) -> Vec<LabeledOutcome> {
    truth
        .into_iter()
        .zip(predicted)
        .filter_map(|(t, &p)| {
            t.map(|c| LabeledOutcome {
                true_class: c,
                true_known: state.known_classes().contains(&c),
                predicted: p,
            })
        })
        .collect()
}

fn curve_point(step: u64, outs: &[LabeledOutcome]) -> CurvePoint {
    let a = agreement_metrics(outs);
    CurvePoint {
        step,
        ka: known_accuracy(outs),
        ta: a.ta,
        te: a.te,
        ca: a.ca,
        ce: a.ce,
    }
}

fn frozen(
    state: &TtdState,
    baseline: Option<&BaselineParams>,
    f: &[f32],
) -> ttd_core::Result<Label> {
    match baseline {
        Some(p) => state.baseline_predict_frozen(f, p),
        None => state.predict_frozen(f).map(|(l, _, _)| l),
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Loads or generates the seed set and stream named by `config.data`.
pub fn load_data(config: &ExperimentConfig) -> Result<(LabeledFeatures, LabeledFeatures)> {
    match &config.data {
        DataSource::Synthetic { spec, seed } => {
            let d = generate_synthetic(spec, *seed)?;
            Ok((d.seed_set, d.stream))
        }
        DataSource::Files { seed_set, stream } => {
            let s = load_features(seed_set)?;
            let t = load_features(stream)?;
            if s.dim != t.dim {
                return Err(Error::Data(format!(
                    "seed set has dim {}, stream has dim {}",
                    s.dim, t.dim
                )));
            }
            Ok((s, t))
        }
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput, RunFailure> {
    let fail = |error: Error| {
        let mut partial = EvaluationReport::empty(config);
        partial.error = Some(error.to_string());
        RunFailure {
            error,
            partial: Box::new(partial),
        }
    };
    config.validate().map_err(fail)?;
    let (seed_set, stream) = load_data(config).map_err(fail)?;
    run_on_data(config, &seed_set, &stream)
}

/// Runs all three phases on in-memory data. `config.data` is echoed but not read.
pub fn run_on_data(
    config: &ExperimentConfig,
    seed_set: &LabeledFeatures,
    stream: &LabeledFeatures,
) -> Result<RunOutput, RunFailure> {
    let mut report = EvaluationReport::empty(config);
    let result = run_phases(config, seed_set, stream, &mut report);
    match result {
        Ok((records, post_predictions, state)) => {
            report.valid = true;
            Ok(RunOutput {
                report,
                records,
                post_predictions,
                state,
            })
        }
        Err(error) => {
            report.valid = false;
            report.error = Some(error.to_string());
            Err(RunFailure {
                error,
                partial: Box::new(report),
            })
        }
    }
}

type Phases = (Vec<PredictionRecord>, Vec<Label>, TtdState);

fn run_phases(
    config: &ExperimentConfig,
    seed_set: &LabeledFeatures,
    stream: &LabeledFeatures,
    report: &mut EvaluationReport,
) -> Result<Phases> {
    config.validate()?;
    seed_set.validate()?;
    stream.validate()?;
    let baseline = config.baseline();
    report.stream_len = stream.len() as u64;

    // phase 1: seed, then score the untouched state on the known portion
    let t = Instant::now();
    let seeds: Vec<(u32, Vec<f32>)> = seed_set
        .iter()
        .map(|(l, f)| {
            l.map(|c| (c, f.to_vec()))
                .ok_or_else(|| Error::Data("seed set contains unlabeled samples".into()))
        })
        .collect::<Result<_>>()?;
    let mut state = TtdState::seeded(config.engine(), &seeds)?;
    let pre: Vec<Label> = stream
        .iter()
        .map(|(_, f)| frozen(&state, baseline.as_ref(), f))
        .collect::<ttd_core::Result<_>>()?;
    let pre_outcomes = outcomes(stream.labels.iter().copied(), &pre, &state);
    report.ka_pre = known_accuracy(&pre_outcomes);
    report.timings.seed_ms = ms(t);

    // phase 2: stream
    let t = Instant::now();
    let mut records = Vec::with_capacity(stream.len());
    let mut outs: Vec<LabeledOutcome> = Vec::with_capacity(stream.len());
    let sc = &config.self_correction;
    for (i, (gt, f)) in stream.iter().enumerate() {
        let rec = match &baseline {
            Some(p) => state.baseline_step(f, gt, p)?,
            None => state.step(f, gt)?,
        };
        if let Some(c) = gt {
            outs.push(LabeledOutcome {
                true_class: c,
                true_known: state.known_classes().contains(&c),
                predicted: rec.predicted,
            });
        }
        records.push(rec);
        let done = (i + 1) as u64;
        if baseline.is_none() && sc.every > 0 && done.is_multiple_of(sc.every) {
            let r = state.self_correct(sc.fraction)?;
            report.sc_events.push(ScEvent {
                step: done,
                report: r,
            });
        }
        if done.is_multiple_of(config.curve_stride) || done == stream.len() as u64 {
            report.curves.push(curve_point(done, &outs));
        }
    }
    report.realtime = curve_point(stream.len() as u64, &outs);
    report.discovered_classes = state.discovered_count();
    report.timings.stream_ms = ms(t);

    // phase 3: frozen re-evaluation
    let t = Instant::now();
    let digest = state.state_digest();
    let post: Vec<Label> = stream
        .iter()
        .map(|(_, f)| frozen(&state, baseline.as_ref(), f))
        .collect::<ttd_core::Result<_>>()?;
    debug_assert_eq!(digest, state.state_digest());
    let post_outcomes = outcomes(stream.labels.iter().copied(), &post, &state);
    let a = agreement_metrics(&post_outcomes);
    let ka = known_accuracy(&post_outcomes);
    let ncd = ncd_metrics(&post_outcomes);
    report.post = PostMetrics {
        ka,
        ta: a.ta,
        te: a.te,
        ca: a.ca,
        ce: a.ce,
        kf: report.ka_pre.zip(ka).map(|(p, q)| known_forgetting(p, q)),
        hca: ncd.map(|m| m.hca),
        ari: ncd.map(|m| m.ari),
        nmi: ncd.map(|m| m.nmi),
        vm: ncd.map(|m| m.vm),
    };
    report.timings.post_ms = ms(t);
    Ok((records, post, state))
}
