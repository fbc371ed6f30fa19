//! Tabular rendering of evaluation reports. Values are shown as
//! percentages (entropies in bits, KF in points); absent metrics print `-`.

use std::fmt::Write as _;

use ttd_core::{Label, PredictionRecord};

use crate::experiment::{CurvePoint, EvaluationReport};

pub const COLUMNS: [&str; 17] = [
    "method", "tau", "rt_ka", "rt_ta", "rt_te", "rt_ca", "rt_ce", "ka", "ta", "te", "ca", "ce",
    "kf", "hca", "ari", "nmi", "vm",
];

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{:.2}", 100.0 * x))
}

fn bits(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.3}"))
}

/// One row of cells in [`COLUMNS`] order.
pub fn row(r: &EvaluationReport) -> Vec<String> {
    let method = format!("{:?}", r.config.method).to_lowercase();
    let tau = match r.config.method {
        crate::Method::Ours => "-".into(),
        _ => format!("{}", r.config.tau),
    };
    let rt = &r.realtime;
    let p = &r.post;
    let mut cells = vec![
        if r.valid {
            method
        } else {
            format!("{method} (invalid)")
        },
        tau,
        pct(rt.ka),
        pct(rt.ta),
        bits(rt.te),
        pct(rt.ca),
        bits(rt.ce),
    ];
    cells.extend([
        pct(p.ka),
        pct(p.ta),
        bits(p.te),
        pct(p.ca),
        bits(p.ce),
        pct(p.kf),
        pct(p.hca),
        pct(p.ari),
        pct(p.nmi),
        pct(p.vm),
    ]);
    cells
}

pub fn render_table(reports: &[EvaluationReport]) -> String {
    let rows: Vec<Vec<String>> = reports.iter().map(row).collect();
    let widths: Vec<usize> = (0..COLUMNS.len())
        .map(|i| {
            rows.iter()
                .map(|r| r[i].len())
                .chain([COLUMNS[i].len()])
                .max()
                .unwrap()
        })
        .collect();
    let mut out = String::new();
    let line = |cells: &[&str], out: &mut String| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(&COLUMNS, &mut out);
    for r in &rows {
        let cells: Vec<&str> = r.iter().map(String::as_str).collect();
        line(&cells, &mut out);
    }
    out
}

pub fn render_csv(reports: &[EvaluationReport]) -> String {
    let mut out = COLUMNS.join(",");
    out.push('\n');
    for r in reports {
        out.push_str(&row(r).join(","));
        out.push('\n');
    }
    out
}

/// Real-time curves as CSV, values as raw fractions.
pub fn curves_csv(points: &[CurvePoint]) -> String {
    let f = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x}"));
    let mut out = String::from("step,ka,ta,te,ca,ce\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.step,
            f(p.ka),
            f(p.ta),
            f(p.te),
            f(p.ca),
            f(p.ce)
        );
    }
    out
}

/// Per-step prediction records: `step,gt,pred_kind,pred_id,u,route`, with an
/// empty `gt` for unlabeled samples.
pub fn records_csv(records: &[PredictionRecord]) -> String {
    let mut out = String::from("step,gt,pred_kind,pred_id,u,route\n");
    for r in records {
        let (kind, id) = match r.predicted {
            Label::Known(id) => ("known", id),
            Label::Seen(id) => ("seen", id),
        };
        let gt = r.ground_truth.map_or_else(String::new, |g| g.to_string());
        let _ = writeln!(
            out,
            "{},{gt},{kind},{id},{},{}",
            r.step,
            r.confidence,
            r.route.as_str()
        );
    }
    out
}
