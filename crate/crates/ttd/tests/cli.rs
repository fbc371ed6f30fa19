use std::path::Path;
use std::process::{Command, Output};

use ttd::experiment::EvaluationReport;

fn ttd(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ttd"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn write_inputs(dir: &Path) {
    std::fs::write(
        dir.join("spec.json"),
        r#"{"dim": 12, "known_classes": 3, "unknown_classes": 2, "seed_per_class": 15, "stream_per_class": 40}"#,
    )
    .unwrap();
    std::fs::write(
        dir.join("run.json"),
        r#"{"data": {"files": {"seed_set": "stream.seed.ttdf", "stream": "stream.ttdf"}}, "seed": 3, "curve_stride": 20}"#,
    )
    .unwrap();
}

#[test]
fn gen_run_report_post_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_inputs(d);

    let o = ttd(
        &[
            "gen",
            "--spec",
            "spec.json",
            "--out",
            "stream.ttdf",
            "--seed",
            "3",
        ],
        d,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("stream.seed.ttdf").exists());

    let o = ttd(
        &[
            "run",
            "--config",
            "run.json",
            "--out",
            "r.json",
            "--curves",
            "c.csv",
            "--records",
            "p.csv",
            "--snapshot",
            "s.bin",
        ],
        d,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: EvaluationReport =
        serde_json::from_str(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert!(report.valid);
    assert_eq!(report.stream_len, 200);

    let records = std::fs::read_to_string(d.join("p.csv")).unwrap();
    assert_eq!(
        records.lines().next().unwrap(),
        "step,gt,pred_kind,pred_id,u,route"
    );
    assert_eq!(records.lines().count(), 201);
    let curves = std::fs::read_to_string(d.join("c.csv")).unwrap();
    assert_eq!(curves.lines().count(), 1 + 10);

    let o = ttd(&["report", "--in", "r.json", "--format", "csv"], d);
    assert!(o.status.success());
    let table = String::from_utf8(o.stdout).unwrap();
    assert_eq!(table.lines().count(), 2);
    assert!(table.starts_with("method,"));

    let o = ttd(
        &["post-eval", "--snapshot", "s.bin", "--data", "stream.ttdf"],
        d,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let post: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(post["ta"].as_f64(), report.post.ta);
    assert_eq!(post["hca"].as_f64(), report.post.hca);
}

#[test]
fn tau_grid_writes_an_array() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_inputs(d);
    assert!(
        ttd(&["gen", "--spec", "spec.json", "--out", "stream.ttdf"], d)
            .status
            .success()
    );
    let o = ttd(
        &[
            "run",
            "--config",
            "run.json",
            "--out",
            "g.json",
            "--method",
            "euclidean",
            "--tau-grid",
            "2:10:5",
        ],
        d,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let reports: Vec<EvaluationReport> =
        serde_json::from_str(&std::fs::read_to_string(d.join("g.json")).unwrap()).unwrap();
    let taus: Vec<f64> = reports.iter().map(|r| r.config.tau).collect();
    assert_eq!(taus, [2.0, 4.0, 6.0, 8.0, 10.0]);

    let o = ttd(&["report", "--in", "g.json"], d);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 6);

    let o = ttd(
        &[
            "run",
            "--config",
            "run.json",
            "--out",
            "g.json",
            "--tau-grid",
            "2:10:5",
            "--curves",
            "c.csv",
        ],
        d,
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_inputs(d);

    std::fs::write(d.join("bad.json"), r#"{"tau": 1.0, "nonsense": 1}"#).unwrap();
    assert_eq!(
        ttd(&["run", "--config", "bad.json", "--out", "x.json"], d)
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        ttd(
            &[
                "run",
                "--config",
                "run.json",
                "--out",
                "x.json",
                "--tau-grid",
                "1:2"
            ],
            d
        )
        .status
        .code(),
        Some(2)
    );

    // missing stream file: I/O error, and the partial report is still written
    let o = ttd(&["run", "--config", "run.json", "--out", "x.json"], d);
    assert_eq!(o.status.code(), Some(3));
    let partial: EvaluationReport =
        serde_json::from_str(&std::fs::read_to_string(d.join("x.json")).unwrap()).unwrap();
    assert!(!partial.valid);

    std::fs::write(d.join("stream.ttdf"), b"not a feature file").unwrap();
    std::fs::write(d.join("stream.seed.ttdf"), b"not a feature file").unwrap();
    assert_eq!(
        ttd(&["run", "--config", "run.json", "--out", "x.json"], d)
            .status
            .code(),
        Some(3)
    );

    std::fs::write(d.join("snap.bin"), b"garbage").unwrap();
    assert_eq!(
        ttd(
            &[
                "post-eval",
                "--snapshot",
                "snap.bin",
                "--data",
                "stream.ttdf"
            ],
            d
        )
        .status
        .code(),
        Some(3)
    );
}
