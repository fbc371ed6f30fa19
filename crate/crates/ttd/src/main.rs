use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ttd::config::Method;
use ttd::experiment::{outcomes, EvaluationReport, PostMetrics};
use ttd::report::{curves_csv, records_csv, render_csv, render_table};
use ttd::{
    generate_synthetic, load_features, load_snapshot, run_experiment, save_features, save_snapshot,
    Error, ExperimentConfig, Result, SyntheticSpec,
};
use ttd_core::metrics::{agreement_metrics, known_accuracy, ncd_metrics};

#[derive(Parser)]
#[command(name = "ttd", version, about = "Streaming test-time class discovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic stream (and its seed set) from a spec.
    Gen {
        #[arg(long)]
        spec: PathBuf,
        /// Stream output (.ttdf or .csv).
        #[arg(long)]
        out: PathBuf,
        /// Seed-set output; defaults to `<out stem>.seed.<ext>`.
        #[arg(long)]
        seed_out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run an experiment and write its report.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        curves: Option<PathBuf>,
        /// Per-sample prediction records as CSV.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Final engine state.
        #[arg(long)]
        snapshot: Option<PathBuf>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[arg(long, allow_hyphen_values = true)]
        tau: Option<f64>,
        /// Sweep `n` evenly spaced thresholds in `[lo, hi]`; writes a JSON array.
        #[arg(long, value_name = "LO:HI:N", allow_hyphen_values = true)]
        tau_grid: Option<String>,
    },
    /// Frozen evaluation of a saved state on a labeled feature file.
    PostEval {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Render one report or an array of reports.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Ours,
    Euclidean,
    Cosine,
    Magnitude,
    Entropy,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Ours => Method::Ours,
            MethodArg::Euclidean => Method::Euclidean,
            MethodArg::Cosine => Method::Cosine,
            MethodArg::Magnitude => Method::Magnitude,
            MethodArg::Entropy => Method::Entropy,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Csv,
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("tau grid must be lo:hi:n, got {s:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        return Err(bad());
    };
    let lo: f64 = lo.parse().map_err(|_| bad())?;
    let hi: f64 = hi.parse().map_err(|_| bad())?;
    let n: usize = n.parse().map_err(|_| bad())?;
    if n == 0 || !lo.is_finite() || !hi.is_finite() || (n == 1 && lo != hi) {
        return Err(bad());
    }
    Ok((0..n)
        .map(|i| {
            if n == 1 {
                lo
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect())
}

fn default_seed_out(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("stream");
    let ext = out.extension().and_then(|s| s.to_str()).unwrap_or("ttdf");
    out.with_file_name(format!("{stem}.seed.{ext}"))
}

fn run_one(config: &ExperimentConfig, out: Option<&Path>) -> Result<ttd::RunOutput> {
    run_experiment(config).map_err(|f| {
        if let Some(out) = out {
            let _ = write(out, f.partial.to_json());
        }
        f.error
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    config: &Path,
    out: &Path,
    curves: Option<&Path>,
    records: Option<&Path>,
    snapshot: Option<&Path>,
    method: Option<MethodArg>,
    tau: Option<f64>,
    tau_grid: Option<&str>,
) -> Result<()> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(m) = method {
        cfg.method = m.into();
    }
    if let Some(t) = tau {
        cfg.tau = t;
    }
    cfg.validate()?;
    if let Some(grid) = tau_grid {
        if curves.is_some() || records.is_some() || snapshot.is_some() {
            return Err(Error::Config(
                "--curves, --records and --snapshot apply to single runs only".into(),
            ));
        }
        let mut reports = Vec::new();
        for t in parse_grid(grid)? {
            cfg.tau = t;
            reports.push(run_one(&cfg, None)?.report);
        }
        let json = serde_json::to_string_pretty(&reports).expect("reports serialize");
        return write(out, json);
    }
    let run = run_one(&cfg, Some(out))?;
    write(out, run.report.to_json())?;
    if let Some(p) = curves {
        write(p, curves_csv(&run.report.curves))?;
    }
    if let Some(p) = records {
        write(p, records_csv(&run.records))?;
    }
    if let Some(p) = snapshot {
        save_snapshot(&run.state, p)?;
    }
    Ok(())
}

fn cmd_post_eval(snapshot: &Path, data: &Path) -> Result<()> {
    let state = load_snapshot(snapshot)?;
    let data = load_features(data)?;
    if data.dim != state.dim() {
        return Err(Error::Data(format!(
            "data has dim {}, snapshot expects {}",
            data.dim,
            state.dim()
        )));
    }
    let preds = data
        .iter()
        .map(|(_, f)| state.predict_frozen(f).map(|(l, _, _)| l))
        .collect::<ttd_core::Result<Vec<_>>>()?;
    let outs = outcomes(data.labels.iter().copied(), &preds, &state);
    let a = agreement_metrics(&outs);
    let ncd = ncd_metrics(&outs);
    let m = PostMetrics {
        ka: known_accuracy(&outs),
        ta: a.ta,
        te: a.te,
        ca: a.ca,
        ce: a.ce,
        kf: None,
        hca: ncd.map(|n| n.hca),
        ari: ncd.map(|n| n.ari),
        nmi: ncd.map(|n| n.nmi),
        vm: ncd.map(|n| n.vm),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&m).expect("metrics serialize")
    );
    Ok(())
}

fn cmd_report(input: &Path, format: Format) -> Result<()> {
    let text = read(input)?;
    let reports: Vec<EvaluationReport> = match serde_json::from_str::<EvaluationReport>(&text) {
        Ok(r) => vec![r],
        Err(_) => serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("{}: not a report: {e}", input.display())))?,
    };
    let out = match format {
        Format::Table => render_table(&reports),
        Format::Csv => render_csv(&reports),
    };
    print!("{out}");
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen {
            spec,
            out,
            seed_out,
            seed,
        } => {
            let spec: SyntheticSpec =
                serde_json::from_str(&read(&spec)?).map_err(|e| Error::Config(e.to_string()))?;
            let data = generate_synthetic(&spec, seed)?;
            save_features(&out, &data.stream)?;
            save_features(
                seed_out.unwrap_or_else(|| default_seed_out(&out)),
                &data.seed_set,
            )
        }
        Command::Run {
            config,
            out,
            curves,
            records,
            snapshot,
            method,
            tau,
            tau_grid,
        } => cmd_run(
            &config,
            &out,
            curves.as_deref(),
            records.as_deref(),
            snapshot.as_deref(),
            method,
            tau,
            tau_grid.as_deref(),
        ),
        Command::PostEval { snapshot, data } => cmd_post_eval(&snapshot, &data),
        Command::Report { input, format } => cmd_report(&input, format),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
