//! Runs the default synthetic scenario once per method and prints the table.
//!
//! `cargo run --release -p ttd --example compare -- [seed]`

use ttd::report::render_table;
use ttd::{generate_synthetic, run_on_data, ExperimentConfig, Method, SyntheticSpec};

fn main() -> ttd::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let spec = SyntheticSpec {
        shuffle_seed: seed,
        ..SyntheticSpec::default()
    };
    let data = generate_synthetic(&spec, seed)?;

    let mut reports = Vec::new();
    for (method, tau) in [
        (Method::Ours, 0.0),
        (Method::Euclidean, 12.0),
        (Method::Cosine, 0.9),
        (Method::Magnitude, 0.5),
        (Method::Entropy, 0.5),
    ] {
        let config = ExperimentConfig {
            method,
            tau,
            seed,
            ..ExperimentConfig::default()
        };
        let out = run_on_data(&config, &data.seed_set, &data.stream).map_err(|f| f.error)?;
        reports.push(out.report);
    }
    print!("{}", render_table(&reports));
    Ok(())
}
