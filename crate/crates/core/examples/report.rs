//! The full command pipeline without the shell: simulate, forward, infer and
//! report into a temporary directory.
//!
//!     cargo run --release --example report
use zimage::commands::{self, PsfSource};

fn main() -> zimage::Result<()> {
    let dir = std::env::temp_dir().join("zimage-report");
    std::fs::create_dir_all(&dir).map_err(|e| zimage::Error::Io { path: dir.clone(), source: e })?;
    let scenario = dir.join("scene.txt");
    std::fs::write(&scenario, zimage::io::scenario::reference_scenario_text(0.2))
        .map_err(|e| zimage::Error::Io { path: scenario.clone(), source: e })?;

    commands::simulate(&commands::SimulateOptions {
        scenario: scenario.clone(),
        seed: None,
        samples: Some(20_000),
        covariance: None,
        threads: zimage::run::default_threads(),
        batches: commands::DEFAULT_BATCHES,
        dump_raw: None,
        out: dir.join("stats"),
    })?;
    commands::forward(&commands::ForwardOptions {
        scenario,
        effective: true,
        covariance: None,
        out: dir.join("forward"),
    })?;
    let inferred = commands::infer(&commands::InferOptions {
        stats_dir: dir.join("stats"),
        slice: 72,
        psf: PsfSource::Point {
            position: 64,
            half_width: 12,
        },
        noise_mean: 5.0,
        max_lag: None,
        out: dir.join("infer"),
    })?;
    println!("q_b = {:.3}, z_n = {:.3}", inferred.fit.q_b, inferred.fit.z_n);
    for s in commands::report(&commands::ReportOptions {
        stats_dir: dir.join("stats"),
        against: dir.join("forward"),
        out: dir.join("report"),
    })? {
        println!("{:<14} {:>5.1}% within 5 SE", s.name, 100.0 * s.fraction_within());
    }
    println!("plots in {}", dir.join("report").display());
    Ok(())
}
