//! Covariance rows through four pixels, simulated against the forward model.
//! Off the diagonal the rows carry no detector noise.
//!
//!     cargo run --release --example covariance_slices -- [samples]
use zimage::effective_forward;
use zimage::paper_scenario;
use zimage::run::{default_threads, simulate_batches, summarize};

fn main() -> zimage::Result<()> {
    let n = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20_000);
    let mut scene = paper_scenario();
    scene.n_samples = n;
    let summary = summarize(&simulate_batches(&scene, 20, default_threads())?)?;
    let cov = summary.images.cov_corrected.as_ref().expect("slices requested");
    let se = summary.cov_se.as_ref().expect("20 batches");
    let expected = effective_forward(&scene.object, &scene.psf, &scene.noise, &scene.covariance_mode)?;
    let exp_cov = expected.covariance.expect("slices requested");

    for (label, &k) in ["A", "B", "C", "D"].iter().zip(cov.rows()) {
        let (row, exp, err) = (cov.row(k).unwrap(), exp_cov.row(k).unwrap(), se.row(k).unwrap());
        let within = (0..row.len())
            .filter(|&l| l != k && (row[l] - exp[l]).abs() < 5.0 * err[l])
            .count();
        println!("slice {label} at {k}: {within}/{} off-diagonal lags within 5 SE", row.len() - 1);
        for m in [-6isize, -3, -1, 0, 1, 3, 6] {
            let l = (k as isize + m) as usize;
            println!("  lag {m:>3}: {:>9.4} expected {:>9.4} +- {:.4}", row[l], exp[l], err[l]);
        }
    }
    Ok(())
}
