//! Recover the PSF from the point source at 64, then background Z, noise Z
//! and background Q from the flat region at 72.
//!
//!     cargo run --release --example infer_background -- [samples]
use zimage::effective_forward;
use zimage::inference::fit_point_and_background;
use zimage::paper_scenario;
use zimage::run::{default_threads, simulate};

fn main() -> zimage::Result<()> {
    let n = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(100_000);
    let mut scene = paper_scenario();
    scene.n_samples = n;
    let j = scene.psf.half_width();

    let truth = effective_forward(&scene.object, &scene.psf, &scene.noise, &scene.covariance_mode)?;
    let cov = truth.covariance.as_ref().unwrap();
    let (_, noiseless) = fit_point_and_background(cov, &truth.mean, 64, j, 72, 5.0, j)?;

    let stats = simulate(&scene, default_threads())?.finalize()?;
    let cov = stats.cov_corrected.as_ref().unwrap();
    let (point, fit) = fit_point_and_background(cov, &stats.mean, 64, j, 72, 5.0, j)?;

    let psf_err = point
        .psf
        .weights()
        .iter()
        .zip(scene.psf.weights())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("{n} images");
    println!("PSF max abs error   {psf_err:.5}");
    println!("point source Z      {:.3}", point.z_object);
    println!("           fitted   forward model");
    println!("z_b      {:>9.4}   {:>9.4}", fit.z_b, noiseless.z_b);
    println!("z_n      {:>9.4}   {:>9.4}", fit.z_n, noiseless.z_n);
    println!("q_b      {:>9.4}   {:>9.4}", fit.q_b, noiseless.q_b);
    Ok(())
}
