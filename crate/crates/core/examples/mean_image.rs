//! Simulate the reference scene and compare its mean image with the
//! classical blurred object.
//!
//!     cargo run --release --example mean_image -- [samples]
use zimage::forward::{classical_convolution, effective_forward};
use zimage::run::{default_threads, simulate};
use zimage::{paper_scenario, CovarianceMode};

fn main() -> zimage::Result<()> {
    let n = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1000);
    let mut scene = paper_scenario();
    scene.n_samples = n;
    scene.covariance_mode = CovarianceMode::Off;

    let stats = simulate(&scene, default_threads())?.finalize()?;
    let conv = classical_convolution(&scene.object, &scene.psf, scene.noise.mean())?;
    let eff = effective_forward(&scene.object, &scene.psf, &scene.noise, &CovarianceMode::Off)?;

    println!("{:>5} {:>10} {:>10} {:>8}", "pixel", "mean", "blurred", "dev/se");
    let mut worst = 0.0f64;
    for k in scene.interior() {
        let se = (eff.variance[k] / n as f64).sqrt();
        let dev = (stats.mean[k] - eff.mean[k]) / se;
        worst = worst.max(dev.abs());
        if k % 8 == 0 {
            println!("{k:>5} {:>10.3} {:>10.3} {dev:>8.2}", stats.mean[k], conv[k]);
        }
    }
    println!("largest standardised deviation over the interior: {worst:.2}");
    Ok(())
}
