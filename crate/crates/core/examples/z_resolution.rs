//! The Z image is blurred by p^2 instead of p, so a Gaussian response
//! narrows by sqrt(2) and the close pair at 46/51 separates.
//!
//!     cargo run --release --example z_resolution
use zimage::forward::{expected_mean_image, expected_z_image};
use zimage::model::fwhm;
use zimage::{make_gaussian_psf, paper_scenario_with, NoiseModel, ObjectModel};

fn main() -> zimage::Result<()> {
    let psf = make_gaussian_psf(3.0, 12)?;
    let mut flux = vec![0.0; 65];
    flux[32] = 1.0;
    let point = ObjectModel::new(flux, vec![1.0; 65])?;
    let quiet = NoiseModel::zero(65)?;
    let m = fwhm(&expected_mean_image(&point, &psf, &quiet)?).expect("peaked");
    let z = fwhm(&expected_z_image(&point, &psf, &quiet)?).expect("peaked");
    println!("FWHM mean {m:.4}, Z {z:.4}, ratio {:.4} (sqrt 2 = {:.4})", m / z, 2f64.sqrt());

    for qf in [-0.2, 0.2] {
        let s = paper_scenario_with(qf)?;
        let mean = expected_mean_image(&s.object, &s.psf, &s.noise)?;
        let z = expected_z_image(&s.object, &s.psf, &s.noise)?;
        println!("\nQ_F = {qf}");
        println!("{:>5} {:>9} {:>9}", "pixel", "mean", "Z");
        for k in 44..=53 {
            println!("{k:>5} {:>9.3} {:>9.3}", mean[k], z[k]);
        }
    }
    Ok(())
}
