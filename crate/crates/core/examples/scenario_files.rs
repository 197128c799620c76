//! Parse a source-level scenario file and write it back in explicit form.
//!
//!     cargo run --example scenario_files
use zimage::io::scenario::{format_scenario, parse_scenario};

const TEXT: &str = "\
[object]
length = 16
background 4 0.5
point 5 80 -0.3
extended 9 13 10 2 0

[psf]
weights = 1, 4, 6, 4, 1

[noise]
mean = 2
q = 0.25

[run]
samples = 500
seed = 7
covariance = slices=5,11
";

fn main() -> zimage::Result<()> {
    let scene = parse_scenario(TEXT, "inline")?;
    println!("flux {:?}", scene.object.mean_flux());
    println!("psf  {:?}", scene.psf.weights());
    let explicit = format_scenario(&scene);
    print!("\n{explicit}");
    assert_eq!(parse_scenario(&explicit, "explicit")?, scene);

    match parse_scenario("[object]\nlength = 4\npoint 7 1 0\n", "bad.txt") {
        Err(e) => println!("\nrejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
