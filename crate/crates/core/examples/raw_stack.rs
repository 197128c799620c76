//! Dump every simulated image to a raw stack file and read it back.
//!
//!     cargo run --example raw_stack
use zimage::io::raw::{read_raw_stack, RawStackWriter};
use zimage::run::{merge_all, simulate_batches_into};
use zimage::{paper_scenario, StatAccumulator};

fn main() -> zimage::Result<()> {
    let mut scene = paper_scenario();
    scene.n_samples = 50;
    let path = std::env::temp_dir().join("zimage-stack.bin");

    let mut writer = RawStackWriter::create(&path, scene.len())?;
    let batches = simulate_batches_into(&scene, 5, &mut writer)?;
    writer.finish()?;

    let images = read_raw_stack(&path)?;
    let mut acc = StatAccumulator::new(scene.len(), &scene.covariance_mode)?;
    for im in &images {
        acc.accumulate(im)?;
    }
    assert_eq!(acc, merge_all(&batches)?);
    let bytes = std::fs::metadata(&path).map_err(|e| zimage::Error::Io { path: path.clone(), source: e })?;
    println!("{} images, {} bytes in {}", images.len(), bytes.len(), path.display());
    println!("image 0 around the point source: {:?}", &images[0].counts[58..71]);
    Ok(())
}
