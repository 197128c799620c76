//! Every image draws from its own addressed random streams, so the merged
//! statistics are identical for any worker count or batch split.
//!
//!     cargo run --release --example parallel_determinism
use zimage::paper_scenario;
use zimage::run::{merge_all, simulate_batches};

fn main() -> zimage::Result<()> {
    let mut scene = paper_scenario();
    scene.n_samples = 4000;
    let reference = merge_all(&simulate_batches(&scene, 1, 1)?)?;
    for (batches, threads) in [(2, 2), (8, 8), (13, 3), (40, 4)] {
        let merged = merge_all(&simulate_batches(&scene, batches, threads)?)?;
        println!(
            "{batches:>3} batches on {threads} threads: {}",
            if merged == reference { "identical" } else { "DIFFERENT" }
        );
    }
    Ok(())
}
