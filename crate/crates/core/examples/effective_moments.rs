//! Mean and Z of the sampler's integer count law next to the requested
//! values, from exact enumeration.
//!
//!     cargo run --example effective_moments
use zimage::effective_source_moments;

fn main() -> zimage::Result<()> {
    println!("{:>8} {:>6} {:>12} {:>10} {:>12}", "mean", "Q", "eff mean", "Z", "eff Z");
    for (mean, q) in [
        (10.0, 0.2),
        (5.0, 0.1),
        (30.0, -0.2),
        (300.0, 0.2),
        (500.0, 0.2),
        (500.0, -0.2),
        (2.5, -1.0),
        (0.3, 3.0),
    ] {
        let (m, z) = effective_source_moments(mean, q)?;
        println!("{mean:>8} {q:>6} {m:>12.6} {:>10.4} {z:>12.6}", mean * q);
    }
    Ok(())
}
