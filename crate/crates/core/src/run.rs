//! Multi-threaded stack simulation.
//!
//! The image index range is cut into contiguous batches. Each batch gets its
//! own accumulator; workers pick batches round-robin. Because every image is
//! generated from its own random streams and accumulation is exact, the
//! merged result does not depend on the number of workers.

use std::ops::Range;
use std::thread;

use crate::error::{Error, Result};
use crate::model::Scenario;
use crate::sampler::{ImageSampler, ImageSink, SampleImage};
use crate::stats::{batch_standard_error, merge, CovarianceRows, StatAccumulator, StatisticalImages};

/// Splits `0..n` into `parts` contiguous, near-equal ranges.
pub fn partition(n: u64, parts: usize) -> Vec<Range<u64>> {
    let parts = parts.max(1) as u64;
    (0..parts)
        .map(|i| (n * i / parts)..(n * (i + 1) / parts))
        .collect()
}

/// Worker count from the environment or the machine.
pub fn default_threads() -> usize {
    std::env::var("ZIMAGE_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(|| thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Simulates the scenario's stack as `batches` independent sub-stacks.
pub fn simulate_batches(scenario: &Scenario, batches: usize, threads: usize) -> Result<Vec<StatAccumulator>> {
    if batches == 0 {
        return Err(Error::invalid("need at least one batch"));
    }
    let sampler = ImageSampler::new(scenario)?;
    let ranges = partition(scenario.n_samples, batches);
    let threads = threads.clamp(1, batches);
    let run_one = |range: Range<u64>| -> Result<StatAccumulator> {
        let mut acc = StatAccumulator::new(scenario.len(), &scenario.covariance_mode)?;
        sampler.sample_batch(range, &mut acc)?;
        Ok(acc)
    };
    if threads == 1 {
        return ranges.into_iter().map(run_one).collect();
    }
    let results: Vec<Vec<(usize, Result<StatAccumulator>)>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|worker| {
                let ranges = &ranges;
                let run_one = &run_one;
                scope.spawn(move || {
                    (worker..ranges.len())
                        .step_by(threads)
                        .map(|b| (b, run_one(ranges[b].clone())))
                        .collect()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation worker panicked"))
            .collect()
    });
    let mut slots: Vec<Option<StatAccumulator>> = (0..ranges.len()).map(|_| None).collect();
    for (b, acc) in results.into_iter().flatten() {
        slots[b] = Some(acc?);
    }
    Ok(slots.into_iter().map(|a| a.expect("every batch ran")).collect())
}

struct Tee<'a> {
    acc: &'a mut StatAccumulator,
    extra: &'a mut dyn ImageSink,
}

impl ImageSink for Tee<'_> {
    fn accept(&mut self, image: &SampleImage) -> Result<()> {
        self.acc.accept(image)?;
        self.extra.accept(image)
    }
}

/// Single-threaded [`simulate_batches`] that also hands every image, in
/// index order, to `sink`.
pub fn simulate_batches_into(
    scenario: &Scenario,
    batches: usize,
    sink: &mut dyn ImageSink,
) -> Result<Vec<StatAccumulator>> {
    if batches == 0 {
        return Err(Error::invalid("need at least one batch"));
    }
    let sampler = ImageSampler::new(scenario)?;
    partition(scenario.n_samples, batches)
        .into_iter()
        .map(|range| {
            let mut acc = StatAccumulator::new(scenario.len(), &scenario.covariance_mode)?;
            sampler.sample_batch(range, &mut Tee { acc: &mut acc, extra: sink })?;
            Ok(acc)
        })
        .collect()
}

/// Simulates and merges the whole stack.
pub fn simulate(scenario: &Scenario, threads: usize) -> Result<StatAccumulator> {
    let parts = threads.max(1);
    let batches = simulate_batches(scenario, parts, threads)?;
    merge_all(&batches)
}

/// Merges accumulators left to right.
pub fn merge_all(parts: &[StatAccumulator]) -> Result<StatAccumulator> {
    let (first, rest) = parts
        .split_first()
        .ok_or_else(|| Error::invalid("nothing to merge"))?;
    rest.iter().try_fold(first.clone(), |acc, p| merge(&acc, p))
}

/// Pooled statistical images of a stack plus batch-means standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct StackSummary {
    pub images: StatisticalImages,
    /// Number of sub-stacks the standard errors were computed from.
    pub batches: usize,
    pub mean_se: Option<Vec<f64>>,
    pub variance_se: Option<Vec<f64>>,
    pub z_se: Option<Vec<f64>>,
    /// Standard errors of the corrected covariance rows.
    pub cov_se: Option<CovarianceRows>,
}

/// Batch count used for standard errors: at most `max`, with at least two
/// images per batch. Depends only on `n`, never on the worker count.
pub fn batch_count(n: u64, max: usize) -> usize {
    (n / 2).clamp(1, max.max(1) as u64) as usize
}

/// Finalises the pooled stack and, given two or more batches, the
/// standard errors of every image and covariance entry.
pub fn summarize(batches: &[StatAccumulator]) -> Result<StackSummary> {
    let images = merge_all(batches)?.finalize()?;
    let mut summary = StackSummary {
        images,
        batches: batches.len(),
        mean_se: None,
        variance_se: None,
        z_se: None,
        cov_se: None,
    };
    if batches.len() < 2 {
        return Ok(summary);
    }
    let parts = batches
        .iter()
        .map(StatAccumulator::finalize)
        .collect::<Result<Vec<_>>>()?;
    let column = |f: &dyn Fn(&StatisticalImages) -> Vec<f64>| {
        batch_standard_error(&parts.iter().map(f).collect::<Vec<_>>())
    };
    summary.mean_se = Some(column(&|p| p.mean.clone())?);
    summary.variance_se = Some(column(&|p| p.variance.clone())?);
    summary.z_se = Some(column(&|p| p.z.clone())?);
    if let Some(cov) = &summary.images.cov_corrected {
        let rows = cov.rows().to_vec();
        let flat = |p: &StatisticalImages| -> Vec<f64> {
            let c = p.cov_corrected.as_ref().expect("batches share a covariance mode");
            rows.iter().flat_map(|&k| c.row(k).unwrap().to_vec()).collect()
        };
        summary.cov_se = Some(CovarianceRows::new(cov.len(), rows.clone(), column(&flat)?)?);
    }
    Ok(summary)
}
