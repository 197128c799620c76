//! Two-stage photon-count sampler.
//!
//! Each object position draws a photon count with the requested mean and
//! Mandel Q, then scatters those photons over pixels `k + j` with a
//! multinomial draw governed by the PSF. Independent local noise counts are
//! added per pixel afterwards. Photons scattered past either detector edge are
//! lost.

use std::ops::Range;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};

use crate::error::{Error, Result};
use crate::model::{Psf, Scenario};
use crate::rng::{RngStream, Stage};

/// One exposure: photon counts per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleImage {
    pub counts: Vec<u32>,
}

impl SampleImage {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Receives generated images in index order.
pub trait ImageSink {
    fn accept(&mut self, image: &SampleImage) -> Result<()>;
}

/// `alpha (s - mean) + mean`: rescales the deviation of a Poisson draw so
/// the variance becomes `mean (1 + q)` for `alpha = sqrt(1 + q)`, keeping the
/// mean.
pub fn scaled_count(s: f64, mean: f64, alpha: f64) -> f64 {
    alpha * (s - mean) + mean
}

/// Randomised rounding of a non-negative real count: `floor(x) + 1` with
/// probability `frac(x)`, else `floor(x)`. Negative inputs map to 0.
///
/// `u` is a uniform draw from `[0, 1)`. The expected output equals `x` for
/// `x >= 0`.
pub fn dither_count(x: f64, u: f64) -> u64 {
    if !(x > 0.0) {
        return 0;
    }
    let floor = x.floor();
    let up = u < x - floor;
    floor as u64 + up as u64
}

/// Per-position count law: a Poisson draw, rescaled by [`scaled_count`] and
/// brought back to an integer by [`dither_count`].
#[derive(Debug, Clone)]
pub struct SourceLaw {
    mean: f64,
    alpha: f64,
    poisson: Option<Poisson<f64>>,
}

impl SourceLaw {
    pub fn new(mean: f64, q: f64) -> Result<Self> {
        if !(q >= -1.0) {
            return Err(Error::invalid(format!("Mandel Q {q} is below -1")));
        }
        if !(mean >= 0.0) || !mean.is_finite() {
            return Err(Error::invalid(format!("mean {mean} is not a finite non-negative value")));
        }
        let poisson = if mean > 0.0 {
            Some(Poisson::new(mean).map_err(|e| Error::invalid(format!("Poisson({mean}): {e}")))?)
        } else {
            None
        };
        Ok(Self {
            mean,
            alpha: (1.0 + q).sqrt(),
            poisson,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let Some(poisson) = &self.poisson else {
            return 0;
        };
        let s = if self.alpha == 0.0 { self.mean } else { poisson.sample(rng) };
        if self.alpha == 1.0 {
            return s as u64;
        }
        dither_count(scaled_count(s, self.mean, self.alpha), rng.random::<f64>())
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Draws a count with the given mean and Mandel Q.
pub fn sample_source_counts(mean: f64, q: f64, rng: &mut RngStream) -> Result<u64> {
    Ok(SourceLaw::new(mean, q)?.sample(rng))
}

/// Below this many photons a multinomial is drawn photon by photon.
const PER_PHOTON_LIMIT: u64 = 48;

/// Inverse-CDF lookup for a small categorical law, accelerated by a guide
/// table so a draw needs one uniform and about one comparison.
#[derive(Debug, Clone)]
struct GuidedCdf {
    cdf: Vec<f64>,
    guide: Vec<usize>,
}

impl GuidedCdf {
    fn new(weights: &[f64]) -> Self {
        let mut cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in weights {
            acc += w;
            cdf.push(acc);
        }
        // Last non-empty bin absorbs rounding so every u in [0, 1) lands somewhere.
        let last = weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1);
        for c in &mut cdf[last..] {
            *c = f64::INFINITY;
        }
        let slots = 4 * weights.len();
        let mut guide = Vec::with_capacity(slots);
        let mut i = 0;
        for g in 0..slots {
            let u = g as f64 / slots as f64;
            while cdf[i] <= u {
                i += 1;
            }
            guide.push(i);
        }
        Self { cdf, guide }
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let mut i = self.guide[(u * self.guide.len() as f64) as usize];
        while self.cdf[i] <= u {
            i += 1;
        }
        i
    }
}

/// Multinomial splitter for a fixed PSF.
///
/// Small counts place each photon independently by inverse-CDF lookup;
/// larger counts use a chain of conditional binomials. Both draw from the
/// same multinomial law.
#[derive(Debug, Clone)]
pub struct Spreader {
    /// `p(j) / sum_{i >= j} p(i)`, ordered like the PSF weights.
    conditional: Vec<f64>,
    cdf: GuidedCdf,
}

impl Spreader {
    pub fn new(psf: &Psf) -> Self {
        let w = psf.weights();
        let mut conditional = vec![0.0; w.len()];
        let mut tail = 0.0;
        for i in (0..w.len()).rev() {
            tail += w[i];
            conditional[i] = if tail > 0.0 { (w[i] / tail).min(1.0) } else { 0.0 };
        }
        if let Some(last) = conditional.last_mut() {
            *last = 1.0;
        }
        Self {
            conditional,
            cdf: GuidedCdf::new(w),
        }
    }

    pub fn bins(&self) -> usize {
        self.conditional.len()
    }

    /// Splits `n` photons into `out`, which must hold `2J + 1` bins.
    pub fn spread_into<R: Rng + ?Sized>(&self, n: u64, rng: &mut R, out: &mut [u64]) {
        debug_assert_eq!(out.len(), self.conditional.len());
        out.fill(0);
        if n <= PER_PHOTON_LIMIT {
            for _ in 0..n {
                out[self.cdf.sample(rng)] += 1;
            }
            return;
        }
        let mut remaining = n;
        let last = self.conditional.len() - 1;
        for (i, &p) in self.conditional.iter().enumerate() {
            if remaining == 0 {
                break;
            }
            let x = if i == last || p >= 1.0 {
                remaining
            } else if p <= 0.0 {
                0
            } else {
                Binomial::new(remaining, p)
                    .expect("conditional probability lies in [0, 1]")
                    .sample(rng)
            };
            out[i] = x;
            remaining -= x;
        }
    }
}

/// Splits `n` photons over the PSF support; entry `i` is offset `i - J`.
pub fn sample_multinomial(n: u64, psf: &Psf, rng: &mut RngStream) -> Vec<u64> {
    let spreader = Spreader::new(psf);
    let mut out = vec![0; spreader.bins()];
    spreader.spread_into(n, rng, &mut out);
    out
}

/// Precomputed per-scenario sampling state; cheap to share between workers.
#[derive(Debug, Clone)]
pub struct ImageSampler {
    seed: u64,
    sources: Vec<SourceLaw>,
    noise: Vec<SourceLaw>,
    spreader: Spreader,
    half_width: usize,
}

impl ImageSampler {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let laws = |mean: &[f64], q: &[f64]| -> Result<Vec<SourceLaw>> {
            mean.iter().zip(q).map(|(&m, &q)| SourceLaw::new(m, q)).collect()
        };
        Ok(Self {
            seed: scenario.master_seed,
            sources: laws(scenario.object.mean_flux(), scenario.object.q())?,
            noise: laws(scenario.noise.mean(), scenario.noise.q())?,
            spreader: Spreader::new(&scenario.psf),
            half_width: scenario.psf.half_width(),
        })
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    /// Generates image `index` into `image`, reusing its buffer.
    pub fn sample_into(&self, index: u64, image: &mut SampleImage, scratch: &mut Vec<u64>) -> Result<()> {
        let len = self.len();
        let bins = self.spreader.bins();
        scratch.resize(bins + len, 0);
        let (spread, wide) = scratch.split_at_mut(bins);
        wide.fill(0);
        let h = self.half_width as isize;
        for (k, law) in self.sources.iter().enumerate() {
            let mut rng = RngStream::new(self.seed, index, Stage::Source, k as u64);
            let n = law.sample(&mut rng);
            if n == 0 {
                continue;
            }
            let mut rng = RngStream::new(self.seed, index, Stage::Spread, k as u64);
            self.spreader.spread_into(n, &mut rng, spread);
            for (i, &x) in spread.iter().enumerate() {
                let pixel = k as isize + i as isize - h;
                if x > 0 && pixel >= 0 && (pixel as usize) < len {
                    wide[pixel as usize] += x;
                }
            }
        }
        for (k, law) in self.noise.iter().enumerate() {
            let mut rng = RngStream::new(self.seed, index, Stage::Noise, k as u64);
            wide[k] += law.sample(&mut rng);
        }
        image.counts.clear();
        for &w in wide.iter() {
            image.counts.push(u32::try_from(w).map_err(|_| Error::Overflow("pixel count"))?);
        }
        Ok(())
    }

    pub fn sample(&self, index: u64) -> Result<SampleImage> {
        let mut image = SampleImage { counts: Vec::with_capacity(self.len()) };
        self.sample_into(index, &mut image, &mut Vec::new())?;
        Ok(image)
    }

    /// Feeds images `range` to `sink`, one private stream set per index.
    pub fn sample_batch<S: ImageSink + ?Sized>(&self, range: Range<u64>, sink: &mut S) -> Result<()> {
        let mut image = SampleImage { counts: Vec::with_capacity(self.len()) };
        let mut scratch = Vec::new();
        for index in range {
            self.sample_into(index, &mut image, &mut scratch)?;
            sink.accept(&image)?;
        }
        Ok(())
    }
}

/// Generates image `image_index` of `scenario`.
pub fn sample_image(scenario: &Scenario, image_index: u64) -> Result<SampleImage> {
    ImageSampler::new(scenario)?.sample(image_index)
}

/// Generates images `range` of `scenario` into `sink`.
pub fn sample_batch<S: ImageSink + ?Sized>(scenario: &Scenario, range: Range<u64>, sink: &mut S) -> Result<()> {
    if range.end > scenario.n_samples {
        return Err(Error::invalid(format!(
            "image range {range:?} exceeds the scenario's {} samples",
            scenario.n_samples
        )));
    }
    ImageSampler::new(scenario)?.sample_batch(range, sink)
}

impl ImageSink for Vec<SampleImage> {
    fn accept(&mut self, image: &SampleImage) -> Result<()> {
        self.push(image.clone());
        Ok(())
    }
}
