//! Object, PSF and noise descriptions plus the scalar Z / Mandel-Q algebra.
//!
//! Every count statistic in this crate is summarised by a mean and a Mandel Q
//! parameter. The Z quantity (variance minus mean, equivalently `mean * q`) is
//! what the variance, Z and covariance images respond to.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Z quantity of a count distribution: variance minus mean.
pub fn z_quantity(mean: f64, variance: f64) -> f64 {
    variance - mean
}

/// Mandel Q parameter, `variance / mean - 1`.
pub fn mandel_q(mean: f64, variance: f64) -> Result<f64> {
    if !(mean > 0.0) {
        return Err(Error::UndefinedQ);
    }
    Ok(variance / mean - 1.0)
}

fn check_stats(what: &str, mean: &[f64], q: &[f64]) -> Result<()> {
    if mean.len() != q.len() {
        return Err(Error::ShapeMismatch(format!(
            "{what}: {} means but {} Q values",
            mean.len(),
            q.len()
        )));
    }
    if mean.is_empty() {
        return Err(Error::invalid(format!("{what}: length must be positive")));
    }
    for (k, (&m, &qk)) in mean.iter().zip(q).enumerate() {
        if !(m >= 0.0) || !m.is_finite() {
            return Err(Error::invalid(format!("{what}: mean[{k}] = {m} is not >= 0")));
        }
        if !(qk >= -1.0) || !qk.is_finite() {
            return Err(Error::invalid(format!("{what}: q[{k}] = {qk} is below -1")));
        }
    }
    Ok(())
}

/// Per-position expected flux and Mandel Q of an uncorrelated source.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectModel {
    mean_flux: Vec<f64>,
    q: Vec<f64>,
}

impl ObjectModel {
    pub fn new(mean_flux: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        check_stats("object", &mean_flux, &q)?;
        Ok(Self { mean_flux, q })
    }

    /// Constant flux and Q over `len` positions.
    pub fn flat(len: usize, flux: f64, q: f64) -> Result<Self> {
        Self::new(vec![flux; len], vec![q; len])
    }

    pub fn len(&self) -> usize {
        self.mean_flux.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean_flux.is_empty()
    }

    pub fn mean_flux(&self) -> &[f64] {
        &self.mean_flux
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn variance(&self) -> Vec<f64> {
        self.mean_flux
            .iter()
            .zip(&self.q)
            .map(|(m, q)| m * (1.0 + q))
            .collect()
    }

    /// `Z_O(k) = mean(k) * q(k)`.
    pub fn z(&self) -> Vec<f64> {
        self.mean_flux.iter().zip(&self.q).map(|(m, q)| m * q).collect()
    }
}

/// Local detector noise, independent between pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    mean: Vec<f64>,
    q: Vec<f64>,
}

impl NoiseModel {
    pub fn new(mean: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        check_stats("noise", &mean, &q)?;
        Ok(Self { mean, q })
    }

    pub fn flat(len: usize, mean: f64, q: f64) -> Result<Self> {
        Self::new(vec![mean; len], vec![q; len])
    }

    pub fn zero(len: usize) -> Result<Self> {
        Self::flat(len, 0.0, 0.0)
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn variance(&self) -> Vec<f64> {
        self.mean.iter().zip(&self.q).map(|(m, q)| m * (1.0 + q)).collect()
    }

    pub fn z(&self) -> Vec<f64> {
        self.mean.iter().zip(&self.q).map(|(m, q)| m * q).collect()
    }
}

/// Discrete shift-invariant PSF `p(j)`, `j` in `[-J, J]`.
///
/// `p(j)` is the probability that a photon emitted at object position `k`
/// is recorded at pixel `k + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Psf {
    half_width: usize,
    weights: Vec<f64>,
}

impl Psf {
    /// Builds a PSF from `2J + 1` non-negative weights, renormalised to sum 1.
    /// Weights already summing to 1 within `1e-12` are kept as given, so a
    /// written-out kernel reads back bit for bit.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.len().is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "PSF needs an odd number of weights, got {}",
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid(format!("PSF weight {w} is negative or not finite")));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("PSF weights sum to zero"));
        }
        let half_width = weights.len() / 2;
        if (total - 1.0).abs() <= 1e-12 {
            return Ok(Self { half_width, weights });
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { half_width, weights })
    }

    /// Identity kernel: every photon stays at its own pixel.
    pub fn delta() -> Self {
        Self {
            half_width: 0,
            weights: vec![1.0],
        }
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Weights ordered from `j = -J` to `j = J`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `p(j)`; zero outside the support.
    pub fn at(&self, j: isize) -> f64 {
        let idx = j + self.half_width as isize;
        if idx < 0 {
            return 0.0;
        }
        self.weights.get(idx as usize).copied().unwrap_or(0.0)
    }

    pub fn offsets(&self) -> impl Iterator<Item = isize> + '_ {
        let h = self.half_width as isize;
        -h..=h
    }

    /// `sum_j p(j)^2`, the lag-0 gain of the Z image.
    pub fn sum_of_squares(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    /// Kernel autocorrelation `a(m) = sum_j p(j) p(m + j)`.
    pub fn autocorrelation(&self, lag: isize) -> f64 {
        self.offsets().map(|j| self.at(j) * self.at(lag + j)).sum()
    }
}

/// Sampled Gaussian kernel `exp(-j^2 / (2 sigma^2))` on `[-J, J]`, normalised.
pub fn make_gaussian_psf(sigma: f64, half_width: usize) -> Result<Psf> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    if half_width < 1 {
        return Err(Error::invalid("half width must be at least 1"));
    }
    let h = half_width as isize;
    let raw: Vec<f64> = (-h..=h)
        .map(|j| (-((j * j) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    // Summing in index order keeps w[j] and w[-j] bit-identical.
    let weights = raw.into_iter().map(|w| w / total).collect();
    Ok(Psf { half_width, weights })
}

/// Default truncation `J = ceil(4 sigma)`.
pub fn default_half_width(sigma: f64) -> usize {
    ((4.0 * sigma).ceil() as usize).max(1)
}

/// Full width at half maximum of a sampled, single-peaked profile, using
/// linear interpolation between the samples that bracket half of the peak.
/// Returns `None` if the profile does not drop below half maximum on both sides.
pub fn fwhm(profile: &[f64]) -> Option<f64> {
    let (peak_idx, &peak) = profile
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    if !(peak > 0.0) {
        return None;
    }
    let half = peak / 2.0;
    let mut right = None;
    for i in peak_idx..profile.len() - 1 {
        let (a, b) = (profile[i], profile[i + 1]);
        if a >= half && b < half {
            right = Some(i as f64 + (a - half) / (a - b));
            break;
        }
    }
    let mut left = None;
    for i in (1..=peak_idx).rev() {
        let (a, b) = (profile[i], profile[i - 1]);
        if a >= half && b < half {
            left = Some(i as f64 - (a - half) / (a - b));
            break;
        }
    }
    Some(right? - left?)
}

/// Which rows of the covariance image are accumulated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CovarianceMode {
    Full,
    Slices(Vec<usize>),
    Off,
}

/// Everything needed to simulate and analyse one image stack.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub object: ObjectModel,
    pub psf: Psf,
    pub noise: NoiseModel,
    pub n_samples: u64,
    pub master_seed: u64,
    pub covariance_mode: CovarianceMode,
}

impl Scenario {
    pub fn new(
        object: ObjectModel,
        psf: Psf,
        noise: NoiseModel,
        n_samples: u64,
        master_seed: u64,
        covariance_mode: CovarianceMode,
    ) -> Result<Self> {
        let s = Self {
            object,
            psf,
            noise,
            n_samples,
            master_seed,
            covariance_mode,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.object.len() != self.noise.len() {
            return Err(Error::ShapeMismatch(format!(
                "object has {} positions, noise has {}",
                self.object.len(),
                self.noise.len()
            )));
        }
        if self.n_samples < 1 {
            return Err(Error::invalid("n_samples must be at least 1"));
        }
        if let CovarianceMode::Slices(rows) = &self.covariance_mode {
            if let Some(r) = rows.iter().find(|&&r| r >= self.len()) {
                return Err(Error::invalid(format!(
                    "covariance slice {r} outside [0, {})",
                    self.len()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.object.len()
    }

    pub fn is_empty(&self) -> bool {
        self.object.is_empty()
    }

    /// Pixels at least `J` away from either edge.
    pub fn interior(&self) -> std::ops::Range<usize> {
        let j = self.psf.half_width();
        j..self.len().saturating_sub(j)
    }
}

/// Geometry of the reference 128-pixel scene.
pub mod reference {
    pub const LENGTH: usize = 128;
    pub const POINT: usize = 64;
    pub const POINT_FLUX: f64 = 500.0;
    pub const WIDE_PAIR: [usize; 2] = [21, 28];
    pub const WIDE_PAIR_FLUX: f64 = 250.0;
    pub const CLOSE_PAIR: [usize; 2] = [46, 51];
    pub const CLOSE_PAIR_FLUX: f64 = 300.0;
    pub const EXTENDED: (usize, usize) = (81, 113);
    pub const EXTENDED_MEAN: f64 = 30.0;
    pub const EXTENDED_AMPLITUDE: f64 = 5.0;
    pub const BACKGROUND_FLUX: f64 = 10.0;
    pub const BACKGROUND_Q: f64 = 0.2;
    pub const NOISE_MEAN: f64 = 5.0;
    pub const NOISE_Q: f64 = 0.1;
    pub const PSF_SIGMA: f64 = 3.0;
    /// Covariance rows shown as slices A, B, C and D.
    pub const SLICES: [usize; 4] = [48, 72, 64, 96];
    pub const DEFAULT_SAMPLES: u64 = 1000;
    pub const DEFAULT_SEED: u64 = 20_211_018;
}

/// Sinusoidal extended source over `[a, b]`: one full period, zero phase at `a`.
pub fn extended_profile(k: usize, a: usize, b: usize, mean: f64, amplitude: f64) -> f64 {
    let period = (b - a) as f64;
    if period == 0.0 {
        return mean;
    }
    mean + amplitude * (2.0 * PI * (k - a) as f64 / period).sin()
}

/// Reference scene with the foreground Mandel Q set to `q_foreground`.
pub fn paper_scenario_with(q_foreground: f64) -> Result<Scenario> {
    use reference::*;
    let mut flux = vec![BACKGROUND_FLUX; LENGTH];
    let mut q = vec![BACKGROUND_Q; LENGTH];
    let mut set = |k: usize, f: f64| {
        flux[k] = f;
        q[k] = q_foreground;
    };
    set(POINT, POINT_FLUX);
    for k in WIDE_PAIR {
        set(k, WIDE_PAIR_FLUX);
    }
    for k in CLOSE_PAIR {
        set(k, CLOSE_PAIR_FLUX);
    }
    let (a, b) = EXTENDED;
    for k in a..=b {
        set(k, extended_profile(k, a, b, EXTENDED_MEAN, EXTENDED_AMPLITUDE));
    }
    Scenario::new(
        ObjectModel::new(flux, q)?,
        make_gaussian_psf(PSF_SIGMA, default_half_width(PSF_SIGMA))?,
        NoiseModel::flat(LENGTH, NOISE_MEAN, NOISE_Q)?,
        DEFAULT_SAMPLES,
        DEFAULT_SEED,
        CovarianceMode::Slices(SLICES.to_vec()),
    )
}

/// Reference scene with a super-Poissonian foreground (`Q_F = 0.2`).
pub fn paper_scenario() -> Scenario {
    paper_scenario_with(0.2).expect("reference scene is valid")
}
