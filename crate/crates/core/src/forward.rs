//! Analytic expectations of the mean, variance, Z and covariance images.
//!
//! For uncorrelated sources with mean `O(m)` and Z quantity `Z_O(m)`, and a
//! PSF `p`, the stack statistics at pixels `k`, `l` are
//!
//! ```text
//! mean(k)     = sum_j O(k-j) p(j) + N(k)
//! variance(k) = sum_j [O(k-j) p(j) + Z_O(k-j) p(j)^2] + var_N(k)
//! Z(k)        = sum_j Z_O(k-j) p(j)^2 + Z_N(k)
//! C(k, l)     = sum_j Z_O(k-j) p(j) p(l-k+j)          (k != l)
//! ```
//!
//! Object positions outside `[0, K)` carry no flux, and photons that land
//! outside the detector are dropped, so these hold at every pixel including
//! the edges.
//!
//! The sampler rounds and clamps its counts, so its sources do not have
//! exactly the requested Z. [`effective_source_moments`] enumerates that
//! discretised law exactly; [`effective_forward`] feeds those moments through
//! the same equations and is the reference the Monte Carlo results are
//! checked against.

use crate::error::{Error, Result};
use crate::model::{CovarianceMode, NoiseModel, ObjectModel, Psf};
use crate::sampler::scaled_count;
use crate::stats::CovarianceRows;

/// Expected statistical images of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedImages {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub z: Vec<f64>,
    /// Rows of `C(k, l)` with the diagonal set to `z`, matching the corrected
    /// covariance estimate.
    pub covariance: Option<CovarianceRows>,
}

/// `out(k) = sum_j values(k - j) * kernel(j)`, zero outside `[0, K)`.
fn convolve(values: &[f64], psf: &Psf, kernel: impl Fn(f64) -> f64) -> Vec<f64> {
    let len = values.len() as isize;
    (0..len)
        .map(|k| {
            psf.offsets()
                .filter(|j| (0..len).contains(&(k - j)))
                .map(|j| values[(k - j) as usize] * kernel(psf.at(j)))
                .sum()
        })
        .collect()
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::ShapeMismatch(format!("{what} has length {got}, expected {want}")));
    }
    Ok(())
}

/// Classical blur-plus-background image `sum_j O(k-j) p(j) + N(k)`.
pub fn classical_convolution(object: &ObjectModel, psf: &Psf, noise_mean: &[f64]) -> Result<Vec<f64>> {
    check_len("noise mean", noise_mean.len(), object.len())?;
    Ok(mean_from_moments(object.mean_flux(), psf, noise_mean))
}

fn mean_from_moments(flux: &[f64], psf: &Psf, noise_mean: &[f64]) -> Vec<f64> {
    let mut out = convolve(flux, psf, |p| p);
    for (o, n) in out.iter_mut().zip(noise_mean) {
        *o += n;
    }
    out
}

fn variance_from_moments(flux: &[f64], z: &[f64], psf: &Psf, noise_var: &[f64]) -> Vec<f64> {
    let len = flux.len() as isize;
    (0..len)
        .map(|k| {
            let signal: f64 = psf
                .offsets()
                .filter(|j| (0..len).contains(&(k - j)))
                .map(|j| {
                    let p = psf.at(j);
                    let m = (k - j) as usize;
                    flux[m] * p + z[m] * p * p
                })
                .sum();
            signal + noise_var[k as usize]
        })
        .collect()
}

fn z_from_moments(z: &[f64], psf: &Psf, noise_z: &[f64]) -> Vec<f64> {
    let mut out = convolve(z, psf, |p| p * p);
    for (o, n) in out.iter_mut().zip(noise_z) {
        *o += n;
    }
    out
}

/// `C(k, l) = sum_m Z_O(m) p(k - m) p(l - m)` for `k != l`, diagonal from `z_image`.
fn covariance_from_moments(z: &[f64], psf: &Psf, z_image: &[f64], rows: Vec<usize>) -> Result<CovarianceRows> {
    let len = z.len();
    let h = psf.half_width() as isize;
    let mut values = Vec::with_capacity(rows.len() * len);
    for &k in &rows {
        let k = k as isize;
        let sources = (k - h).max(0)..=(k + h).min(len as isize - 1);
        for l in 0..len as isize {
            if l == k {
                values.push(z_image[k as usize]);
                continue;
            }
            let c: f64 = sources
                .clone()
                .map(|m| z[m as usize] * psf.at(k - m) * psf.at(l - m))
                .sum();
            values.push(c);
        }
    }
    CovarianceRows::new(len, rows, values)
}

fn rows_for(mode: &CovarianceMode, len: usize) -> Option<Vec<usize>> {
    match mode {
        CovarianceMode::Off => None,
        CovarianceMode::Full => Some((0..len).collect()),
        CovarianceMode::Slices(rows) => Some(rows.clone()),
    }
}

fn check_models(object: &ObjectModel, noise: &NoiseModel) -> Result<()> {
    check_len("noise model", noise.len(), object.len())
}

/// Expected mean image; identical arithmetic to [`classical_convolution`].
pub fn expected_mean_image(object: &ObjectModel, psf: &Psf, noise: &NoiseModel) -> Result<Vec<f64>> {
    check_models(object, noise)?;
    classical_convolution(object, psf, noise.mean())
}

pub fn expected_variance_image(object: &ObjectModel, psf: &Psf, noise: &NoiseModel) -> Result<Vec<f64>> {
    check_models(object, noise)?;
    Ok(variance_from_moments(
        object.mean_flux(),
        &object.z(),
        psf,
        &noise.variance(),
    ))
}

/// Expected Z image: the object's Z blurred by `p^2`, plus the noise Z.
pub fn expected_z_image(object: &ObjectModel, psf: &Psf, noise: &NoiseModel) -> Result<Vec<f64>> {
    check_models(object, noise)?;
    Ok(z_from_moments(&object.z(), psf, &noise.z()))
}

/// Expected covariance rows (all rows for [`CovarianceMode::Full`]).
///
/// Noise is independent between pixels and only enters through the diagonal,
/// which carries the expected Z image.
pub fn expected_covariance_image(
    object: &ObjectModel,
    psf: &Psf,
    noise: &NoiseModel,
    mode: &CovarianceMode,
) -> Result<Option<CovarianceRows>> {
    check_models(object, noise)?;
    let Some(rows) = rows_for(mode, object.len()) else {
        return Ok(None);
    };
    let z = object.z();
    let z_image = z_from_moments(&z, psf, &noise.z());
    covariance_from_moments(&z, psf, &z_image, rows).map(Some)
}

fn forward_from_moments(
    flux: &[f64],
    z: &[f64],
    psf: &Psf,
    noise_mean: &[f64],
    noise_z: &[f64],
    mode: &CovarianceMode,
) -> Result<ExpectedImages> {
    let noise_var: Vec<f64> = noise_mean.iter().zip(noise_z).map(|(m, z)| m + z).collect();
    let mean = mean_from_moments(flux, psf, noise_mean);
    let variance = variance_from_moments(flux, z, psf, &noise_var);
    let z_image = z_from_moments(z, psf, noise_z);
    let covariance = match rows_for(mode, flux.len()) {
        None => None,
        Some(rows) => Some(covariance_from_moments(z, psf, &z_image, rows)?),
    };
    Ok(ExpectedImages {
        mean,
        variance,
        z: z_image,
        covariance,
    })
}

/// All expected images of the ideal model.
pub fn ideal_forward(
    object: &ObjectModel,
    psf: &Psf,
    noise: &NoiseModel,
    mode: &CovarianceMode,
) -> Result<ExpectedImages> {
    check_models(object, noise)?;
    forward_from_moments(
        object.mean_flux(),
        &object.z(),
        psf,
        noise.mean(),
        &noise.z(),
        mode,
    )
}

/// Mean and Z of the sampler's count law for `(mean, q)`, by exact
/// enumeration of the underlying Poisson distribution and of the two
/// outcomes of each randomised rounding.
///
/// The Poisson support is walked outward from its mode until the remaining
/// tail mass on each side is below `1e-16`.
pub fn effective_source_moments(mean: f64, q: f64) -> Result<(f64, f64)> {
    if !(mean >= 0.0) || !mean.is_finite() {
        return Err(Error::invalid(format!("mean {mean} is not a finite non-negative value")));
    }
    if !(q >= -1.0) {
        return Err(Error::invalid(format!("Mandel Q {q} is below -1")));
    }
    if mean == 0.0 {
        return Ok((0.0, 0.0));
    }
    if q == -1.0 {
        let floor = mean.floor();
        let up = mean - floor;
        return Ok((mean, up * (1.0 - up) - mean));
    }
    if q == 0.0 {
        // Unit scale: the transform is the identity on the Poisson support.
        return Ok((mean, 0.0));
    }
    let alpha = (1.0 + q).sqrt();
    let ln_mean = mean.ln();
    let ln_pmf = |s: f64| -mean + s * ln_mean - libm::lgamma(s + 1.0);
    const TAIL: f64 = 1e-16;

    // Moments of d = t - mean, accumulated relative to the mean for precision.
    let (mut mass, mut m1, mut m2) = (0.0, 0.0, 0.0);
    let mut add = |s: u64, p: f64| {
        mass += p;
        // Randomised rounding splits x between floor(x) and floor(x) + 1.
        let x = scaled_count(s as f64, mean, alpha);
        if x > 0.0 {
            let floor = x.floor();
            let up = x - floor;
            for (value, weight) in [(floor, 1.0 - up), (floor + 1.0, up)] {
                let d = value - mean;
                m1 += p * weight * d;
                m2 += p * weight * d * d;
            }
        } else {
            m1 += p * -mean;
            m2 += p * mean * mean;
        }
    };

    let mode = mean.floor() as u64;
    let mut s = mode;
    loop {
        let p = ln_pmf(s as f64).exp();
        add(s, p);
        // pmf(s+1)/pmf(s) = mean/(s+1); bound the upper tail by a geometric series.
        let ratio = mean / (s as f64 + 1.0);
        if ratio < 1.0 && p * ratio / (1.0 - ratio) < TAIL {
            break;
        }
        s += 1;
    }
    let mut s = mode;
    while s > 0 {
        s -= 1;
        let p = ln_pmf(s as f64).exp();
        add(s, p);
        // pmf(s-1)/pmf(s) = s/mean.
        let ratio = s as f64 / mean;
        if ratio < 1.0 && p * ratio / (1.0 - ratio) < TAIL {
            break;
        }
    }
    let shift = m1 / mass;
    let variance = (m2 / mass - shift * shift).max(0.0);
    let mean_eff = mean + shift;
    Ok((mean_eff, variance - mean_eff))
}

fn effective_moments(mean: &[f64], q: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut cache: Vec<((u64, u64), (f64, f64))> = Vec::new();
    let mut means = Vec::with_capacity(mean.len());
    let mut zs = Vec::with_capacity(mean.len());
    for (&m, &qk) in mean.iter().zip(q) {
        let key = (m.to_bits(), qk.to_bits());
        let (me, ze) = match cache.iter().find(|(k, _)| *k == key) {
            Some((_, v)) => *v,
            None => {
                let v = effective_source_moments(m, qk)?;
                cache.push((key, v));
                v
            }
        };
        means.push(me);
        zs.push(ze);
    }
    Ok((means, zs))
}

/// Expected images for the sampler's discretised sources and noise.
pub fn effective_forward(
    object: &ObjectModel,
    psf: &Psf,
    noise: &NoiseModel,
    mode: &CovarianceMode,
) -> Result<ExpectedImages> {
    check_models(object, noise)?;
    let (flux, z) = effective_moments(object.mean_flux(), object.q())?;
    let (noise_mean, noise_z) = effective_moments(noise.mean(), noise.q())?;
    forward_from_moments(&flux, &z, psf, &noise_mean, &noise_z, mode)
}
