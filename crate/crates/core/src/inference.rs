//! Recovering the PSF, background Z, noise Z and background Q from
//! covariance rows.
//!
//! Off the diagonal, a corrected covariance row through pixel `k` only sees
//! the object. Around a locally flat region it is `Z_B a(m)` with
//! `a(m) = sum_j p(j) p(m + j)`, and through an isolated point source it is
//! `Z_O p(0) p(m)`. The diagonal entry `Z(k)` additionally holds the noise Z.

use crate::error::{Error, Result};
use crate::model::Psf;
use crate::stats::CovarianceRows;

/// One corrected covariance row around its centre pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSlice {
    pub center: usize,
    /// `(lag, value)` pairs in increasing lag order; lag 0 is `Z(center)`.
    pub lags: Vec<(isize, f64)>,
}

impl CovarianceSlice {
    /// Extracts lags `-max_lag..=max_lag` of row `center`, clipped to the image.
    pub fn from_rows(cov: &CovarianceRows, center: usize, max_lag: usize) -> Result<Self> {
        let row = cov
            .row(center)
            .ok_or_else(|| Error::invalid(format!("covariance row {center} was not accumulated")))?;
        let len = row.len() as isize;
        let c = center as isize;
        let m = max_lag as isize;
        let lags = (-m..=m)
            .filter(|lag| (0..len).contains(&(c + lag)))
            .map(|lag| (lag, row[(c + lag) as usize]))
            .collect();
        Ok(Self { center, lags })
    }

    pub fn value(&self, lag: isize) -> Option<f64> {
        self.lags.iter().find(|(m, _)| *m == lag).map(|(_, v)| *v)
    }

    /// `Z(center)`, the corrected diagonal.
    pub fn center_value(&self) -> Option<f64> {
        self.value(0)
    }

    /// Lag-by-lag product with `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            center: self.center,
            lags: self.lags.iter().map(|&(m, v)| (m, v * factor)).collect(),
        }
    }
}

/// PSF and source Z recovered from the covariance row through a point source.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPsfEstimate {
    pub psf: Psf,
    /// `Z_O` of the point source.
    pub z_object: f64,
    /// Set when negative kernel estimates had to be clipped to zero.
    pub clipped: bool,
}

/// Corrections applied to a point-source row before inverting it.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PointCorrections {
    /// Noise Z at the point pixel, removed from lag 0.
    pub noise_z: Option<f64>,
    /// Z of a flat background surrounding the point. Its contribution
    /// `Z_B (a(m) - p(0) p(m))` is removed from every lag, refining the PSF
    /// by fixed-point iteration.
    pub background_z: Option<f64>,
}

/// Inverts `C(k, k + m) = Z_O p(0) p(m)` over `m` in `[-J, J]`.
///
/// Normalising the row to unit sum gives `p(m)`; the implied source Z is
/// `(sum_m C)^2 / C(k, k)`. Lag 0 is read from the corrected diagonal, so any
/// noise or background Z there biases `p(0)` unless removed via `corrections`.
pub fn estimate_psf_point(
    cov: &CovarianceRows,
    k: usize,
    half_width: usize,
    corrections: PointCorrections,
) -> Result<PointPsfEstimate> {
    let slice = CovarianceSlice::from_rows(cov, k, half_width)?;
    let h = half_width as isize;
    let mut row: Vec<f64> = (-h..=h).map(|m| slice.value(m).unwrap_or(0.0)).collect();
    if let Some(zn) = corrections.noise_z {
        row[half_width] -= zn;
    }
    let mut estimate = invert_point_row(&row)?;
    if let Some(zb) = corrections.background_z {
        for _ in 0..50 {
            let psf = &estimate.psf;
            let p0 = psf.at(0);
            let cleaned: Vec<f64> = (-h..=h)
                .zip(&row)
                .map(|(m, &c)| c - zb * (psf.autocorrelation(m) - p0 * psf.at(m)))
                .collect();
            let next = invert_point_row(&cleaned)?;
            let change = next
                .psf
                .weights()
                .iter()
                .zip(psf.weights())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            estimate = next;
            if change < 1e-14 {
                break;
            }
        }
    }
    Ok(estimate)
}

fn invert_point_row(row: &[f64]) -> Result<PointPsfEstimate> {
    let total: f64 = row.iter().sum();
    let scale = row.iter().map(|c| c.abs()).fold(0.0, f64::max);
    if !(scale > 0.0) || !(total.abs() > 1e-9 * scale) || !total.is_finite() {
        return Err(Error::NotEstimable("covariance row carries no usable energy".into()));
    }
    let centre = row[row.len() / 2];
    let raw: Vec<f64> = row.iter().map(|c| c / total).collect();
    let clipped = raw.iter().any(|&p| p < 0.0);
    let weights: Vec<f64> = raw.iter().map(|&p| p.max(0.0)).collect();
    if !(centre / total > 0.0) {
        return Err(Error::NotEstimable(
            "central covariance has the wrong sign for a point source".into(),
        ));
    }
    let psf = Psf::from_weights(weights).map_err(|e| Error::NotEstimable(e.to_string()))?;
    Ok(PointPsfEstimate {
        psf,
        z_object: total * total / centre,
        clipped,
    })
}

/// Least-squares `z_b` in `c(m) ~ z_b a(m)` over the slice's non-zero lags.
pub fn fit_flat_z(slice: &CovarianceSlice, psf: &Psf) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for &(m, c) in slice.lags.iter().filter(|(m, _)| *m != 0) {
        let a = psf.autocorrelation(m);
        num += c * a;
        den += a * a;
    }
    if den == 0.0 {
        return Err(Error::NotFittable(
            "the PSF has no off-diagonal autocorrelation within the slice".into(),
        ));
    }
    Ok(num / den)
}

/// Noise Z at the slice centre: `Z(k) - z_b sum_j p(j)^2`.
pub fn separate_noise(slice: &CovarianceSlice, z_b: f64, psf: &Psf) -> Result<f64> {
    let z = slice
        .center_value()
        .ok_or_else(|| Error::invalid("slice has no lag-0 value"))?;
    Ok(z - z_b * psf.sum_of_squares())
}

/// Background mean and Q from the mean image and a known noise mean.
pub fn recover_background(mean_image: &[f64], noise_mean: f64, z_b: f64, k: usize) -> Result<(f64, f64)> {
    let mean = *mean_image
        .get(k)
        .ok_or_else(|| Error::invalid(format!("pixel {k} outside the mean image")))?;
    let o_b = mean - noise_mean;
    if !(o_b > 0.0) {
        return Err(Error::NotRecoverable(format!(
            "background mean {o_b} is not positive at pixel {k}"
        )));
    }
    Ok((o_b, z_b / o_b))
}

/// Result of the flat-background recipe at one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub center: usize,
    pub max_lag: usize,
    pub z_b: f64,
    pub z_n: f64,
    pub o_b: f64,
    pub q_b: f64,
    /// RMS of `c(m) - z_b a(m)` over the fitted lags.
    pub residual_rms: f64,
}

/// Background Z fit, noise separation and Q recovery at slice `center`.
pub fn fit_background(
    cov: &CovarianceRows,
    mean_image: &[f64],
    center: usize,
    psf: &Psf,
    noise_mean: f64,
    max_lag: usize,
) -> Result<FitReport> {
    let slice = CovarianceSlice::from_rows(cov, center, max_lag)?;
    let z_b = fit_flat_z(&slice, psf)?;
    let z_n = separate_noise(&slice, z_b, psf)?;
    let (o_b, q_b) = recover_background(mean_image, noise_mean, z_b, center)?;
    Ok(FitReport {
        center,
        max_lag,
        z_b,
        z_n,
        o_b,
        q_b,
        residual_rms: residual_rms(&slice, z_b, psf),
    })
}

/// Joint estimate: PSF from the point source at `point`, background and
/// noise from the flat slice at `center`.
///
/// Starts from the uncorrected point inversion, then alternates the
/// background fit with a point inversion corrected by the fitted `z_n` and
/// `z_b` (noise assumed uniform) until the kernel stops changing.
pub fn fit_point_and_background(
    cov: &CovarianceRows,
    mean_image: &[f64],
    point: usize,
    half_width: usize,
    center: usize,
    noise_mean: f64,
    max_lag: usize,
) -> Result<(PointPsfEstimate, FitReport)> {
    let mut estimate = estimate_psf_point(cov, point, half_width, PointCorrections::default())?;
    let mut report = fit_background(cov, mean_image, center, &estimate.psf, noise_mean, max_lag)?;
    for _ in 0..20 {
        let corrections = PointCorrections {
            noise_z: Some(report.z_n),
            background_z: Some(report.z_b),
        };
        let next = estimate_psf_point(cov, point, half_width, corrections)?;
        let change = next
            .psf
            .weights()
            .iter()
            .zip(estimate.psf.weights())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        estimate = next;
        report = fit_background(cov, mean_image, center, &estimate.psf, noise_mean, max_lag)?;
        if change < 1e-14 {
            break;
        }
    }
    Ok((estimate, report))
}

/// RMS misfit of the flat model over the slice's non-zero lags.
pub fn residual_rms(slice: &CovarianceSlice, z_b: f64, psf: &Psf) -> f64 {
    let r: Vec<f64> = slice
        .lags
        .iter()
        .filter(|(m, _)| *m != 0)
        .map(|&(m, c)| c - z_b * psf.autocorrelation(m))
        .collect();
    if r.is_empty() {
        return 0.0;
    }
    (r.iter().map(|x| x * x).sum::<f64>() / r.len() as f64).sqrt()
}
