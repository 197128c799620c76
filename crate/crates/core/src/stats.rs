//! Exact moment accumulation over an image stack.
//!
//! Counts are integers, so the accumulator keeps `sum I(k)`, `sum I(k)^2` and
//! `sum I(k) I(l)` as 128-bit integers. Accumulation and merging are exact,
//! which makes results independent of how a stack is split between workers.
//! Rounding happens once, in [`StatAccumulator::finalize`].
//!
//! With counts below `2^32` every product fits in 64 bits, so the sums cannot
//! overflow before the image count itself does (`n < 2^64`).

use crate::error::{Error, Result};
use crate::model::CovarianceMode;
use crate::sampler::{ImageSink, SampleImage};

#[derive(Debug, Clone, PartialEq, Eq)]
enum CrossSums {
    Off,
    /// Upper triangle, row-major, `l >= k`.
    Full(Vec<u128>),
    /// Complete rows for the listed pixels.
    Rows { rows: Vec<usize>, data: Vec<u128> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatAccumulator {
    len: usize,
    n: u64,
    sum: Vec<u128>,
    sumsq: Vec<u128>,
    cross: CrossSums,
}

/// Row `k` of the upper triangle starts after `sum_{i<k} (len - i)` entries.
fn tri_index(len: usize, k: usize, l: usize) -> usize {
    debug_assert!(k <= l);
    k * len - k * k.saturating_sub(1) / 2 + (l - k)
}

impl StatAccumulator {
    pub fn new(len: usize, mode: &CovarianceMode) -> Result<Self> {
        if len == 0 {
            return Err(Error::invalid("image length must be positive"));
        }
        let cross = match mode {
            CovarianceMode::Off => CrossSums::Off,
            CovarianceMode::Full => CrossSums::Full(vec![0; len * (len + 1) / 2]),
            CovarianceMode::Slices(rows) => {
                if let Some(r) = rows.iter().find(|&&r| r >= len) {
                    return Err(Error::invalid(format!("covariance row {r} outside [0, {len})")));
                }
                CrossSums::Rows {
                    rows: rows.clone(),
                    data: vec![0; rows.len() * len],
                }
            }
        };
        Ok(Self {
            len,
            n: 0,
            sum: vec![0; len],
            sumsq: vec![0; len],
            cross,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn sum(&self) -> &[u128] {
        &self.sum
    }

    pub fn sum_of_squares(&self) -> &[u128] {
        &self.sumsq
    }

    pub fn covariance_mode(&self) -> CovarianceMode {
        match &self.cross {
            CrossSums::Off => CovarianceMode::Off,
            CrossSums::Full(_) => CovarianceMode::Full,
            CrossSums::Rows { rows, .. } => CovarianceMode::Slices(rows.clone()),
        }
    }

    /// `sum I(k) I(l)` if that pair is being accumulated.
    pub fn cross(&self, k: usize, l: usize) -> Option<u128> {
        if k >= self.len || l >= self.len {
            return None;
        }
        match &self.cross {
            CrossSums::Off => None,
            CrossSums::Full(upper) => {
                let (a, b) = if k <= l { (k, l) } else { (l, k) };
                Some(upper[tri_index(self.len, a, b)])
            }
            CrossSums::Rows { rows, data } => {
                if let Some(r) = rows.iter().position(|&r| r == k) {
                    Some(data[r * self.len + l])
                } else {
                    rows.iter().position(|&r| r == l).map(|r| data[r * self.len + k])
                }
            }
        }
    }

    pub fn accumulate(&mut self, image: &SampleImage) -> Result<()> {
        if image.len() != self.len {
            return Err(Error::ShapeMismatch(format!(
                "image has {} pixels, accumulator expects {}",
                image.len(),
                self.len
            )));
        }
        self.n = self.n.checked_add(1).ok_or(Error::Overflow("image count"))?;
        let c = &image.counts;
        for (k, &x) in c.iter().enumerate() {
            let x = x as u64;
            self.sum[k] += x as u128;
            self.sumsq[k] += (x * x) as u128;
        }
        let len = self.len;
        match &mut self.cross {
            CrossSums::Off => {}
            CrossSums::Full(upper) => {
                let mut start = 0;
                for k in 0..len {
                    let row_len = len - k;
                    let xk = c[k] as u64;
                    if xk != 0 {
                        let row = &mut upper[start..start + row_len];
                        for (acc, &xl) in row.iter_mut().zip(&c[k..]) {
                            *acc += (xk * xl as u64) as u128;
                        }
                    }
                    start += row_len;
                }
            }
            CrossSums::Rows { rows, data } => {
                for (r, &k) in rows.iter().enumerate() {
                    let xk = c[k] as u64;
                    if xk == 0 {
                        continue;
                    }
                    let row = &mut data[r * len..(r + 1) * len];
                    for (acc, &xl) in row.iter_mut().zip(c) {
                        *acc += (xk * xl as u64) as u128;
                    }
                }
            }
        }
        Ok(())
    }

    /// Adds `other` into `self`.
    pub fn merge_from(&mut self, other: &StatAccumulator) -> Result<()> {
        if self.len != other.len {
            return Err(Error::ShapeMismatch(format!(
                "cannot merge accumulators of length {} and {}",
                self.len, other.len
            )));
        }
        fn add(dst: &mut [u128], src: &[u128]) -> Result<()> {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = d.checked_add(*s).ok_or(Error::Overflow("merged moment sums"))?;
            }
            Ok(())
        }
        match (&mut self.cross, &other.cross) {
            (CrossSums::Off, CrossSums::Off) => {}
            (CrossSums::Full(a), CrossSums::Full(b)) => add(a, b)?,
            (CrossSums::Rows { rows: ra, data: a }, CrossSums::Rows { rows: rb, data: b }) if ra == rb => {
                add(a, b)?
            }
            _ => {
                return Err(Error::ShapeMismatch(
                    "cannot merge accumulators with different covariance modes".into(),
                ))
            }
        }
        self.n = self.n.checked_add(other.n).ok_or(Error::Overflow("image count"))?;
        add(&mut self.sum, &other.sum)?;
        add(&mut self.sumsq, &other.sumsq)?;
        Ok(())
    }

    /// Unbiased moment estimates. Needs at least two images.
    pub fn finalize(&self) -> Result<StatisticalImages> {
        if self.n < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                have: self.n,
            });
        }
        let n = self.n as u128;
        let nf = self.n as f64;
        let denom = nf * (nf - 1.0);
        let mean: Vec<f64> = self.sum.iter().map(|&s| s as f64 / nf).collect();
        let centered = |cross: u128, a: u128, b: u128| -> Result<f64> {
            let lhs = n.checked_mul(cross).ok_or(Error::Overflow("n * cross sum"))?;
            let rhs = a.checked_mul(b).ok_or(Error::Overflow("sum product"))?;
            let diff = if lhs >= rhs {
                (lhs - rhs) as f64
            } else {
                -((rhs - lhs) as f64)
            };
            Ok(diff / denom)
        };
        let variance = (0..self.len)
            .map(|k| centered(self.sumsq[k], self.sum[k], self.sum[k]))
            .collect::<Result<Vec<f64>>>()?;
        let z: Vec<f64> = variance.iter().zip(&mean).map(|(v, m)| v - m).collect();

        let rows: Option<Vec<usize>> = match &self.cross {
            CrossSums::Off => None,
            CrossSums::Full(_) => Some((0..self.len).collect()),
            CrossSums::Rows { rows, .. } => Some(rows.clone()),
        };
        let (cov_raw, cov_corrected) = match rows {
            None => (None, None),
            Some(rows) => {
                let mut values = Vec::with_capacity(rows.len() * self.len);
                for &k in &rows {
                    for l in 0..self.len {
                        let c = self.cross(k, l).expect("row is accumulated");
                        values.push(centered(c, self.sum[k], self.sum[l])?);
                    }
                }
                let raw = CovarianceRows::new(self.len, rows, values)?;
                let corrected = raw.with_diagonal(&z);
                (Some(raw), Some(corrected))
            }
        };
        Ok(StatisticalImages {
            n: self.n,
            mean,
            variance,
            z,
            cov_raw,
            cov_corrected,
        })
    }
}

impl ImageSink for StatAccumulator {
    fn accept(&mut self, image: &SampleImage) -> Result<()> {
        self.accumulate(image)
    }
}

/// Combines two accumulators of the same shape.
pub fn merge(a: &StatAccumulator, b: &StatAccumulator) -> Result<StatAccumulator> {
    let mut out = a.clone();
    out.merge_from(b)?;
    Ok(out)
}

/// Selected full rows of a symmetric `len x len` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceRows {
    len: usize,
    rows: Vec<usize>,
    values: Vec<f64>,
}

impl CovarianceRows {
    pub fn new(len: usize, rows: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows.len() * len {
            return Err(Error::ShapeMismatch(format!(
                "{} rows of length {len} need {} values, got {}",
                rows.len(),
                rows.len() * len,
                values.len()
            )));
        }
        if let Some(r) = rows.iter().find(|&&r| r >= len) {
            return Err(Error::ShapeMismatch(format!("row {r} outside [0, {len})")));
        }
        Ok(Self { len, rows, values })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    /// True if every row of the matrix is present, in order.
    pub fn is_full(&self) -> bool {
        self.rows.len() == self.len && self.rows.iter().enumerate().all(|(i, &r)| i == r)
    }

    pub fn row(&self, k: usize) -> Option<&[f64]> {
        let r = self.rows.iter().position(|&r| r == k)?;
        Some(&self.values[r * self.len..(r + 1) * self.len])
    }

    /// Entry `(k, l)`, read from row `k` or, by symmetry, row `l`.
    pub fn get(&self, k: usize, l: usize) -> Option<f64> {
        if l >= self.len || k >= self.len {
            return None;
        }
        self.row(k).map(|r| r[l]).or_else(|| self.row(l).map(|r| r[k]))
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.rows.iter().copied().zip(self.values.chunks(self.len.max(1)))
    }

    /// Copy with entry `(k, k)` of every stored row replaced by `diag[k]`.
    pub fn with_diagonal(&self, diag: &[f64]) -> Self {
        let mut out = self.clone();
        for (r, &k) in self.rows.iter().enumerate() {
            out.values[r * self.len + k] = diag[k];
        }
        out
    }
}

/// Finalised per-pixel statistics of an image stack.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticalImages {
    pub n: u64,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub z: Vec<f64>,
    pub cov_raw: Option<CovarianceRows>,
    /// `cov_raw` with its diagonal replaced by the Z image.
    pub cov_corrected: Option<CovarianceRows>,
}

impl StatisticalImages {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    /// Per-pixel Mandel Q, `None` for dark pixels.
    pub fn q(&self) -> Vec<Option<f64>> {
        self.mean
            .iter()
            .zip(&self.variance)
            .map(|(&m, &v)| crate::model::mandel_q(m, v).ok())
            .collect()
    }
}

/// Standard error of the mean of per-batch estimates.
///
/// Each entry of `batches` holds one estimate per pixel (or lag) computed from
/// an independent sub-stack. The result estimates the sampling spread of the
/// same quantity computed from the pooled stack.
pub fn batch_standard_error(batches: &[Vec<f64>]) -> Result<Vec<f64>> {
    let b = batches.len();
    if b < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            have: b as u64,
        });
    }
    let len = batches[0].len();
    if batches.iter().any(|v| v.len() != len) {
        return Err(Error::ShapeMismatch("batches differ in length".into()));
    }
    let bf = b as f64;
    Ok((0..len)
        .map(|i| {
            let mean = batches.iter().map(|v| v[i]).sum::<f64>() / bf;
            let ss = batches.iter().map(|v| (v[i] - mean).powi(2)).sum::<f64>();
            (ss / (bf - 1.0) / bf).sqrt()
        })
        .collect())
}
