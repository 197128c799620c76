//! Files: scenarios, CSV tables, run directories, SVG charts, raw dumps.
//!
//! A statistics directory written by [`write_stats_dir`] holds
//!
//! - `images.csv`: `index,mean,variance,z` plus `mean_se,variance_se,z_se`
//!   when batch standard errors are available;
//! - `cov_raw.csv`, `cov_corrected.csv` and `cov_se.csv` when covariance rows
//!   were accumulated;
//! - whatever the caller adds (scenario copy, manifest).
//!
//! An expected-image directory from [`write_expected_dir`] holds
//! `expected.csv` (`index,mean,variance,z,convolution`) and, if computed,
//! `covariance.csv`.

pub mod raw;
pub mod scenario;
pub mod svg;
pub mod tables;

use std::path::Path;

use crate::error::{Error, Result};
use crate::forward::ExpectedImages;
use crate::run::StackSummary;
use crate::stats::StatisticalImages;

pub use raw::{read_raw_stack, RawStackWriter};
pub use scenario::{format_scenario, parse_covariance_mode, parse_scenario, read_scenario};
pub use tables::{read_covariance, read_image_table, write_covariance, write_image_table, ImageTable};

pub const IMAGES_CSV: &str = "images.csv";
pub const COV_RAW_CSV: &str = "cov_raw.csv";
pub const COV_CORRECTED_CSV: &str = "cov_corrected.csv";
pub const COV_SE_CSV: &str = "cov_se.csv";
pub const EXPECTED_CSV: &str = "expected.csv";
pub const EXPECTED_COV_CSV: &str = "covariance.csv";
pub const MANIFEST: &str = "manifest.txt";
pub const SCENARIO: &str = "scenario.txt";

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_stats_dir(dir: &Path, summary: &StackSummary) -> Result<()> {
    ensure_dir(dir)?;
    let im = &summary.images;
    let mut table = ImageTable::new()
        .with("mean", &im.mean)
        .with("variance", &im.variance)
        .with("z", &im.z);
    if let (Some(m), Some(v), Some(z)) = (&summary.mean_se, &summary.variance_se, &summary.z_se) {
        table = table.with("mean_se", m).with("variance_se", v).with("z_se", z);
    }
    write_image_table(&dir.join(IMAGES_CSV), &table)?;
    for (name, cov) in [
        (COV_RAW_CSV, &im.cov_raw),
        (COV_CORRECTED_CSV, &im.cov_corrected),
        (COV_SE_CSV, &summary.cov_se),
    ] {
        if let Some(c) = cov {
            write_covariance(&dir.join(name), c)?;
        }
    }
    Ok(())
}

/// Reads a statistics directory. The stack size comes from the manifest if
/// one is present, else it is 0.
pub fn read_stats_dir(dir: &Path) -> Result<StackSummary> {
    let path = dir.join(IMAGES_CSV);
    let table = read_image_table(&path)?;
    let opt = |name: &str| table.column(name).map(<[f64]>::to_vec);
    let read_cov = |name: &str| {
        let p = dir.join(name);
        if p.exists() {
            read_covariance(&p).map(Some)
        } else {
            Ok(None)
        }
    };
    let cov_corrected = read_cov(COV_CORRECTED_CSV)?;
    if let Some(c) = &cov_corrected {
        if c.len() != table.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} has {} columns but {} has {} pixels",
                COV_CORRECTED_CSV,
                c.len(),
                IMAGES_CSV,
                table.len()
            )));
        }
    }
    let manifest = dir.join(MANIFEST);
    let n = if manifest.exists() {
        tables::read_key_values(&manifest)?
            .iter()
            .find(|(k, _)| k == "samples")
            .and_then(|(_, v)| v.parse().ok())
            .unwrap_or(0)
    } else {
        0
    };
    let batches = if manifest.exists() {
        tables::read_key_values(&manifest)?
            .iter()
            .find(|(k, _)| k == "batches")
            .and_then(|(_, v)| v.parse().ok())
            .unwrap_or(0)
    } else {
        0
    };
    Ok(StackSummary {
        images: StatisticalImages {
            n,
            mean: table.require("mean", &path)?.to_vec(),
            variance: table.require("variance", &path)?.to_vec(),
            z: table.require("z", &path)?.to_vec(),
            cov_raw: read_cov(COV_RAW_CSV)?,
            cov_corrected,
        },
        batches,
        mean_se: opt("mean_se"),
        variance_se: opt("variance_se"),
        z_se: opt("z_se"),
        cov_se: read_cov(COV_SE_CSV)?,
    })
}

/// Writes expected images; `convolution` is the classical blurred object.
pub fn write_expected_dir(dir: &Path, expected: &ExpectedImages, convolution: &[f64]) -> Result<()> {
    ensure_dir(dir)?;
    let table = ImageTable::new()
        .with("mean", &expected.mean)
        .with("variance", &expected.variance)
        .with("z", &expected.z)
        .with("convolution", convolution);
    write_image_table(&dir.join(EXPECTED_CSV), &table)?;
    if let Some(c) = &expected.covariance {
        write_covariance(&dir.join(EXPECTED_COV_CSV), c)?;
    }
    Ok(())
}

/// Reads expected images and the classical convolution column.
pub fn read_expected_dir(dir: &Path) -> Result<(ExpectedImages, Vec<f64>)> {
    let path = dir.join(EXPECTED_CSV);
    let table = read_image_table(&path)?;
    let cov_path = dir.join(EXPECTED_COV_CSV);
    let covariance = if cov_path.exists() {
        Some(read_covariance(&cov_path)?)
    } else {
        None
    };
    let expected = ExpectedImages {
        mean: table.require("mean", &path)?.to_vec(),
        variance: table.require("variance", &path)?.to_vec(),
        z: table.require("z", &path)?.to_vec(),
        covariance,
    };
    Ok((expected, table.require("convolution", &path)?.to_vec()))
}
