//! Photon-counting image stacks and their statistical images.
//!
//! An imaging system is modelled as uncorrelated sources with a mean flux and
//! a Mandel Q parameter, a shift-invariant PSF that scatters each photon
//! independently, and independent per-pixel detector noise. A stack of
//! exposures then yields four images:
//!
//! - the **mean image**, the familiar blurred object plus noise floor;
//! - the **variance image**;
//! - the **Z image**, variance minus mean, which responds only to sources and
//!   noise whose statistics depart from Poisson and is blurred by `p^2`
//!   instead of `p`;
//! - the **covariance image**, which is free of detector noise off the
//!   diagonal and carries the PSF shape and the object's Z.
//!
//! The crate is organised along that pipeline:
//!
//! - [`model`]: object, PSF, noise and scenario types, Z / Q scalars;
//! - [`sampler`]: two-stage Monte Carlo image generation;
//! - [`stats`]: exact, mergeable moment accumulation and finalisation;
//! - [`forward`]: analytic expected images, including the exact moments of
//!   the sampler's discretised count law;
//! - [`inference`]: PSF, background Z, noise Z and background Q recovery from
//!   covariance rows;
//! - [`run`]: multi-threaded stack simulation;
//! - [`io`]: scenario files, CSV tables, SVG plots and raw stack dumps.
//!
//! ```
//! use zimage::{forward, model};
//!
//! let scene = model::paper_scenario();
//! let z = forward::expected_z_image(&scene.object, &scene.psf, &scene.noise).unwrap();
//! assert_eq!(z.len(), 128);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod error;
pub mod forward;
pub mod inference;
pub mod io;
pub mod model;
pub mod rng;
pub mod run;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};
pub use forward::{effective_forward, effective_source_moments, ideal_forward, ExpectedImages};
pub use model::{
    make_gaussian_psf, mandel_q, paper_scenario, paper_scenario_with, z_quantity, CovarianceMode, NoiseModel,
    ObjectModel, Psf, Scenario,
};
pub use sampler::{ImageSampler, ImageSink, SampleImage};
pub use stats::{CovarianceRows, StatAccumulator, StatisticalImages};
