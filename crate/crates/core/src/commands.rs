//! The four command-line operations, callable without a shell.
//!
//! Each takes a plain options struct and writes its files into an output
//! directory; the `zimage` binary only parses arguments into these.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::forward::{classical_convolution, effective_forward, ideal_forward};
use crate::inference::{fit_background, fit_point_and_background, FitReport, PointPsfEstimate};
use crate::io::svg::{Chart, Series};
use crate::io::tables::{fit_report_pairs, write_key_values};
use crate::io::{self, ImageTable};
use crate::model::{CovarianceMode, Psf};
use crate::run::{batch_count, simulate_batches, simulate_batches_into, summarize, StackSummary};

/// Default cap on the number of sub-stacks used for standard errors.
pub const DEFAULT_BATCHES: usize = 20;

#[derive(Debug, Clone)]
pub struct SimulateOptions {
    pub scenario: PathBuf,
    pub seed: Option<u64>,
    pub samples: Option<u64>,
    pub covariance: Option<CovarianceMode>,
    pub threads: usize,
    pub batches: usize,
    /// Also write every image to this raw dump (single-threaded).
    pub dump_raw: Option<PathBuf>,
    pub out: PathBuf,
}

/// Simulates a stack and writes its statistics directory.
pub fn simulate(opts: &SimulateOptions) -> Result<StackSummary> {
    let mut scenario = io::read_scenario(&opts.scenario)?;
    if let Some(seed) = opts.seed {
        scenario.master_seed = seed;
    }
    if let Some(n) = opts.samples {
        scenario.n_samples = n;
    }
    if let Some(mode) = &opts.covariance {
        scenario.covariance_mode = mode.clone();
    }
    scenario.validate()?;
    if scenario.n_samples < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            have: scenario.n_samples,
        });
    }
    let batches = batch_count(scenario.n_samples, opts.batches);
    let started = Instant::now();
    let parts = match &opts.dump_raw {
        Some(path) => {
            let mut writer = io::RawStackWriter::create(path, scenario.len())?;
            let parts = simulate_batches_into(&scenario, batches, &mut writer)?;
            writer.finish()?;
            parts
        }
        None => simulate_batches(&scenario, batches, opts.threads)?,
    };
    let summary = summarize(&parts)?;
    let elapsed = started.elapsed();

    io::write_stats_dir(&opts.out, &summary)?;
    let scenario_path = opts.out.join(io::SCENARIO);
    std::fs::write(&scenario_path, io::format_scenario(&scenario)).map_err(|e| Error::io(&scenario_path, e))?;
    let manifest = [
        ("tool", format!("zimage {}", env!("CARGO_PKG_VERSION"))),
        ("scenario", opts.scenario.display().to_string()),
        ("length", scenario.len().to_string()),
        ("samples", scenario.n_samples.to_string()),
        ("seed", scenario.master_seed.to_string()),
        ("covariance", io::scenario::format_covariance_mode(&scenario.covariance_mode)),
        ("batches", batches.to_string()),
        ("threads", opts.threads.to_string()),
        ("elapsed_seconds", format!("{:.3}", elapsed.as_secs_f64())),
    ];
    write_key_values(
        &opts.out.join(io::MANIFEST),
        &manifest.map(|(k, v)| (k.to_string(), v)),
    )?;
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct ForwardOptions {
    pub scenario: PathBuf,
    /// Use the sampler's discretised source moments instead of the ideal ones.
    pub effective: bool,
    pub covariance: Option<CovarianceMode>,
    pub out: PathBuf,
}

pub fn forward(opts: &ForwardOptions) -> Result<()> {
    let mut s = io::read_scenario(&opts.scenario)?;
    if let Some(mode) = &opts.covariance {
        s.covariance_mode = mode.clone();
    }
    let expected = if opts.effective {
        effective_forward(&s.object, &s.psf, &s.noise, &s.covariance_mode)?
    } else {
        ideal_forward(&s.object, &s.psf, &s.noise, &s.covariance_mode)?
    };
    let conv = classical_convolution(&s.object, &s.psf, s.noise.mean())?;
    io::write_expected_dir(&opts.out, &expected, &conv)?;
    write_key_values(
        &opts.out.join(io::MANIFEST),
        &[
            ("scenario".into(), opts.scenario.display().to_string()),
            ("model".into(), if opts.effective { "effective" } else { "ideal" }.into()),
            ("length".into(), s.len().to_string()),
            (
                "covariance".into(),
                io::scenario::format_covariance_mode(&s.covariance_mode),
            ),
        ],
    )
}

/// Where the PSF for inference comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum PsfSource {
    /// Estimate it from the covariance row through an isolated point source.
    Point { position: usize, half_width: usize },
    /// Read it from a CSV with a `p` column or from a scenario file.
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct InferOptions {
    pub stats_dir: PathBuf,
    pub slice: usize,
    pub psf: PsfSource,
    pub noise_mean: f64,
    /// Fit window; defaults to the PSF half width.
    pub max_lag: Option<usize>,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferOutcome {
    pub fit: FitReport,
    pub point: Option<PointPsfEstimate>,
    pub psf: Psf,
}

fn read_psf(path: &Path) -> Result<Psf> {
    if path.extension().is_some_and(|e| e == "csv") {
        let table = io::read_image_table(path)?;
        Psf::from_weights(table.require("p", path)?.to_vec())
    } else {
        Ok(io::read_scenario(path)?.psf)
    }
}

fn write_psf(path: &Path, psf: &Psf) -> Result<()> {
    let offsets: Vec<f64> = psf.offsets().map(|j| j as f64).collect();
    io::write_image_table(
        path,
        &ImageTable::new().with("offset", &offsets).with("p", psf.weights()),
    )
}

/// Fits background Z, noise Z and background Q at one slice.
pub fn infer(opts: &InferOptions) -> Result<InferOutcome> {
    let stats = io::read_stats_dir(&opts.stats_dir)?;
    let cov = stats.images.cov_corrected.as_ref().ok_or_else(|| {
        Error::invalid(format!(
            "{} has no covariance rows; simulate with --cov",
            opts.stats_dir.display()
        ))
    })?;
    let mean = &stats.images.mean;
    let outcome = match &opts.psf {
        PsfSource::Point { position, half_width } => {
            let max_lag = opts.max_lag.unwrap_or(*half_width);
            let (point, fit) =
                fit_point_and_background(cov, mean, *position, *half_width, opts.slice, opts.noise_mean, max_lag)?;
            InferOutcome {
                fit,
                psf: point.psf.clone(),
                point: Some(point),
            }
        }
        PsfSource::File(path) => {
            let psf = read_psf(path)?;
            let max_lag = opts.max_lag.unwrap_or(psf.half_width());
            let fit = fit_background(cov, mean, opts.slice, &psf, opts.noise_mean, max_lag)?;
            InferOutcome { fit, point: None, psf }
        }
    };
    io::ensure_dir(&opts.out)?;
    let mut pairs = fit_report_pairs(&outcome.fit);
    if let Some(p) = &outcome.point {
        pairs.push(("z_point".into(), p.z_object.to_string()));
        pairs.push(("psf_clipped".into(), p.clipped.to_string()));
    }
    write_key_values(&opts.out.join("fit.txt"), &pairs)?;
    write_psf(&opts.out.join("psf.csv"), &outcome.psf)?;
    Ok(outcome)
}

#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub stats_dir: PathBuf,
    pub against: PathBuf,
    pub out: PathBuf,
}

/// Agreement of one estimated image or slice with its expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationSummary {
    pub name: String,
    /// Entries with a usable standard error.
    pub count: usize,
    pub within_5se: usize,
    pub max_abs: f64,
    pub rms: f64,
}

impl DeviationSummary {
    fn from_residuals(name: &str, r: &[f64]) -> Self {
        let finite: Vec<f64> = r.iter().copied().filter(|v| v.is_finite()).collect();
        let count = finite.len();
        Self {
            name: name.to_string(),
            count,
            within_5se: finite.iter().filter(|v| v.abs() < 5.0).count(),
            max_abs: finite.iter().fold(0.0, |m, v| f64::max(m, v.abs())),
            rms: if count == 0 {
                f64::NAN
            } else {
                (finite.iter().map(|v| v * v).sum::<f64>() / count as f64).sqrt()
            },
        }
    }

    pub fn fraction_within(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        self.within_5se as f64 / self.count as f64
    }
}

/// `(estimate - expected) / se`, NaN where the standard error is missing or zero.
pub fn standardized_residuals(estimate: &[f64], expected: &[f64], se: Option<&[f64]>) -> Vec<f64> {
    estimate
        .iter()
        .zip(expected)
        .enumerate()
        .map(|(k, (e, x))| match se.map(|s| s[k]) {
            Some(s) if s > 0.0 => (e - x) / s,
            _ => f64::NAN,
        })
        .collect()
}

const SLICE_LABELS: [&str; 4] = ["A", "B", "C", "D"];

/// Plots and a deviation table comparing a stack against expected images.
pub fn report(opts: &ReportOptions) -> Result<Vec<DeviationSummary>> {
    let stats = io::read_stats_dir(&opts.stats_dir)?;
    let (expected, conv) = io::read_expected_dir(&opts.against)?;
    let im = &stats.images;
    if im.len() != expected.mean.len() {
        return Err(Error::ShapeMismatch(format!(
            "stack has {} pixels but the expected images have {}",
            im.len(),
            expected.mean.len()
        )));
    }
    io::ensure_dir(&opts.out)?;

    let mean_se: Option<Vec<f64>> = stats.mean_se.clone().or_else(|| {
        (im.n > 0).then(|| im.variance.iter().map(|v| (v / im.n as f64).sqrt()).collect())
    });
    let dev_mean = standardized_residuals(&im.mean, &expected.mean, mean_se.as_deref());
    let dev_var = standardized_residuals(&im.variance, &expected.variance, stats.variance_se.as_deref());
    let dev_z = standardized_residuals(&im.z, &expected.z, stats.z_se.as_deref());
    io::write_image_table(
        &opts.out.join("deviations.csv"),
        &ImageTable::new()
            .with("mean", &dev_mean)
            .with("variance", &dev_var)
            .with("z", &dev_z),
    )?;
    let mut summaries = vec![
        DeviationSummary::from_residuals("mean", &dev_mean),
        DeviationSummary::from_residuals("variance", &dev_var),
        DeviationSummary::from_residuals("z", &dev_z),
    ];

    Chart::new("Mean image", "pixel", "counts")
        .with(Series::indexed("simulated mean", &im.mean))
        .with(Series::indexed("expected mean", &expected.mean).dashed())
        .with(Series::indexed("convolution", &conv).dashed())
        .write(&opts.out.join("mean.svg"))?;
    Chart::new("Variance and Z images", "pixel", "counts^2 - counts")
        .with(Series::indexed("simulated variance", &im.variance))
        .with(Series::indexed("expected variance", &expected.variance).dashed())
        .with(Series::indexed("simulated Z", &im.z))
        .with(Series::indexed("expected Z", &expected.z).dashed())
        .write(&opts.out.join("variance_z.svg"))?;

    if let (Some(cov), Some(exp_cov)) = (&im.cov_corrected, &expected.covariance) {
        for (i, &k) in cov.rows().iter().enumerate() {
            let (Some(row), Some(exp_row)) = (cov.row(k), exp_cov.row(k)) else {
                continue;
            };
            let label = SLICE_LABELS.get(i).map_or_else(|| format!("row{k}"), |l| l.to_string());
            let se = stats.cov_se.as_ref().and_then(|s| s.row(k));
            let mut dev = standardized_residuals(row, exp_row, se);
            // Lag 0 is the Z image, already summarised above.
            dev[k] = f64::NAN;
            summaries.push(DeviationSummary::from_residuals(&format!("slice {label} ({k})"), &dev));
            Chart::new(&format!("Covariance slice {label} through pixel {k}"), "pixel", "covariance")
                .with(Series::indexed("simulated", row))
                .with(Series::indexed("expected", exp_row).dashed())
                .write(&opts.out.join(format!("slice_{label}.svg")))?;
        }
    }

    let mut text = String::from("quantity,count,within_5se,fraction,max_abs,rms\n");
    for s in &summaries {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.name,
            s.count,
            s.within_5se,
            s.fraction_within(),
            s.max_abs,
            s.rms
        ));
    }
    let path = opts.out.join("summary.csv");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(summaries)
}
