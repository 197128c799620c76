//! Command-line front end for `zimage`.
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use zimage::commands::{self, PsfSource};
use zimage::io::parse_covariance_mode;
use zimage::model::CovarianceMode;
use zimage::run::default_threads;

#[derive(Parser)]
#[command(version, about = "Photon-count image stacks: simulate, predict, infer, report")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an image stack and write its statistical images
    Simulate {
        /// Scenario file
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<u64>,
        /// Worker threads
        #[arg(long, env = "ZIMAGE_THREADS")]
        threads: Option<usize>,
        /// Covariance rows: full, off or slices=48,72,...
        #[arg(long, value_parser = parse_covariance_mode)]
        cov: Option<CovarianceMode>,
        /// Maximum number of sub-stacks used for standard errors
        #[arg(long, default_value_t = commands::DEFAULT_BATCHES)]
        batches: usize,
        /// Also dump every image to this raw stack file
        #[arg(long)]
        dump_raw: Option<PathBuf>,
        #[arg(long, env = "ZIMAGE_OUT", default_value = "zimage-out")]
        out: PathBuf,
    },
    /// Write the expected mean, variance, Z and covariance images
    Forward {
        scenario: PathBuf,
        /// Use the sampler's exact discretised source moments
        #[arg(long)]
        effective: bool,
        #[arg(long, value_parser = parse_covariance_mode)]
        cov: Option<CovarianceMode>,
        #[arg(long, env = "ZIMAGE_OUT", default_value = "zimage-out")]
        out: PathBuf,
    },
    /// Fit background Z, noise Z and background Q at a covariance slice
    Infer {
        /// Directory written by `simulate`
        stats_dir: PathBuf,
        /// Centre pixel of a locally flat region
        #[arg(long)]
        slice: usize,
        /// `point:<k>` to estimate the PSF from a point source, or a file
        /// (CSV with a `p` column, or a scenario)
        #[arg(long)]
        psf_from: String,
        /// PSF half width when estimating from a point source
        #[arg(long, default_value_t = 12)]
        half_width: usize,
        /// Known mean of the detector noise
        #[arg(long, default_value_t = 0.0)]
        noise_mean: f64,
        /// Fit lags -m..=m (default: the PSF half width)
        #[arg(long)]
        max_lag: Option<usize>,
        #[arg(long, env = "ZIMAGE_OUT", default_value = "zimage-out")]
        out: PathBuf,
    },
    /// Compare a stack against expected images: SVG plots and deviation tables
    Report {
        stats_dir: PathBuf,
        /// Directory written by `forward`
        #[arg(long)]
        against: PathBuf,
        #[arg(long, env = "ZIMAGE_OUT", default_value = "zimage-out")]
        out: PathBuf,
    },
}

fn psf_source(arg: &str, half_width: usize) -> zimage::Result<PsfSource> {
    match arg.strip_prefix("point").map(|r| r.trim_start_matches([':', '=', ' '])) {
        Some(k) => k
            .parse()
            .map(|position| PsfSource::Point { position, half_width })
            .map_err(|_| zimage::Error::InvalidArgument(format!("bad point position in {arg:?}"))),
        None => Ok(PsfSource::File(arg.into())),
    }
}

fn run(cli: Cli) -> zimage::Result<()> {
    match cli.command {
        Command::Simulate {
            scenario,
            seed,
            samples,
            threads,
            cov,
            batches,
            dump_raw,
            out,
        } => {
            let s = commands::simulate(&commands::SimulateOptions {
                scenario,
                seed,
                samples,
                covariance: cov,
                threads: threads.unwrap_or_else(default_threads),
                batches,
                dump_raw,
                out: out.clone(),
            })?;
            println!("{} images of {} pixels -> {}", s.images.n, s.images.len(), out.display());
        }
        Command::Forward {
            scenario,
            effective,
            cov,
            out,
        } => {
            commands::forward(&commands::ForwardOptions {
                scenario,
                effective,
                covariance: cov,
                out: out.clone(),
            })?;
            println!("expected images -> {}", out.display());
        }
        Command::Infer {
            stats_dir,
            slice,
            psf_from,
            half_width,
            noise_mean,
            max_lag,
            out,
        } => {
            let r = commands::infer(&commands::InferOptions {
                stats_dir,
                slice,
                psf: psf_source(&psf_from, half_width)?,
                noise_mean,
                max_lag,
                out,
            })?;
            let f = &r.fit;
            println!(
                "slice {}: z_b = {:.4}  z_n = {:.4}  o_b = {:.4}  q_b = {:.4}  rms = {:.3e}",
                f.center, f.z_b, f.z_n, f.o_b, f.q_b, f.residual_rms
            );
            if let Some(p) = &r.point {
                println!("point source: z = {:.4}{}", p.z_object, if p.clipped { "  (PSF clipped)" } else { "" });
            }
        }
        Command::Report { stats_dir, against, out } => {
            let summaries = commands::report(&commands::ReportOptions { stats_dir, against, out })?;
            println!("{:<16} {:>6} {:>9} {:>9}", "quantity", "count", "in 5 SE", "max |r|");
            for s in summaries {
                println!(
                    "{:<16} {:>6} {:>8.1}% {:>9.2}",
                    s.name,
                    s.count,
                    100.0 * s.fraction_within(),
                    s.max_abs
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("zimage: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
