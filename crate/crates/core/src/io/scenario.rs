//! Line-oriented scenario files.
//!
//! ```text
//! # reference scene
//! [object]
//! length = 128
//! background 10 0.2
//! point 64 500 0.2
//! extended 81 113 30 5 0.2
//!
//! [psf]
//! sigma = 3
//! half_width = 12        # optional, defaults to ceil(4 sigma)
//!
//! [noise]
//! mean = 5
//! q = 0.1
//!
//! [run]
//! samples = 1000
//! seed = 42
//! covariance = slices=48,72,64,96     # or full, off
//! ```
//!
//! Sources in `[object]`:
//!
//! - `background flux q` fills every position not claimed by another source;
//! - `point pos flux q`;
//! - `extended a b mean amplitude q`: `mean + amplitude sin(2 pi (k - a) / (b - a))`
//!   on `[a, b]`.
//!
//! Later sources overwrite earlier ones where they overlap. Instead of
//! sources, `mean_flux = v0, v1, ...` and `q = ...` may list every position;
//! `[noise]` accepts the same scalar-or-list form and `[psf]` accepts
//! `weights = ...`. Positions are 0-based. `#` starts a comment.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{
    default_half_width, extended_profile, make_gaussian_psf, reference, CovarianceMode, NoiseModel, ObjectModel, Psf,
    Scenario,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Object,
    Psf,
    Noise,
    Run,
}

#[derive(Debug, Clone)]
enum Source {
    Background { flux: f64, q: f64 },
    Point { pos: usize, flux: f64, q: f64 },
    Extended { a: usize, b: usize, mean: f64, amplitude: f64, q: f64 },
}

struct Parser<'a> {
    origin: &'a str,
    line: usize,
}

impl Parser<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Config {
            path: self.origin.to_string(),
            line: self.line,
            message: message.into(),
        }
    }

    fn num<T: std::str::FromStr>(&self, what: &str, s: &str) -> Result<T> {
        s.trim()
            .parse()
            .map_err(|_| self.err(format!("{what}: cannot parse {:?}", s.trim())))
    }

    fn list(&self, what: &str, s: &str) -> Result<Vec<f64>> {
        s.split(',').map(|v| self.num(what, v)).collect()
    }
}

/// Parses `full`, `off` or `slices=48,72,...` (also `slices 48 72 ...`).
pub fn parse_covariance_mode(s: &str) -> std::result::Result<CovarianceMode, String> {
    let s = s.trim();
    match s {
        "full" => return Ok(CovarianceMode::Full),
        "off" => return Ok(CovarianceMode::Off),
        _ => {}
    }
    let rest = s
        .strip_prefix("slices")
        .ok_or_else(|| format!("unknown covariance mode {s:?}; expected full, off or slices=<list>"))?;
    let rest = rest.trim_start().trim_start_matches(['=', ':']);
    let rows = rest
        .split([',', ' '])
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<usize>().map_err(|_| format!("bad slice row {t:?}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if rows.is_empty() {
        return Err("slices needs at least one row".into());
    }
    Ok(CovarianceMode::Slices(rows))
}

pub fn format_covariance_mode(mode: &CovarianceMode) -> String {
    match mode {
        CovarianceMode::Full => "full".into(),
        CovarianceMode::Off => "off".into(),
        CovarianceMode::Slices(rows) => {
            let list: Vec<String> = rows.iter().map(|r| r.to_string()).collect();
            format!("slices={}", list.join(","))
        }
    }
}

/// Parses scenario text; `origin` labels error messages.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario> {
    let mut p = Parser { origin, line: 0 };
    let mut section = Section::None;

    let mut length: Option<usize> = None;
    let mut sources: Vec<(usize, Source)> = Vec::new();
    let mut flux_list: Option<Vec<f64>> = None;
    let mut q_list: Option<Vec<f64>> = None;

    let mut sigma: Option<f64> = None;
    let mut half_width: Option<usize> = None;
    let mut weights: Option<Vec<f64>> = None;

    let mut noise_mean: Option<Vec<f64>> = None;
    let mut noise_q: Option<Vec<f64>> = None;

    let mut samples = reference::DEFAULT_SAMPLES;
    let mut seed = reference::DEFAULT_SEED;
    let mut covariance = CovarianceMode::Off;

    for (i, raw) in text.lines().enumerate() {
        p.line = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = match name.trim() {
                "object" => Section::Object,
                "psf" => Section::Psf,
                "noise" => Section::Noise,
                "run" => Section::Run,
                other => return Err(p.err(format!("unknown section [{other}]"))),
            };
            continue;
        }
        if let Some((key, value)) = line.split_once('=') {
            let (key, value) = (key.trim(), value.trim());
            match (section, key) {
                (Section::Object, "length") => length = Some(p.num(key, value)?),
                (Section::Object, "mean_flux") => flux_list = Some(p.list(key, value)?),
                (Section::Object, "q") => q_list = Some(p.list(key, value)?),
                (Section::Psf, "sigma") => sigma = Some(p.num(key, value)?),
                (Section::Psf, "half_width") => half_width = Some(p.num(key, value)?),
                (Section::Psf, "weights") => weights = Some(p.list(key, value)?),
                (Section::Noise, "mean") => noise_mean = Some(p.list(key, value)?),
                (Section::Noise, "q") => noise_q = Some(p.list(key, value)?),
                (Section::Run, "samples") => samples = p.num(key, value)?,
                (Section::Run, "seed") => seed = p.num(key, value)?,
                (Section::Run, "covariance") => {
                    covariance = parse_covariance_mode(value).map_err(|e| p.err(e))?;
                }
                (Section::None, _) => return Err(p.err(format!("`{key}` outside any section"))),
                _ => return Err(p.err(format!("unknown key `{key}` in this section"))),
            }
            continue;
        }
        if section != Section::Object {
            return Err(p.err(format!("expected `key = value`, got {line:?}")));
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        let source = match words.as_slice() {
            ["background", flux, q] => Source::Background {
                flux: p.num("flux", flux)?,
                q: p.num("q", q)?,
            },
            ["point", pos, flux, q] => Source::Point {
                pos: p.num("position", pos)?,
                flux: p.num("flux", flux)?,
                q: p.num("q", q)?,
            },
            ["extended", a, b, mean, amp, q] => {
                let (a, b): (usize, usize) = (p.num("start", a)?, p.num("end", b)?);
                if b < a {
                    return Err(p.err(format!("extended source end {b} before start {a}")));
                }
                Source::Extended {
                    a,
                    b,
                    mean: p.num("mean", mean)?,
                    amplitude: p.num("amplitude", amp)?,
                    q: p.num("q", q)?,
                }
            }
            _ => return Err(p.err(format!("unrecognised source line {line:?}"))),
        };
        sources.push((p.line, source));
    }
    p.line = 0;

    let len = match (length, &flux_list) {
        (Some(l), _) => l,
        (None, Some(f)) => f.len(),
        (None, None) => return Err(p.err("[object] needs `length` or `mean_flux`")),
    };
    if len == 0 {
        return Err(p.err("object length must be positive"));
    }

    let (mut flux, mut q) = match (flux_list, q_list) {
        (Some(f), Some(q)) => (f, q),
        (None, None) => (vec![0.0; len], vec![0.0; len]),
        _ => return Err(p.err("`mean_flux` and `q` must be given together")),
    };
    if flux.len() != len || q.len() != len {
        return Err(p.err(format!("per-position lists must have {len} entries")));
    }
    for (line, s) in &sources {
        p.line = *line;
        match *s {
            Source::Background { flux: f, q: qq } => {
                // Background only fills positions no other source claims.
                let claimed = claimed_positions(&sources, len);
                for k in (0..len).filter(|k| !claimed[*k]) {
                    flux[k] = f;
                    q[k] = qq;
                }
            }
            Source::Point { pos, flux: f, q: qq } => {
                if pos >= len {
                    return Err(p.err(format!("point source at {pos} outside [0, {len})")));
                }
                flux[pos] = f;
                q[pos] = qq;
            }
            Source::Extended { a, b, mean, amplitude, q: qq } => {
                if b >= len {
                    return Err(p.err(format!("extended source [{a}, {b}] outside [0, {len})")));
                }
                for k in a..=b {
                    flux[k] = extended_profile(k, a, b, mean, amplitude);
                    q[k] = qq;
                }
            }
        }
    }
    p.line = 0;
    let object = ObjectModel::new(flux, q).map_err(|e| p.err(e.to_string()))?;

    let psf = match (weights, sigma) {
        (Some(w), None) => Psf::from_weights(w),
        (None, Some(s)) => make_gaussian_psf(s, half_width.unwrap_or_else(|| default_half_width(s))),
        (Some(_), Some(_)) => return Err(p.err("[psf] takes either `sigma` or `weights`, not both")),
        (None, None) => Ok(Psf::delta()),
    }
    .map_err(|e| p.err(e.to_string()))?;

    let expand = |v: Option<Vec<f64>>, what: &str| -> Result<Vec<f64>> {
        match v {
            None => Ok(vec![0.0; len]),
            Some(v) if v.len() == 1 => Ok(vec![v[0]; len]),
            Some(v) if v.len() == len => Ok(v),
            Some(v) => Err(p.err(format!("noise {what} has {} entries, expected 1 or {len}", v.len()))),
        }
    };
    let noise = NoiseModel::new(expand(noise_mean, "mean")?, expand(noise_q, "q")?)
        .map_err(|e| p.err(e.to_string()))?;

    Scenario::new(object, psf, noise, samples, seed, covariance).map_err(|e| p.err(e.to_string()))
}

fn claimed_positions(sources: &[(usize, Source)], len: usize) -> Vec<bool> {
    let mut claimed = vec![false; len];
    for (_, s) in sources {
        match *s {
            Source::Point { pos, .. } if pos < len => claimed[pos] = true,
            Source::Extended { a, b, .. } => {
                for c in claimed.iter_mut().take(b.min(len - 1) + 1).skip(a) {
                    *c = true;
                }
            }
            _ => {}
        }
    }
    claimed
}

pub fn read_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text, &path.display().to_string())
}

fn join(values: &[f64]) -> String {
    let v: Vec<String> = values.iter().map(|x| x.to_string()).collect();
    v.join(", ")
}

/// Writes a scenario with every position listed explicitly; parsing the
/// result gives back an identical scenario.
pub fn format_scenario(s: &Scenario) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "[object]");
    let _ = writeln!(out, "length = {}", s.len());
    let _ = writeln!(out, "mean_flux = {}", join(s.object.mean_flux()));
    let _ = writeln!(out, "q = {}", join(s.object.q()));
    let _ = writeln!(out, "\n[psf]");
    let _ = writeln!(out, "weights = {}", join(s.psf.weights()));
    let _ = writeln!(out, "\n[noise]");
    let _ = writeln!(out, "mean = {}", join(s.noise.mean()));
    let _ = writeln!(out, "q = {}", join(s.noise.q()));
    let _ = writeln!(out, "\n[run]");
    let _ = writeln!(out, "samples = {}", s.n_samples);
    let _ = writeln!(out, "seed = {}", s.master_seed);
    let _ = writeln!(out, "covariance = {}", format_covariance_mode(&s.covariance_mode));
    out
}

/// The reference scene as a source-level scenario file.
pub fn reference_scenario_text(q_foreground: f64) -> String {
    use crate::model::reference::*;
    let slices: Vec<String> = SLICES.iter().map(|s| s.to_string()).collect();
    format!(
        "# 128-pixel reference scene\n\
         [object]\n\
         length = {LENGTH}\n\
         background {BACKGROUND_FLUX} {BACKGROUND_Q}\n\
         point {} {POINT_FLUX} {q_foreground}\n\
         point {} {WIDE_PAIR_FLUX} {q_foreground}\n\
         point {} {WIDE_PAIR_FLUX} {q_foreground}\n\
         point {} {CLOSE_PAIR_FLUX} {q_foreground}\n\
         point {} {CLOSE_PAIR_FLUX} {q_foreground}\n\
         extended {} {} {EXTENDED_MEAN} {EXTENDED_AMPLITUDE} {q_foreground}\n\
         \n\
         [psf]\n\
         sigma = {PSF_SIGMA}\n\
         \n\
         [noise]\n\
         mean = {NOISE_MEAN}\n\
         q = {NOISE_Q}\n\
         \n\
         [run]\n\
         samples = {DEFAULT_SAMPLES}\n\
         seed = {DEFAULT_SEED}\n\
         covariance = slices={}\n",
        POINT,
        WIDE_PAIR[0],
        WIDE_PAIR[1],
        CLOSE_PAIR[0],
        CLOSE_PAIR[1],
        EXTENDED.0,
        EXTENDED.1,
        slices.join(","),
    )
}
