//! Output artifacts: JSON records for single estimates, CSV for series
//! and profiles, and the run metadata embedded in both.
//!
//! CSV artifacts are byte-deterministic: identical configuration and seed
//! reproduce identical files, so they never carry wall-clock times. JSON
//! records document single runs and do include the wall time.

use crate::error::Result;
use crate::eth::DiagonalProfile;
use crate::haar::HaarEstimate;
use crate::otoc::OtocEstimate;
use crate::scaling::{PowerLawFit, ScalingSeries};
use crate::TOOL_VERSION;
use serde::Serialize;
use std::io::Write;
use std::path::Path;

/// Provenance block embedded in every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub tool_version: String,
    /// Hash of the canonical configuration text, for rerun comparison.
    pub config_hash: String,
    pub seed: u64,
    /// Wall-clock duration of the producing computation, seconds.
    /// Omitted from byte-deterministic (CSV) artifacts.
    pub wall_time_s: f64,
}

impl RunMetadata {
    pub fn new(config_hash: impl Into<String>, seed: u64, wall_time_s: f64) -> Self {
        RunMetadata {
            tool_version: TOOL_VERSION.to_string(),
            config_hash: config_hash.into(),
            seed,
            wall_time_s,
        }
    }
}

/// Stable hash of a canonical configuration string (CRC-64 in hex).
pub fn config_hash(canonical: &str) -> String {
    format!("{:016x}", crate::cache::payload_checksum(canonical.as_bytes()))
}

/// One OTOC estimate with full provenance.
#[derive(Debug, Clone, Serialize)]
pub struct OtocRecord {
    pub n: usize,
    pub g: f64,
    pub route: &'static str,
    /// Comma-joined labels of the four operator slots.
    pub operators: String,
    pub value_re: f64,
    pub value_im: f64,
    pub std_error: f64,
    pub samples: usize,
    pub converged: bool,
    #[serde(flatten)]
    pub meta: RunMetadata,
}

impl OtocRecord {
    pub fn new(
        n: usize,
        g: f64,
        operators: impl Into<String>,
        est: &OtocEstimate,
        meta: RunMetadata,
    ) -> Self {
        OtocRecord {
            n,
            g,
            route: est.route.as_str(),
            operators: operators.into(),
            value_re: est.value.re,
            value_im: est.value.im,
            std_error: est.std_error,
            samples: est.samples,
            converged: est.converged,
            meta,
        }
    }
}

/// A Haar Monte Carlo run next to its closed form.
#[derive(Debug, Clone, Serialize)]
pub struct HaarRecord {
    pub dim: usize,
    pub samples: usize,
    pub mc_re: f64,
    pub mc_im: f64,
    pub mc_std_error: f64,
    pub closed_form_re: f64,
    pub closed_form_im: f64,
    pub sigma_deviation: f64,
    #[serde(flatten)]
    pub meta: RunMetadata,
}

impl HaarRecord {
    pub fn new(est: &HaarEstimate, meta: RunMetadata) -> Self {
        HaarRecord {
            dim: est.dim,
            samples: est.samples,
            mc_re: est.mc_value.re,
            mc_im: est.mc_value.im,
            mc_std_error: est.mc_std_error,
            closed_form_re: est.closed_form.re,
            closed_form_im: est.closed_form.im,
            sigma_deviation: est.sigma_deviation(),
            meta,
        }
    }
}

/// Power-law fit with context, serialized next to its series.
#[derive(Debug, Clone, Serialize)]
pub struct FitRecord {
    pub observable: String,
    pub g: f64,
    pub amplitude: f64,
    pub exponent: f64,
    pub fit_range: (usize, usize),
    pub rms_log_residual: f64,
    #[serde(flatten)]
    pub meta: RunMetadata,
}

impl FitRecord {
    pub fn new(series: &ScalingSeries, fit: &PowerLawFit, meta: RunMetadata) -> Self {
        FitRecord {
            observable: series.observable().to_string(),
            g: series.coupling(),
            amplitude: fit.amplitude,
            exponent: fit.exponent,
            fit_range: fit.fit_range,
            rms_log_residual: fit.rms_log_residual,
            meta,
        }
    }
}

/// Pretty JSON plus trailing newline.
pub fn write_json<T: Serialize>(record: &T, w: &mut impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, record)
        .map_err(|e| crate::error::Error::Numerical(format!("JSON serialization failed: {e}")))?;
    writeln!(w)?;
    Ok(())
}

pub fn write_json_file<T: Serialize>(record: &T, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    write_json(record, &mut f)?;
    f.sync_all()?;
    Ok(())
}

/// Scaling series as CSV: one provenance comment, a column header, the
/// included points, then any excluded points as trailing comments.
/// Byte-deterministic for a fixed series/seed/hash.
pub fn write_series_csv(
    series: &ScalingSeries,
    seed: u64,
    config_hash: &str,
    w: &mut impl Write,
) -> Result<()> {
    writeln!(
        w,
        "# observable={} g={} seed={} version={} config={}",
        series.observable(),
        series.coupling(),
        seed,
        TOOL_VERSION,
        config_hash
    )?;
    writeln!(w, "n,value,error")?;
    for p in series.points() {
        writeln!(w, "{},{},{}", p.n, p.value, p.error)?;
    }
    for e in series.excluded() {
        writeln!(w, "# excluded n={}: {}", e.n, e.reason)?;
    }
    Ok(())
}

pub fn write_series_csv_file(
    series: &ScalingSeries,
    seed: u64,
    config_hash: &str,
    path: &Path,
) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    write_series_csv(series, seed, config_hash, &mut f)?;
    f.sync_all()?;
    Ok(())
}

/// Diagonal profile as CSV with the context comment line.
/// Byte-deterministic for a fixed profile/seed/hash.
pub fn write_profile_csv(
    profile: &DiagonalProfile,
    g: f64,
    seed: u64,
    config_hash: &str,
    w: &mut impl Write,
) -> Result<()> {
    writeln!(
        w,
        "# n={} g={} operator={} seed={} version={} config={}",
        profile.n_sites(),
        g,
        profile.operator_label(),
        seed,
        TOOL_VERSION,
        config_hash
    )?;
    writeln!(w, "energy_density,value_re,value_im")?;
    for &(e, v) in profile.points() {
        writeln!(w, "{},{},{}", e, v.re, v.im)?;
    }
    Ok(())
}
