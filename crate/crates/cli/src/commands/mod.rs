//! The five subcommands. Each takes a loaded [`Ctx`] and returns the text
//! report printed on stdout; all file outputs go through the quarantine
//! writer.

mod check;
mod classify;
mod integrate;
mod invman;
mod portrait;

pub use check::run_check;
pub use classify::run_classify;
pub use integrate::run_integrate;
pub use invman::run_invman;
pub use portrait::run_portrait;

use crate::config::{self, RunConfig};
use crate::error::CliError;
use crate::files;
use serde::Serialize;
use std::path::{Path, PathBuf};
use vessiot_core::streamlines::{PlacementParams, Streamline};

/// Everything a command needs: the parsed configuration, the directory the
/// config file lives in (for resolving relative input paths), and the
/// output directory.
#[derive(Debug, Clone)]
pub struct Ctx {
    pub cfg: RunConfig,
    pub base: PathBuf,
    pub out: PathBuf,
}

impl Ctx {
    pub fn new(cfg: RunConfig, config_path: &Path) -> Ctx {
        let base = config_path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        let out = cfg
            .output
            .clone()
            .unwrap_or_else(|| PathBuf::from("out"));
        Ctx { cfg, base, out }
    }

    /// Resolve an input path relative to the configuration file.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn equation_path(&self) -> PathBuf {
        self.resolve(&self.cfg.equation)
    }

    pub fn out_path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

/// Load a config file, apply `--set` overrides then the `--out`/`--seed`
/// flags, and build the command context.
pub fn load_ctx(
    config_path: &Path,
    out_flag: Option<&Path>,
    seed_flag: Option<u64>,
    sets: &[String],
) -> Result<Ctx, CliError> {
    let text = files::read_text(config_path)?;
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: not valid JSON: {e}", config_path.display())))?;
    for spec in sets {
        config::apply_override(&mut value, spec)?;
    }
    let mut cfg = config::config_from_value(value)?;
    if let Some(out) = out_flag {
        cfg.output = Some(out.to_path_buf());
    }
    if let Some(seed) = seed_flag {
        cfg.seed = Some(seed);
    }
    Ok(Ctx::new(cfg, config_path))
}

/// Worker pool honoring `VESSIOT_KIT_THREADS` (0 or unset = automatic).
pub fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let n = match std::env::var("VESSIOT_KIT_THREADS") {
        Err(_) => 0,
        Ok(s) => s.trim().parse::<usize>().map_err(|_| {
            CliError::Config(format!(
                "VESSIOT_KIT_THREADS must be a non-negative integer, got {s:?}"
            ))
        })?,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::Config(format!("cannot build worker pool: {e}")))
}

/// The streamline-output document: the effective parameters and one entry
/// per line with its sample points and optional depth attributes.
#[derive(Serialize)]
pub(crate) struct PortraitFile<'a> {
    pub params: &'a PlacementParams,
    pub streamlines: Vec<LineOut<'a>>,
}

#[derive(Serialize)]
pub(crate) struct LineOut<'a> {
    pub points: &'a [Vec<f64>],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attributes: Option<&'a [[f64; 3]]>,
}

pub(crate) fn portrait_json(
    params: &PlacementParams,
    lines: &[Streamline],
) -> Result<String, CliError> {
    let doc = PortraitFile {
        params,
        streamlines: lines
            .iter()
            .map(|l| LineOut {
                points: &l.points,
                attributes: l.attributes.as_deref(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc)
        .map_err(|e| CliError::Numeric(format!("cannot serialize streamlines: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Padded data bounding box of a point cloud along two axes, for SVG
/// viewports that are not tied to a configured region.
pub(crate) fn padded_bounds_2d<'a>(
    points: impl Iterator<Item = &'a Vec<f64>>,
    axes: (usize, usize),
) -> ((f64, f64), (f64, f64)) {
    let mut lo = (f64::INFINITY, f64::INFINITY);
    let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo.0 = lo.0.min(p[axes.0]);
        lo.1 = lo.1.min(p[axes.1]);
        hi.0 = hi.0.max(p[axes.0]);
        hi.1 = hi.1.max(p[axes.1]);
    }
    if !(lo.0.is_finite() && hi.0.is_finite()) {
        return ((0.0, 0.0), (1.0, 1.0));
    }
    let pad = |a: f64, b: f64| {
        let span = b - a;
        if span > 0.0 {
            0.05 * span
        } else {
            0.5
        }
    };
    let (px, py) = (pad(lo.0, hi.0), pad(lo.1, hi.1));
    ((lo.0 - px, lo.1 - py), (hi.0 + px, hi.1 + py))
}

/// Check that a configured axis pair is valid for an ambient dimension.
pub(crate) fn check_axes(axes: [usize; 2], dim: usize) -> Result<(usize, usize), CliError> {
    if axes[0] >= dim || axes[1] >= dim || axes[0] == axes[1] {
        return Err(CliError::Config(format!(
            "svg_axes {axes:?} invalid for a {dim}-dimensional space"
        )));
    }
    Ok((axes[0], axes[1]))
}
