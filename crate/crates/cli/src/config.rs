//! Run configuration: one JSON document per invocation, holding the
//! equation-file path, the output directory, the PRNG seed, and one section
//! per subcommand. Command-line flags override the file (`--out`, `--seed`,
//! and generic dotted-path `--set key=value` edits applied before
//! deserialization).

use crate::error::CliError;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::PathBuf;
use vessiot_core::invman::SpectrumSelector;
use vessiot_core::streamlines::{Camera, PlacementParams};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Equation (or field) file the subcommand operates on, resolved
    /// relative to the configuration file.
    pub equation: PathBuf,
    /// Output directory; default `out`.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Seed for every pseudo-random choice of the run.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub classify: Option<ClassifyConfig>,
    #[serde(default)]
    pub integrate: Option<IntegrateConfig>,
    #[serde(default)]
    pub invman: Option<InvmanConfig>,
    #[serde(default)]
    pub portrait: Option<PortraitConfig>,
}

fn default_true() -> bool {
    true
}

fn default_axes() -> [usize; 2] {
    [0, 1]
}

/// One swept coordinate axis of a classification grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Coordinate name: `t` or `u<alpha>_<order>`.
    pub var: String,
    pub min: f64,
    pub max: f64,
    /// Number of grid values on this axis (inclusive endpoints; 1 means
    /// `min` only, 0 makes the grid empty).
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyConfig {
    /// Values of the non-swept coordinates (defaults to all zeros).
    #[serde(default)]
    pub base: Vec<f64>,
    pub sweep: Vec<SweepAxis>,
    /// Project each grid node onto the zero set before classifying.
    #[serde(default = "default_true")]
    pub project: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

fn default_step() -> f64 {
    1e-3
}

fn default_max_steps() -> usize {
    10_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrateConfig {
    /// Starting point in ambient coordinates (projected onto the zero set
    /// automatically).
    pub start: Vec<f64>,
    #[serde(default = "default_step")]
    pub h: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default)]
    pub bounds: Option<BoundsConfig>,
    /// Points to stop near (e.g. known irregular singularities).
    #[serde(default)]
    pub stop_points: Vec<Vec<f64>>,
    #[serde(default)]
    pub stop_radius: f64,
    /// Also write an SVG projection of the trajectory.
    #[serde(default)]
    pub svg: bool,
    /// The two ambient coordinate indices the SVG projects onto.
    #[serde(default = "default_axes")]
    pub svg_axes: [usize; 2],
}

/// Which vector field a command analyses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldSource {
    /// The scalar admissible direction field of the equation on its full
    /// jet space (single scalar equation only).
    Vessiot,
    /// The projected field of a quasi-linear system on the reduced jet
    /// space.
    Projected,
    /// Field components read directly from the file.
    Components,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectorConfig {
    Stable,
    Unstable,
    Center,
    All,
}

impl SelectorConfig {
    pub fn to_selector(self) -> SpectrumSelector {
        match self {
            SelectorConfig::Stable => SpectrumSelector::Stable,
            SelectorConfig::Unstable => SpectrumSelector::Unstable,
            SelectorConfig::Center => SpectrumSelector::Center,
            SelectorConfig::All => SpectrumSelector::All,
        }
    }
}

fn default_field_source() -> FieldSource {
    FieldSource::Vessiot
}

fn default_selector() -> SelectorConfig {
    SelectorConfig::Center
}

fn default_degree() -> u32 {
    4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvmanConfig {
    #[serde(default = "default_field_source")]
    pub field: FieldSource,
    /// Newton starting guess for the stationary point.
    pub guess: Vec<f64>,
    #[serde(default = "default_selector")]
    pub selector: SelectorConfig,
    #[serde(default = "default_degree")]
    pub degree: u32,
    /// When present and the selected subspace is 2-dimensional: place a
    /// streamline portrait of the reduced dynamics in the chart (the
    /// placement region and seed live in chart coordinates) and embed it
    /// into ambient space.
    #[serde(default)]
    pub portrait: Option<PlacementParams>,
    /// Ambient coordinate axes for the embedded-portrait SVG.
    #[serde(default = "default_axes")]
    pub svg_axes: [usize; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PortraitMode {
    #[serde(rename = "2d")]
    Planar,
    #[serde(rename = "2.5d")]
    Surface,
    #[serde(rename = "3d")]
    Volume,
}

fn default_components() -> FieldSource {
    FieldSource::Components
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortraitConfig {
    pub mode: PortraitMode,
    /// Field source for the 2d/3d modes (2.5d always uses the equation
    /// itself).
    #[serde(default = "default_components")]
    pub field: FieldSource,
    pub placement: PlacementParams,
    /// Depth-attribute observer for the 3d mode.
    #[serde(default)]
    pub camera: Option<Camera>,
    #[serde(default = "default_axes")]
    pub svg_axes: [usize; 2],
    /// Extra singular points loaded from a JSON array-of-arrays file and
    /// appended to the placement's list.
    #[serde(default)]
    pub singular_points_file: Option<PathBuf>,
}

/// Parse a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| CliError::Config(format!("config is not valid JSON: {e}")))?;
    config_from_value(value)
}

/// Deserialize a (possibly override-edited) JSON value into a config.
pub fn config_from_value(value: Value) -> Result<RunConfig, CliError> {
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("invalid config: {e}")))
}

/// Apply one `key.path=value` override to a JSON document. The value is
/// parsed as JSON when possible and taken as a string otherwise; missing
/// intermediate objects are created.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<(), CliError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {spec:?} is not of the form key=value")))?;
    if path.is_empty() {
        return Err(CliError::Config("override key must not be empty".into()));
    }
    let leaf: Value =
        serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        let map = cur.as_object_mut().ok_or_else(|| {
            CliError::Config(format!("override path {path:?} crosses a non-object value"))
        })?;
        cur = map
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(serde_json::Map::new()));
    }
    let map = cur.as_object_mut().ok_or_else(|| {
        CliError::Config(format!("override path {path:?} crosses a non-object value"))
    })?;
    map.insert(parts[parts.len() - 1].to_string(), leaf);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = parse_config(r#"{"equation": "eq.json"}"#).unwrap();
        assert_eq!(cfg.equation, PathBuf::from("eq.json"));
        assert!(cfg.output.is_none());
        assert!(cfg.seed.is_none());
        assert!(cfg.portrait.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_config(r#"{"equation": "eq.json", "equatoin": "typo"}"#).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn overrides_edit_nested_paths_and_parse_json_scalars() {
        let mut doc: Value =
            serde_json::from_str(r#"{"equation": "eq.json", "portrait": {"svg_axes": [0, 1]}}"#)
                .unwrap();
        apply_override(&mut doc, "seed=9").unwrap();
        apply_override(&mut doc, "portrait.mode=2d").unwrap();
        apply_override(&mut doc, "portrait.placement.d_sep=0.25").unwrap();
        assert_eq!(doc["seed"], serde_json::json!(9));
        assert_eq!(doc["portrait"]["mode"], serde_json::json!("2d"));
        assert_eq!(doc["portrait"]["placement"]["d_sep"], serde_json::json!(0.25));
        // Not valid JSON → kept as a string.
        apply_override(&mut doc, "equation=path with spaces.json").unwrap();
        assert_eq!(doc["equation"], serde_json::json!("path with spaces.json"));
        // Malformed specs are configuration errors.
        assert!(apply_override(&mut doc, "no-equals-sign").is_err());
        assert!(apply_override(&mut doc, "portrait.mode.too.deep=1").is_err());
    }

    #[test]
    fn portrait_section_roundtrips_placement_parameters() {
        let cfg = parse_config(
            r#"{
                "equation": "field.json",
                "portrait": {
                    "mode": "2d",
                    "placement": {
                        "d_sep": 0.1, "d_test": 0.05, "h": 0.02,
                        "lo": [0, 0], "hi": [1, 1], "seed": [0.5, 0.5]
                    }
                }
            }"#,
        )
        .unwrap();
        let p = cfg.portrait.unwrap();
        assert_eq!(p.mode, PortraitMode::Planar);
        assert_eq!(p.field, FieldSource::Components);
        assert_eq!(p.placement.d_sep, 0.1);
        assert_eq!(p.placement.d_s, 0.0);
        assert_eq!(p.placement.rng_seed, 0);
        assert_eq!(p.svg_axes, [0, 1]);
    }
}
