//! File plumbing: input loaders and the quarantine-suffix output writer.

use crate::error::CliError;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use vessiot_core::expr::{self, EquationSystem};
use vessiot_core::field::SymbolicField;
use vessiot_core::jet::JetSpec;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

/// Load an equation-system file (`{m, q, equations, parameters?, labels?}`).
pub fn load_equation(path: &Path) -> Result<EquationSystem, CliError> {
    let text = read_text(path)?;
    expr::load_equation_system(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldFileRaw {
    m: u32,
    q: u32,
    components: Vec<String>,
    #[serde(default)]
    parameters: BTreeMap<String, f64>,
}

/// Parse a vector-field file: `{m, q, components, parameters?}` with one
/// component expression per ambient coordinate of the `(m, q)` jet space
/// (`q = 0` gives a plain field on `R^{m+1}`).
pub fn parse_field_file(text: &str) -> Result<SymbolicField, CliError> {
    let raw: FieldFileRaw = serde_json::from_str(text)
        .map_err(|e| CliError::Config(format!("field file is not valid JSON: {e}")))?;
    if raw.m < 1 {
        return Err(CliError::Config("field file: m must be at least 1".into()));
    }
    if raw.m > expr::MAX_FILE_M || raw.q > expr::MAX_FILE_Q {
        return Err(CliError::Config(format!(
            "field file: signature m={}, q={} is outside the supported file range (m ≤ {}, q ≤ {})",
            raw.m,
            raw.q,
            expr::MAX_FILE_M,
            expr::MAX_FILE_Q
        )));
    }
    let spec = JetSpec::new(raw.m, raw.q);
    let dim = spec.ambient_dim();
    if raw.components.len() != dim {
        return Err(CliError::Config(format!(
            "field file: expected {dim} components for m={}, q={}, got {}",
            raw.m,
            raw.q,
            raw.components.len()
        )));
    }
    let components = raw
        .components
        .iter()
        .map(|c| expr::parse_expr_text(c, spec, &raw.parameters))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Config(format!("field file: {e}")))?;
    Ok(SymbolicField::new(spec, components))
}

pub fn load_field(path: &Path) -> Result<SymbolicField, CliError> {
    let text = read_text(path)?;
    parse_field_file(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Load a JSON array of coordinate arrays (the shared point-list format).
pub fn load_point_list(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let text = read_text(path)?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: not a JSON array of points: {e}", path.display())))
}

/// Write an output file atomically: the bytes go to `<path>.partial` first
/// and are renamed into place only when complete, so a crashed or failed
/// run never leaves a truncated file at the final path.
pub fn write_output(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| {
                CliError::Config(format!("cannot create {}: {e}", dir.display()))
            })?;
        }
    }
    let mut partial = path.as_os_str().to_owned();
    partial.push(".partial");
    let partial = std::path::PathBuf::from(partial);
    fs::write(&partial, bytes)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", partial.display())))?;
    fs::rename(&partial, path)
        .map_err(|e| CliError::Config(format!("cannot finalize {}: {e}", path.display())))?;
    Ok(())
}

/// Names of the flat ambient coordinates, in order.
pub fn coord_names(spec: JetSpec) -> Vec<String> {
    spec.vars().iter().map(|v| v.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_file_validates_component_count() {
        let ok = parse_field_file(r#"{"m": 1, "q": 0, "components": ["1", "0"]}"#).unwrap();
        assert_eq!(ok.spec().ambient_dim(), 2);
        let err =
            parse_field_file(r#"{"m": 1, "q": 0, "components": ["1"]}"#).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = parse_field_file(r#"{"m": 1, "q": 0, "components": ["1", "???"]}"#)
            .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn field_file_rejects_oversized_signature() {
        let err =
            parse_field_file(r#"{"m": 1, "q": 1000000000, "components": []}"#).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn field_file_substitutes_parameters() {
        let f = parse_field_file(
            r#"{"m": 1, "q": 0, "components": ["a*t", "neg(a)"], "parameters": {"a": 2.5}}"#,
        )
        .unwrap();
        let v = f.eval_at(&f.point(&[2.0, 0.0])).unwrap();
        assert_eq!(v, vec![5.0, -2.5]);
    }

    #[test]
    fn quarantined_write_leaves_no_partial_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested").join("out.json");
        write_output(&path, b"{}").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"{}");
        let partial = dir.path().join("nested").join("out.json.partial");
        assert!(!partial.exists());
    }

    #[test]
    fn coordinate_names_follow_the_flat_layout() {
        let names = coord_names(JetSpec::new(2, 1));
        assert_eq!(names, ["t", "u1_0", "u1_1", "u2_0", "u2_1"]);
    }
}
