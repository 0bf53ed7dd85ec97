//! Dotted-path override syntax applied to an arbitrary base document, then
//! the combined result through config deserialization. Input layout: first
//! line is the `key=value` override, the rest is the base JSON document.

#![no_main]

use libfuzzer_sys::fuzz_target;
use vessiot_kit::config::{apply_override, config_from_value};

fuzz_target!(|data: &[u8]| {
    let split = data.iter().position(|&b| b == b'\n').unwrap_or(data.len());
    let Ok(spec) = std::str::from_utf8(&data[..split]) else {
        return;
    };
    let rest = data.get(split + 1..).unwrap_or(&[]);
    let mut doc: serde_json::Value = std::str::from_utf8(rest)
        .ok()
        .and_then(|t| serde_json::from_str(t).ok())
        .unwrap_or_else(|| serde_json::json!({"equation": "eq.json"}));
    let _ = apply_override(&mut doc, spec);
    let _ = config_from_value(doc);
});
