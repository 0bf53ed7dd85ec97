//! Vector-field file decoder: JSON schema, per-component expression
//! parsing, component-count validation, and one evaluation.

#![no_main]

use libfuzzer_sys::fuzz_target;
use vessiot_kit::files::parse_field_file;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(field) = parse_field_file(text) {
        let dim = field.spec().ambient_dim();
        let _ = field.eval_at(&field.point(&vec![0.5; dim]));
    }
});
