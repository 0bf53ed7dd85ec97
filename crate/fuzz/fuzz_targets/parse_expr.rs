//! Expression parser: arbitrary text must either parse or fail cleanly, and
//! whatever parses must evaluate without panicking. The first two input
//! bytes pick the jet space shape so every arity gets exercised.

#![no_main]

use libfuzzer_sys::fuzz_target;
use std::collections::BTreeMap;
use vessiot_core::expr::parse_expr_text;
use vessiot_core::{JetPoint, JetSpec};

fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let m = u32::from(data[0] % 3) + 1;
    let q = u32::from(data[1] % 4);
    let Ok(text) = std::str::from_utf8(&data[2..]) else {
        return;
    };
    let spec = JetSpec::new(m, q);
    let params: BTreeMap<String, f64> = [
        ("a".to_string(), 2.0),
        ("b".to_string(), -1.0),
        ("c".to_string(), 0.5),
    ]
    .into();
    if let Ok(expr) = parse_expr_text(text, spec, &params) {
        let p = JetPoint::new(spec, vec![0.5; spec.ambient_dim()]);
        let _ = expr.eval(&p);
    }
});
