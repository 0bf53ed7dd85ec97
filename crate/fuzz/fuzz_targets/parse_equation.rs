//! Equation parser plus system assembly: text that parses must survive
//! system validation and residual evaluation without panicking.

#![no_main]

use libfuzzer_sys::fuzz_target;
use std::collections::BTreeMap;
use vessiot_core::expr::parse_equation;
use vessiot_core::{EquationSystem, JetPoint, JetSpec};

fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let m = u32::from(data[0] % 3) + 1;
    let q = u32::from(data[1] % 3) + 1;
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
    if let Ok(eq) = parse_equation(text, spec, &params) {
        if let Ok(sys) = EquationSystem::new(spec, vec![eq], vec![None]) {
            let p = JetPoint::new(spec, vec![0.5; spec.ambient_dim()]);
            let _ = sys.residual_norm(&p);
        }
    }
});
