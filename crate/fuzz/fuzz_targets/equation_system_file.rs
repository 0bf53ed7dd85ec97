//! Equation-system file decoder: arbitrary bytes through the JSON schema,
//! expression parsing, and system validation, ending in one residual call.

#![no_main]

use libfuzzer_sys::fuzz_target;
use vessiot_core::expr::load_equation_system;
use vessiot_core::JetPoint;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(sys) = load_equation_system(text) {
        let spec = sys.spec();
        let p = JetPoint::new(spec, vec![0.5; spec.ambient_dim()]);
        let _ = sys.residual_norm(&p);
    }
});
