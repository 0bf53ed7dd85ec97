//! Run-configuration decoder: arbitrary bytes through the strict config
//! schema must parse or fail cleanly.

#![no_main]

use libfuzzer_sys::fuzz_target;
use vessiot_kit::config::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = parse_config(text);
});
