#![no_main]

use igdam::config::{parse_json, RunConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if parse_json(s).is_ok() {
            if let Ok(cfg) = RunConfig::parse(s) {
                let _ = cfg.model();
            }
        }
    }
});
