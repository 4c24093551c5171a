#![no_main]

use igdam::config::{parse_text, RunConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if parse_text(s).is_ok() {
            // whatever parses must either build a model or say why not
            if let Ok(cfg) = RunConfig::parse(s) {
                let _ = cfg.model();
            }
        }
    }
});
