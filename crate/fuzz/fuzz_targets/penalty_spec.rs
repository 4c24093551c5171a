#![no_main]

use igdam::penalty::PenaltyFn;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(g) = s.parse::<PenaltyFn>() {
        let back: PenaltyFn = g.to_string().parse().expect("display output parses");
        assert_eq!(back, g);
        assert!(g.bound().is_finite());
    }
});
