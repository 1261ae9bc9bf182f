#![no_main]

use dhstab::bench::{emit_matrix, parse_matrix};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(k) = parse_matrix(text) {
        assert_eq!(parse_matrix(&emit_matrix(&k)).expect("emitted matrix parses"), k);
    }
});
