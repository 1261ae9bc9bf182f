#![no_main]

use dhstab::conic::{parse_dump, write_dump};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(prog) = parse_dump(text) {
        let again = parse_dump(&write_dump(&prog)).expect("written dump parses");
        assert_eq!(write_dump(&again), write_dump(&prog));
    }
});
