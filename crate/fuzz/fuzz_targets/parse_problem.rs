#![no_main]

use dhstab::bench::{emit_problem, parse_problem_str};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(pf) = parse_problem_str(text) {
        let again = parse_problem_str(&emit_problem(&pf)).expect("emitted problem parses");
        assert_eq!(again, pf);
    }
});
