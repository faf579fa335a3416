#![no_main]

use libfuzzer_sys::fuzz_target;

use heaplive::syntax::{load_program, pretty_print};

// The frontend must never panic, and accepted programs must survive a
// pretty-print round trip.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(program) = load_program(text) {
        let printed = pretty_print(&program);
        let reparsed = load_program(&printed).expect("pretty output must reparse");
        assert_eq!(pretty_print(&reparsed), printed);
    }
});
