#![no_main]

use libfuzzer_sys::fuzz_target;

use heaplive::pattern::{reduce_one_step, reduce_to_canonical, AccessPattern, PatternSymbol};

// Reduction must never panic, always produce a canonical result, and agree
// with single-step rewriting (confluence).
fuzz_target!(|data: &[u8]| {
    let syms: Vec<PatternSymbol> = data
        .iter()
        .take(64)
        .map(|b| match b % 4 {
            0 => PatternSymbol::Zero,
            1 => PatternSymbol::One,
            2 => PatternSymbol::BarZero,
            _ => PatternSymbol::BarOne,
        })
        .collect();
    let pattern = AccessPattern::from_symbols(syms);
    let reduced = reduce_to_canonical(&pattern);
    assert!(reduced.is_bottom() || reduced.is_canonical());

    // reducing after any applicable first step reaches the same normal form
    if let Some(len) = pattern.symbols().map(|s| s.len()) {
        for i in 0..len {
            if let Some(stepped) = reduce_one_step(&pattern, i) {
                assert_eq!(reduce_to_canonical(&stepped), reduced);
            }
        }
    }
});
