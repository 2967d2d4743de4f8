#![no_main]

use libfuzzer_sys::fuzz_target;
use svlab::Coefficient;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(c) = Coefficient::parse(text) else {
        return;
    };
    // Printing and reparsing gives the same function.
    let printed = c.to_string();
    let back = Coefficient::parse(&printed).expect("printed coefficient parses");
    for x in [0.0, 0.25, 0.5, 1.0, 3.0] {
        let (a, b) = (c.eval(x), back.eval(x));
        assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()), "{text:?} -> {printed:?} at {x}: {a} vs {b}");
    }
});
