#![no_main]

use libfuzzer_sys::fuzz_target;
use permkern::monotone::MonotoneFn;

// Everything the parser accepts is strictly monotone in a known direction,
// and the cancellation-free difference always points against that direction.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(f) = MonotoneFn::parse(text) else {
        return;
    };
    let d = f.direction();
    assert!(d == 1.0 || d == -1.0);
    let sl = f
        .diff_log(1.0, 2.5)
        .expect("catalog members have differences on t >= 1");
    assert_eq!(sl.sign, -d);
    let _ = f.eval(0.5);
    let _ = f.eval(1e9);
    // Display is canonical: within the parser's length budget it reproduces
    // the same function.
    let shown = f.to_string();
    if shown.len() <= 256 {
        assert_eq!(MonotoneFn::parse(&shown).expect("display parses"), f);
    }
});
