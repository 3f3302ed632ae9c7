#![no_main]

use libfuzzer_sys::fuzz_target;
use permkern::Kernel;

// Accepted grids are square, finite, and survive a CSV round trip bit-exactly
// (entries are written with 17 significant digits).
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(k) = Kernel::from_csv_str(text) else {
        return;
    };
    assert!(k.n() >= 1);
    assert_eq!(k.flat().len(), k.n() * k.n());
    assert!(k.flat().iter().all(|v| v.is_finite()));
    let back = Kernel::from_csv_str(&k.to_csv_string()).expect("round trip parses");
    assert_eq!(k.flat(), back.flat());
});
