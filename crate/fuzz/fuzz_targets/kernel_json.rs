#![no_main]

use libfuzzer_sys::fuzz_target;
use permkern::Kernel;

// Accepted kernels are finite with strictly increasing labels (when present)
// and round-trip exactly through their own JSON.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(k) = Kernel::from_json_str(text) else {
        return;
    };
    assert!(k.n() >= 1);
    assert!(k.flat().iter().all(|v| v.is_finite()));
    if let Some(labels) = k.labels() {
        assert_eq!(labels.len(), k.n());
        assert!(labels.windows(2).all(|w| w[0] < w[1]));
    }
    let back = Kernel::from_json_str(&k.to_json_string()).expect("round trip parses");
    assert_eq!(k, back);
});
