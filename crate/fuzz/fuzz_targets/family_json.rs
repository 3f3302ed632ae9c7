#![no_main]

use libfuzzer_sys::fuzz_target;
use permkern::kernels::family::FamilyDescriptor;

// Descriptors that parse must round-trip through their own JSON, and small
// instances must materialize without panicking (success or clean error).
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(fd) = FamilyDescriptor::from_json_str(text) else {
        return;
    };
    let back = FamilyDescriptor::from_json_str(&fd.to_json_string()).expect("round trip parses");
    assert_eq!(fd, back);
    let _ = fd.caveat();
    // Cap the dimension so the fuzzer measures parsing, not allocation.
    match fd.natural_size() {
        Some(n) if n <= 64 => {
            let _ = fd.materialize(None);
        }
        Some(_) => {}
        None => {
            let _ = fd.materialize(Some(8));
            let _ = fd.scan_source();
        }
    }
});
