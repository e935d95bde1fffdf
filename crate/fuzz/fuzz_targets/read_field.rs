#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Covers both payload shapes behind one header: scalar and cell-vector.
    let _ = driftdisk::io::read_field(data);
});
