#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // The mesh reader must reject malformed input with an error, never a panic.
    let _ = driftdisk::io::read_mesh(data);
});
