#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Binary reader: header fields are attacker-controlled, so size claims
    // must be validated before any allocation.
    let _ = driftdisk::io::read_grid_dump(data);
});
