#![no_main]

use libfuzzer_sys::fuzz_target;

use driftdisk::catalog::DriftSpec;

fuzz_target!(|data: &[u8]| {
    if let Ok(spec) = serde_json::from_slice::<DriftSpec>(data) {
        let json = serde_json::to_string(&spec).unwrap();
        let back: DriftSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }
});
