#![no_main]

use libfuzzer_sys::fuzz_target;

use driftdisk::pipeline::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = parse_config(text) {
        // Anything accepted must survive a serialize/parse cycle unchanged.
        let json = serde_json::to_string(&config).unwrap();
        let back = parse_config(&json).unwrap();
        assert_eq!(back, config);
    }
});
