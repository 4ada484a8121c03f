#![no_main]

use libfuzzer_sys::fuzz_target;
use synsrl::config::{read_settings, ModelConfig, TrainSchedule};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = ModelConfig::from_manifest(text) {
        assert_eq!(ModelConfig::from_manifest(&c.to_manifest()).expect("round trip"), c);
    }
    let (mut model, mut schedule) = (ModelConfig::tiny(), TrainSchedule::desk());
    let _ = read_settings(text, &mut model, &mut schedule);
});
