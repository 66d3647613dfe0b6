#![no_main]

use ecomrank::synth::SyntheticWorld;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = SyntheticWorld::from_json(text);
});
