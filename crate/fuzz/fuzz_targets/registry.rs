#![no_main]

use ecomrank::dataset::FeatureRegistry;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(registry) = FeatureRegistry::from_csv(text) {
        let again = FeatureRegistry::from_csv(&registry.to_csv()).expect("written registry parses");
        assert_eq!(again, registry);
    }
});
