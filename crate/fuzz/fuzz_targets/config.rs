#![no_main]

use ecomrank::config::Config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = Config::parse(text) {
        let again = Config::parse(&config.to_text()).expect("canonical text parses");
        assert_eq!(again.fingerprint(), config.fingerprint());
    }
});
