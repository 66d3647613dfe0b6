#![no_main]

use ecomrank::model::ModelFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = ModelFile::parse(text) {
        let again = ModelFile::parse(&model.to_text()).expect("written model parses");
        assert_eq!(again.to_text(), model.to_text());
    }
});
