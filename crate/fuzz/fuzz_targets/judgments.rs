#![no_main]

use ecomrank::harness::{judgments_csv, parse_judgments};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(judgments) = parse_judgments(data) {
        let again = parse_judgments(judgments_csv(&judgments).as_bytes()).expect("written judgments parse");
        assert_eq!(again, judgments);
    }
});
