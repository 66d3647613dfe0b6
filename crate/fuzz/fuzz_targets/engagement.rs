#![no_main]

use ecomrank::dataset::parse_engagement_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_engagement_csv(data);
});
