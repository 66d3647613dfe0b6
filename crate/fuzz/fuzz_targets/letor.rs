#![no_main]

use ecomrank::dataset::{parse_letor, FeatureRegistry};
use libfuzzer_sys::fuzz_target;

const REGISTRY: &str = "id,name,group,attribute_key,popularity_flag
1,query_length,query,,false
2,price,document,,false
3,sales_count,document,,true
4,bm25f,text_match,,false
";

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let registry = FeatureRegistry::from_csv(REGISTRY).expect("fixed registry parses");
    let _ = parse_letor(text, &registry);
});
