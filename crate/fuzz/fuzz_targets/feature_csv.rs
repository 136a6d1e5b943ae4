#![no_main]

use dfunet::features::{parse_feature_csv, write_feature_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = parse_feature_csv(data) {
        let bytes = write_feature_csv(&table).expect("re-encode");
        assert_eq!(parse_feature_csv(&bytes).expect("round trip"), table);
    }
});
