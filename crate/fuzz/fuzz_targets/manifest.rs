#![no_main]

use std::path::Path;

use dfunet::pipeline::{parse_manifest, write_manifest};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let base = Path::new("/data");
    if let Ok(m) = parse_manifest(data, base) {
        if let Ok(bytes) = write_manifest(&m, base) {
            let again = parse_manifest(&bytes, base).expect("writer output parses");
            assert_eq!(again.entries.len(), m.entries.len());
        }
    }
});
