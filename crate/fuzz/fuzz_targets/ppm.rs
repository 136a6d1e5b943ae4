#![no_main]

use dfunet::pipeline::{read_ppm, write_ppm};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = read_ppm(data) {
        let bytes = write_ppm(&img).expect("decoded image re-encodes");
        assert_eq!(read_ppm(&bytes).expect("encoder output decodes"), img);
    }
});
