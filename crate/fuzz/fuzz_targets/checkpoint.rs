#![no_main]

use dfunet::netzoo::{decode_checkpoint, encode_checkpoint};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ckpt) = decode_checkpoint(data) {
        let bytes = encode_checkpoint(&ckpt.spec, &ckpt.params, ckpt.optimizer.as_ref()).expect("re-encode");
        let again = decode_checkpoint(&bytes).expect("encoder output decodes");
        assert_eq!(again, ckpt);
        // canonical form is a fixed point
        let third = encode_checkpoint(&again.spec, &again.params, again.optimizer.as_ref()).unwrap();
        assert_eq!(third, bytes);
    }
});
