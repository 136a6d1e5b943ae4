#![no_main]

use dfunet::svm::{svm_decision, SvmModel};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(model) = SvmModel::from_json(data) else { return };
    assert_eq!(
        SvmModel::from_json(model.to_json().as_bytes()).expect("round trip"),
        model
    );
    let zero = vec![0.0; model.dim()];
    let _ = svm_decision(&model, &zero);
});
