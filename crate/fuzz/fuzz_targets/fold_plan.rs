#![no_main]

use dfunet::pipeline::FoldPlan;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(plan) = FoldPlan::from_json(data) {
        let again = FoldPlan::from_json(plan.to_json().as_bytes()).expect("round trip");
        assert_eq!(again, plan);
    }
});
