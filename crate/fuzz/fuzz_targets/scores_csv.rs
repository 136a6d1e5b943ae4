#![no_main]

use dfunet::metrics::{auc, parse_scores_csv, roc_curve, write_scores_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(samples) = parse_scores_csv(data) else { return };
    let bytes = write_scores_csv(&samples).expect("re-encode");
    assert_eq!(parse_scores_csv(&bytes).expect("round trip"), samples);
    if let Ok(report) = auc(&samples) {
        assert!((0.0..=1.0).contains(&report.auc));
        let curve = roc_curve(&samples).unwrap();
        assert_eq!(curve.points.first().map(|p| (p.fpr, p.tpr)), Some((0.0, 0.0)));
    }
});
