#![no_main]

use hybrid_core::data::load_for_prediction;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((table, blackbox)) = load_for_prediction(data, "bb", &["label"]) {
        assert_eq!(table.n(), blackbox.len());
        assert!(table.column("bb").is_none());
        assert!(table.column("label").is_none());
    }
});
