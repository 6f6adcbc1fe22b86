#![no_main]

use hybrid_core::data::Dataset;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(d) = Dataset::from_reader(data, "label", "bb") else {
        return;
    };
    // anything accepted must survive a write/read cycle unchanged
    let mut out = Vec::new();
    d.write_csv(&mut out, "label", "bb").expect("write accepted dataset");
    let back = Dataset::from_reader(out.as_slice(), "label", "bb").expect("reread written dataset");
    assert_eq!(back, d);
});
