#![no_main]

use hybrid_core::frontier::{export_frontier, pareto, parse_frontier};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(points) = parse_frontier(data) else {
        return;
    };
    let mut out = Vec::new();
    export_frontier(&points, &mut out).expect("export parsed points");
    let back = parse_frontier(out.as_slice()).expect("reparse exported points");
    assert_eq!(back.len(), points.len());
    let front = pareto(&points);
    assert!(front.len() <= points.len());
});
