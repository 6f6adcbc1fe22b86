#![no_main]

use hybrid_core::model_io::ModelFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(file) = ModelFile::from_json(text) else {
        return;
    };
    let json = file.to_json().expect("serialize accepted model");
    let back = ModelFile::from_json(&json).expect("reload serialized model");
    assert_eq!(back, file);
});
