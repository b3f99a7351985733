#![no_main]

use gaitnet::io::{params_to_bytes, read_params};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = read_params(data) {
        let bytes = params_to_bytes(&model);
        assert_eq!(read_params(&bytes).unwrap().params(), model.params());
    }
});
