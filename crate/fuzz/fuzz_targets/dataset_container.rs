#![no_main]

use gaitmag::pipeline::{read_dataset, write_dataset};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = read_dataset(data) {
        let bytes = write_dataset(&ds);
        let again = read_dataset(&bytes).unwrap();
        assert_eq!(again.len(), ds.len());
    }
});
