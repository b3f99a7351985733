#![no_main]

use gaitmag::logs::{read_manifest, write_manifest};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(entries) = read_manifest(data) {
        let mut out = Vec::new();
        write_manifest(&mut out, &entries).unwrap();
        assert_eq!(read_manifest(out.as_slice()).unwrap().len(), entries.len());
    }
});
