#![no_main]

use gaitmag::logs::{read_packets, write_packets};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((modality, packets)) = read_packets(data) {
        let mut out = Vec::new();
        write_packets(&mut out, modality, &packets).unwrap();
        let (m2, again) = read_packets(out.as_slice()).unwrap();
        assert_eq!(m2, modality);
        assert_eq!(again.len(), packets.len());
    }
});
