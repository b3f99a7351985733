#![no_main]

use gaitmag::pipeline::PreprocessConfig;
use gaitmag::simgait::CohortConfig;
use gaitnet::TrainConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(c) = toml::from_str::<CohortConfig>(data) {
        if c.validate().is_ok() {
            let _ = c.recording_ids();
        }
    }
    if let Ok(p) = toml::from_str::<PreprocessConfig>(data) {
        let _ = p.validate();
    }
    if let Ok(t) = toml::from_str::<TrainConfig>(data) {
        let _ = t.validate();
    }
});
