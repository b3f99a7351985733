#![no_main]

use gaitmag::logs::read_field_log;
use gaitmag::magmodel::{DipoleModel, HalfSpace, Measurement};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(records) = read_field_log(data) else {
        return;
    };
    let model = DipoleModel::new(Default::default(), Default::default()).unwrap();
    for r in records.iter().take(64) {
        let m = Measurement {
            t: r.t,
            b_rx: r.b_rx,
            q_rx: r.q_rx,
            q_tx: r.q_tx,
        };
        let _ = model.track(&m, HalfSpace::default());
    }
});
