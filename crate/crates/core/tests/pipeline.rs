use std::f64::consts::{FRAC_PI_2, PI};

use gaitmag::geom::{euler_to_quat, quat_to_euler, EulerAngles, Quaternion, Vec3};
use gaitmag::logs::{ImuSample, ManifestEntry, Modality, PacketRecord, Payload};
use gaitmag::magmodel::Pose;
use gaitmag::pipeline::*;
use gaitmag::simgait::{generate_recording, Activity, CohortConfig, RecordingId};
use gaitmag::Error;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn imu_packet(t: f64, rx_id: u8, v: f64) -> PacketRecord {
    PacketRecord {
        t,
        rx_id,
        payload: Payload::Imu(ImuSample {
            gyro: Vec3::new(v, 0.0, 0.0),
            accel: Vec3::ZERO,
            magno: Vec3::ZERO,
        }),
    }
}

fn scalar_series(t: &[f64], v: &[f64]) -> Series {
    let mut s = Series::new(1, vec![]);
    for (t, v) in t.iter().zip(v) {
        s.push(*t, &[*v]);
    }
    s
}

#[test]
fn deinterleave_routes_by_rx_id() {
    let packets: Vec<_> = [1, 2, 2, 1]
        .iter()
        .enumerate()
        .map(|(i, &id)| imu_packet(i as f64, id, i as f64))
        .collect();
    let (l, r) = deinterleave(&packets).unwrap();
    assert_eq!(l.t, vec![0.0, 3.0]);
    assert_eq!(r.t, vec![1.0, 2.0]);
    assert_eq!(l.row(1), packets[3].payload.channels().as_slice());
    let (l, r) = deinterleave(&[]).unwrap();
    assert!(l.is_empty() && r.is_empty());
    let bad = [imu_packet(0.0, 3, 0.0)];
    assert_eq!(
        deinterleave(&bad),
        Err(PipelineError::UnknownRxId { index: 0, rx_id: 3 })
    );
}

fn simulated(activity: Activity, modality: Modality) -> Vec<PacketRecord> {
    let cfg = CohortConfig::default();
    let id = RecordingId {
        subject_id: 1,
        activity,
        index: 0,
    };
    generate_recording(&cfg, id, modality).unwrap().packets
}

#[test]
fn simulated_file_has_about_3000_packets_per_foot() {
    let (l, r) = deinterleave(&simulated(Activity::W, Modality::Magnetic)).unwrap();
    for n in [l.len(), r.len()] {
        assert!((n as f64 - 3000.0).abs() <= 150.0, "{n}");
    }
}

#[test]
fn fill_gaps_interpolates_linearly() {
    let s = scalar_series(&[0.0, 1.0], &[0.0, 2.0]);
    let out = fill_gaps(&s, &[0.5], 2.0).unwrap();
    assert_eq!(out.row(0), &[1.0]);
    let sparse = scalar_series(&[0.0, 0.1, 0.4, 0.5], &[0.0; 4]);
    assert!(matches!(
        fill_gaps(&sparse, &[0.2], 0.25),
        Err(PipelineError::TooSparse { .. })
    ));
    assert!(fill_gaps(&sparse, &[0.05], 0.25).is_ok());
}

fn slerp(a: Quaternion, b: Quaternion, u: f64) -> Quaternion {
    let theta = a.dot(b).clamp(-1.0, 1.0).acos();
    let (wa, wb) = (
        ((1.0 - u) * theta).sin() / theta.sin(),
        (u * theta).sin() / theta.sin(),
    );
    Quaternion::new(
        wa * a.w + wb * b.w,
        wa * a.x + wb * b.x,
        wa * a.y + wb * b.y,
        wa * a.z + wb * b.z,
    )
}

#[test]
fn quaternion_gap_fill_is_close_to_slerp() {
    let yaw90 = euler_to_quat(EulerAngles {
        yaw: FRAC_PI_2,
        pitch: 0.0,
        roll: 0.0,
    });
    let mut s = Series::new(4, vec![0]);
    s.push(0.0, &Quaternion::IDENTITY.to_array());
    s.push(1.0, &yaw90.to_array());
    for u in [0.25, 0.5, 0.8] {
        let r = fill_gaps(&s, &[u], 2.0).unwrap();
        let q = Quaternion::from_array(r.row(0).try_into().unwrap());
        assert!((q.norm() - 1.0).abs() < 1e-12);
        assert!(q.angle_to(slerp(Quaternion::IDENTITY, yaw90, u)) < 1f64.to_radians());
    }
    let mid = fill_gaps(&s, &[0.5], 2.0).unwrap();
    let yaw = quat_to_euler(Quaternion::from_array(mid.row(0).try_into().unwrap()))
        .angles
        .yaw;
    assert!((yaw - PI / 4.0).abs() < 1f64.to_radians());
}

#[test]
fn quaternion_sign_flips_do_not_corrupt_interpolation() {
    let q = euler_to_quat(EulerAngles {
        yaw: 0.3,
        pitch: 0.2,
        roll: 0.1,
    });
    let neg = Quaternion::new(-q.w, -q.x, -q.y, -q.z);
    let mut s = Series::new(4, vec![0]);
    s.push(0.0, &q.to_array());
    s.push(1.0, &neg.to_array());
    let mid = fill_gaps(&s, &[0.5], 2.0).unwrap();
    let m = Quaternion::from_array(mid.row(0).try_into().unwrap());
    assert!(m.angle_to(q) < 1e-12 || m.dot(q).abs() > 1.0 - 1e-12);
}

#[test]
fn median_filter_examples() {
    let t: Vec<f64> = (0..5).map(f64::from).collect();
    let out = median_filter(&scalar_series(&t, &[0.0, 0.0, 9.0, 0.0, 0.0]), 5).unwrap();
    assert_eq!(out.row(2), &[0.0]);
    let flat = scalar_series(&t, &[3.5; 5]);
    assert_eq!(median_filter(&flat, 5).unwrap(), flat);
    assert!(median_filter(&flat, 4).is_err());
}

#[test]
fn resample_produces_exact_row_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut t: Vec<f64> = (0..2990).map(|_| rng.random_range(0.0..10.0)).collect();
    t.sort_by(f64::total_cmp);
    let v: Vec<f64> = t.iter().map(|x| x.sin()).collect();
    let f = resample(&scalar_series(&t, &v), 3000).unwrap();
    assert_eq!(f.n_samples(), 3000);
}

#[test]
fn resample_uniform_input_is_identity() {
    let t: Vec<f64> = (0..3000).map(|i| i as f64 / 300.0).collect();
    let v: Vec<f64> = t.iter().map(|x| (3.0 * x).sin() + x * x).collect();
    let f = resample(&scalar_series(&t, &v), 3000).unwrap();
    for (a, b) in f.data.iter().zip(&v) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn resample_keeps_ramps_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut t: Vec<f64> = (0..500).map(|_| rng.random_range(0.0..2.0)).collect();
    t.sort_by(f64::total_cmp);
    let ramp = |x: f64| 2.5 * x - 1.0;
    let v: Vec<f64> = t.iter().map(|&x| ramp(x)).collect();
    let f = resample(&scalar_series(&t, &v), 777).unwrap();
    let step = 1.0 / f.rate_hz;
    for i in 0..f.n_samples() {
        assert!((f.data[i] - ramp(f.t0 + step * i as f64)).abs() < 1e-12);
    }
}

fn quat_frames(qs: &[Quaternion]) -> FrameSeries {
    FrameSeries {
        t0: 0.0,
        rate_hz: 300.0,
        n_features: 7,
        data: qs
            .iter()
            .flat_map(|q| [0.1, 0.2, 0.3].into_iter().chain(q.to_array()))
            .collect(),
    }
}

#[test]
fn euler_conversion_examples() {
    let f = quat_channels_to_euler(&quat_frames(&[Quaternion::IDENTITY; 4]), &[3]);
    assert_eq!(f.n_features, 6);
    assert!(f.data.chunks(6).all(|r| r[3..] == [0.0, 0.0, 0.0]));
    let yaw90 = euler_to_quat(EulerAngles {
        yaw: FRAC_PI_2,
        pitch: 0.0,
        roll: 0.0,
    });
    let f = quat_channels_to_euler(&quat_frames(&[yaw90; 4]), &[3]);
    assert!(f.column(3).iter().all(|y| (y - FRAC_PI_2).abs() < 1e-12));
}

#[test]
fn yaw_is_unwrapped_across_the_branch_cut() {
    let qs: Vec<_> = (0..200)
        .map(|i| {
            euler_to_quat(EulerAngles {
                yaw: 0.05 * i as f64,
                pitch: 0.1,
                roll: 0.0,
            })
        })
        .collect();
    let f = quat_channels_to_euler(&quat_frames(&qs), &[3]);
    for (i, y) in f.column(3).iter().enumerate() {
        assert!((y - 0.05 * i as f64).abs() < 1e-9, "{i}: {y}");
    }
}

/// Amplitude of the `freq` component in the middle half of `y`, by least
/// squares against sine and cosine.
fn tone_amplitude(y: &[f64], freq: f64) -> f64 {
    let (lo, hi) = (y.len() / 4, 3 * y.len() / 4);
    let (mut ss, mut cc, mut sc, mut ys, mut yc) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, v) in y.iter().enumerate().take(hi).skip(lo) {
        let w = 2.0 * PI * freq * i as f64 / FS_HZ;
        let (s, c) = w.sin_cos();
        ss += s * s;
        cc += c * c;
        sc += s * c;
        ys += v * s;
        yc += v * c;
    }
    let det = ss * cc - sc * sc;
    let a = (ys * cc - yc * sc) / det;
    let b = (yc * ss - ys * sc) / det;
    a.hypot(b)
}

fn tone(freq: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (2.0 * PI * freq * i as f64 / FS_HZ + 0.3).sin())
        .collect()
}

#[test]
fn lowpass_passes_dc_and_low_tones() {
    let x = vec![4.2; 900];
    assert!(filtfilt(&x).iter().all(|v| ((v - 4.2) / 4.2).abs() < 1e-6));
    let gain = tone_amplitude(&filtfilt(&tone(5.0, 3000)), 5.0);
    assert!((20.0 * gain.log10()).abs() <= 0.5, "{gain}");
}

#[test]
fn lowpass_rejects_60_hz() {
    let gain = tone_amplitude(&filtfilt(&tone(60.0, 3000)), 60.0);
    assert!(20.0 * gain.log10() <= -40.0, "{gain}");
}

#[test]
fn single_pass_response_matches_design() {
    assert!((magnitude_response(0.0) - 1.0).abs() < 1e-12);
    for f in [1.0, 5.0, 10.0, 14.0] {
        let db = 20.0 * magnitude_response(f).log10();
        assert!((-0.21..=0.21).contains(&db), "{f} Hz: {db} dB");
    }
    for f in [45.0, 60.0, 100.0, 149.0] {
        assert!(20.0 * magnitude_response(f).log10() <= -40.0);
    }
}

#[test]
fn segment_counts() {
    let frames = FrameSeries {
        t0: 0.0,
        rate_hz: 300.0,
        n_features: 2,
        data: vec![0.0; 6000],
    };
    assert_eq!(segment(&frames, 600).unwrap().len(), 9);
    assert_eq!(segment(&frames, 500).unwrap().len(), 11);
    let short = FrameSeries {
        data: vec![0.0; 1000],
        ..frames
    };
    assert_eq!(
        segment(&short, 600).unwrap_err(),
        PipelineError::SeriesTooShort {
            len: 500,
            window: 600
        }
    );
    assert!(segment(&frames, 400).is_err());
}

#[test]
fn normalize_examples() {
    let mut w = vec![2.0, 7.0, 4.0, 7.0, 6.0, 7.0];
    normalize(&mut w, 2);
    assert_eq!(w, vec![0.0, 0.0, 0.5, 0.0, 1.0, 0.0]);
}

#[test]
fn feature_layout_golden() {
    assert_eq!(
        feature_names(Modality::Magnetic).join(","),
        "left_x,left_y,left_z,left_yaw,left_pitch,left_roll,right_x,right_y,right_z,right_yaw,right_pitch,right_roll"
    );
    assert_eq!(
        feature_names(Modality::Imu).join(","),
        "left_gyro_x,left_gyro_y,left_gyro_z,left_accel_x,left_accel_y,left_accel_z,left_magno_x,left_magno_y,\
         left_magno_z,right_gyro_x,right_gyro_y,right_gyro_z,right_accel_x,right_accel_y,right_accel_z,\
         right_magno_x,right_magno_y,right_magno_z"
    );
    for c in POSITION_COLUMNS {
        assert!(!feature_names(Modality::Magnetic)[c].ends_with("aw"));
    }
}

#[test]
fn processed_recordings_have_the_model_shape() {
    let cfg = PreprocessConfig::default();
    for (m, f) in [(Modality::Magnetic, 12), (Modality::Imu, 18)] {
        let frames = process_recording(&simulated(Activity::J, m), 10.0, &cfg).unwrap();
        assert_eq!((frames.n_samples(), frames.n_features), (3000, f));
        assert!(frames.data.iter().all(|v| v.is_finite()));
    }
}

fn small_cohort() -> (CohortConfig, Vec<ManifestEntry>) {
    let cfg = CohortConfig {
        n_subjects: 2,
        recordings_per_activity: 1,
        ..CohortConfig::default()
    };
    let manifest = cfg
        .recording_ids()
        .into_iter()
        .map(|(id, modality)| ManifestEntry {
            subject_id: id.subject_id,
            activity: Some(id.activity),
            modality,
            recording: id.index,
            path: id.file_name(modality),
            seed: cfg.trace_seed(&id),
            duration_s: cfg.duration_s,
        })
        .collect();
    (cfg, manifest)
}

fn build(
    cfg: &CohortConfig,
    manifest: &[ManifestEntry],
    modality: Modality,
    pre: &PreprocessConfig,
) -> Dataset {
    build_dataset(manifest, modality, pre, |e| {
        let id = RecordingId {
            subject_id: e.subject_id,
            activity: e.activity.unwrap(),
            index: e.recording,
        };
        Ok(generate_recording(cfg, id, e.modality)?.packets)
    })
    .unwrap()
}

#[test]
fn dataset_build_is_deterministic_and_order_invariant() {
    let (cfg, manifest) = small_cohort();
    let pre = PreprocessConfig::default();
    let a = build(&cfg, &manifest, Modality::Magnetic, &pre);
    assert_eq!(a.len(), 2 * 4 * 11);
    assert_eq!(a.count_per_label(4), vec![22; 4]);
    assert_eq!((a.val.len(), a.test.len()), (8, 8));
    let mut shuffled = manifest.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(build(&cfg, &shuffled, Modality::Magnetic, &pre), a);
    assert_eq!(
        write_dataset(&a),
        write_dataset(&build(&cfg, &manifest, Modality::Magnetic, &pre))
    );

    let n_features = a.meta.n_features;
    for w in a.all() {
        for c in 0..n_features {
            let col: Vec<f64> = w.data.iter().skip(c).step_by(n_features).copied().collect();
            let (lo, hi) = col
                .iter()
                .fold((f64::MAX, f64::MIN), |(l, h), v| (l.min(*v), h.max(*v)));
            assert!(lo == 0.0 && (hi == 1.0 || hi == 0.0));
        }
    }

    let pre600 = PreprocessConfig {
        window_len: 600,
        ..pre
    };
    let imu = build(&cfg, &manifest, Modality::Imu, &pre600);
    assert_eq!((imu.len(), imu.meta.n_features), (2 * 4 * 9, 18));
}

#[test]
fn dataset_requires_labels() {
    let (cfg, mut manifest) = small_cohort();
    manifest[0].activity = None;
    let modality = manifest[0].modality;
    let err = build_dataset(&manifest, modality, &PreprocessConfig::default(), |_| {
        Ok(generate_recording(
            &cfg,
            RecordingId {
                subject_id: 1,
                activity: Activity::J,
                index: 0,
            },
            modality,
        )?
        .packets)
    })
    .unwrap_err();
    assert!(matches!(
        err,
        Error::Pipeline(PipelineError::LabelMissing { .. })
    ));
}

fn toy_dataset(mode: SplitMode) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let windows: Vec<WindowSample> = (0..40)
        .map(|i| WindowSample {
            data: (0..6).map(|_| rng.random()).collect(),
            label: i % 4,
            subject_id: (i / 4) as u32,
            recording: 0,
            offset: i as u32,
        })
        .collect();
    Dataset {
        meta: DatasetMeta {
            modality: Modality::Magnetic,
            window_len: 3,
            n_features: 2,
        },
        split: SplitSpec {
            mode,
            shuffle_seed: 9,
            ..SplitSpec::default()
        },
        train: windows[..32].to_vec(),
        val: windows[32..36].to_vec(),
        test: windows[36..].to_vec(),
    }
}

#[test]
fn container_round_trip_and_rejection() {
    for mode in [SplitMode::ByWindow, SplitMode::BySubject] {
        let ds = toy_dataset(mode);
        let bytes = write_dataset(&ds);
        assert_eq!(read_dataset(&bytes).unwrap(), ds);
        assert!(read_dataset(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(read_dataset(&bad).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(read_dataset(&extra).is_err());
    }
}

#[test]
fn feature_selection_keeps_columns_in_order() {
    let ds = toy_dataset(SplitMode::ByWindow);
    let sub = ds.select_features(&[1]).unwrap();
    assert_eq!(sub.meta.n_features, 1);
    assert_eq!(
        sub.train[0].data,
        vec![
            ds.train[0].data[1],
            ds.train[0].data[3],
            ds.train[0].data[5]
        ]
    );
    assert!(ds.select_features(&[]).is_err());
    assert!(ds.select_features(&[2]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn median_matches_brute_force(v in prop::collection::vec(-100.0f64..100.0, 1..60), half in 0usize..4) {
        let w = 2 * half + 1;
        let t: Vec<f64> = (0..v.len()).map(|i| i as f64).collect();
        let out = median_filter(&scalar_series(&t, &v), w).unwrap();
        for i in 0..v.len() {
            let h = half.min(i).min(v.len() - 1 - i);
            let mut win: Vec<f64> = v[i - h..=i + h].to_vec();
            win.sort_by(f64::total_cmp);
            prop_assert_eq!(out.data[i], win[win.len() / 2]);
        }
    }

    #[test]
    fn lowpass_is_linear(
        x in prop::collection::vec(-1.0f64..1.0, 64..400),
        seed in any::<u64>(),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = x.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let (fx, fy, fm) = (filtfilt(&x), filtfilt(&y), filtfilt(&mix));
        for i in 0..x.len() {
            prop_assert!((fm[i] - (a * fx[i] + b * fy[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn normalized_columns_span_unit_interval(v in prop::collection::vec(-50.0f64..50.0, 3..90)) {
        let n = v.len() / 3 * 3;
        let mut w = v[..n].to_vec();
        normalize(&mut w, 3);
        for c in 0..3 {
            let col: Vec<f64> = w.iter().skip(c).step_by(3).copied().collect();
            let raw: Vec<f64> = v[..n].iter().skip(c).step_by(3).copied().collect();
            let constant = raw.iter().all(|x| *x == raw[0]);
            let lo = col.iter().cloned().fold(f64::MAX, f64::min);
            let hi = col.iter().cloned().fold(f64::MIN, f64::max);
            prop_assert_eq!(lo, 0.0);
            prop_assert_eq!(hi, if constant { 0.0 } else { 1.0 });
        }
    }

    #[test]
    fn euler_channels_invert_sample_wise(
        angles in prop::collection::vec((-PI..PI, -1.4f64..1.4, -PI..PI), 1..40)
    ) {
        let qs: Vec<Quaternion> = angles
            .iter()
            .map(|&(yaw, pitch, roll)| euler_to_quat(EulerAngles { yaw, pitch, roll }))
            .collect();
        let f = quat_channels_to_euler(&quat_frames(&qs), &[3]);
        for (i, q) in qs.iter().enumerate() {
            let r = f.row(i);
            let back = euler_to_quat(EulerAngles { yaw: r[3], pitch: r[4], roll: r[5] });
            prop_assert!(back.dot(*q).abs() > 1.0 - 1e-13, "sample {}", i);
        }
    }

    #[test]
    fn fill_gaps_equalises_feet(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ts = |n: usize| {
            let mut t: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            t.push(0.0);
            t.push(1.0);
            t.sort_by(f64::total_cmp);
            t
        };
        let (tl, tr) = (ts(30), ts(45));
        let (l, r) = (scalar_series(&tl, &tl), scalar_series(&tr, &tr));
        let grid = union_grid(&tl, &tr);
        let (fl, fr) = (fill_gaps(&l, &grid, 1.0).unwrap(), fill_gaps(&r, &grid, 1.0).unwrap());
        prop_assert_eq!(fl.len(), fr.len());
        // identity signal: interpolation is exact
        for (t, v) in fl.t.iter().zip(&fl.data) {
            prop_assert!((t - v).abs() < 1e-12);
        }
    }
}

#[test]
fn quaternion_pose_payload_round_trip() {
    let p = Payload::Pose(Pose {
        position: Vec3::new(1.0, 2.0, 3.0),
        orientation: Quaternion::IDENTITY,
    });
    assert_eq!(
        Payload::from_channels(Modality::Magnetic, &p.channels()),
        Some(p)
    );
}
