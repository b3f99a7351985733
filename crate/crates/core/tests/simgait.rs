use gaitmag::geom::{euler_to_quat, EulerAngles, Quaternion, Vec3};
use gaitmag::logs::{read_manifest, read_packets, Modality, Payload};
use gaitmag::magmodel::{DipoleModel, Pose};
use gaitmag::seeds::stream;
use gaitmag::simgait::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn profile(id: u32) -> SubjectProfile {
    SubjectProfile::sample(id, &mut stream(99, &[id as u64]))
}

fn trace(p: &SubjectProfile, act: Activity) -> TruthTrace {
    let var = RecordingVariation {
        phase: 0.3,
        heading_rad: 0.7,
        tempo_scale: 1.0,
    };
    gen_trajectory(p, &ActivityParams::new(act, 10.0), &var).unwrap()
}

/// Earth-frame lift (height above ground) of a foot at every sample.
fn lift(tr: &TruthTrace, foot: usize) -> Vec<f64> {
    (0..tr.len()).map(|k| -tr.foot_earth(foot, k).0.z).collect()
}

/// Centre indices of runs where the foot rests on the ground.
fn stance_centres(lift: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut start = None;
    for (k, &h) in lift.iter().enumerate() {
        let down = h.abs() < 1e-9;
        match (down, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                // skip runs clipped by the trace ends
                if s > 0 {
                    out.push((s + k - 1) / 2);
                }
                start = None;
            }
            _ => {}
        }
    }
    out
}

fn local_maxima(v: &[f64]) -> Vec<usize> {
    (1..v.len() - 1)
        .filter(|&k| v[k] > v[k - 1] && v[k] >= v[k + 1] && v[k] > 1e-6)
        .collect()
}

#[test]
fn marching_stays_in_place() {
    for id in 1..=6 {
        let tr = trace(&profile(id), Activity::M);
        for foot in 0..2 {
            let xs: Vec<f64> = tr.feet[foot].iter().map(|p| p.position.x).collect();
            let span = xs.iter().cloned().fold(f64::MIN, f64::max)
                - xs.iter().cloned().fold(f64::MAX, f64::min);
            assert!(span < 0.05, "subject {id} foot {foot}: x span {span}");
        }
    }
}

#[test]
fn feet_alternate_half_a_cycle_apart() {
    for act in Activity::ALL {
        let p = profile(3);
        let tr = trace(&p, act);
        let g = GaitParams::derive(
            &p,
            &ActivityParams::new(act, 10.0),
            &RecordingVariation::default(),
        );
        let half_period = tr.rate_hz / g.stride_hz / 2.0;
        let left_max = local_maxima(&lift(&tr, 0));
        let right_min = stance_centres(&lift(&tr, 1));
        assert!(left_max.len() >= 5, "{act}: {} maxima", left_max.len());
        for &k in &left_max {
            let nearest = right_min
                .iter()
                .map(|&c| (c as f64 - k as f64).abs())
                .fold(f64::MAX, f64::min);
            // trace ends may clip the matching plateau
            if k as f64 > half_period && ((tr.len() - k) as f64) > half_period {
                assert!(
                    nearest <= 0.05 * half_period,
                    "{act}: offset {nearest} samples at {k}"
                );
            }
        }
    }
}

/// Mean distance between consecutive stance positions of the left foot.
fn mean_stride(tr: &TruthTrace) -> f64 {
    let centres = stance_centres(&lift(tr, 0));
    let pos: Vec<Vec3> = centres.iter().map(|&k| tr.foot_earth(0, k).0).collect();
    let d: Vec<f64> = pos.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    d.iter().sum::<f64>() / d.len() as f64
}

#[test]
fn backpack_shortens_steps_by_weight_effect() {
    for id in 1..=4 {
        let p = profile(id);
        let ratio = mean_stride(&trace(&p, Activity::WW)) / mean_stride(&trace(&p, Activity::W));
        let expected = 1.0 - DEFAULT_WEIGHT_EFFECT;
        assert!(
            ((ratio - expected) / expected).abs() < 0.01,
            "ratio {ratio}"
        );
    }
}

#[test]
fn trace_is_continuous() {
    for act in Activity::ALL {
        let tr = trace(&profile(2), act);
        for foot in 0..2 {
            for w in tr.feet[foot].windows(2) {
                assert!((w[1].position - w[0].position).norm() < 0.02);
                assert!(w[1].orientation.angle_to(w[0].orientation) < 0.05);
            }
        }
    }
}

fn mean_foot_speed(tr: &TruthTrace) -> f64 {
    let mut total = 0.0;
    for foot in 0..2 {
        for k in 1..tr.len() {
            total += (tr.foot_earth(foot, k).0 - tr.foot_earth(foot, k - 1).0).norm() * tr.rate_hz;
        }
    }
    total / (2 * (tr.len() - 1)) as f64
}

#[test]
fn jogging_is_faster_than_walking_for_every_subject() {
    for id in 1..=12 {
        let p = profile(id);
        assert!(
            mean_foot_speed(&trace(&p, Activity::J)) > mean_foot_speed(&trace(&p, Activity::W))
        );
    }
}

/// Dynamic-time-warping distance between the two-foot relative position
/// series, sampled at 100 Hz and normalised by the series length.
fn dtw_distance(a: &TruthTrace, b: &TruthTrace) -> f64 {
    let series = |t: &TruthTrace| -> Vec<[Vec3; 2]> {
        (0..t.len())
            .step_by(10)
            .map(|k| [t.feet[0][k].position, t.feet[1][k].position])
            .collect()
    };
    let (x, y) = (series(a), series(b));
    let cost = |p: &[Vec3; 2], q: &[Vec3; 2]| {
        ((p[0] - q[0]).norm().powi(2) + (p[1] - q[1]).norm().powi(2)).sqrt()
    };
    let m = y.len();
    let mut prev = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for xi in &x {
        let mut cur = vec![f64::INFINITY; m + 1];
        for j in 1..=m {
            cur[j] = cost(xi, &y[j - 1]) + prev[j].min(prev[j - 1]).min(cur[j - 1]);
        }
        prev = cur;
    }
    prev[m] / x.len().max(m) as f64
}

#[test]
fn jog_march_gap_dwarfs_walk_backpack_gap() {
    let (mut jm, mut ww) = (0.0, 0.0);
    for id in 1..=12 {
        let p = profile(id);
        jm += dtw_distance(&trace(&p, Activity::J), &trace(&p, Activity::M));
        ww += dtw_distance(&trace(&p, Activity::W), &trace(&p, Activity::WW));
    }
    assert!(jm > 3.0 * ww, "J-M {jm} vs W-WW {ww}");
}

#[test]
fn noiseless_magnetic_packets_match_truth() {
    let tr = trace(&profile(1), Activity::W);
    let model = DipoleModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let packets = synth_magnetic(&tr, &model, &NoiseSpec::none(), 300.0, &mut rng).unwrap();
    assert_eq!(packets.len(), 6000);
    for p in &packets {
        let truth = tr.foot_pose_at(p.rx_id as usize - 1, p.t);
        let Payload::Pose(pose) = p.payload else {
            panic!("wrong payload")
        };
        assert!((pose.position - truth.position).norm() < 1e-9);
        let (a, b) = (pose.orientation.to_array(), truth.orientation.to_array());
        let sign = if pose.orientation.dot(truth.orientation) < 0.0 {
            -1.0
        } else {
            1.0
        };
        assert!(a.iter().zip(b).all(|(x, y)| (x - sign * y).abs() < 1e-9));
    }
}

#[test]
fn drop_rate_and_interleaving() {
    let p = profile(5);
    let tr = gen_trajectory(
        &p,
        &ActivityParams::new(Activity::W, 5.0),
        &RecordingVariation::default(),
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let packets = synth_magnetic(
        &tr,
        &DipoleModel::default(),
        &NoiseSpec::default(),
        300.0,
        &mut rng,
    )
    .unwrap();
    let dropped = 1.0 - packets.len() as f64 / 3000.0;
    assert!((0.01..=0.03).contains(&dropped), "drop fraction {dropped}");
    assert!(packets.windows(2).all(|w| w[0].t <= w[1].t));
    for id in [1, 2] {
        let ts: Vec<f64> = packets
            .iter()
            .filter(|p| p.rx_id == id)
            .map(|p| p.t)
            .collect();
        assert!(ts.windows(2).all(|w| w[0] <= w[1]));
    }
}

/// Trace with a fixed waist and feet whose earth orientation is `q(t)`.
fn synthetic_trace(q: impl Fn(f64) -> Quaternion) -> TruthTrace {
    let n = 3001;
    let t0 = -0.1;
    let mut feet = [Vec::new(), Vec::new()];
    for k in 0..n {
        let t = t0 + k as f64 / TRUTH_RATE_HZ;
        for (foot, side) in [(0, -0.1), (1, 0.1)] {
            feet[foot].push(Pose {
                position: Vec3::new(0.0, side, 0.9),
                orientation: q(t),
            });
        }
    }
    TruthTrace {
        t0,
        rate_hz: TRUTH_RATE_HZ,
        waist_position: vec![Vec3::new(0.0, 0.0, -0.9); n],
        waist_orientation: vec![Quaternion::IDENTITY; n],
        feet,
        duration_s: 2.8,
    }
}

fn imu_samples(tr: &TruthTrace, noise: &NoiseSpec, seed: u64) -> Vec<gaitmag::logs::ImuSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bias = ImuBias::sample(noise, &mut rng);
    synth_imu(tr, noise, &bias, 300.0, &mut rng)
        .unwrap()
        .into_iter()
        .map(|p| match p.payload {
            Payload::Imu(s) => s,
            Payload::Pose(_) => panic!("wrong payload"),
        })
        .collect()
}

#[test]
fn stationary_imu_reads_gravity() {
    let tilt = euler_to_quat(EulerAngles {
        yaw: 0.4,
        pitch: 0.3,
        roll: -0.2,
    });
    let tr = synthetic_trace(|_| tilt);
    for s in imu_samples(&tr, &NoiseSpec::none(), 1) {
        assert!((s.accel.norm() - GRAVITY).abs() < 1e-9);
        assert!(s.gyro.norm() < 1e-9);
    }
    let noisy = imu_samples(&tr, &NoiseSpec::default(), 2);
    let mean_norm = noisy.iter().map(|s| s.accel.norm()).sum::<f64>() / noisy.len() as f64;
    let mean_gyro = noisy.iter().map(|s| s.gyro.norm()).sum::<f64>() / noisy.len() as f64;
    assert!((mean_norm - GRAVITY).abs() < 0.2, "{mean_norm}");
    assert!(mean_gyro < 0.03, "{mean_gyro}");
}

#[test]
fn yaw_spin_appears_on_gyro_z() {
    for omega in [0.5, 3.0, -7.0] {
        let tr = synthetic_trace(|t| {
            euler_to_quat(EulerAngles {
                yaw: omega * t,
                pitch: 0.0,
                roll: 0.0,
            })
        });
        for s in imu_samples(&tr, &NoiseSpec::none(), 3) {
            assert!(
                ((s.gyro.z - omega) / omega).abs() < 0.01,
                "{} vs {omega}",
                s.gyro.z
            );
            assert!(s.gyro.x.abs() < 1e-6 && s.gyro.y.abs() < 1e-6);
        }
    }
}

#[test]
fn magnetometer_norm_is_constant() {
    let tr = trace(&profile(4), Activity::J);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let noise = NoiseSpec::default();
    let bias = ImuBias::sample(&noise, &mut rng);
    let packets = synth_imu(&tr, &noise, &bias, 300.0, &mut rng).unwrap();
    for p in packets {
        let Payload::Imu(s) = p.payload else { panic!() };
        // 6 sigma of noise plus 6 sigma of bias, per axis
        assert!(
            (s.magno.norm() - 1.0).abs() < 6.0 * 3f64.sqrt() * (noise.magno + noise.magno_bias)
        );
    }
}

#[test]
fn cohort_recording_counts() {
    let cfg = CohortConfig::default();
    let ids = cfg.recording_ids();
    for m in Modality::ALL {
        assert_eq!(ids.iter().filter(|(_, mm)| *mm == m).count(), 288);
    }
}

#[test]
fn small_cohort_on_disk_is_deterministic() {
    let cfg = CohortConfig {
        n_subjects: 1,
        activities: vec![Activity::M],
        modalities: vec![Modality::Magnetic],
        ..CohortConfig::default()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let entries = gen_cohort(&cfg, a.path()).unwrap();
    gen_cohort(&cfg, b.path()).unwrap();
    assert_eq!(entries.len(), 6);
    let manifest =
        read_manifest(std::fs::File::open(a.path().join(MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(manifest, entries);
    for e in &entries {
        let bytes_a = std::fs::read(a.path().join(&e.path)).unwrap();
        assert_eq!(bytes_a, std::fs::read(b.path().join(&e.path)).unwrap());
        let (_, packets) = read_packets(&bytes_a[..]).unwrap();
        let first = packets.first().unwrap().t;
        let last = packets.last().unwrap().t;
        let tol = 5.0 * 0.1 / 300.0 + 2.0 / 300.0;
        assert!(
            first.abs() < tol && (last - (e.duration_s - 1.0 / 300.0)).abs() < tol,
            "{first}..{last}"
        );
    }
}

#[test]
fn both_modalities_share_the_trajectory() {
    let cfg = CohortConfig::default();
    let id = RecordingId {
        subject_id: 2,
        activity: Activity::J,
        index: 1,
    };
    assert_eq!(cfg.truth(&id).unwrap(), cfg.truth(&id).unwrap());
    let a = generate_recording(&cfg, id, Modality::Imu).unwrap();
    let b = generate_recording(&cfg, id, Modality::Imu).unwrap();
    assert_eq!(a, b);
    assert!(
        generate_recording(&cfg, id, Modality::Magnetic)
            .unwrap()
            .packets
            .len()
            > 5600
    );
}

#[test]
fn invalid_inputs_are_rejected() {
    let mut p = profile(1);
    p.cadence_hz = 5.0;
    assert!(matches!(p.validate(), Err(SimError::InvalidProfile(_))));
    assert!(ActivityParams::new(Activity::W, 0.0).validate().is_err());
    let tr = trace(&profile(1), Activity::W);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(synth_magnetic(
        &tr,
        &DipoleModel::default(),
        &NoiseSpec::none(),
        50.0,
        &mut rng
    )
    .is_err());
    assert!("X".parse::<Activity>().is_err());
    let cfg = CohortConfig {
        n_subjects: 0,
        ..CohortConfig::default()
    };
    assert!(cfg.validate().is_err());
}

#[test]
fn label_codes_round_trip() {
    for (i, a) in Activity::ALL.into_iter().enumerate() {
        assert_eq!(a.label(), i);
        assert_eq!(Activity::from_label(i), Some(a));
        assert_eq!(a.code().parse::<Activity>().unwrap(), a);
    }
    assert_eq!(Activity::J.label(), 0);
    assert_eq!(Activity::WW.label(), 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_profiles_are_valid(id in 0u32..1000, seed in any::<u64>()) {
        let p = SubjectProfile::sample(id, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(p.validate().is_ok());
    }

    #[test]
    fn feet_stay_in_tracking_range(id in 1u32..50, act in 0usize..4, phase in 0.0f64..1.0) {
        let p = profile(id);
        let var = RecordingVariation { phase, heading_rad: 1.0, tempo_scale: 1.0 };
        let tr = gen_trajectory(&p, &ActivityParams::new(Activity::from_label(act).unwrap(), 2.0), &var).unwrap();
        for foot in 0..2 {
            for pose in tr.feet[foot].iter().step_by(7) {
                let r = pose.position.norm();
                prop_assert!(r > 0.3 && r < 1.5 && pose.position.z > 0.0, "r={}", r);
            }
        }
    }
}
