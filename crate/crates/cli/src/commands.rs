use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use gaitmag::eval::{self, report, AggregateReport, ModalityTable};
use gaitmag::logs::{self, LogError, Modality, PacketRecord, Payload};
use gaitmag::magmodel::{DipoleModel, HalfSpace, Measurement, TrackingRange};
use gaitmag::pipeline::{self, Dataset};
use gaitmag::simgait::{self, MANIFEST_FILE};
use gaitnet::{Architecture, TrainConfig};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::lock::DirLock;
use crate::CliError;

fn runtime(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| runtime(path, e))
}

/// Report document with the effective configuration attached.
#[derive(Serialize)]
struct Output<'a, T: Serialize> {
    config: &'a ExperimentConfig,
    #[serde(flatten)]
    body: T,
}

fn write_outputs<T: Serialize>(
    out: &Path,
    name: &str,
    cfg: &ExperimentConfig,
    body: T,
) -> Result<(), CliError> {
    write(&out.join("config.toml"), cfg.to_toml())?;
    write(
        &out.join(name),
        report::to_json(&Output { config: cfg, body }),
    )
}

pub fn simulate(cfg: &ExperimentConfig, out: &Path, field_log: bool) -> Result<(), CliError> {
    let _lock = DirLock::acquire(out)?;
    let entries = simgait::gen_cohort(&cfg.simulate, out)?;
    if field_log {
        for (id, modality) in cfg.simulate.recording_ids() {
            if modality != Modality::Magnetic {
                continue;
            }
            let records = simgait::generate_field_log(&cfg.simulate, id)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            let path = out
                .join("field")
                .join(id.file_name(modality).replace("magnetic/", ""));
            fs::create_dir_all(path.parent().expect("has parent"))
                .map_err(|e| runtime(&path, e))?;
            let file = fs::File::create(&path).map_err(|e| runtime(&path, e))?;
            logs::write_field_log(BufWriter::new(file), &records).map_err(|e| runtime(&path, e))?;
        }
    }
    #[derive(Serialize)]
    struct Summary {
        recordings: usize,
        magnetic: usize,
        imu: usize,
    }
    let count = |m: Modality| entries.iter().filter(|e| e.modality == m).count();
    write_outputs(
        out,
        "simulate.json",
        cfg,
        Summary {
            recordings: entries.len(),
            magnetic: count(Modality::Magnetic),
            imu: count(Modality::Imu),
        },
    )?;
    println!("{}", out.join(MANIFEST_FILE).display());
    Ok(())
}

pub fn track(cfg: &ExperimentConfig, input: &Path, out: &Path) -> Result<(), CliError> {
    let file = fs::File::open(input).map_err(|e| runtime(input, e))?;
    let records = logs::read_field_log(BufReader::new(file)).map_err(|e| runtime(input, e))?;
    let model = DipoleModel::new(cfg.simulate.dipole, TrackingRange::default())
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let _lock = DirLock::acquire(out)?;
    let mut poses = Vec::with_capacity(records.len());
    let (mut max_pos, mut sum_pos, mut max_rot) = (0.0f64, 0.0, 0.0f64);
    for (i, r) in records.iter().enumerate() {
        let m = Measurement {
            t: r.t,
            b_rx: r.b_rx,
            q_rx: r.q_rx,
            q_tx: r.q_tx,
        };
        let fix = model
            .track(&m, HalfSpace::default())
            .map_err(|e| runtime(input, format!("line {}: {e}", i + 2)))?;
        if let Some(truth) = r.truth {
            let err = (fix.pose.position - truth.position).norm();
            max_pos = max_pos.max(err);
            sum_pos += err;
            max_rot = max_rot.max(fix.pose.orientation.angle_to(truth.orientation));
        }
        poses.push(PacketRecord {
            t: r.t,
            rx_id: r.rx_id,
            payload: Payload::Pose(fix.pose),
        });
    }
    let path = out.join("poses.csv");
    let file = fs::File::create(&path).map_err(|e| runtime(&path, e))?;
    logs::write_packets(BufWriter::new(file), Modality::Magnetic, &poses)
        .map_err(|e| runtime(&path, e))?;

    #[derive(Serialize)]
    struct TruthError {
        max_position_error_m: f64,
        mean_position_error_m: f64,
        max_orientation_error_rad: f64,
    }
    #[derive(Serialize)]
    struct Summary {
        poses: usize,
        truth: Option<TruthError>,
    }
    let has_truth = !records.is_empty() && records.iter().all(|r| r.truth.is_some());
    let truth = has_truth.then(|| TruthError {
        max_position_error_m: max_pos,
        mean_position_error_m: sum_pos / records.len() as f64,
        max_orientation_error_rad: max_rot,
    });
    if let Some(t) = &truth {
        println!(
            "{} poses; position error max {:.3e} m, mean {:.3e} m; orientation error max {:.3e} rad",
            poses.len(),
            t.max_position_error_m,
            t.mean_position_error_m,
            t.max_orientation_error_rad
        );
    } else {
        println!("{} poses", poses.len());
    }
    write_outputs(
        out,
        "track.json",
        cfg,
        Summary {
            poses: poses.len(),
            truth,
        },
    )
}

fn load_packets(path: &Path, expected: Modality) -> gaitmag::Result<Vec<PacketRecord>> {
    let file = fs::File::open(path).map_err(|e| LogError::io(path, e))?;
    let (modality, packets) = logs::read_packets(BufReader::new(file)).map_err(|e| match e {
        LogError::Parse { line, msg } => LogError::Parse {
            line,
            msg: format!("{}: {msg}", path.display()),
        },
        other => other,
    })?;
    if modality != expected {
        return Err(LogError::Header(format!(
            "{} holds {modality} packets, expected {expected}",
            path.display()
        ))
        .into());
    }
    Ok(packets)
}

pub fn preprocess(cfg: &ExperimentConfig, manifest: &Path, out: &Path) -> Result<(), CliError> {
    let file = fs::File::open(manifest).map_err(|e| runtime(manifest, e))?;
    let entries = logs::read_manifest(BufReader::new(file)).map_err(|e| runtime(manifest, e))?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let _lock = DirLock::acquire(out)?;
    let ds = pipeline::build_dataset(&entries, cfg.modality, &cfg.preprocess, |e| {
        load_packets(&base.join(&e.path), e.modality)
    })?;
    let bytes = pipeline::write_dataset(&ds);
    let digest = hex::encode(Sha256::digest(&bytes));
    write(&out.join("dataset.gmds"), &bytes)?;

    #[derive(Serialize)]
    struct Summary {
        windows: usize,
        windows_per_label: Vec<usize>,
        train: usize,
        val: usize,
        test: usize,
        window_len: usize,
        n_features: usize,
        feature_names: Vec<String>,
        sha256: String,
    }
    println!("{} windows, sha256 {digest}", ds.len());
    write_outputs(
        out,
        "dataset.json",
        cfg,
        Summary {
            windows: ds.len(),
            windows_per_label: ds.count_per_label(4),
            train: ds.train.len(),
            val: ds.val.len(),
            test: ds.test.len(),
            window_len: ds.meta.window_len,
            n_features: ds.meta.n_features,
            feature_names: pipeline::feature_names(ds.meta.modality),
            sha256: digest,
        },
    )
}

fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    Ok(pipeline::read_dataset_file(path)?)
}

fn train_config(cfg: &ExperimentConfig) -> TrainConfig {
    cfg.train.clone()
}

pub fn train(cfg: &ExperimentConfig, dataset: &Path, out: &Path) -> Result<(), CliError> {
    let ds = load_dataset(dataset)?;
    let _lock = DirLock::acquire(out)?;
    let model_cfg = eval::fit_config(&cfg.model_config(ds.meta.n_features), &ds);
    let mut model = gaitnet::Model::new(model_cfg, cfg.seed)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let inputs: Vec<&[f64]> = ds.train.iter().map(|w| w.data.as_slice()).collect();
    let labels: Vec<usize> = ds.train.iter().map(|w| w.label).collect();
    let history = gaitnet::train(&mut model, &inputs, &labels, &train_config(cfg))
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let val_inputs: Vec<&[f64]> = ds.val.iter().map(|w| w.data.as_slice()).collect();
    let val_labels: Vec<usize> = ds.val.iter().map(|w| w.label).collect();
    let val_accuracy = if ds.val.is_empty() {
        None
    } else {
        Some(
            gaitnet::accuracy(&model, &val_inputs, &val_labels)
                .map_err(|e| CliError::Runtime(e.to_string()))?,
        )
    };
    write(
        &out.join("model.gnnp"),
        gaitnet::io::params_to_bytes(&model),
    )?;

    #[derive(Serialize)]
    struct Summary {
        history: gaitnet::History,
        val_accuracy: Option<f64>,
        parameters: usize,
    }
    if let Some(a) = val_accuracy {
        println!("validation accuracy {:.4}", a);
    }
    write_outputs(
        out,
        "train.json",
        cfg,
        Summary {
            history,
            val_accuracy,
            parameters: model.param_count(),
        },
    )
}

fn seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    eval::run_seeds(cfg.seed, cfg.eval.runs)
}

fn write_roc(out: &Path, r: &AggregateReport) -> Result<(), CliError> {
    write(&out.join("roc.csv"), report::roc_csv(r.closest_run()))?;
    write(&out.join("roc.svg"), report::roc_svg(r.closest_run()))
}

pub fn eval(cfg: &ExperimentConfig, dataset: &Path, out: &Path) -> Result<(), CliError> {
    let ds = load_dataset(dataset)?;
    let _lock = DirLock::acquire(out)?;
    let model_cfg = cfg.model_config(ds.meta.n_features);
    let agg = eval::repeated_runs(&ds, &model_cfg, &train_config(cfg), &seeds(cfg), "all")
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let text = report::aggregate_text(&agg);
    print!("{text}");
    write(&out.join("report.txt"), &text)?;
    write_roc(out, &agg)?;
    write_outputs(out, "report.json", cfg, agg)
}

pub fn ablate(cfg: &ExperimentConfig, dataset: &Path, out: &Path) -> Result<(), CliError> {
    let ds = load_dataset(dataset)?;
    if ds.meta.modality != Modality::Magnetic {
        return Err(CliError::Validation(
            "ablation needs a magnetic dataset".into(),
        ));
    }
    let _lock = DirLock::acquire(out)?;
    let model_cfg = cfg.model_config(ds.meta.n_features);
    let r = eval::ablation(&ds, &model_cfg, &train_config(cfg), &seeds(cfg))
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let text = report::ablation_text(&r);
    print!("{text}");
    write(&out.join("ablation.txt"), &text)?;
    write_outputs(out, "ablation.json", cfg, r)
}

pub fn compare(
    cfg: &ExperimentConfig,
    magnetic: &[std::path::PathBuf],
    imu: &[std::path::PathBuf],
    archs: &[Architecture],
    out: &Path,
) -> Result<(), CliError> {
    if magnetic.len() != imu.len() {
        return Err(CliError::Validation(format!(
            "{} magnetic datasets but {} imu datasets",
            magnetic.len(),
            imu.len()
        )));
    }
    let archs = if archs.is_empty() {
        vec![Architecture::Cnn, Architecture::Lstm]
    } else {
        archs.to_vec()
    };
    let pairs = magnetic
        .iter()
        .zip(imu)
        .map(|(m, i)| Ok((load_dataset(m)?, load_dataset(i)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    for (m, i) in &pairs {
        if m.meta.modality != Modality::Magnetic || i.meta.modality != Modality::Imu {
            return Err(CliError::Validation(
                "datasets passed with the wrong modality flag".into(),
            ));
        }
        eval::check_same_cohort(m, i).map_err(|e| CliError::Validation(e.to_string()))?;
    }
    let _lock = DirLock::acquire(out)?;
    let mut table = ModalityTable { cells: Vec::new() };
    for &arch in &archs {
        for (m, i) in &pairs {
            let model_cfg = gaitnet::ModelConfig {
                architecture: arch,
                ..cfg.model_config(m.meta.n_features)
            };
            table.cells.push(
                eval::modality_compare(m, i, &model_cfg, &train_config(cfg), &seeds(cfg))
                    .map_err(|e| CliError::Runtime(e.to_string()))?,
            );
        }
    }
    let text = report::comparison_text(&table);
    print!("{text}");
    write(&out.join("comparison.txt"), &text)?;
    write_outputs(out, "comparison.json", cfg, table)
}
