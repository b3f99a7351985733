//! Sweeps the backpack weight effect and reports magnetic versus IMU
//! accuracy of the LSTM on 500-sample windows.
//!
//! usage: calibrate [runs] [weight_effect...]

use gaitmag::eval::{repeated_runs, run_seeds};
use gaitmag::logs::Modality;
use gaitmag::pipeline::{build_cohort_dataset, PreprocessConfig};
use gaitmag::simgait::CohortConfig;
use gaitnet::{Architecture, ModelConfig, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let runs: usize = args.first().map(|s| s.parse()).transpose()?.unwrap_or(3);
    let effects: Vec<f64> = if args.len() > 1 {
        args[1..]
            .iter()
            .map(|s| s.parse())
            .collect::<Result<_, _>>()?
    } else {
        vec![0.03, 0.05, 0.07, 0.1]
    };
    let pre = PreprocessConfig::default();
    let model = ModelConfig::new(Architecture::Lstm, pre.window_len, 12);
    let train = TrainConfig::default();
    let seeds = run_seeds(0, runs);
    for w in effects {
        let cohort = CohortConfig {
            weight_effect: w,
            ..CohortConfig::default()
        };
        let mut line = format!("weight_effect {w:.3}");
        for m in Modality::ALL {
            let t = std::time::Instant::now();
            let ds = build_cohort_dataset(&cohort, m, &pre)?;
            let r = repeated_runs(&ds, &model, &train, &seeds, "all")?;
            line += &format!(
                " | {m}: acc {:.2}+-{:.2} W/WW {:.2} recall {:.2} aucJ {:.3} aucM {:.3} ({:.0}s)",
                100.0 * r.mean_accuracy,
                100.0 * r.std_accuracy,
                100.0 * r.w_ww_restricted_accuracy,
                100.0 * r.w_ww_mean_recall,
                r.mean_auc(0),
                r.mean_auc(1),
                t.elapsed().as_secs_f64()
            );
        }
        println!("{line}");
    }
    Ok(())
}
