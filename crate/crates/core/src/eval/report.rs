//! Human-readable and plot-ready renderings of evaluation results.

use std::fmt::Write;

use serde::Serialize;

use super::{AblationReport, AggregateReport, ModalityTable, RunReport};
use crate::simgait::Activity;

fn class_name(i: usize) -> String {
    Activity::from_label(i)
        .map(|a| a.code().to_string())
        .unwrap_or_else(|| i.to_string())
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialise");
    s.push('\n');
    s
}

pub fn run_text(r: &RunReport) -> String {
    let n = r.confusion.len();
    let mut s = String::new();
    writeln!(s, "run seed {}: accuracy {:.4}", r.run_seed, r.accuracy).unwrap();
    writeln!(s, "confusion (rows true, columns predicted):").unwrap();
    write!(s, "{:>6}", "").unwrap();
    for j in 0..n {
        write!(s, "{:>6}", class_name(j)).unwrap();
    }
    s.push('\n');
    for i in 0..n {
        write!(s, "{:>6}", class_name(i)).unwrap();
        for j in 0..n {
            write!(s, "{:>6}", r.confusion[i][j]).unwrap();
        }
        s.push('\n');
    }
    writeln!(
        s,
        "{:>6}{:>11}{:>9}{:>8}",
        "class", "precision", "recall", "auc"
    )
    .unwrap();
    for i in 0..n {
        writeln!(
            s,
            "{:>6}{:>11.4}{:>9.4}{:>8.4}",
            class_name(i),
            r.precision[i],
            r.recall[i],
            r.roc[i].auc
        )
        .unwrap();
    }
    writeln!(
        s,
        "W vs WW: restricted accuracy {:.4}, mean recall {:.4}",
        r.w_ww.restricted_accuracy, r.w_ww.mean_recall
    )
    .unwrap();
    s
}

pub fn aggregate_text(a: &AggregateReport) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "{} {} window {} features {}: {} runs",
        a.tag.modality, a.tag.architecture, a.tag.window_len, a.tag.features, a.n_runs
    )
    .unwrap();
    writeln!(
        s,
        "accuracy {:.2}% +- {:.2}%",
        100.0 * a.mean_accuracy,
        100.0 * a.std_accuracy
    )
    .unwrap();
    writeln!(
        s,
        "W vs WW: restricted accuracy {:.2}%, mean recall {:.2}%",
        100.0 * a.w_ww_restricted_accuracy,
        100.0 * a.w_ww_mean_recall
    )
    .unwrap();
    for r in &a.runs {
        writeln!(s, "  seed {:>6}  accuracy {:.4}", r.run_seed, r.accuracy).unwrap();
    }
    for f in &a.failed {
        writeln!(s, "  seed {:>6}  FAILED: {}", f.seed, f.error).unwrap();
    }
    writeln!(s, "run closest to the mean: seed {}", a.closest_to_mean).unwrap();
    s.push_str(&run_text(a.closest_run()));
    s
}

pub fn ablation_text(r: &AblationReport) -> String {
    let mut s = String::new();
    for (name, a) in [
        ("position", &r.position),
        ("orientation", &r.orientation),
        ("combined", &r.combined),
    ] {
        writeln!(
            s,
            "{:<12} {:.2}% +- {:.2}%",
            name,
            100.0 * a.mean_accuracy,
            100.0 * a.std_accuracy
        )
        .unwrap();
    }
    writeln!(
        s,
        "combined minus best subset: {:+.2}%",
        100.0 * r.combined_margin()
    )
    .unwrap();
    s
}

pub fn comparison_text(t: &ModalityTable) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "{:<6}{:>8}{:>20}{:>20}{:>12}{:>12}",
        "model", "window", "magnetic", "imu", "acc gap", "W/WW gap"
    )
    .unwrap();
    for c in &t.cells {
        let cell = |a: &AggregateReport| {
            format!(
                "{:.2}+-{:.2}%",
                100.0 * a.mean_accuracy,
                100.0 * a.std_accuracy
            )
        };
        writeln!(
            s,
            "{:<6}{:>8}{:>20}{:>20}{:>+11.2}%{:>+11.2}%",
            c.architecture.to_string(),
            c.window_len,
            cell(&c.magnetic),
            cell(&c.imu),
            100.0 * c.accuracy_gap,
            100.0 * c.w_ww_gap
        )
        .unwrap();
    }
    s
}

/// `class,threshold,fpr,tpr` rows for every class.
pub fn roc_csv(r: &RunReport) -> String {
    let mut s = String::from("class,threshold,fpr,tpr\n");
    for c in &r.roc {
        for p in &c.points {
            writeln!(
                s,
                "{},{},{},{}",
                class_name(c.class),
                p.threshold,
                p.fpr,
                p.tpr
            )
            .unwrap();
        }
    }
    s
}

/// Minimal SVG plot of the per-class ROC curves.
pub fn roc_svg(r: &RunReport) -> String {
    const SIZE: f64 = 320.0;
    const PAD: f64 = 40.0;
    const COLOURS: [&str; 4] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a"];
    let map = |fpr: f64, tpr: f64| (PAD + fpr * SIZE, PAD + (1.0 - tpr) * SIZE);
    let full = SIZE + 2.0 * PAD;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{full}" height="{full}" viewBox="0 0 {full} {full}">"#
    )
    .unwrap();
    writeln!(
        s,
        r##"<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="none" stroke="#444"/>"##
    )
    .unwrap();
    let (x0, y0) = map(0.0, 0.0);
    let (x1, y1) = map(1.0, 1.0);
    writeln!(
        s,
        r##"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y1}" stroke="#bbb" stroke-dasharray="4 4"/>"##
    )
    .unwrap();
    for (i, c) in r.roc.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        let pts: Vec<String> = c
            .points
            .iter()
            .map(|p| {
                let (x, y) = map(p.fpr, p.tpr);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" fill="{colour}">{} AUC {:.3}</text>"#,
            PAD + SIZE - 110.0,
            PAD + SIZE - 10.0 - 16.0 * (r.roc.len() - 1 - i) as f64,
            class_name(c.class),
            c.auc
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">false positive rate</text>"#,
        PAD + SIZE / 2.0,
        full - 10.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="12" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 12 {})">true positive rate</text>"#,
        PAD + SIZE / 2.0,
        PAD + SIZE / 2.0
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}
