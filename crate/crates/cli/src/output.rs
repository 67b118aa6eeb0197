//! CSV and manifest files of an experiment run.
//!
//! Numbers are written in Rust's shortest round-trip form and NaN as an
//! empty cell, so identical runs give identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use riskclass::eval::{compare, risk_row_label, roc_auc};
use serde::Serialize;

use crate::experiment::ExperimentRun;
use crate::CliError;

pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

/// File-name form of a class or method name.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::runtime(format!("cannot write {}: {e}", path.display()))
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

const RISK_ROWS: [(&str, usize, bool); 4] = [
    ("Train", 0, true),
    ("Train", 1, true),
    ("Test", 0, false),
    ("Test", 1, false),
];

fn risk_label(split: &str, k: usize) -> String {
    risk_row_label(split, if k == 0 { 0.0 } else { 1.0 })
}

/// Writes every CSV and the manifest; returns the written paths relative
/// to `out`.
pub fn write_all(run: &ExperimentRun, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let mut written = Vec::new();
    let mut emit = |rel: PathBuf, header: Vec<String>, rows: Vec<Vec<String>>| -> Result<(), CliError> {
        write_rows(&out.join(&rel), &header, &rows)?;
        written.push(rel);
        Ok(())
    };
    let cfg = &run.config;
    let names = &run.class_names;

    // metrics.csv
    let mut header = strings(&["trial", "seed", "method", "kind", "status", "avg_f1"]);
    header.extend(names.iter().map(|n| format!("f1_{n}")));
    header.extend(strings(&[
        "parity_diff",
        "statistical_rate",
        "rate_undefined",
        "iterations",
        "gamma",
        "error",
    ]));
    let mut rows = Vec::new();
    for t in &run.trials {
        for (m, o) in cfg.methods.iter().zip(&t.methods) {
            let r = &o.result;
            let mut row = vec![
                t.trial.to_string(),
                t.seed.to_string(),
                m.id.clone(),
                m.kind.name().to_string(),
                if r.is_ok() { "ok" } else { "failed" }.to_string(),
                num(r.avg_f1),
            ];
            for c in 0..names.len() {
                row.push(r.per_class_f1.get(c).map_or(String::new(), |v| num(*v)));
            }
            match &r.fairness {
                Some(f) => row.extend([
                    num(f.parity_diff),
                    num(f.statistical_rate),
                    f.rate_undefined.to_string(),
                ]),
                None => row.extend([String::new(), String::new(), String::new()]),
            }
            row.push(o.iterations.map_or(String::new(), |k| k.to_string()));
            row.push(o.gamma.map_or(String::new(), num));
            row.push(r.error.clone().unwrap_or_default());
            rows.push(row);
        }
    }
    emit("metrics.csv".into(), header, rows)?;

    // trial_risks.csv and risk_table.csv
    let mut header = strings(&["trial", "method", "row"]);
    header.extend(names.iter().cloned());
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for (mi, m) in cfg.methods.iter().enumerate() {
        let mut sums = vec![vec![0.0; names.len()]; RISK_ROWS.len()];
        let mut count = 0usize;
        for t in &run.trials {
            let r = &t.methods[mi].result;
            if !r.is_ok() {
                continue;
            }
            count += 1;
            for (ri, &(split, k, is_train)) in RISK_ROWS.iter().enumerate() {
                let values = match (is_train, k) {
                    (true, 0) => &r.train_exp,
                    (true, _) => &r.train_msd,
                    (false, 0) => &r.test_exp,
                    (false, _) => &r.test_msd,
                };
                let mut row = vec![t.trial.to_string(), m.id.clone(), risk_label(split, k)];
                row.extend(values.iter().map(|v| num(*v)));
                rows.push(row);
                for (s, v) in sums[ri].iter_mut().zip(values) {
                    *s += v;
                }
            }
        }
        for (ri, &(split, k, _)) in RISK_ROWS.iter().enumerate() {
            let mut row = vec![m.id.clone(), risk_label(split, k)];
            row.extend(sums[ri].iter().map(|s| {
                if count == 0 {
                    String::new()
                } else {
                    num(s / count as f64)
                }
            }));
            table.push(row);
        }
    }
    emit("trial_risks.csv".into(), header, rows)?;
    let mut header = strings(&["method", "row"]);
    header.extend(names.iter().cloned());
    emit("risk_table.csv".into(), header, table)?;

    // comparison.csv
    let header = strings(&[
        "method_a",
        "method_b",
        "n",
        "mean_a",
        "mean_b",
        "fsd",
        "ssd",
        "fsd_violation",
        "ssd_violation",
        "t_stat",
        "p_value",
        "note",
    ]);
    let mut rows = Vec::new();
    for (a, b) in cfg.comparison_pairs() {
        let (ia, ib) = (
            run.method_index(&a).expect("validated"),
            run.method_index(&b).expect("validated"),
        );
        let (mut xa, mut xb) = (Vec::new(), Vec::new());
        for (ra, rb) in run.results(ia).zip(run.results(ib)) {
            if ra.is_ok() && rb.is_ok() {
                xa.push(ra.avg_f1);
                xb.push(rb.avg_f1);
            }
        }
        let mut row = vec![a.clone(), b.clone(), xa.len().to_string()];
        match compare(&a, &xa, &b, &xb) {
            Ok(c) => row.extend([
                num(c.mean_a),
                num(c.mean_b),
                c.dominance.fsd.to_string(),
                c.dominance.ssd.to_string(),
                num(c.dominance.fsd_violation),
                num(c.dominance.ssd_violation),
                num(c.t_stat),
                num(c.p_value),
                String::new(),
            ]),
            Err(e) => {
                row.extend(std::iter::repeat_n(String::new(), 8));
                row.push(e.to_string());
            }
        }
        rows.push(row);
    }
    emit("comparison.csv".into(), header, rows)?;

    // f1_cdf.csv
    let mut rows = Vec::new();
    for (mi, m) in cfg.methods.iter().enumerate() {
        let mut v: Vec<f64> = run.results(mi).filter(|r| r.is_ok()).map(|r| r.avg_f1).collect();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        for (i, x) in v.iter().enumerate() {
            rows.push(vec![m.id.clone(), num(*x), num((i + 1) as f64 / n)]);
        }
    }
    emit("f1_cdf.csv".into(), strings(&["method", "avg_f1", "cdf"]), rows)?;

    // roc/<class>.csv and auc.csv, test scores pooled over trials
    let mut auc_rows = Vec::new();
    for (c, name) in names.iter().enumerate() {
        let mut rows = Vec::new();
        for (mi, m) in cfg.methods.iter().enumerate() {
            let (mut scores, mut truth) = (Vec::new(), Vec::new());
            for t in &run.trials {
                let o = &t.methods[mi];
                if o.result.is_ok() {
                    scores.extend(o.test_scores.iter().cloned());
                    truth.extend(t.test_labels.iter().copied());
                }
            }
            let Ok(roc) = roc_auc(&scores, &truth, c) else { continue };
            rows.push(vec![m.id.clone(), String::new(), "0".into(), "0".into()]);
            for (th, (fpr, tpr)) in roc.thresholds.iter().zip(&roc.points[1..]) {
                rows.push(vec![m.id.clone(), num(*th), num(*fpr), num(*tpr)]);
            }
            auc_rows.push(vec![name.clone(), m.id.clone(), num(roc.auc)]);
        }
        emit(
            PathBuf::from("roc").join(format!("{}.csv", file_stem(name))),
            strings(&["method", "threshold", "fpr", "tpr"]),
            rows,
        )?;
    }
    emit("auc.csv".into(), strings(&["class", "method", "auc"]), auc_rows)?;

    // traces/<method>.csv
    for (mi, m) in cfg.methods.iter().enumerate() {
        if !m.kind.is_two_stage() {
            continue;
        }
        let mut rows = Vec::new();
        for t in &run.trials {
            for r in &t.methods[mi].trace {
                rows.push(vec![
                    t.trial.to_string(),
                    r.k.to_string(),
                    num(r.rho_k),
                    num(r.rho_bar),
                    num(r.alpha),
                    format!("{:?}", r.step_kind).to_lowercase(),
                    num(r.step_norm),
                ]);
            }
        }
        emit(
            PathBuf::from("traces").join(format!("{}.csv", file_stem(&m.id))),
            strings(&["trial", "k", "rho_k", "rho_bar", "alpha", "step_kind", "step_norm"]),
            rows,
        )?;
    }

    write_manifest(run, out, &written)?;
    written.push("run_manifest.json".into());
    Ok(written)
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    tool_version: &'static str,
    library_version: &'static str,
    base_seed: u64,
    trials: usize,
    trial_seeds: Vec<u64>,
    class_names: &'a [String],
    failed_results: usize,
    outputs: Vec<String>,
    config: &'a crate::config::ExperimentConfig,
}

fn write_manifest(run: &ExperimentRun, out: &Path, written: &[PathBuf]) -> Result<(), CliError> {
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        tool_version: env!("CARGO_PKG_VERSION"),
        library_version: riskclass::VERSION,
        base_seed: run.config.base_seed,
        trials: run.config.trials,
        trial_seeds: run.seeds(),
        class_names: &run.class_names,
        failed_results: run.n_failed(),
        outputs: written.iter().map(|p| p.to_string_lossy().replace('\\', "/")).collect(),
        config: &run.config,
    };
    let path = out.join("run_manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| io_err(&path, e))?;
    fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, -2.5e17] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(f64::NAN), "");
    }

    #[test]
    fn stems_are_safe() {
        assert_eq!(file_stem("a b/c"), "a_b_c");
        assert_eq!(file_stem("class-1.x"), "class-1.x");
    }
}
