//! Aggregate persisted run records into CSV reports.
//!
//! | file | columns |
//! |---|---|
//! | `summary.csv` | dataset, method, regime, mean_acc, std_acc, mean_forget, std_forget, n_orders |
//! | `tau_matrix.csv` | regime, one column per regime, excluded_pairs |
//! | `grad_forget.csv` | dataset, method, regime, k_blocks, mean_grad_norm, mean_forget, n_orders, tau_grad_forget |
//! | `plotdata/runs.csv` | method, regime, k_blocks, order_id, avg_acc, avg_forget, mean_grad_norm |
//! | `plotdata/accuracy_matrices.csv` | method, regime, order_id, row, col, task_id, accuracy |
//! | `plotdata/tau_per_order.csv` | order_id, regime_a, regime_b, tau |
//!
//! Undefined values are written as `NA`. Standard deviations are population
//! (divide by n). `tau_grad_forget` in `grad_forget.csv` is the same for every
//! row of a method; the `all` rows pool every method.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::matrix::{load_records, write_atomic, Manifest, RunRecord, SCHEMA_VERSION};
use crate::error::Result;
use crate::metrics::{
    average_accuracy, average_forgetting, grad_forgetting_tau, kendall_tau, mean_std, rank_methods,
    regime_agreement_matrix, AgreementMatrix, ForgettingConvention, RegimeScores,
};

#[derive(Clone, Debug)]
pub struct ReportFiles {
    pub files: Vec<PathBuf>,
    /// Missing, failed or unreadable cells that were left out.
    pub problems: Vec<String>,
    pub agreement: AgreementMatrix,
}

#[derive(Serialize)]
struct ReportMeta<'a> {
    schema_version: u32,
    dataset: &'a str,
    orders_digest: &'a str,
    tau_variant: &'static str,
    std: &'static str,
    forgetting: ForgettingConvention,
    grad_summary: &'static str,
    problems: &'a [String],
}

/// Per-record metrics used by every report.
struct Scored<'a> {
    record: &'a RunRecord,
    acc: f64,
    forget: f64,
    grad: f64,
}

/// Deterministic float formatting: shortest round-trip form, `NA` for NaN.
pub fn fmt(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), fmt)
}

fn score<'a>(records: &'a [RunRecord], conv: ForgettingConvention, problems: &mut Vec<String>) -> Vec<Scored<'a>> {
    records
        .iter()
        .filter_map(|r| {
            let metrics = average_accuracy(&r.accuracy_matrix)
                .and_then(|acc| Ok((acc, average_forgetting(&r.accuracy_matrix, conv)?)));
            match metrics {
                Ok((acc, forget)) => Some(Scored {
                    record: r,
                    acc,
                    forget,
                    grad: r.mean_grad_norm(),
                }),
                Err(e) => {
                    problems.push(format!("{}/{}/o{}: {e}", r.regime, r.method, r.order_id));
                    None
                }
            }
        })
        .collect()
}

fn agreement(manifest: &Manifest, scored: &[Scored]) -> (AgreementMatrix, Vec<RegimeScores>) {
    let regimes: Vec<String> = manifest.regimes.iter().map(|r| r.label.clone()).collect();
    let per_order: Vec<RegimeScores> = manifest
        .orders
        .iter()
        .map(|o| {
            let mut scores = RegimeScores::new();
            for s in scored.iter().filter(|s| s.record.order_id == o.order_id) {
                scores
                    .entry(s.record.regime.clone())
                    .or_default()
                    .insert(s.record.method.to_string(), s.acc);
            }
            scores
        })
        .collect();
    (regime_agreement_matrix(&per_order, &regimes), per_order)
}

fn render_tau_matrix(m: &AgreementMatrix) -> String {
    let mut out = String::from("regime");
    for r in &m.regimes {
        out.push(',');
        out.push_str(r);
    }
    out.push_str(",excluded_pairs\n");
    for (i, r) in m.regimes.iter().enumerate() {
        out.push_str(r);
        for j in 0..m.regimes.len() {
            out.push(',');
            out.push_str(&fmt_opt(m.mean_tau[i][j]));
        }
        let excluded: usize = m.excluded[i].iter().sum();
        out.push_str(&format!(",{excluded}\n"));
    }
    out
}

/// Recompute the regime agreement matrix from stored results.
pub fn tau_matrix_csv(dir: &Path) -> Result<(String, AgreementMatrix)> {
    let manifest = Manifest::load(dir)?;
    let (records, mut problems) = load_records(dir, &manifest);
    let scored = score(&records, manifest.forgetting, &mut problems);
    let (m, _) = agreement(&manifest, &scored);
    Ok((render_tau_matrix(&m), m))
}

/// Write every report file into `dir` from its manifest and run records.
/// Missing cells are listed in `problems` and aggregation proceeds over the
/// orders that are available.
pub fn emit_reports(dir: &Path) -> Result<ReportFiles> {
    let manifest = Manifest::load(dir)?;
    let (records, mut problems) = load_records(dir, &manifest);
    let scored = score(&records, manifest.forgetting, &mut problems);
    let dataset = &manifest.dataset;
    let mut files = Vec::new();
    let mut write = |name: &str, body: String| -> Result<()> {
        let path = dir.join(name);
        write_atomic(&path, body.as_bytes())?;
        files.push(path);
        Ok(())
    };

    let cell = |method: &str, regime: &str| -> Vec<&Scored> {
        scored
            .iter()
            .filter(|s| s.record.regime == regime && (method == "all" || s.record.method.label() == method))
            .collect()
    };

    let mut summary = String::from("dataset,method,regime,mean_acc,std_acc,mean_forget,std_forget,n_orders\n");
    for method in &manifest.methods {
        for regime in &manifest.regimes {
            let rows = cell(method.label(), &regime.label);
            let (ma, sa) = mean_std(&rows.iter().map(|s| s.acc).collect::<Vec<_>>());
            let (mf, sf) = mean_std(&rows.iter().map(|s| s.forget).collect::<Vec<_>>());
            summary.push_str(&format!(
                "{dataset},{method},{},{},{},{},{},{}\n",
                regime.label,
                fmt(ma),
                fmt(sa),
                fmt(mf),
                fmt(sf),
                rows.len()
            ));
        }
    }
    write("summary.csv", summary)?;

    let (agreement, per_order) = agreement(&manifest, &scored);
    write("tau_matrix.csv", render_tau_matrix(&agreement))?;

    let mut grad = String::from("dataset,method,regime,k_blocks,mean_grad_norm,mean_forget,n_orders,tau_grad_forget\n");
    let method_labels = manifest
        .methods
        .iter()
        .map(|m| m.label())
        .chain(std::iter::once("all"));
    for method in method_labels {
        let per_regime: Vec<(usize, f64, f64, usize)> = manifest
            .regimes
            .iter()
            .map(|r| {
                let rows = cell(method, &r.label);
                let g = mean_std(&rows.iter().map(|s| s.grad).collect::<Vec<_>>()).0;
                let f = mean_std(&rows.iter().map(|s| s.forget).collect::<Vec<_>>()).0;
                (r.k_blocks, g, f, rows.len())
            })
            .collect();
        let defined: Vec<(f64, f64)> = per_regime
            .iter()
            .filter(|(_, _, _, n)| *n > 0)
            .map(|&(_, g, f, _)| (g, f))
            .collect();
        let tau = grad_forgetting_tau(&defined).ok();
        for (regime, (k, g, f, n)) in manifest.regimes.iter().zip(&per_regime) {
            grad.push_str(&format!(
                "{dataset},{method},{},{k},{},{},{n},{}\n",
                regime.label,
                fmt(*g),
                fmt(*f),
                fmt_opt(tau)
            ));
        }
    }
    write("grad_forget.csv", grad)?;

    let mut runs = String::from("method,regime,k_blocks,order_id,avg_acc,avg_forget,mean_grad_norm\n");
    let mut matrices = String::from("method,regime,order_id,row,col,task_id,accuracy\n");
    for s in &scored {
        let r = s.record;
        runs.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.method,
            r.regime,
            r.k_blocks,
            r.order_id,
            fmt(s.acc),
            fmt(s.forget),
            fmt(s.grad)
        ));
        for (t, row) in r.accuracy_matrix.rows().iter().enumerate() {
            for (i, a) in row.iter().enumerate() {
                matrices.push_str(&format!(
                    "{},{},{},{t},{i},{},{}\n",
                    r.method,
                    r.regime,
                    r.order_id,
                    r.order.get(i).copied().unwrap_or(i),
                    fmt(*a)
                ));
            }
        }
    }
    write("plotdata/runs.csv", runs)?;
    write("plotdata/accuracy_matrices.csv", matrices)?;

    let mut taus = String::from("order_id,regime_a,regime_b,tau\n");
    for (order, scores) in manifest.orders.iter().zip(&per_order) {
        let rankings: BTreeMap<&str, _> = scores
            .iter()
            .filter_map(|(regime, s)| rank_methods(s).ok().map(|r| (regime.as_str(), r)))
            .collect();
        for (i, a) in agreement.regimes.iter().enumerate() {
            for b in &agreement.regimes[i + 1..] {
                let tau = match (rankings.get(a.as_str()), rankings.get(b.as_str())) {
                    (Some(x), Some(y)) => kendall_tau(x, y).ok(),
                    _ => None,
                };
                taus.push_str(&format!("{},{a},{b},{}\n", order.order_id, fmt_opt(tau)));
            }
        }
    }
    write("plotdata/tau_per_order.csv", taus)?;

    let meta = ReportMeta {
        schema_version: SCHEMA_VERSION,
        dataset,
        orders_digest: &manifest.orders_digest,
        tau_variant: "tau-b (tie-corrected); undefined taus are excluded and counted",
        std: "population (divide by n)",
        forgetting: manifest.forgetting,
        grad_summary: "per run: mean over tasks of the per-task mean over steps of ||P_S(g + lambda r)||",
        problems: &problems,
    };
    let mut body = serde_json::to_string_pretty(&meta)?;
    body.push('\n');
    write("report_meta.json", body)?;

    Ok(ReportFiles {
        files,
        problems,
        agreement,
    })
}
