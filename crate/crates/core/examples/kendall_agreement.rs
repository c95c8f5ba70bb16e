//! Rank methods per regime and measure how much the rankings agree.

use std::collections::BTreeMap;

use regime_lab::metrics::{kendall_tau, rank_methods, regime_agreement_matrix, RegimeScores};

fn scores(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn main() -> regime_lab::Result<()> {
    let shallow = scores(&[("ewc", 0.81), ("si", 0.79), ("lwf", 0.84), ("gem", 0.86)]);
    let full = scores(&[("ewc", 0.88), ("si", 0.88), ("lwf", 0.85), ("gem", 0.91)]);
    let a = rank_methods(&shallow)?;
    let b = rank_methods(&full)?;
    println!("last_1 ranks: {:?}", a.labels.iter().zip(&a.ranks).collect::<Vec<_>>());
    println!("full ranks:   {:?}", b.labels.iter().zip(&b.ranks).collect::<Vec<_>>());
    println!("tau-b = {:.4}", kendall_tau(&a, &b)?);

    // Two task orders; the second has every method tied under `full`,
    // so that pair is excluded rather than counted as zero.
    let mut first = RegimeScores::new();
    first.insert("last_1".into(), shallow.clone());
    first.insert("full".into(), full);
    let mut second = RegimeScores::new();
    second.insert("last_1".into(), shallow);
    second.insert("full".into(), scores(&[("ewc", 0.9), ("si", 0.9), ("lwf", 0.9), ("gem", 0.9)]));
    let regimes = vec!["last_1".to_string(), "full".to_string()];
    let m = regime_agreement_matrix(&[first, second], &regimes);
    println!("mean tau(last_1, full) = {:?}, excluded orders = {}", m.get("last_1", "full"), m.total_excluded());
    Ok(())
}
