//! Full regime x method x order protocol from a config file, then reports.
//!
//! `cargo run --release --example protocol_matrix -- configs/synthetic.toml /tmp/out`

use std::path::PathBuf;

use regime_lab::runner::{emit_reports, parse_config, run_matrix, CellStatus, RunOptions};

fn main() -> regime_lab::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args.next().unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/synthetic.toml").into());
    let cfg = parse_config(&std::fs::read_to_string(&config)?)?;
    let opts = RunOptions {
        output_dir: args.next().map(PathBuf::from),
        ..Default::default()
    };
    let out = run_matrix(&cfg, &opts)?;
    println!(
        "{} cells done ({} resumed), {} failed",
        out.manifest.count(CellStatus::Done),
        out.skipped,
        out.manifest.count(CellStatus::Failed)
    );
    let report = emit_reports(&out.output_dir)?;
    print!("{}", std::fs::read_to_string(out.output_dir.join("summary.csv"))?);
    let m = &report.agreement;
    for (i, a) in m.regimes.iter().enumerate() {
        let row: Vec<String> = m.mean_tau[i].iter().map(|t| t.map_or("NA".into(), |v| format!("{v:.3}"))).collect();
        println!("tau {a:>7}: {}", row.join("  "));
    }
    Ok(())
}
