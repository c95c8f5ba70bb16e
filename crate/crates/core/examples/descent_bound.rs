//! Check the projected descent inequality on random quadratics.
//!
//! `cargo run --release --example descent_bound -- 2000 5`

use regime_lab::verifier::{check_descent, fuzz_descent_with, QuadraticObjective, StepSizeMode};
use regime_lab::{ParamVector, TrainableSubspace};
use ndarray::{array, Array1};

fn main() -> regime_lab::Result<()> {
    let mut args = std::env::args().skip(1);
    let trials = args.next().and_then(|a| a.parse().ok()).unwrap_or(1000);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(1);

    // A 2-d quadratic with only the first coordinate trainable.
    let m = array![[2.0, 0.5], [0.0, 1.0]];
    let obj = QuadraticObjective::from_factor(&m, Array1::from(vec![1.0, -1.0]))?;
    let sub = TrainableSubspace::from_mask(vec![true, false], "first");
    let theta = ParamVector::from(vec![0.3, -0.7]);
    let r = check_descent(&obj, &theta, &sub, 0.1)?;
    println!("J = {:.6}  J+ = {:.6}  bound = {:.6}  holds = {}", r.value, r.value_next, r.bound, r.holds);

    for mode in [StepSizeMode::Uniform, StepSizeMode::Boundary] {
        let s = fuzz_descent_with(trials, 12, seed, mode)?;
        println!(
            "{mode:?}: {} trials, {} violations, {} sharp-bound violations, max excess {:e}",
            s.trials, s.violations, s.sharp_violations, s.max_excess
        );
    }
    Ok(())
}
