//! One instrumented projected step: the update direction splits into a task
//! part, a preservation part and their interaction.

use regime_lab::trainer::projected_step;
use regime_lab::{ParamVector, TrainableSubspace};

fn main() -> regime_lab::Result<()> {
    let theta = ParamVector::from(vec![0.5, -1.0, 2.0, 0.0]);
    let g = ParamVector::from(vec![1.0, 2.0, -1.0, 0.5]);
    let r = ParamVector::from(vec![-0.5, 1.0, 1.0, 3.0]);
    let sub = TrainableSubspace::from_mask(vec![true, true, false, false], "first two");

    let (next, rec, composite) = projected_step(&theta, &g, &r, &sub, 0.1, 2.0)?;
    println!("theta+    = {:?}", &next[..]);
    println!("P(g + lr) = {:?}", &composite[..]);
    println!("|Pg| = {:.4}  |Pr| = {:.4}  gamma = {:.4}", rec.norm_g, rec.norm_r, rec.gamma_interaction);
    let rebuilt = rec.norm_g.powi(2) + 2.0 * rec.lambda * rec.gamma_interaction + (rec.lambda * rec.norm_r).powi(2);
    println!("|P(g + lr)|^2 = {:.6}, rebuilt from parts = {:.6}", rec.norm_projected_update_sq, rebuilt);
    println!("frozen coordinates unchanged: {}", sub.frozen_indices().all(|i| next[i] == theta[i]));
    Ok(())
}
