//! Train one method through a task sequence under every depth regime.

use regime_lab::data::{split_tasks, synth_gaussian_tasks, TaskData, TaskOrder};
use regime_lab::methods::{MethodHyper, MethodKind};
use regime_lab::metrics::{average_accuracy, average_forgetting};
use regime_lab::trainer::{run_sequence, RunConfig, TrainHyper};
use regime_lab::NetworkSpec;

fn main() -> regime_lab::Result<()> {
    let method: MethodKind = std::env::args().nth(1).as_deref().unwrap_or("lwf").parse()?;
    let ds = synth_gaussian_tasks(5, 2, 16, 100, 3.0, 1)?;
    let split = split_tasks(&ds, 5, 2, 0.25, 2)?;
    let tasks = TaskData::from_split(&split, &ds, &ds);
    let spec = NetworkSpec {
        input_dim: 16,
        block_widths: vec![32; 4],
        num_tasks: 5,
        classes_per_task: 2,
    };

    println!("{method}: regime  avg_acc  forgetting  mean |P grad|");
    for k in 1..=4 {
        let cfg = RunConfig {
            network: spec.clone(),
            k_blocks: k,
            method,
            method_hyper: MethodHyper::default(),
            order: TaskOrder { order_id: 0, tasks: vec![0, 1, 2, 3, 4], canonical: true },
            train: TrainHyper::default(),
            stream_seed: 3,
            cell_seed: 4,
        };
        let r = run_sequence(&cfg, &tasks)?;
        println!(
            "{:>14}  {:.4}   {:.4}      {:.4}",
            r.regime,
            average_accuracy(&r.accuracy_matrix)?,
            average_forgetting(&r.accuracy_matrix, Default::default())?,
            r.mean_grad_norm()
        );
    }
    Ok(())
}
