//! Datasets, task splits and task orders.

pub mod idx;
mod orders;
mod split;
mod synth;

use ndarray::Array2;

pub use idx::{load_idx, IdxError};
pub use orders::{orders_digest, sample_orders, TaskOrder};
pub use split::{split_native, split_tasks, TaskData, TaskIndices, TaskSplit};
pub use synth::synth_gaussian_tasks;

/// Labelled samples, one row per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub inputs: Array2<f64>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Sample indices grouped by class, in dataset order.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.num_classes()];
        for (i, &y) in self.labels.iter().enumerate() {
            groups[y].push(i);
        }
        groups
    }
}
