use ndarray::Axis;

use super::Dataset;
use crate::error::{Error, Result};
use crate::nn::Batch;
use crate::rng::{child_seed, Rng};

/// Train/test sample indices owned by one task.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Task `t` owns original classes `[t*C, (t+1)*C)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskSplit {
    pub classes_per_task: usize,
    pub tasks: Vec<TaskIndices>,
}

impl TaskSplit {
    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn classes_of(&self, task: usize) -> std::ops::Range<usize> {
        task * self.classes_per_task..(task + 1) * self.classes_per_task
    }
}

/// Materialised data for one task with labels re-indexed to `[0, C)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskData {
    pub task_id: usize,
    pub train: Batch,
    pub test: Batch,
}

impl TaskData {
    /// Materialise every task; `test_source` is the dataset the test indices
    /// refer to (the training dataset itself for [`split_tasks`]).
    pub fn from_split(split: &TaskSplit, train_source: &Dataset, test_source: &Dataset) -> Vec<TaskData> {
        let c = split.classes_per_task;
        let take = |ds: &Dataset, idx: &[usize], task: usize| Batch {
            inputs: ds.inputs.select(Axis(0), idx),
            labels: idx.iter().map(|&i| ds.labels[i] - task * c).collect(),
            task_id: task,
        };
        split
            .tasks
            .iter()
            .enumerate()
            .map(|(t, ix)| TaskData {
                task_id: t,
                train: take(train_source, &ix.train, t),
                test: take(test_source, &ix.test, t),
            })
            .collect()
    }
}

fn check_classes(ds: &Dataset, num_tasks: usize, classes_per_task: usize) -> Result<Vec<Vec<usize>>> {
    if num_tasks == 0 || classes_per_task == 0 {
        return Err(Error::OutOfRange {
            field: "tasks".into(),
            detail: "num_tasks and classes_per_task must be positive".into(),
        });
    }
    let needed = num_tasks * classes_per_task;
    let groups = ds.indices_by_class();
    let present = groups.iter().take(needed).filter(|g| !g.is_empty()).count();
    if present < needed {
        return Err(Error::OutOfRange {
            field: "dataset classes".into(),
            detail: format!("{needed} classes needed, {present} present"),
        });
    }
    Ok(groups)
}

/// Contiguous class-to-task assignment with a seeded per-class train/test
/// split. Each class contributes `round(n * test_fraction)` test samples,
/// clamped so that both sides are non-empty.
pub fn split_tasks(
    ds: &Dataset,
    num_tasks: usize,
    classes_per_task: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<TaskSplit> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::OutOfRange {
            field: "test_fraction".into(),
            detail: format!("{test_fraction} not in (0, 1); test sets may not be empty"),
        });
    }
    let groups = check_classes(ds, num_tasks, classes_per_task)?;
    let mut tasks = Vec::with_capacity(num_tasks);
    for t in 0..num_tasks {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for class in t * classes_per_task..(t + 1) * classes_per_task {
            let mut idx = groups[class].clone();
            if idx.len() < 2 {
                return Err(Error::OutOfRange {
                    field: "dataset classes".into(),
                    detail: format!("class {class} has {} sample(s); need 2 to split", idx.len()),
                });
            }
            Rng::new(child_seed(seed, "split-class", class as u64)).shuffle(&mut idx);
            let n_test = ((idx.len() as f64 * test_fraction).round() as usize).clamp(1, idx.len() - 1);
            test.extend_from_slice(&idx[..n_test]);
            train.extend_from_slice(&idx[n_test..]);
        }
        tasks.push(TaskIndices { train, test });
    }
    Ok(TaskSplit {
        classes_per_task,
        tasks,
    })
}

/// Task split over datasets that ship their own test partition.
pub fn split_native(
    train: &Dataset,
    test: &Dataset,
    num_tasks: usize,
    classes_per_task: usize,
) -> Result<TaskSplit> {
    let train_groups = check_classes(train, num_tasks, classes_per_task)?;
    let test_groups = check_classes(test, num_tasks, classes_per_task)?;
    let tasks = (0..num_tasks)
        .map(|t| {
            let classes = t * classes_per_task..(t + 1) * classes_per_task;
            TaskIndices {
                train: classes.clone().flat_map(|c| train_groups[c].iter().copied()).collect(),
                test: classes.flat_map(|c| test_groups[c].iter().copied()).collect(),
            }
        })
        .collect();
    Ok(TaskSplit {
        classes_per_task,
        tasks,
    })
}
