//! Experiment orchestration: config parsing, the regime x method x order
//! matrix, and report files.

pub mod config;
pub mod matrix;
pub mod report;

pub use config::{parse_config, DatasetSource, ExperimentConfig};
pub use matrix::{run_matrix, CellEntry, CellStatus, Manifest, MatrixOutcome, RunOptions, RunRecord};
pub use report::{emit_reports, tau_matrix_csv, ReportFiles};
pub use matrix::load_records;

use crate::data::{load_idx, split_native, split_tasks, synth_gaussian_tasks, TaskData};
use crate::error::Result;
use crate::rng::child_seed;

/// Materialise the per-task train/test batches described by a config.
pub fn load_tasks(cfg: &ExperimentConfig) -> Result<Vec<TaskData>> {
    let (t, c) = (cfg.num_tasks, cfg.classes_per_task);
    let split_seed = child_seed(cfg.master_seed, "split", 0);
    match &cfg.dataset {
        DatasetSource::Synthetic {
            dim,
            n_per_class,
            separation,
            test_fraction,
        } => {
            let ds = synth_gaussian_tasks(t, c, *dim, *n_per_class, *separation, child_seed(cfg.master_seed, "synth", 0))?;
            let split = split_tasks(&ds, t, c, *test_fraction, split_seed)?;
            Ok(TaskData::from_split(&split, &ds, &ds))
        }
        DatasetSource::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
            test_fraction,
        } => {
            let train = load_idx(train_images, train_labels)?;
            match (test_images, test_labels) {
                (Some(ti), Some(tl)) => {
                    let test = load_idx(ti, tl)?;
                    let split = split_native(&train, &test, t, c)?;
                    Ok(TaskData::from_split(&split, &train, &test))
                }
                _ => {
                    let split = split_tasks(&train, t, c, *test_fraction, split_seed)?;
                    Ok(TaskData::from_split(&split, &train, &train))
                }
            }
        }
    }
}
