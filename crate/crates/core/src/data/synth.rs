use ndarray::Array2;

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{child_seed, Rng};

/// Isotropic unit-variance Gaussian clouds, one per class, for
/// `num_tasks * classes_per_task` classes.
///
/// Class means are `separation * u_k` with `u_k` drawn uniformly on the unit
/// sphere, so typical pairwise mean distance is about `separation * sqrt(2)`.
/// Samples are laid out class by class. Inputs are not rescaled to `[0, 1]`.
pub fn synth_gaussian_tasks(
    num_tasks: usize,
    classes_per_task: usize,
    dim: usize,
    n_per_class: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    for (field, v) in [
        ("num_tasks", num_tasks),
        ("classes_per_task", classes_per_task),
        ("dim", dim),
        ("n_per_class", n_per_class),
    ] {
        if v == 0 {
            return Err(Error::OutOfRange {
                field: field.into(),
                detail: "must be positive".into(),
            });
        }
    }
    if !(separation >= 0.0) || !separation.is_finite() {
        return Err(Error::OutOfRange {
            field: "separation".into(),
            detail: format!("{separation} is not a finite non-negative number"),
        });
    }
    let classes = num_tasks * classes_per_task;
    let mut mean_rng = Rng::new(child_seed(seed, "synth-means", 0));
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|_| {
            let z: Vec<f64> = (0..dim).map(|_| mean_rng.normal()).collect();
            let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            z.into_iter().map(|v| separation * v / norm).collect()
        })
        .collect();
    let n = classes * n_per_class;
    let mut inputs = Array2::zeros((n, dim));
    let mut labels = Vec::with_capacity(n);
    let mut noise = Rng::new(child_seed(seed, "synth-noise", 0));
    for (k, mean) in means.iter().enumerate() {
        for s in 0..n_per_class {
            let row = k * n_per_class + s;
            for (j, m) in mean.iter().enumerate() {
                inputs[[row, j]] = m + noise.normal();
            }
            labels.push(k);
        }
    }
    Ok(Dataset { inputs, labels })
}
