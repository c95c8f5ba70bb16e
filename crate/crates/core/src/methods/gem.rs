//! Gradient Episodic Memory: per-step projection of the current-task gradient
//! onto the cone `{ g : <g, g_k> >= 0 }` spanned by stored-task gradients.
//!
//! The projection is found through the dual
//! `min_{v >= 0} 1/2 v' (G G') v + (G g)' v`, with `g~ = g + G' v*`, solved by
//! projected coordinate descent. Constraint counts are small (one per
//! completed task), so each sweep is cheap.

use crate::error::{check_len, Error, Result};
use crate::nn::{Batch, Network, ParamVector};
use crate::regime::TrainableSubspace;
use crate::rng::Rng;

pub const KKT_TOLERANCE: f64 = 1e-9;
pub const MAX_SWEEPS: usize = 10_000;

#[derive(Clone, Debug)]
pub struct GemState {
    /// One stored sample set per completed task, in completion order.
    pub memory: Vec<Batch>,
    pub memory_per_task: usize,
    pub margin: f64,
}

impl GemState {
    pub fn new(memory_per_task: usize, margin: f64) -> Result<Self> {
        if memory_per_task == 0 {
            return Err(Error::OutOfRange {
                field: "gem.memory_per_task".into(),
                detail: "must be at least 1".into(),
            });
        }
        if !(margin >= 0.0) {
            return Err(Error::OutOfRange {
                field: "gem.margin".into(),
                detail: format!("{margin} is negative"),
            });
        }
        Ok(Self {
            memory: Vec::new(),
            memory_per_task,
            margin,
        })
    }

    /// Store a deterministic subsample of `m` examples from the finished task.
    /// When the task has fewer than `m` samples all of them are kept and a
    /// warning is returned.
    pub fn store(&mut self, task_batches: &[Batch], m: usize, seed: u64) -> Result<Option<String>> {
        if m == 0 {
            return Err(Error::OutOfRange {
                field: "gem.memory_per_task".into(),
                detail: "must be at least 1".into(),
            });
        }
        let all = Batch::concat(task_batches)?;
        let mut rows: Vec<usize> = (0..all.len()).collect();
        Rng::new(seed).shuffle(&mut rows);
        let warning = (rows.len() < m).then(|| {
            format!(
                "GEM memory for task {}: requested {m} samples, only {} available",
                all.task_id,
                rows.len()
            )
        });
        rows.truncate(m);
        self.memory.push(all.select(&rows));
        Ok(warning)
    }

    /// Task-loss gradients on each stored task, projected into the subspace.
    pub fn reference_gradients(
        &self,
        net: &Network,
        sub: &TrainableSubspace,
    ) -> Result<Vec<ParamVector>> {
        self.memory
            .iter()
            .map(|batch| {
                let (_, g) = net.task_loss_and_grad(batch)?;
                sub.project(&g)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GemProjection {
    pub gradient: ParamVector,
    /// Dual multipliers `v*` (empty when no constraint was violated).
    pub multipliers: Vec<f64>,
    pub sweeps: usize,
    pub projected: bool,
}

impl GemProjection {
    /// Correction `g~ - g` applied to the gradient.
    pub fn correction(&self, g: &ParamVector) -> ParamVector {
        self.gradient.sub(g)
    }
}

/// Project `g` so that `<g~, g_k> >= 0` for every reference gradient.
///
/// If every `<g, g_k> >= -margin` the gradient is returned unchanged.
pub fn gem_project(g: &ParamVector, refs: &[ParamVector], margin: f64) -> Result<GemProjection> {
    for r in refs {
        check_len("GEM reference gradient", g.len(), r.len())?;
    }
    let p: Vec<f64> = refs.iter().map(|r| r.dot(g)).collect();
    if p.iter().all(|&pk| pk >= -margin) {
        return Ok(GemProjection {
            gradient: g.clone(),
            multipliers: Vec::new(),
            sweeps: 0,
            projected: false,
        });
    }

    let k = refs.len();
    let q: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| refs[i].dot(&refs[j])).collect())
        .collect();
    let (v, sweeps) = solve_dual(&q, &p)?;

    let mut out = g.clone();
    for (vk, r) in v.iter().zip(refs) {
        if *vk != 0.0 {
            out.axpy(*vk, r);
        }
    }
    let worst = refs
        .iter()
        .map(|r| r.dot(&out))
        .fold(f64::INFINITY, f64::min);
    if worst < -1e-8 {
        return Err(Error::QpNotConverged {
            iterations: sweeps,
            residual: -worst,
        });
    }
    Ok(GemProjection {
        gradient: out,
        multipliers: v,
        sweeps,
        projected: true,
    })
}

fn dual_gradient(q: &[Vec<f64>], p: &[f64], v: &[f64], k: usize) -> f64 {
    q[k].iter().zip(v).map(|(a, b)| a * b).sum::<f64>() + p[k]
}

/// Largest KKT violation of `v` for `min 1/2 v'Qv + p'v, v >= 0`.
fn kkt_residual(q: &[Vec<f64>], p: &[f64], v: &[f64]) -> f64 {
    (0..p.len())
        .filter(|&k| q[k][k] > 0.0)
        .map(|k| {
            let grad = dual_gradient(q, p, v, k);
            if v[k] > 0.0 {
                grad.abs()
            } else {
                (-grad).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

fn solve_dual(q: &[Vec<f64>], p: &[f64]) -> Result<(Vec<f64>, usize)> {
    let k = p.len();
    let mut v = vec![0.0; k];
    let mut residual = f64::INFINITY;
    for sweep in 1..=MAX_SWEEPS {
        for i in 0..k {
            if q[i][i] <= 0.0 {
                continue;
            }
            let grad = dual_gradient(q, p, &v, i);
            v[i] = (v[i] - grad / q[i][i]).max(0.0);
        }
        residual = kkt_residual(q, p, &v);
        if residual <= KKT_TOLERANCE {
            return Ok((v, sweep));
        }
        // nearly collinear references make coordinate descent crawl; once the
        // support looks settled, solve the active block directly
        if sweep % 25 == 0 {
            if let Some(polished) = polish_active_set(q, p, &v) {
                if kkt_residual(q, p, &polished) <= KKT_TOLERANCE {
                    return Ok((polished, sweep));
                }
            }
        }
    }
    Err(Error::QpNotConverged {
        iterations: MAX_SWEEPS,
        residual,
    })
}

/// Solve `Q_AA v_A = -p_A` on the current support by Gaussian elimination
/// with partial pivoting; `None` if singular or infeasible.
fn polish_active_set(q: &[Vec<f64>], p: &[f64], v: &[f64]) -> Option<Vec<f64>> {
    let active: Vec<usize> = (0..v.len()).filter(|&i| v[i] > 0.0).collect();
    let n = active.len();
    if n == 0 {
        return None;
    }
    let mut a: Vec<Vec<f64>> = active
        .iter()
        .map(|&i| {
            let mut row: Vec<f64> = active.iter().map(|&j| q[i][j]).collect();
            row.push(-p[i]);
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col].abs() < 1e-14 * q[active[col]][active[col]].max(1e-300) {
            return None;
        }
        a.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..=n {
                a[row][c] -= f * a[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (a[row][n] - s) / a[row][row];
    }
    if x.iter().any(|&xi| !(xi >= 0.0)) {
        return None;
    }
    let mut out = vec![0.0; v.len()];
    for (&i, xi) in active.iter().zip(x) {
        out[i] = xi;
    }
    Some(out)
}
