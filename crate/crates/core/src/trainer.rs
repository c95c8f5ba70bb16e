//! Projected SGD over a fixed trainable subspace.
//!
//! Every step applies `theta <- theta - eta * P_S (g + lambda * r)` and
//! records the split of the projected update into the current-task signal
//! `P_S g`, the preservation signal `P_S r` and their interaction
//! `<P_S g, P_S r>`. For GEM, `r` is the correction `g~ - g` produced by the
//! constraint projection and `lambda` is one, so the recorded quantities still
//! add up to the applied update.

use serde::{Deserialize, Serialize};

use crate::data::{TaskData, TaskOrder};
use crate::error::{check_len, Error, Result};
use crate::methods::{gem_project, Method, MethodHyper, MethodKind};
use crate::metrics::AccuracyMatrix;
use crate::nn::{Batch, Network, NetworkSpec, ParamVector};
use crate::regime::TrainableSubspace;
use crate::rng::{child_seed, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub eta: f64,
    pub epochs_per_task: usize,
    pub batch_size: usize,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            eta: 0.05,
            epochs_per_task: 5,
            batch_size: 64,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::OutOfRange {
                field: "train.eta".into(),
                detail: format!("{} is not positive", self.eta),
            });
        }
        if self.batch_size == 0 {
            return Err(Error::OutOfRange {
                field: "train.batch_size".into(),
                detail: "must be positive".into(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Position of the task in the training sequence.
    pub task_index: usize,
    pub step: usize,
    pub loss_task: f64,
    /// `||P_S g||`
    pub norm_g: f64,
    /// `||P_S r||`
    pub norm_r: f64,
    /// `<P_S g, P_S r>`
    pub gamma_interaction: f64,
    /// `||P_S (g + lambda r)||^2`
    pub norm_projected_update_sq: f64,
    pub lambda: f64,
    /// Smallest `<g~, g_k>` over stored tasks after a GEM projection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gem_min_constraint: Option<f64>,
}

impl StepRecord {
    /// Relative gap in `||P(g + l r)||^2 = ||Pg||^2 + 2 l Gamma + l^2 ||Pr||^2`.
    pub fn decomposition_error(&self) -> f64 {
        let lhs = self.norm_projected_update_sq;
        let rhs = self.norm_g * self.norm_g
            + 2.0 * self.lambda * self.gamma_interaction
            + self.lambda * self.lambda * self.norm_r * self.norm_r;
        let scale = lhs.abs().max(rhs.abs());
        if scale == 0.0 {
            0.0
        } else {
            (lhs - rhs).abs() / scale
        }
    }
}

/// One projected SGD step. Returns the new parameters, the step record (with
/// `task_index` and `step` left at zero) and the projected composite gradient.
pub fn projected_step(
    theta: &ParamVector,
    g: &ParamVector,
    r: &ParamVector,
    sub: &TrainableSubspace,
    eta: f64,
    lambda: f64,
) -> Result<(ParamVector, StepRecord, ParamVector)> {
    check_len("theta", sub.len(), theta.len())?;
    check_len("task gradient", sub.len(), g.len())?;
    check_len("preservation gradient", sub.len(), r.len())?;
    if !theta.is_finite() || !g.is_finite() || !r.is_finite() {
        return Err(Error::NonFinite("projected step inputs".into()));
    }
    let mut composite = g.clone();
    composite.axpy(lambda, r);
    sub.project_in_place(&mut composite)?;
    let mut next = theta.clone();
    next.axpy(-eta, &composite);
    let rec = StepRecord {
        task_index: 0,
        step: 0,
        loss_task: f64::NAN,
        norm_g: sub.norm(g)?,
        norm_r: sub.norm(r)?,
        gamma_interaction: sub.inner(g, r)?,
        norm_projected_update_sq: composite.norm_sq(),
        lambda,
        gem_min_constraint: None,
    };
    Ok((next, rec, composite))
}

/// Train on one task for the configured number of epochs.
///
/// Minibatches follow a shuffle seeded per `(seed, epoch)`. SI receives the
/// projected composite gradient and the parameter displacement after every
/// step.
pub fn train_task(
    net: &mut Network,
    method: &mut Method,
    sub: &TrainableSubspace,
    task: &Batch,
    hyper: &TrainHyper,
    seed: u64,
    task_index: usize,
) -> Result<Vec<StepRecord>> {
    hyper.validate()?;
    if task.is_empty() {
        return Err(Error::Empty("task data"));
    }
    check_len("subspace", net.num_params(), sub.len())?;
    let mut records = Vec::new();
    let mut step = 0;
    for epoch in 0..hyper.epochs_per_task {
        let mut rows: Vec<usize> = (0..task.len()).collect();
        Rng::new(child_seed(seed, "epoch", epoch as u64)).shuffle(&mut rows);
        for chunk in rows.chunks(hyper.batch_size) {
            let batch = task.select(chunk);
            let (loss, g) = net.task_loss_and_grad(&batch)?;
            let (g, r, lambda, gem_min) = match &*method {
                Method::Gem(state) => {
                    let refs = state.reference_gradients(net, sub)?;
                    let pg = sub.project(&g)?;
                    let proj = gem_project(&pg, &refs, state.margin)?;
                    let gem_min = refs
                        .iter()
                        .map(|k| k.dot(&proj.gradient))
                        .reduce(f64::min);
                    let correction = proj.correction(&pg);
                    (pg, correction, 1.0, gem_min)
                }
                other => {
                    let r = other.preservation_gradient(net, &batch)?;
                    let lambda = other.lambda();
                    (g, r, lambda, None)
                }
            };
            let (next, mut rec, composite) =
                projected_step(net.params(), &g, &r, sub, hyper.eta, lambda)?;
            if !next.is_finite() {
                return Err(Error::NonFinite(format!(
                    "parameters diverged at task {task_index}, step {step}"
                )));
            }
            let delta = next.sub(net.params());
            method.after_step(&composite, &delta)?;
            net.set_params(next)?;
            rec.task_index = task_index;
            rec.step = step;
            rec.loss_task = loss;
            rec.gem_min_constraint = gem_min;
            records.push(rec);
            step += 1;
        }
    }
    Ok(records)
}

/// Everything that defines one continual-learning run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub network: NetworkSpec,
    pub k_blocks: usize,
    pub method: MethodKind,
    pub method_hyper: MethodHyper,
    pub order: TaskOrder,
    pub train: TrainHyper,
    /// Seeds network init and minibatch order; shared by every cell that
    /// uses the same task order so methods and regimes see identical streams.
    pub stream_seed: u64,
    /// Cell-specific seed (GEM memory sampling).
    pub cell_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub accuracy_matrix: AccuracyMatrix,
    pub steps: Vec<StepRecord>,
    pub regime: String,
    pub k_blocks: usize,
    pub method: MethodKind,
    pub order: TaskOrder,
    pub stream_seed: u64,
    pub cell_seed: u64,
    /// Mean over steps of `||P_S grad J||` for each task, in sequence order.
    pub task_grad_norms: Vec<f64>,
    pub warnings: Vec<String>,
}

impl RunResult {
    /// Run-level gradient magnitude: mean of the per-task summaries.
    pub fn mean_grad_norm(&self) -> f64 {
        if self.task_grad_norms.is_empty() {
            return 0.0;
        }
        self.task_grad_norms.iter().sum::<f64>() / self.task_grad_norms.len() as f64
    }
}

/// Train the tasks of `cfg.order` in sequence, consolidating the method and
/// filling one accuracy-matrix row after each task.
pub fn run_sequence(cfg: &RunConfig, tasks: &[TaskData]) -> Result<RunResult> {
    let num_tasks = cfg.order.tasks.len();
    if num_tasks == 0 {
        return Err(Error::Empty("task order"));
    }
    if !cfg.order.is_valid_permutation() {
        return Err(Error::OutOfRange {
            field: "order".into(),
            detail: format!("{:?} is not a permutation", cfg.order.tasks),
        });
    }
    let lookup = |id: usize| {
        tasks.iter().find(|t| t.task_id == id).ok_or(Error::OutOfRange {
            field: "order".into(),
            detail: format!("task {id} has no data"),
        })
    };
    let mut net = Network::init(cfg.network.clone(), child_seed(cfg.stream_seed, "init", 0))?;
    let sub = TrainableSubspace::depth_regime(&net, cfg.k_blocks)?;
    let mut method = Method::new(cfg.method, &cfg.method_hyper, &net)?;
    let mut matrix = AccuracyMatrix::new(num_tasks);
    let mut steps = Vec::new();
    let mut task_grad_norms = Vec::with_capacity(num_tasks);
    let mut warnings = Vec::new();

    for (pos, &task_id) in cfg.order.tasks.iter().enumerate() {
        let data = lookup(task_id)?;
        let records = train_task(
            &mut net,
            &mut method,
            &sub,
            &data.train,
            &cfg.train,
            child_seed(cfg.stream_seed, "task", pos as u64),
            pos,
        )?;
        let summary = if records.is_empty() {
            0.0
        } else {
            records
                .iter()
                .map(|r| r.norm_projected_update_sq.sqrt())
                .sum::<f64>()
                / records.len() as f64
        };
        task_grad_norms.push(summary);
        steps.extend(records);

        if let Some(w) = method.end_task(
            &net,
            std::slice::from_ref(&data.train),
            child_seed(cfg.cell_seed, "memory", pos as u64),
        )? {
            warnings.push(w);
        }

        let row = cfg.order.tasks[..=pos]
            .iter()
            .map(|&seen| {
                let d = lookup(seen)?;
                net.evaluate_accuracy(std::slice::from_ref(&d.test), seen)
            })
            .collect::<Result<Vec<_>>>()?;
        matrix.push_row(row)?;
    }

    Ok(RunResult {
        accuracy_matrix: matrix,
        steps,
        regime: sub.label().to_string(),
        k_blocks: cfg.k_blocks,
        method: cfg.method,
        order: cfg.order.clone(),
        stream_seed: cfg.stream_seed,
        cell_seed: cfg.cell_seed,
        task_grad_norms,
        warnings,
    })
}
