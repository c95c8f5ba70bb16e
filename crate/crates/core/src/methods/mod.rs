//! Preservation mechanisms: online EWC, SI and LwF produce an unscaled
//! preservation gradient `r`; GEM instead transforms the current-task
//! gradient. The trainer applies `lambda` when composing `g + lambda * r`.

pub mod ewc;
pub mod gem;
pub mod lwf;
pub mod si;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use ewc::EwcState;
pub use gem::{gem_project, GemProjection, GemState};
pub use lwf::LwfState;
pub use si::SiState;

use crate::error::{Error, Result};
use crate::nn::{Batch, Network, ParamVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Ewc,
    Si,
    Lwf,
    Gem,
}

impl MethodKind {
    pub const ALL: [MethodKind; 4] = [MethodKind::Ewc, MethodKind::Lwf, MethodKind::Si, MethodKind::Gem];

    pub fn label(self) -> &'static str {
        match self {
            MethodKind::Ewc => "ewc",
            MethodKind::Si => "si",
            MethodKind::Lwf => "lwf",
            MethodKind::Gem => "gem",
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for MethodKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ewc" => Ok(MethodKind::Ewc),
            "si" => Ok(MethodKind::Si),
            "lwf" => Ok(MethodKind::Lwf),
            "gem" => Ok(MethodKind::Gem),
            other => Err(Error::OutOfRange {
                field: "method".into(),
                detail: format!("unknown method {other:?} (expected ewc, si, lwf or gem)"),
            }),
        }
    }
}

/// Hyperparameters for all four methods.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodHyper {
    pub ewc_gamma: f64,
    pub ewc_lambda: f64,
    pub si_xi: f64,
    pub si_lambda: f64,
    pub lwf_temperature: f64,
    pub lwf_lambda: f64,
    pub gem_memory_per_task: usize,
    pub gem_margin: f64,
}

impl Default for MethodHyper {
    fn default() -> Self {
        Self {
            ewc_gamma: 0.9,
            ewc_lambda: 1.0,
            si_xi: 0.1,
            si_lambda: 1.0,
            lwf_temperature: 2.0,
            lwf_lambda: 1.0,
            gem_memory_per_task: 32,
            gem_margin: 0.0,
        }
    }
}

/// The per-run state of one continual-learning method.
#[derive(Clone, Debug)]
pub enum Method {
    Ewc(EwcState),
    Si(SiState),
    Lwf(LwfState),
    Gem(GemState),
}

impl Method {
    pub fn new(kind: MethodKind, hyper: &MethodHyper, initial: &Network) -> Result<Self> {
        let d = initial.num_params();
        Ok(match kind {
            MethodKind::Ewc => Method::Ewc(EwcState::new(d, hyper.ewc_gamma, hyper.ewc_lambda)?),
            MethodKind::Si => Method::Si(SiState::new(
                initial.params().clone(),
                hyper.si_xi,
                hyper.si_lambda,
            )?),
            MethodKind::Lwf => Method::Lwf(LwfState::new(hyper.lwf_temperature, hyper.lwf_lambda)?),
            MethodKind::Gem => Method::Gem(GemState::new(hyper.gem_memory_per_task, hyper.gem_margin)?),
        })
    }

    pub fn kind(&self) -> MethodKind {
        match self {
            Method::Ewc(_) => MethodKind::Ewc,
            Method::Si(_) => MethodKind::Si,
            Method::Lwf(_) => MethodKind::Lwf,
            Method::Gem(_) => MethodKind::Gem,
        }
    }

    /// Weight of the preservation signal in `g + lambda * r`. GEM's correction
    /// enters with weight one.
    pub fn lambda(&self) -> f64 {
        match self {
            Method::Ewc(s) => s.lambda,
            Method::Si(s) => s.lambda,
            Method::Lwf(s) => s.lambda,
            Method::Gem(_) => 1.0,
        }
    }

    /// Unscaled preservation gradient at the current parameters. Zero before
    /// any task has been consolidated, and always zero for GEM.
    pub fn preservation_gradient(&self, net: &Network, batch: &Batch) -> Result<ParamVector> {
        match self {
            Method::Ewc(s) => s.penalty_gradient(net.params()),
            Method::Si(s) => s.penalty_gradient(net.params()),
            Method::Lwf(s) => match s.distill_gradient(net, &batch.inputs) {
                Ok((_, r)) => Ok(r),
                Err(Error::NoPreservationState) => Ok(ParamVector::zeros(net.num_params())),
                Err(e) => Err(e),
            },
            Method::Gem(_) => Ok(ParamVector::zeros(net.num_params())),
        }
    }

    /// Per-step hook; only SI accumulates anything.
    pub fn after_step(&mut self, composite: &ParamVector, delta_theta: &ParamVector) -> Result<()> {
        if let Method::Si(s) = self {
            s.accumulate_step(composite, delta_theta)?;
        }
        Ok(())
    }

    /// Task-boundary hook. `train_data` is the finished task's training set.
    /// Returns a warning when GEM had fewer samples than its memory budget.
    pub fn end_task(
        &mut self,
        net: &Network,
        train_data: &[Batch],
        seed: u64,
    ) -> Result<Option<String>> {
        match self {
            Method::Ewc(s) => s.consolidate(net, train_data).map(|_| None),
            Method::Si(s) => s.consolidate(net.params()).map(|_| None),
            Method::Lwf(s) => {
                let task = train_data.first().ok_or(Error::Empty("task data"))?.task_id;
                s.snapshot(net, task);
                Ok(None)
            }
            Method::Gem(s) => {
                let m = s.memory_per_task;
                s.store(train_data, m, seed)
            }
        }
    }
}
