//! Learning without Forgetting: temperature-scaled distillation from a frozen
//! snapshot taken at the last task boundary, over every previously seen head.

use std::collections::BTreeSet;

use ndarray::{s, Array2};

use crate::error::{check_len, Error, Result};
use crate::nn::{log_softmax_rows, Network, ParamVector};

#[derive(Clone, Debug)]
pub struct LwfState {
    pub teacher: Option<Network>,
    pub temperature: f64,
    pub lambda: f64,
    pub seen_tasks: BTreeSet<usize>,
}

impl LwfState {
    pub fn new(temperature: f64, lambda: f64) -> Result<Self> {
        if !(temperature > 0.0) {
            return Err(Error::OutOfRange {
                field: "lwf.temperature".into(),
                detail: format!("{temperature} is not positive"),
            });
        }
        if !(lambda >= 0.0) {
            return Err(Error::OutOfRange {
                field: "lwf.lambda".into(),
                detail: format!("{lambda} is negative"),
            });
        }
        Ok(Self {
            teacher: None,
            temperature,
            lambda,
            seen_tasks: BTreeSet::new(),
        })
    }

    pub fn snapshot(&mut self, net: &Network, finished_task: usize) {
        self.teacher = Some(net.clone());
        self.seen_tasks.insert(finished_task);
    }

    /// Distillation loss `sum_h T^2 KL(p_teacher^h || p_student^h)` averaged
    /// over samples, and its exact gradient with respect to the student.
    pub fn distill_gradient(
        &self,
        net: &Network,
        inputs: &Array2<f64>,
    ) -> Result<(f64, ParamVector)> {
        let teacher = match &self.teacher {
            Some(t) if !self.seen_tasks.is_empty() => t,
            _ => return Err(Error::NoPreservationState),
        };
        check_len("teacher params", net.num_params(), teacher.num_params())?;
        if teacher.spec() != net.spec() {
            return Err(Error::InvalidSpec("teacher and student specs differ".into()));
        }
        let t = self.temperature;
        let n = inputs.nrows() as f64;
        let c = net.spec().classes_per_task;
        let cache = net.forward_cached(inputs)?;
        let z_teacher = teacher.forward(inputs)?;
        let mut dlogits = Array2::zeros(cache.logits.raw_dim());
        let mut loss = 0.0;
        for &head in &self.seen_tasks {
            let cols = head * c..(head + 1) * c;
            let log_ps = log_softmax_rows(&(cache.logits.slice(s![.., cols.clone()]).to_owned() / t));
            let log_pt = log_softmax_rows(&(z_teacher.slice(s![.., cols.clone()]).to_owned() / t));
            for i in 0..inputs.nrows() {
                for k in 0..c {
                    let pt = log_pt[[i, k]].exp();
                    let ps = log_ps[[i, k]].exp();
                    if pt > 0.0 {
                        loss += t * t * pt * (log_pt[[i, k]] - log_ps[[i, k]]) / n;
                    }
                    dlogits[[i, cols.start + k]] = t * (ps - pt) / n;
                }
            }
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("distillation loss {loss}")));
        }
        Ok((loss, net.backward(&cache, &dlogits)))
    }
}
