//! Online EWC: one decayed diagonal Fisher and a single anchor.

use crate::error::{check_len, Error, Result};
use crate::nn::{Batch, Network, ParamVector};

#[derive(Clone, Debug, PartialEq)]
pub struct EwcState {
    pub fisher: ParamVector,
    pub anchor: ParamVector,
    pub gamma: f64,
    pub lambda: f64,
}

impl EwcState {
    pub fn new(d: usize, gamma: f64, lambda: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::OutOfRange {
                field: "ewc.gamma".into(),
                detail: format!("{gamma} not in (0, 1]"),
            });
        }
        if !(lambda >= 0.0) {
            return Err(Error::OutOfRange {
                field: "ewc.lambda".into(),
                detail: format!("{lambda} is negative"),
            });
        }
        Ok(Self {
            fisher: ParamVector::zeros(d),
            anchor: ParamVector::zeros(d),
            gamma,
            lambda,
        })
    }

    /// Empirical diagonal Fisher: mean over samples of the squared gradient of
    /// the true-class log-probability.
    pub fn empirical_fisher(net: &Network, data: &[Batch]) -> Result<ParamVector> {
        let mut fisher = ParamVector::zeros(net.num_params());
        let mut count = 0usize;
        for batch in data {
            for row in 0..batch.len() {
                let (_, g) = net.task_loss_and_grad(&batch.select(&[row]))?;
                for (f, gi) in fisher.iter_mut().zip(g.iter()) {
                    *f += gi * gi;
                }
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::Empty("EWC consolidation data"));
        }
        Ok(fisher.scaled(1.0 / count as f64))
    }

    /// `fisher <- gamma * fisher + F_hat`, `anchor <- theta`.
    pub fn consolidate(&mut self, net: &Network, data: &[Batch]) -> Result<()> {
        let f_hat = Self::empirical_fisher(net, data)?;
        self.consolidate_with(&f_hat, net.params())
    }

    pub fn consolidate_with(&mut self, f_hat: &ParamVector, theta: &ParamVector) -> Result<()> {
        check_len("fisher estimate", self.fisher.len(), f_hat.len())?;
        check_len("anchor", self.anchor.len(), theta.len())?;
        for (f, new) in self.fisher.iter_mut().zip(f_hat.iter()) {
            *f = self.gamma * *f + new;
        }
        self.anchor = theta.clone();
        Ok(())
    }

    /// `1/2 sum_i F_i (theta_i - anchor_i)^2`
    pub fn penalty(&self, theta: &ParamVector) -> Result<f64> {
        check_len("theta", self.anchor.len(), theta.len())?;
        Ok(0.5
            * self
                .fisher
                .iter()
                .zip(theta.iter().zip(self.anchor.iter()))
                .map(|(f, (t, a))| f * (t - a) * (t - a))
                .sum::<f64>())
    }

    pub fn penalty_gradient(&self, theta: &ParamVector) -> Result<ParamVector> {
        check_len("theta", self.anchor.len(), theta.len())?;
        Ok(self
            .fisher
            .iter()
            .zip(theta.iter().zip(self.anchor.iter()))
            .map(|(f, (t, a))| f * (t - a))
            .collect())
    }
}
