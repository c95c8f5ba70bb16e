//! Synaptic Intelligence: per-parameter importance from the path integral of
//! gradient times displacement, consolidated at task boundaries.

use crate::error::{check_len, Error, Result};
use crate::nn::ParamVector;

#[derive(Clone, Debug, PartialEq)]
pub struct SiState {
    pub omega_path: ParamVector,
    pub importance: ParamVector,
    pub anchor: ParamVector,
    pub xi: f64,
    pub lambda: f64,
}

impl SiState {
    /// `initial` is the parameter vector at the start of the first task.
    pub fn new(initial: ParamVector, xi: f64, lambda: f64) -> Result<Self> {
        if !(xi > 0.0) {
            return Err(Error::OutOfRange {
                field: "si.xi".into(),
                detail: format!("{xi} is not positive"),
            });
        }
        if !(lambda >= 0.0) {
            return Err(Error::OutOfRange {
                field: "si.lambda".into(),
                detail: format!("{lambda} is negative"),
            });
        }
        let d = initial.len();
        Ok(Self {
            omega_path: ParamVector::zeros(d),
            importance: ParamVector::zeros(d),
            anchor: initial,
            xi,
            lambda,
        })
    }

    /// `omega_i -= g_i * delta_i`
    pub fn accumulate_step(&mut self, g: &ParamVector, delta_theta: &ParamVector) -> Result<()> {
        check_len("SI gradient", self.omega_path.len(), g.len())?;
        check_len("SI displacement", self.omega_path.len(), delta_theta.len())?;
        for (w, (gi, di)) in self.omega_path.iter_mut().zip(g.iter().zip(delta_theta.iter())) {
            *w -= gi * di;
        }
        Ok(())
    }

    /// `importance_i += max(omega_i, 0) / ((theta_end_i - anchor_i)^2 + xi)`,
    /// then re-anchor and reset the path integral.
    pub fn consolidate(&mut self, theta_end: &ParamVector) -> Result<()> {
        check_len("theta_end", self.anchor.len(), theta_end.len())?;
        if !(self.xi > 0.0) {
            return Err(Error::OutOfRange {
                field: "si.xi".into(),
                detail: format!("{} is not positive", self.xi),
            });
        }
        for i in 0..theta_end.len() {
            let shift = theta_end[i] - self.anchor[i];
            self.importance[i] += self.omega_path[i].max(0.0) / (shift * shift + self.xi);
        }
        self.anchor = theta_end.clone();
        self.omega_path.fill(0.0);
        Ok(())
    }

    /// `sum_i importance_i (theta_i - anchor_i)^2`
    pub fn penalty(&self, theta: &ParamVector) -> Result<f64> {
        check_len("theta", self.anchor.len(), theta.len())?;
        Ok(self
            .importance
            .iter()
            .zip(theta.iter().zip(self.anchor.iter()))
            .map(|(w, (t, a))| w * (t - a) * (t - a))
            .sum())
    }

    pub fn penalty_gradient(&self, theta: &ParamVector) -> Result<ParamVector> {
        check_len("theta", self.anchor.len(), theta.len())?;
        Ok(self
            .importance
            .iter()
            .zip(theta.iter().zip(self.anchor.iter()))
            .map(|(w, (t, a))| 2.0 * w * (t - a))
            .collect())
    }
}
