//! Executable check of the projected-descent progress bound.
//!
//! For an `L`-smooth objective and `theta+ = theta - eta P_S grad J(theta)`:
//!
//! ```text
//! J(theta+) <= J(theta) - eta ||P_S grad J||^2 + (L eta^2 / 2) ||P_S grad J||^2   (sharp form)
//! J(theta+) <= J(theta) - (eta / 2) ||P_S grad J||^2          for 0 < eta <= 1/L
//! ```
//!
//! Quadratics `J = 1/2 theta' A theta + b' theta` with `A = M'M` realise
//! `L = lambda_max(A)` exactly, so both inequalities can be checked sharply.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::nn::ParamVector;
use crate::regime::TrainableSubspace;
use crate::rng::{child_seed, Rng};

pub const POWER_TOLERANCE: f64 = 1e-10;
pub const POWER_MAX_ITERS: usize = 200_000;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticObjective {
    a: Array2<f64>,
    b: Array1<f64>,
}

impl QuadraticObjective {
    /// `A = M'M`, filled from the upper triangle so it is exactly symmetric.
    pub fn from_factor(m: &Array2<f64>, b: Array1<f64>) -> Result<Self> {
        let d = m.ncols();
        check_len("linear term", d, b.len())?;
        let mut a = Array2::zeros((d, d));
        for i in 0..d {
            for j in i..d {
                let v: f64 = m.column(i).dot(&m.column(j));
                a[[i, j]] = v;
                a[[j, i]] = v;
            }
        }
        Ok(Self { a, b })
    }

    /// Use `a` directly; it must be square and exactly symmetric.
    pub fn new(a: Array2<f64>, b: Array1<f64>) -> Result<Self> {
        check_len("quadratic matrix columns", a.nrows(), a.ncols())?;
        check_len("linear term", a.nrows(), b.len())?;
        if a != a.t() {
            return Err(Error::InvalidSpec("quadratic matrix is not symmetric".into()));
        }
        Ok(Self { a, b })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn value_and_grad(&self, theta: &ParamVector) -> Result<(f64, ParamVector)> {
        check_len("theta", self.dim(), theta.len())?;
        let t = Array1::from(theta.to_vec());
        let at = self.a.dot(&t);
        let value = 0.5 * t.dot(&at) + self.b.dot(&t);
        let grad = (&at + &self.b).to_vec().into();
        Ok((value, grad))
    }

    pub fn value(&self, theta: &ParamVector) -> Result<f64> {
        Ok(self.value_and_grad(theta)?.0)
    }
}

/// Largest eigenvalue of the (PSD) quadratic matrix by power iteration.
pub fn smoothness_constant(obj: &QuadraticObjective) -> Result<f64> {
    let d = obj.dim();
    if d == 0 {
        return Ok(0.0);
    }
    let mut rng = Rng::new(0x5eed_0fc0_ffee);
    let mut v = Array1::from_shape_fn(d, |_| rng.normal());
    let n = v.dot(&v).sqrt();
    v /= n;
    let mut mu = 0.0;
    let mut stalled = 0;
    for _ in 0..POWER_MAX_ITERS {
        let w = obj.a.dot(&v);
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let next_mu = v.dot(&w);
        let residual = (&w - &(&v * next_mu)).dot(&(&w - &(&v * next_mu))).sqrt();
        if residual <= POWER_TOLERANCE * next_mu.abs() {
            return Ok(next_mu);
        }
        // near-degenerate top eigenvalues: the eigenvector converges slowly but
        // the Rayleigh quotient has settled to machine precision
        if (next_mu - mu).abs() <= 1e-15 * next_mu.abs() {
            stalled += 1;
            if stalled >= 5 {
                return Ok(next_mu);
            }
        } else {
            stalled = 0;
        }
        mu = next_mu;
        v = w / norm;
    }
    Err(Error::EigenNotConverged {
        iterations: POWER_MAX_ITERS,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentReport {
    pub value: f64,
    pub value_next: f64,
    pub projected_grad_sq: f64,
    pub smoothness: f64,
    pub eta: f64,
    /// `J(theta) - (eta/2) ||P_S grad J||^2`
    pub bound: f64,
    /// `J(theta) - eta ||P_S grad J||^2 + (L eta^2/2) ||P_S grad J||^2`
    pub sharp_bound: f64,
    pub tolerance: f64,
    pub holds: bool,
    pub sharp_holds: bool,
}

impl DescentReport {
    /// How far `J(theta+)` exceeds the bound; negative when it holds strictly.
    pub fn excess(&self) -> f64 {
        self.value_next - self.bound
    }
}

pub fn check_descent(
    obj: &QuadraticObjective,
    theta: &ParamVector,
    sub: &TrainableSubspace,
    eta: f64,
) -> Result<DescentReport> {
    let l = smoothness_constant(obj)?;
    check_descent_with(obj, theta, sub, eta, l)
}

/// As [`check_descent`] with a precomputed smoothness constant.
pub fn check_descent_with(
    obj: &QuadraticObjective,
    theta: &ParamVector,
    sub: &TrainableSubspace,
    eta: f64,
    smoothness: f64,
) -> Result<DescentReport> {
    check_len("subspace", obj.dim(), sub.len())?;
    let admissible = eta > 0.0 && (smoothness <= 0.0 || eta * smoothness <= 1.0 + 1e-12);
    if !admissible {
        return Err(Error::OutOfRange {
            field: "eta".into(),
            detail: format!("{eta} not in (0, 1/L] with L = {smoothness}"),
        });
    }
    let (value, grad) = obj.value_and_grad(theta)?;
    let step = sub.project(&grad)?;
    let projected_grad_sq = step.norm_sq();
    let mut next = theta.clone();
    next.axpy(-eta, &step);
    let value_next = obj.value(&next)?;
    let tolerance = 1e-9 * (1.0 + value.abs());
    let bound = value - 0.5 * eta * projected_grad_sq;
    let sharp_bound = value - eta * projected_grad_sq + 0.5 * smoothness * eta * eta * projected_grad_sq;
    Ok(DescentReport {
        value,
        value_next,
        projected_grad_sq,
        smoothness,
        eta,
        bound,
        sharp_bound,
        tolerance,
        holds: value_next <= bound + tolerance,
        sharp_holds: value_next <= sharp_bound + tolerance,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSizeMode {
    /// `eta = u / L` with `u` uniform on `(0, 1]`.
    #[default]
    Uniform,
    /// `eta = 1 / L` exactly.
    Boundary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuzzTrial {
    pub trial: usize,
    pub dim: usize,
    pub trainable: usize,
    pub report: DescentReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuzzSummary {
    pub trials: usize,
    pub violations: usize,
    pub sharp_violations: usize,
    pub max_excess: f64,
    pub records: Vec<FuzzTrial>,
}

impl FuzzSummary {
    /// One row per trial.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "trial,dim,trainable,eta,smoothness,value,value_next,bound,sharp_bound,tolerance,holds,sharp_holds\n",
        );
        for t in &self.records {
            let r = &t.report;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                t.trial, t.dim, t.trainable, r.eta, r.smoothness, r.value, r.value_next, r.bound, r.sharp_bound,
                r.tolerance, r.holds, r.sharp_holds
            ));
        }
        out
    }
}

/// Random PSD quadratics, iterates, masks and step sizes; counts bound
/// violations beyond tolerance.
pub fn fuzz_descent(trials: usize, dim_max: usize, seed: u64) -> Result<FuzzSummary> {
    fuzz_descent_with(trials, dim_max, seed, StepSizeMode::Uniform)
}

pub fn fuzz_descent_with(
    trials: usize,
    dim_max: usize,
    seed: u64,
    mode: StepSizeMode,
) -> Result<FuzzSummary> {
    if trials == 0 || dim_max == 0 {
        return Err(Error::OutOfRange {
            field: "fuzz".into(),
            detail: "trials and dim_max must be positive".into(),
        });
    }
    let mut summary = FuzzSummary {
        trials,
        violations: 0,
        sharp_violations: 0,
        max_excess: f64::NEG_INFINITY,
        records: Vec::with_capacity(trials),
    };
    for trial in 0..trials {
        let mut rng = Rng::new(child_seed(seed, "fuzz-trial", trial as u64));
        let dim = 1 + rng.below(dim_max as u64) as usize;
        // factor rows vary so A ranges from rank one to full rank
        let rows = 1 + rng.below(dim as u64 + 2) as usize;
        let scale = (rng.uniform_range(-2.0, 2.0)).exp();
        let m = Array2::from_shape_fn((rows, dim), |_| scale * rng.normal());
        let b = Array1::from_shape_fn(dim, |_| rng.normal());
        let obj = QuadraticObjective::from_factor(&m, b)?;
        let theta: ParamVector = (0..dim).map(|_| 3.0 * rng.normal()).collect();
        let keep = rng.uniform();
        let mask: Vec<bool> = (0..dim).map(|_| rng.bernoulli(keep)).collect();
        let sub = TrainableSubspace::from_mask(mask, "fuzz");
        let l = smoothness_constant(&obj)?;
        let eta = match mode {
            StepSizeMode::Uniform => rng.uniform_open_closed() / l,
            StepSizeMode::Boundary => 1.0 / l,
        };
        let report = check_descent_with(&obj, &theta, &sub, eta, l)?;
        if !report.holds {
            summary.violations += 1;
        }
        if !report.sharp_holds {
            summary.sharp_violations += 1;
        }
        summary.max_excess = summary.max_excess.max(report.excess());
        summary.records.push(FuzzTrial {
            trial,
            dim,
            trainable: sub.dim(),
            report,
        });
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::central_difference;
    use ndarray::{arr1, arr2};

    fn pv(v: &[f64]) -> ParamVector {
        v.to_vec().into()
    }

    #[test]
    fn value_and_grad_examples() {
        let obj = QuadraticObjective::new(Array2::eye(2) * 3.0, Array1::zeros(2)).unwrap();
        let (v, g) = obj.value_and_grad(&pv(&[0.0, 0.0])).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(g, pv(&[0.0, 0.0]));
        let obj = QuadraticObjective::new(Array2::eye(2) * 2.0, Array1::zeros(2)).unwrap();
        let (v, g) = obj.value_and_grad(&pv(&[1.0, 1.0])).unwrap();
        assert_eq!(v, 2.0);
        assert_eq!(g, pv(&[2.0, 2.0]));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = Rng::new(2);
        let m = Array2::from_shape_fn((4, 6), |_| rng.normal());
        let b = Array1::from_shape_fn(6, |_| rng.normal());
        let obj = QuadraticObjective::from_factor(&m, b).unwrap();
        let theta: ParamVector = (0..6).map(|_| rng.normal()).collect();
        let (_, g) = obj.value_and_grad(&theta).unwrap();
        let fd = central_difference(&theta, 1e-5, |t| obj.value(t).unwrap());
        assert!(g.max_abs_diff(&fd) <= 1e-8);
    }

    #[test]
    fn rejects_asymmetric_matrix() {
        assert!(QuadraticObjective::new(arr2(&[[1.0, 2.0], [0.0, 1.0]]), arr1(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn smoothness_examples() {
        let obj = QuadraticObjective::new(Array2::eye(4) * 3.0, Array1::zeros(4)).unwrap();
        assert!((smoothness_constant(&obj).unwrap() - 3.0).abs() < 1e-12);
        let a = Array2::from_diag(&arr1(&[1.0, 5.0, 2.0]));
        let obj = QuadraticObjective::new(a, Array1::zeros(3)).unwrap();
        assert!((smoothness_constant(&obj).unwrap() - 5.0).abs() < 1e-9);
        let obj = QuadraticObjective::new(Array2::zeros((2, 2)), Array1::zeros(2)).unwrap();
        assert_eq!(smoothness_constant(&obj).unwrap(), 0.0);
    }

    #[test]
    fn smoothness_matches_dense_eigensolver() {
        let mut rng = Rng::new(17);
        for _ in 0..50 {
            let d = 1 + rng.below(10) as usize;
            let rows = 1 + rng.below(d as u64 + 2) as usize;
            let m = Array2::from_shape_fn((rows, d), |_| rng.normal());
            let obj = QuadraticObjective::from_factor(&m, Array1::zeros(d)).unwrap();
            let dense = nalgebra::DMatrix::from_fn(d, d, |i, j| obj.matrix()[[i, j]]);
            let top = dense.symmetric_eigen().eigenvalues.max();
            let l = smoothness_constant(&obj).unwrap();
            assert!((l - top).abs() <= 1e-8 * top.max(1.0), "{l} vs {top}");
        }
    }

    #[test]
    fn closed_form_walkthrough() {
        let obj = QuadraticObjective::new(Array2::eye(2) * 2.0, Array1::zeros(2)).unwrap();
        let r = check_descent(&obj, &pv(&[1.0, 1.0]), &TrainableSubspace::full(2), 0.5).unwrap();
        assert_eq!(r.value, 2.0);
        assert_eq!(r.value_next, 0.0);
        assert_eq!(r.bound, 0.0);
        assert!(r.holds && r.sharp_holds);
    }

    #[test]
    fn stationary_point_and_empty_mask() {
        let obj = QuadraticObjective::new(Array2::eye(2), arr1(&[-1.0, 2.0])).unwrap();
        let r = check_descent(&obj, &pv(&[1.0, -2.0]), &TrainableSubspace::full(2), 1.0).unwrap();
        assert_eq!(r.projected_grad_sq, 0.0);
        assert_eq!(r.value_next, r.value);
        assert!(r.holds);
        let r = check_descent(&obj, &pv(&[3.0, 3.0]), &TrainableSubspace::empty(2), 0.5).unwrap();
        assert_eq!(r.value_next, r.value);
        assert_eq!(r.bound, r.value);
        assert!(r.holds);
    }

    #[test]
    fn step_size_out_of_range() {
        let obj = QuadraticObjective::new(Array2::eye(2) * 2.0, Array1::zeros(2)).unwrap();
        let sub = TrainableSubspace::full(2);
        assert!(check_descent(&obj, &pv(&[1.0, 1.0]), &sub, 0.0).is_err());
        assert!(check_descent(&obj, &pv(&[1.0, 1.0]), &sub, 0.6).is_err());
    }

    #[test]
    fn fuzz_is_reproducible() {
        let a = fuzz_descent(1, 8, 3).unwrap();
        let b = fuzz_descent(1, 8, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trials, 1);
    }

    #[test]
    fn fuzz_finds_no_violations() {
        let s = fuzz_descent(300, 12, 5).unwrap();
        assert_eq!(s.violations, 0);
        assert_eq!(s.sharp_violations, 0);
        let s = fuzz_descent_with(300, 12, 6, StepSizeMode::Boundary).unwrap();
        assert_eq!(s.violations, 0);
    }

    #[test]
    fn oversized_step_is_caught() {
        // eta = 3/L breaks the bound: the checker must notice
        let obj = QuadraticObjective::new(Array2::eye(1) * 2.0, Array1::zeros(1)).unwrap();
        let r = check_descent_with(&obj, &pv(&[1.0]), &TrainableSubspace::full(1), 1.5, 0.5).unwrap();
        assert!(!r.holds);
    }
}
