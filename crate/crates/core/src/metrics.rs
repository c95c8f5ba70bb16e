//! Accuracy / forgetting, method rankings and rank agreement.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower-triangular accuracy matrix: row `t` holds accuracy on the first
/// `t + 1` tasks of the sequence after training on task `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyMatrix {
    num_tasks: usize,
    rows: Vec<Vec<f64>>,
}

impl AccuracyMatrix {
    pub fn new(num_tasks: usize) -> Self {
        Self {
            num_tasks,
            rows: Vec::with_capacity(num_tasks),
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut m = Self::new(rows.len());
        for row in rows {
            m.push_row(row)?;
        }
        Ok(m)
    }

    pub fn push_row(&mut self, row: Vec<f64>) -> Result<()> {
        let t = self.rows.len();
        if t >= self.num_tasks {
            return Err(Error::OutOfRange {
                field: "accuracy row".into(),
                detail: format!("matrix already has {} rows", self.num_tasks),
            });
        }
        if row.len() != t + 1 {
            return Err(Error::DimensionMismatch {
                what: "accuracy row",
                expected: t + 1,
                got: row.len(),
            });
        }
        if let Some(bad) = row.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::OutOfRange {
                field: "accuracy".into(),
                detail: format!("{bad} not in [0, 1]"),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn num_tasks(&self) -> usize {
        self.num_tasks
    }

    pub fn is_complete(&self) -> bool {
        self.rows.len() == self.num_tasks
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.rows[t]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// `A_t^(i)`, defined for `i <= t`.
    pub fn get(&self, t: usize, i: usize) -> Option<f64> {
        self.rows.get(t).and_then(|r| r.get(i)).copied()
    }

    fn require_complete(&self) -> Result<()> {
        if self.num_tasks == 0 {
            return Err(Error::Empty("accuracy matrix"));
        }
        if !self.is_complete() {
            return Err(Error::OutOfRange {
                field: "accuracy matrix".into(),
                detail: format!("{} of {} rows populated", self.rows.len(), self.num_tasks),
            });
        }
        Ok(())
    }
}

/// Which rows the peak accuracy of an earlier task is taken over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForgettingConvention {
    /// Peak over every row `t >= i` including the final one, so each term is
    /// non-negative.
    #[default]
    AsWritten,
    /// Peak over rows `i <= t < T`, so improvement after the peak shows up as
    /// negative forgetting.
    PeakBeforeFinal,
}

/// Mean of the final row.
pub fn average_accuracy(m: &AccuracyMatrix) -> Result<f64> {
    m.require_complete()?;
    let last = m.row(m.num_tasks() - 1);
    Ok(last.iter().sum::<f64>() / last.len() as f64)
}

/// Mean over earlier tasks of peak accuracy minus final accuracy.
pub fn average_forgetting(m: &AccuracyMatrix, convention: ForgettingConvention) -> Result<f64> {
    m.require_complete()?;
    let t_final = m.num_tasks() - 1;
    if t_final == 0 {
        return Err(Error::OutOfRange {
            field: "num_tasks".into(),
            detail: "forgetting needs at least two tasks".into(),
        });
    }
    let last_row = match convention {
        ForgettingConvention::AsWritten => t_final,
        ForgettingConvention::PeakBeforeFinal => t_final - 1,
    };
    let total: f64 = (0..t_final)
        .map(|i| {
            let peak = (i..=last_row)
                .map(|t| m.rows[t][i])
                .fold(f64::NEG_INFINITY, f64::max);
            peak - m.rows[t_final][i]
        })
        .sum();
    Ok(total / t_final as f64)
}

/// Forgetting with single-task runs reported as zero.
pub fn average_forgetting_or_zero(m: &AccuracyMatrix, convention: ForgettingConvention) -> Result<f64> {
    if m.num_tasks() == 1 {
        m.require_complete()?;
        return Ok(0.0);
    }
    average_forgetting(m, convention)
}

/// Labelled ranks, 1 = best, tied groups share their mean rank.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub labels: Vec<String>,
    pub ranks: Vec<f64>,
}

impl Ranking {
    pub fn rank_of(&self, label: &str) -> Option<f64> {
        self.labels.iter().position(|l| l == label).map(|i| self.ranks[i])
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Rank by descending score with average ranks on exact ties.
pub fn rank_methods(scores: &BTreeMap<String, f64>) -> Result<Ranking> {
    if scores.is_empty() {
        return Err(Error::Empty("scores"));
    }
    if let Some((label, v)) = scores.iter().find(|(_, v)| v.is_nan()) {
        return Err(Error::NonFinite(format!("score of {label} is {v}")));
    }
    let labels: Vec<String> = scores.keys().cloned().collect();
    let values: Vec<f64> = scores.values().copied().collect();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let mean_rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = mean_rank;
        }
        start = end;
    }
    Ok(Ranking { labels, ranks })
}

fn tied_pairs(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end] == sorted[start] {
            end += 1;
        }
        let t = (end - start) as f64;
        total += t * (t - 1.0) / 2.0;
        start = end;
    }
    total
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Kendall tau-b between two paired value sequences.
pub fn kendall_tau_values(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            what: "kendall tau inputs",
            expected: x.len(),
            got: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::OutOfRange {
            field: "kendall tau".into(),
            detail: format!("needs at least 2 items, got {n}"),
        });
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::NonFinite("kendall tau input".into()));
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += sign(x[i] - x[j]) * sign(y[i] - y[j]);
        }
    }
    let n0 = (n * (n - 1) / 2) as f64;
    let denom = ((n0 - tied_pairs(x)) * (n0 - tied_pairs(y))).sqrt();
    if denom == 0.0 {
        return Err(Error::UndefinedTau);
    }
    Ok((s / denom).clamp(-1.0, 1.0))
}

/// Kendall tau-b between two rankings over the same labels.
pub fn kendall_tau(x: &Ranking, y: &Ranking) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LabelMismatch);
    }
    let ys = x
        .labels
        .iter()
        .map(|l| y.rank_of(l).ok_or(Error::LabelMismatch))
        .collect::<Result<Vec<_>>>()?;
    kendall_tau_values(&x.ranks, &ys)
}

/// Tau-b between the regime ordering by gradient magnitude and by forgetting.
pub fn grad_forgetting_tau(summaries: &[(f64, f64)]) -> Result<f64> {
    let (grad, forget): (Vec<f64>, Vec<f64>) = summaries.iter().copied().unzip();
    kendall_tau_values(&grad, &forget)
}

/// Method scores of one regime under one task order.
pub type RegimeScores = BTreeMap<String, BTreeMap<String, f64>>;

/// Mean pairwise tau between regime-specific method rankings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementMatrix {
    pub regimes: Vec<String>,
    /// `None` where no order produced a defined tau.
    pub mean_tau: Vec<Vec<Option<f64>>>,
    /// Orders excluded from each pair (missing cells or undefined tau).
    pub excluded: Vec<Vec<usize>>,
    pub used: Vec<Vec<usize>>,
}

impl AgreementMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.regimes.iter().position(|r| r == a)?;
        let j = self.regimes.iter().position(|r| r == b)?;
        self.mean_tau[i][j]
    }

    pub fn total_excluded(&self) -> usize {
        let n = self.regimes.len();
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| self.excluded[i][j]).sum()
    }
}

/// For each order, rank methods within each regime and compute tau for every
/// regime pair; average over orders. `per_order[o][regime][method]` is the
/// score (average accuracy). Diagonal entries are one.
pub fn regime_agreement_matrix(per_order: &[RegimeScores], regimes: &[String]) -> AgreementMatrix {
    let n = regimes.len();
    let mut sum = vec![vec![0.0; n]; n];
    let mut used = vec![vec![0usize; n]; n];
    let mut excluded = vec![vec![0usize; n]; n];
    for scores in per_order {
        let rankings: Vec<Option<Ranking>> = regimes
            .iter()
            .map(|r| scores.get(r).and_then(|s| rank_methods(s).ok()))
            .collect();
        for i in 0..n {
            for j in i + 1..n {
                let tau = match (&rankings[i], &rankings[j]) {
                    (Some(a), Some(b)) => kendall_tau(a, b).ok(),
                    _ => None,
                };
                match tau {
                    Some(t) => {
                        sum[i][j] += t;
                        used[i][j] += 1;
                    }
                    None => excluded[i][j] += 1,
                }
            }
        }
    }
    let mut mean_tau = vec![vec![None; n]; n];
    for i in 0..n {
        mean_tau[i][i] = Some(1.0);
        for j in i + 1..n {
            let m = (used[i][j] > 0).then(|| sum[i][j] / used[i][j] as f64);
            mean_tau[i][j] = m;
            mean_tau[j][i] = m;
            used[j][i] = used[i][j];
            excluded[j][i] = excluded[i][j];
        }
    }
    AgreementMatrix {
        regimes: regimes.to_vec(),
        mean_tau,
        excluded,
        used,
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
