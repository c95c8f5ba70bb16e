//! Dense residual MLP with exact manual backpropagation.
//!
//! Parameters live in one flat [`ParamVector`]; every layer is an affine map
//! stored row-major as `W (out x in)` followed by its bias `b (out)`. A block
//! is `relu(W h + b)` or, when its input and output widths agree,
//! `relu(W h + b + h)`. The head is a single affine map to `T * C` logits, and
//! task `t` owns logit columns `[t*C, (t+1)*C)`.

use std::ops::{Deref, DerefMut, Range};

use ndarray::{s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::rng::Rng;

/// Flat view of all model parameters, or of any gradient-shaped vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &ParamVector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.iter().zip(other.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &ParamVector) {
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a += alpha * b;
        }
    }

    pub fn scaled(&self, alpha: f64) -> ParamVector {
        self.iter().map(|v| v * alpha).collect()
    }

    pub fn sub(&self, other: &ParamVector) -> ParamVector {
        self.iter().zip(other.iter()).map(|(a, b)| a - b).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &ParamVector) -> f64 {
        self.iter()
            .zip(other.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl FromIterator<f64> for ParamVector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub block_widths: Vec<usize>,
    pub num_tasks: usize,
    pub classes_per_task: usize,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidSpec("input_dim must be positive".into()));
        }
        if self.block_widths.is_empty() {
            return Err(Error::InvalidSpec("at least one block is required".into()));
        }
        if self.block_widths.contains(&0) {
            return Err(Error::InvalidSpec("block widths must be positive".into()));
        }
        if self.num_tasks < 2 {
            return Err(Error::InvalidSpec("num_tasks must be at least 2".into()));
        }
        if self.classes_per_task < 2 {
            return Err(Error::InvalidSpec(
                "classes_per_task must be at least 2".into(),
            ));
        }
        Ok(())
    }

    pub fn num_blocks(&self) -> usize {
        self.block_widths.len()
    }

    pub fn num_outputs(&self) -> usize {
        self.num_tasks * self.classes_per_task
    }

    /// (fan_in, fan_out) of every affine map, blocks first, head last.
    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.block_widths.len() + 1);
        let mut fan_in = self.input_dim;
        for &w in &self.block_widths {
            dims.push((fan_in, w));
            fan_in = w;
        }
        dims.push((fan_in, self.num_outputs()));
        dims
    }

    pub fn num_params(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Layer {
    fan_in: usize,
    fan_out: usize,
    start: usize,
    residual: bool,
}

impl Layer {
    fn weight_range(&self) -> Range<usize> {
        self.start..self.start + self.fan_in * self.fan_out
    }

    fn bias_range(&self) -> Range<usize> {
        let w = self.weight_range();
        w.end..w.end + self.fan_out
    }

    fn range(&self) -> Range<usize> {
        self.start..self.bias_range().end
    }
}

/// One labelled minibatch from a single task.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub inputs: Array2<f64>,
    pub labels: Vec<usize>,
    pub task_id: usize,
}

impl Batch {
    pub fn new(inputs: Array2<f64>, labels: Vec<usize>, task_id: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty("batch"));
        }
        check_len("batch labels", inputs.nrows(), labels.len())?;
        Ok(Self {
            inputs,
            labels,
            task_id,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> Batch {
        Batch {
            inputs: self.inputs.select(Axis(0), rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            task_id: self.task_id,
        }
    }

    /// Concatenate batches of the same task into one.
    pub fn concat(batches: &[Batch]) -> Result<Batch> {
        let first = batches.first().ok_or(Error::Empty("batch list"))?;
        let views: Vec<_> = batches.iter().map(|b| b.inputs.view()).collect();
        let inputs = ndarray::concatenate(Axis(0), &views)
            .map_err(|_| Error::InvalidSpec("batches have differing input widths".into()))?;
        let labels = batches.iter().flat_map(|b| b.labels.iter().copied()).collect();
        Ok(Batch {
            inputs,
            labels,
            task_id: first.task_id,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    params: ParamVector,
    layers: Vec<Layer>,
}

/// Intermediate values of a forward pass needed by backpropagation.
pub struct ForwardCache {
    /// Input to each layer (blocks then head).
    layer_inputs: Vec<Array2<f64>>,
    /// Pre-activations of each block, after the residual add.
    pre_activations: Vec<Array2<f64>>,
    pub logits: Array2<f64>,
}

impl Network {
    /// Build a network with uniform Glorot-scaled weights and zero biases.
    pub fn init(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let layers = Self::layout(&spec);
        let mut params = ParamVector::zeros(spec.num_params());
        let mut rng = Rng::new(seed);
        for layer in &layers {
            let a = (6.0 / (layer.fan_in + layer.fan_out) as f64).sqrt();
            for w in &mut params[layer.weight_range()] {
                *w = rng.uniform_range(-a, a);
            }
        }
        Ok(Self {
            spec,
            params,
            layers,
        })
    }

    /// Wrap an explicit parameter vector.
    pub fn from_params(spec: NetworkSpec, params: ParamVector) -> Result<Self> {
        spec.validate()?;
        check_len("network params", spec.num_params(), params.len())?;
        let layers = Self::layout(&spec);
        Ok(Self {
            spec,
            params,
            layers,
        })
    }

    fn layout(spec: &NetworkSpec) -> Vec<Layer> {
        let mut start = 0;
        spec.layer_dims()
            .into_iter()
            .enumerate()
            .map(|(i, (fan_in, fan_out))| {
                let layer = Layer {
                    fan_in,
                    fan_out,
                    start,
                    residual: i < spec.num_blocks() && fan_in == fan_out,
                };
                start += fan_in * fan_out + fan_out;
                layer
            })
            .collect()
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamVector {
        &mut self.params
    }

    pub fn set_params(&mut self, params: ParamVector) -> Result<()> {
        check_len("network params", self.params.len(), params.len())?;
        self.params = params;
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Parameter index range of each backbone block, in depth order.
    pub fn block_ranges(&self) -> Vec<Range<usize>> {
        self.layers[..self.spec.num_blocks()]
            .iter()
            .map(Layer::range)
            .collect()
    }

    pub fn head_range(&self) -> Range<usize> {
        self.layers[self.spec.num_blocks()].range()
    }

    /// Head weight rows and bias entries belonging to `task`.
    pub fn task_head_indices(&self, task: usize) -> Vec<usize> {
        let head = &self.layers[self.spec.num_blocks()];
        let c = self.spec.classes_per_task;
        let mut idx = Vec::new();
        for row in task * c..(task + 1) * c {
            let w0 = head.start + row * head.fan_in;
            idx.extend(w0..w0 + head.fan_in);
            idx.push(head.bias_range().start + row);
        }
        idx
    }

    fn weights(&self, layer: &Layer) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape(
            (layer.fan_out, layer.fan_in),
            &self.params[layer.weight_range()],
        )
        .expect("layer layout matches parameter vector")
    }

    fn bias(&self, layer: &Layer) -> ndarray::ArrayView1<'_, f64> {
        ndarray::ArrayView1::from(&self.params[layer.bias_range()])
    }

    pub fn forward(&self, inputs: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(inputs)?.logits)
    }

    pub fn forward_cached(&self, inputs: &Array2<f64>) -> Result<ForwardCache> {
        check_len("input columns", self.spec.input_dim, inputs.ncols())?;
        let blocks = self.spec.num_blocks();
        let mut layer_inputs = Vec::with_capacity(blocks + 1);
        let mut pre_activations = Vec::with_capacity(blocks);
        let mut h = inputs.to_owned();
        for layer in &self.layers[..blocks] {
            let mut pre = h.dot(&self.weights(layer).t()) + self.bias(layer);
            if layer.residual {
                pre += &h;
            }
            let out = pre.mapv(|v| v.max(0.0));
            layer_inputs.push(std::mem::replace(&mut h, out));
            pre_activations.push(pre);
        }
        let head = &self.layers[blocks];
        let logits = h.dot(&self.weights(head).t()) + self.bias(head);
        layer_inputs.push(h);
        Ok(ForwardCache {
            layer_inputs,
            pre_activations,
            logits,
        })
    }

    /// Gradient of a scalar loss with respect to all parameters, given the
    /// loss gradient with respect to the logits.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &Array2<f64>) -> ParamVector {
        let mut grad = ParamVector::zeros(self.num_params());
        let blocks = self.spec.num_blocks();
        let mut upstream = dlogits.to_owned();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let delta = if li < blocks {
                let pre = &cache.pre_activations[li];
                let mut d = upstream;
                ndarray::Zip::from(&mut d)
                    .and(pre)
                    .for_each(|d, &p| {
                        if p <= 0.0 {
                            *d = 0.0;
                        }
                    });
                d
            } else {
                upstream
            };
            let input = &cache.layer_inputs[li];
            let dw = delta.t().dot(input);
            let db = delta.sum_axis(Axis(0));
            grad[layer.weight_range()].copy_from_slice(
                dw.as_slice().expect("fresh dot output is contiguous"),
            );
            grad[layer.bias_range()].copy_from_slice(db.as_slice().expect("contiguous"));
            if li == 0 {
                break;
            }
            let mut dh = delta.dot(&self.weights(layer));
            if layer.residual {
                dh += &delta;
            }
            upstream = dh;
        }
        grad
    }

    fn check_batch(&self, batch: &Batch) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        if batch.task_id >= self.spec.num_tasks {
            return Err(Error::OutOfRange {
                field: "task_id".into(),
                detail: format!("{} >= {}", batch.task_id, self.spec.num_tasks),
            });
        }
        if let Some(&bad) = batch
            .labels
            .iter()
            .find(|&&l| l >= self.spec.classes_per_task)
        {
            return Err(Error::OutOfRange {
                field: "label".into(),
                detail: format!("{} >= {}", bad, self.spec.classes_per_task),
            });
        }
        Ok(())
    }

    fn task_columns(&self, task: usize) -> Range<usize> {
        let c = self.spec.classes_per_task;
        task * c..(task + 1) * c
    }

    /// Mean cross-entropy over the current task's logits only.
    pub fn task_loss(&self, batch: &Batch) -> Result<f64> {
        self.check_batch(batch)?;
        let logits = self.forward(&batch.inputs)?;
        let cols = self.task_columns(batch.task_id);
        let log_probs = log_softmax_rows(&logits.slice(s![.., cols]).to_owned());
        let n = batch.len() as f64;
        let loss = -batch
            .labels
            .iter()
            .enumerate()
            .map(|(i, &y)| log_probs[[i, y]])
            .sum::<f64>()
            / n;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("task loss {loss}")));
        }
        Ok(loss)
    }

    /// Task-masked mean cross-entropy and its exact gradient.
    pub fn task_loss_and_grad(&self, batch: &Batch) -> Result<(f64, ParamVector)> {
        self.check_batch(batch)?;
        let cache = self.forward_cached(&batch.inputs)?;
        let cols = self.task_columns(batch.task_id);
        let log_probs = log_softmax_rows(&cache.logits.slice(s![.., cols.clone()]).to_owned());
        let n = batch.len() as f64;
        let mut loss = 0.0;
        let mut dlogits = Array2::zeros(cache.logits.raw_dim());
        for (i, &y) in batch.labels.iter().enumerate() {
            loss -= log_probs[[i, y]];
            for k in 0..cols.len() {
                let p = log_probs[[i, k]].exp();
                let target = if k == y { 1.0 } else { 0.0 };
                dlogits[[i, cols.start + k]] = (p - target) / n;
            }
        }
        loss /= n;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("task loss {loss}")));
        }
        Ok((loss, self.backward(&cache, &dlogits)))
    }

    /// Fraction of samples whose task-restricted argmax equals the label.
    pub fn evaluate_accuracy(&self, batches: &[Batch], task_id: usize) -> Result<f64> {
        if batches.is_empty() {
            return Err(Error::Empty("evaluation batches"));
        }
        let cols = self.task_columns(task_id);
        let mut correct = 0usize;
        let mut total = 0usize;
        for batch in batches {
            if batch.task_id != task_id {
                return Err(Error::OutOfRange {
                    field: "task_id".into(),
                    detail: format!("batch of task {} evaluated as task {task_id}", batch.task_id),
                });
            }
            self.check_batch(batch)?;
            let logits = self.forward(&batch.inputs)?;
            for (row, &y) in logits.slice(s![.., cols.clone()]).rows().into_iter().zip(&batch.labels) {
                if argmax_first(row.iter().copied()) == y {
                    correct += 1;
                }
            }
            total += batch.len();
        }
        Ok(correct as f64 / total as f64)
    }
}

/// Index of the maximum, ties resolved toward the lowest index.
pub fn argmax_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

/// Row-wise log-softmax with max subtraction.
pub fn log_softmax_rows(z: &Array2<f64>) -> Array2<f64> {
    let mut out = z.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

pub fn softmax_rows(z: &Array2<f64>) -> Array2<f64> {
    log_softmax_rows(z).mapv(f64::exp)
}

/// Central-difference gradient of an arbitrary scalar function of the
/// parameters.
pub fn central_difference<F>(theta: &ParamVector, epsilon: f64, mut f: F) -> ParamVector
where
    F: FnMut(&ParamVector) -> f64,
{
    assert!(epsilon > 0.0, "epsilon must be positive");
    let mut probe = theta.clone();
    let mut grad = ParamVector::zeros(theta.len());
    for i in 0..theta.len() {
        let orig = probe[i];
        probe[i] = orig + epsilon;
        let plus = f(&probe);
        probe[i] = orig - epsilon;
        let minus = f(&probe);
        probe[i] = orig;
        grad[i] = (plus - minus) / (2.0 * epsilon);
    }
    grad
}

/// Central-difference approximation of the task-loss gradient.
pub fn finite_diff_gradient(net: &Network, batch: &Batch, epsilon: f64) -> Result<ParamVector> {
    if !(epsilon > 0.0) {
        return Err(Error::OutOfRange {
            field: "epsilon".into(),
            detail: format!("{epsilon} is not positive"),
        });
    }
    net.task_loss(batch)?;
    let mut probe = net.clone();
    let mut failure = None;
    let grad = central_difference(net.params(), epsilon, |theta| {
        probe.params_mut().copy_from_slice(theta);
        match probe.task_loss(batch) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(grad),
    }
}
