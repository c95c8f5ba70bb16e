//! Fixed trainable subspaces and their orthogonal coordinate projector.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::nn::{Network, ParamVector};

/// A fixed set of trainable coordinates over the flat parameter vector.
///
/// Immutable once built: a regime holds for an entire continual-learning run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainableSubspace {
    mask: Vec<bool>,
    label: String,
    dim: usize,
}

/// Result-file label of a depth regime: `full` or `last_<k>`.
pub fn depth_label(k_blocks: usize, num_blocks: usize) -> String {
    if k_blocks == num_blocks {
        "full".to_string()
    } else {
        format!("last_{k_blocks}")
    }
}

impl TrainableSubspace {
    pub fn from_mask(mask: Vec<bool>, label: impl Into<String>) -> Self {
        let dim = mask.iter().filter(|&&m| m).count();
        Self {
            mask,
            label: label.into(),
            dim,
        }
    }

    pub fn full(d: usize) -> Self {
        Self::from_mask(vec![true; d], "full")
    }

    pub fn empty(d: usize) -> Self {
        Self::from_mask(vec![false; d], "frozen")
    }

    /// Train the last `k_blocks` backbone blocks plus the classifier head.
    pub fn depth_regime(net: &Network, k_blocks: usize) -> Result<Self> {
        let blocks = net.spec().num_blocks();
        if k_blocks == 0 || k_blocks > blocks {
            return Err(Error::OutOfRange {
                field: "k_blocks".into(),
                detail: format!("{k_blocks} not in [1, {blocks}]"),
            });
        }
        let mut mask = vec![false; net.num_params()];
        for range in net.block_ranges().into_iter().skip(blocks - k_blocks) {
            mask[range].fill(true);
        }
        mask[net.head_range()].fill(true);
        Ok(Self::from_mask(mask, depth_label(k_blocks, blocks)))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    /// Number of trainable coordinates.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_trainable(&self, i: usize) -> bool {
        self.mask[i]
    }

    /// `P_S v`: frozen coordinates set to exactly zero.
    pub fn project(&self, v: &ParamVector) -> Result<ParamVector> {
        check_len("projected vector", self.mask.len(), v.len())?;
        Ok(self
            .mask
            .iter()
            .zip(v.iter())
            .map(|(&keep, &x)| if keep { x } else { 0.0 })
            .collect())
    }

    pub fn project_in_place(&self, v: &mut ParamVector) -> Result<()> {
        check_len("projected vector", self.mask.len(), v.len())?;
        for (x, &keep) in v.iter_mut().zip(&self.mask) {
            if !keep {
                *x = 0.0;
            }
        }
        Ok(())
    }

    /// `<P_S a, P_S b>`.
    pub fn inner(&self, a: &ParamVector, b: &ParamVector) -> Result<f64> {
        check_len("inner product lhs", self.mask.len(), a.len())?;
        check_len("inner product rhs", self.mask.len(), b.len())?;
        Ok(self
            .mask
            .iter()
            .zip(a.iter().zip(b.iter()))
            .filter(|(&keep, _)| keep)
            .map(|(_, (x, y))| x * y)
            .sum())
    }

    pub fn norm(&self, v: &ParamVector) -> Result<f64> {
        Ok(self.inner(v, v)?.sqrt())
    }

    pub fn frozen_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| !m)
            .map(|(i, _)| i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::NetworkSpec;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn three_block_net() -> Network {
        Network::init(
            NetworkSpec {
                input_dim: 3,
                block_widths: vec![4, 4, 5],
                num_tasks: 2,
                classes_per_task: 2,
            },
            0,
        )
        .unwrap()
    }

    #[test]
    fn full_depth_is_all_ones() {
        let net = three_block_net();
        let sub = TrainableSubspace::depth_regime(&net, 3).unwrap();
        assert!(sub.mask().iter().all(|&m| m));
        assert_eq!(sub.dim(), net.num_params());
        assert_eq!(sub.label(), "full");
    }

    #[test]
    fn last_block_regime_bookkeeping() {
        let net = three_block_net();
        let sub = TrainableSubspace::depth_regime(&net, 1).unwrap();
        let ranges = net.block_ranges();
        for i in 0..net.num_params() {
            let expected = i >= ranges[2].start;
            assert_eq!(sub.is_trainable(i), expected, "coordinate {i}");
        }
        assert_eq!(sub.label(), "last_1");
        assert_eq!(sub, TrainableSubspace::depth_regime(&net, 1).unwrap());
        assert_eq!(
            sub.dim(),
            ranges[2].len() + net.head_range().len()
        );
    }

    #[test]
    fn depth_out_of_range() {
        let net = three_block_net();
        assert!(TrainableSubspace::depth_regime(&net, 0).is_err());
        assert!(TrainableSubspace::depth_regime(&net, 4).is_err());
    }

    #[test]
    fn projector_examples() {
        let v = ParamVector::from(vec![3.0, 4.0, 5.0]);
        assert_eq!(TrainableSubspace::full(3).project(&v).unwrap(), v);
        assert_eq!(
            TrainableSubspace::empty(3).project(&v).unwrap(),
            ParamVector::zeros(3)
        );
        let sub = TrainableSubspace::from_mask(vec![true, false, true], "x");
        assert_eq!(sub.project(&v).unwrap().to_vec(), vec![3.0, 0.0, 5.0]);
        assert!(sub.project(&ParamVector::zeros(2)).is_err());
    }

    #[test]
    fn inner_product_examples() {
        let a = ParamVector::from(vec![1.0, -2.0, 3.0]);
        let full = TrainableSubspace::full(3);
        assert_eq!(full.inner(&a, &a).unwrap(), a.norm_sq());
        let sub = TrainableSubspace::from_mask(vec![true, true, false], "x");
        let x = ParamVector::from(vec![1.0, 0.0, 0.0]);
        let y = ParamVector::from(vec![0.0, 5.0, 0.0]);
        assert_eq!(sub.inner(&x, &y).unwrap(), 0.0);
        let sub = TrainableSubspace::from_mask(vec![true, false], "x");
        let a = ParamVector::from(vec![2.0, 7.0]);
        let b = ParamVector::from(vec![3.0, 9.0]);
        assert_eq!(sub.inner(&a, &b).unwrap(), 6.0);
    }

    fn random_case(seed: u64, d: usize) -> (TrainableSubspace, ParamVector, ParamVector) {
        let mut rng = Rng::new(seed);
        let p = rng.uniform();
        let mask = (0..d).map(|_| rng.bernoulli(p)).collect();
        let a = (0..d).map(|_| rng.normal() * 10.0).collect();
        let b = (0..d).map(|_| rng.normal()).collect();
        (TrainableSubspace::from_mask(mask, "rand"), a, b)
    }

    proptest! {
        #[test]
        fn projector_algebra(seed in any::<u64>(), d in 1usize..64) {
            let (sub, a, b) = random_case(seed, d);
            let pa = sub.project(&a).unwrap();
            prop_assert_eq!(&sub.project(&pa).unwrap(), &pa);
            prop_assert_eq!(sub.inner(&a, &b).unwrap(), sub.inner(&b, &a).unwrap());
            let pb = sub.project(&b).unwrap();
            prop_assert_eq!(a.dot(&pb), pa.dot(&b));
            prop_assert!(pa.norm() <= a.norm());
            for i in sub.frozen_indices() {
                prop_assert_eq!(pa[i], 0.0);
            }
        }
    }
}
