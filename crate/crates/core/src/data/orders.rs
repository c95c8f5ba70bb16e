use std::hash::Hasher;

use serde::{Deserialize, Serialize};

use crate::rng::Rng;

/// A permutation of task ids; order 0 is the canonical identity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskOrder {
    pub order_id: usize,
    pub tasks: Vec<usize>,
    pub canonical: bool,
}

impl TaskOrder {
    pub fn is_valid_permutation(&self) -> bool {
        let mut seen = vec![false; self.tasks.len()];
        self.tasks.iter().all(|&t| t < seen.len() && !std::mem::replace(&mut seen[t], true))
    }
}

/// The canonical order followed by `n_random` Fisher-Yates shuffles drawn
/// from one seeded stream. Duplicates are kept.
pub fn sample_orders(num_tasks: usize, n_random: usize, seed: u64) -> Vec<TaskOrder> {
    let identity: Vec<usize> = (0..num_tasks).collect();
    let mut rng = Rng::new(seed);
    let mut orders = vec![TaskOrder {
        order_id: 0,
        tasks: identity.clone(),
        canonical: true,
    }];
    for id in 1..=n_random {
        let mut tasks = identity.clone();
        rng.shuffle(&mut tasks);
        orders.push(TaskOrder {
            order_id: id,
            tasks,
            canonical: false,
        });
    }
    orders
}

/// Hex FNV-1a digest of an order list, stamped on every result row.
pub fn orders_digest(orders: &[TaskOrder]) -> String {
    let mut h = fnv::FnvHasher::default();
    for o in orders {
        for &t in &o.tasks {
            h.write(&(t as u64).to_le_bytes());
        }
        h.write(&[0xff]);
    }
    format!("{:016x}", h.finish())
}
