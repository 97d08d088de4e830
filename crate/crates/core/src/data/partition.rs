use std::cmp::Ordering;

use rand::seq::SliceRandom;

use super::{DataError, Dataset};
use crate::rng;
use crate::scalar::Scalar;

/// How a dataset is split across clients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionSpec {
    pub num_clients: usize,
    /// Percentage (0..=100) of examples dealt out uniformly at random; the rest
    /// is handed out sorted by class.
    pub iid_fraction: f64,
    pub seed: u64,
}

fn chunk_sizes(total: usize, parts: usize) -> Vec<usize> {
    (0..parts).map(|i| total / parts + usize::from(i < total % parts)).collect()
}

/// Splits `dataset` into `spec.num_clients` disjoint shards of example indices.
///
/// A seeded uniform `s%` sample is dealt evenly to the clients first. The
/// remainder is sorted by label (ties by original index) and assigned in
/// contiguous blocks, sized so that final shard sizes differ by at most one
/// with the extra examples on the lowest-numbered clients.
pub fn partition<F: Scalar>(dataset: &Dataset<F>, spec: &PartitionSpec) -> Result<Vec<Vec<usize>>, DataError> {
    let n = dataset.len();
    let clients = spec.num_clients;
    if clients == 0 {
        return Err(DataError::NoClients);
    }
    if !(0.0..=100.0).contains(&spec.iid_fraction) {
        return Err(DataError::BadFraction(spec.iid_fraction));
    }
    if clients > n {
        return Err(DataError::TooManyClients { clients, examples: n });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(spec.seed));
    let iid_count = ((n as f64) * spec.iid_fraction / 100.0).floor() as usize;
    let (iid, rest) = order.split_at(iid_count.min(n));

    let mut rest = rest.to_vec();
    let labels = dataset.labels();
    rest.sort_by(|&a, &b| {
        labels[a]
            .partial_cmp(&labels[b])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });

    let iid_sizes = chunk_sizes(iid.len(), clients);
    let target = chunk_sizes(n, clients);
    let mut shards = Vec::with_capacity(clients);
    let (mut iid_pos, mut rest_pos) = (0, 0);
    for i in 0..clients {
        let mut shard = iid[iid_pos..iid_pos + iid_sizes[i]].to_vec();
        iid_pos += iid_sizes[i];
        let take = target[i] - iid_sizes[i];
        shard.extend_from_slice(&rest[rest_pos..rest_pos + take]);
        rest_pos += take;
        shards.push(shard);
    }
    debug_assert_eq!(iid_pos, iid.len());
    debug_assert_eq!(rest_pos, rest.len());
    Ok(shards)
}
