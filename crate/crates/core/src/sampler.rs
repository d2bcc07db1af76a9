//! Meta-path level instance pairs.
//!
//! A positive pair couples a target node with an instance of a meta-path
//! that passes through it. A negative pair couples it with an instance of
//! the same template that avoids the target but touches one of its direct
//! neighbors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hetgraph::{
    metapath_instances_with, random_walk_through, HetGraph, InstanceNodeSet, InstanceOptions, MetaPath, NodeRef,
};

/// Rejection attempts per negative before giving up on a template.
pub const NEGATIVE_ATTEMPTS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    /// BCE target: 1 for positive, 0 for negative.
    pub fn label(self) -> f64 {
        match self {
            Polarity::Positive => 1.0,
            Polarity::Negative => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstancePair {
    pub target: NodeRef,
    pub instance: InstanceNodeSet,
    pub polarity: Polarity,
    /// Index into the meta-path list the pair was drawn from.
    pub path: usize,
}

/// Per-node seed mixing so that nodes can be sampled independently.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    // splitmix64 over the parts
    let mut x = base;
    for &p in parts {
        x = x.wrapping_add(p).wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x = z ^ (z >> 31);
    }
    x
}

/// Up to `n` positive pairs for `target`, taking instances from `paths`
/// round-robin. An empty result means the target lies on no instance.
pub fn sample_positive(
    graph: &HetGraph,
    target: NodeRef,
    paths: &[MetaPath],
    n: usize,
    seed: u64,
) -> Result<Vec<InstancePair>> {
    sample_positive_with(graph, target, paths, n, seed, &InstanceOptions::default())
}

pub fn sample_positive_with(
    graph: &HetGraph,
    target: NodeRef,
    paths: &[MetaPath],
    n: usize,
    seed: u64,
    opts: &InstanceOptions,
) -> Result<Vec<InstancePair>> {
    if n == 0 {
        return Err(Error::Config("pair count must be at least 1".into()));
    }
    graph.check_node(target)?;
    let mut pools = Vec::with_capacity(paths.len());
    for (pi, path) in paths.iter().enumerate() {
        let inst = metapath_instances_with(graph, path, target, n, derive_seed(seed, &[pi as u64]), opts)?;
        pools.push(inst.into_iter());
    }
    let mut out = Vec::with_capacity(n);
    'fill: loop {
        let mut progressed = false;
        for (pi, pool) in pools.iter_mut().enumerate() {
            if out.len() == n {
                break 'fill;
            }
            if let Some(instance) = pool.next() {
                progressed = true;
                out.push(InstancePair {
                    target,
                    instance,
                    polarity: Polarity::Positive,
                    path: pi,
                });
            }
        }
        if !progressed {
            break;
        }
    }
    Ok(out)
}

/// Up to `n` negative pairs for `target`: instances that exclude the target
/// and contain at least one of its direct neighbors. Templates are visited
/// round-robin; a template is dropped after [`NEGATIVE_ATTEMPTS`] failed
/// draws.
pub fn sample_negative(
    graph: &HetGraph,
    target: NodeRef,
    paths: &[MetaPath],
    n: usize,
    seed: u64,
) -> Result<Vec<InstancePair>> {
    if n == 0 {
        return Err(Error::Config("pair count must be at least 1".into()));
    }
    graph.check_node(target)?;
    let neighbors = graph.direct_neighbors(target);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut alive: Vec<usize> = (0..paths.len()).collect();
    let mut out = Vec::with_capacity(n);
    let mut turn = 0usize;
    while out.len() < n && !alive.is_empty() {
        let slot = turn % alive.len();
        let pi = alive[slot];
        let path = &paths[pi];
        let anchors: Vec<NodeRef> = neighbors
            .iter()
            .copied()
            .filter(|nb| path.types().contains(&nb.ty))
            .collect();
        let mut found = None;
        if !anchors.is_empty() {
            for _ in 0..NEGATIVE_ATTEMPTS {
                let anchor = anchors[rng.random_range(0..anchors.len())];
                let positions: Vec<usize> = (0..path.len()).filter(|&k| path.types()[k] == anchor.ty).collect();
                let k = positions[rng.random_range(0..positions.len())];
                if let Some(walk) = random_walk_through(graph, path, anchor, k, &mut rng) {
                    let set = InstanceNodeSet::from_walk(&walk);
                    if !set.contains(target) {
                        found = Some(set);
                        break;
                    }
                }
            }
        }
        match found {
            Some(instance) => {
                out.push(InstancePair {
                    target,
                    instance,
                    polarity: Polarity::Negative,
                    path: pi,
                });
                turn += 1;
            }
            None => {
                alive.remove(slot);
            }
        }
    }
    Ok(out)
}

/// Checks the two pair invariants: positives contain the target, negatives
/// avoid it and touch a direct neighbor.
pub fn pair_is_valid(graph: &HetGraph, pair: &InstancePair) -> bool {
    match pair.polarity {
        Polarity::Positive => pair.instance.contains(pair.target),
        Polarity::Negative => {
            !pair.instance.contains(pair.target)
                && graph
                    .direct_neighbors(pair.target)
                    .iter()
                    .any(|nb| pair.instance.contains(*nb))
        }
    }
}
