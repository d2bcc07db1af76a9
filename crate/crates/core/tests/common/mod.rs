//! Random graphs and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use eagle_core::hetgraph::{HetGraph, InstanceNodeSet, MetaPath, NodeRef, NodeTypeId, Schema};
use eagle_core::linalg::DenseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random heterogeneous graph with at most `max_nodes` nodes over 2..=4
/// node types. Edge types may join a type to itself.
pub fn random_graph(seed: u64, max_nodes: usize) -> HetGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_types = rng.random_range(2..=4usize);
    let mut schema = Schema::new();
    let types: Vec<NodeTypeId> = (0..n_types)
        .map(|t| schema.add_node_type(&format!("t{t}")).unwrap())
        .collect();
    let per_type = (max_nodes / n_types).max(1);
    let counts: Vec<usize> = (0..n_types).map(|_| rng.random_range(1..=per_type)).collect();

    // a spanning chain of type pairs keeps the schema connected
    let mut decls = Vec::new();
    for w in types.windows(2) {
        decls.push((w[0], w[1]));
    }
    for _ in 0..rng.random_range(0..=2usize) {
        let a = types[rng.random_range(0..n_types)];
        let b = types[rng.random_range(0..n_types)];
        decls.push((a, b));
    }
    let mut edges = Vec::new();
    for (e, &(a, b)) in decls.iter().enumerate() {
        schema.add_edge_type(&format!("e{e}"), a, b).unwrap();
        let density = rng.random_range(0.05..0.5);
        let mut list = Vec::new();
        for i in 0..counts[a.0 as usize] {
            for j in 0..counts[b.0 as usize] {
                if (a != b || i != j) && rng.random_bool(density) {
                    list.push((i, j));
                }
            }
        }
        edges.push(list);
    }
    let attrs = counts
        .iter()
        .map(|&c| DenseMatrix::from_fn(c, 3, |_, _| rng.random_range(0.0..1.0)))
        .collect();
    HetGraph::new(schema, attrs, edges, None).unwrap()
}

/// Random square meta-path of 3..=5 types, walked over the schema's type
/// graph and closed by retracing its first half when needed.
pub fn random_metapath(graph: &HetGraph, seed: u64) -> MetaPath {
    let t = NodeTypeId((seed % graph.schema().num_node_types() as u64) as u16);
    random_metapath_at(graph, t, seed)
}

/// Like [`random_metapath`] with a fixed start type.
pub fn random_metapath_at(graph: &HetGraph, start: NodeTypeId, seed: u64) -> MetaPath {
    let schema = graph.schema();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = |t: NodeTypeId, rng: &mut ChaCha8Rng| -> NodeTypeId {
        let next: Vec<NodeTypeId> = schema
            .node_type_ids()
            .filter(|&u| !schema.edge_types_between(t, u).is_empty())
            .collect();
        next[rng.random_range(0..next.len())]
    };
    let half = rng.random_range(1..=2usize);
    let mut types = vec![start];
    for _ in 0..half {
        let t = step(*types.last().unwrap(), &mut rng);
        types.push(t);
    }
    let back: Vec<NodeTypeId> = types[..types.len() - 1].iter().rev().copied().collect();
    types.extend(back);
    MetaPath::new(schema, types).unwrap()
}

/// Undirected neighbors of `node` of type `to`, read straight off the edge
/// lists.
pub fn raw_neighbors(graph: &HetGraph, node: NodeRef, to: NodeTypeId) -> BTreeSet<usize> {
    let schema = graph.schema();
    let mut out = BTreeSet::new();
    for e in schema.edge_type_ids() {
        let d = schema.edge_decl(e).unwrap();
        for &(s, t) in graph.edges(e) {
            if d.src == node.ty && d.dst == to && s == node.idx {
                out.insert(t);
            }
            if d.dst == node.ty && d.src == to && t == node.idx {
                out.insert(s);
            }
        }
    }
    out
}

/// Every typed walk realizing `path`.
pub fn all_walks(graph: &HetGraph, path: &MetaPath) -> Vec<Vec<NodeRef>> {
    let types = path.types();
    let mut walks: Vec<Vec<NodeRef>> = (0..graph.node_count(types[0]))
        .map(|i| vec![NodeRef::new(types[0], i)])
        .collect();
    for &t in &types[1..] {
        let mut next = Vec::new();
        for w in &walks {
            for j in raw_neighbors(graph, *w.last().unwrap(), t) {
                let mut w2 = w.clone();
                w2.push(NodeRef::new(t, j));
                next.push(w2);
            }
        }
        walks = next;
    }
    walks
}

/// Dense 0/1 meta-path adjacency from walk enumeration, unit diagonal.
pub fn walk_adjacency(graph: &HetGraph, path: &MetaPath) -> Vec<Vec<u8>> {
    let n = graph.node_count(path.start());
    let mut a = vec![vec![0u8; n]; n];
    for w in all_walks(graph, path) {
        a[w[0].idx][w.last().unwrap().idx] = 1;
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1;
    }
    a
}

/// Distinct node sets of the walks through `anchor` whose endpoints differ.
pub fn instances_through(graph: &HetGraph, path: &MetaPath, anchor: NodeRef) -> BTreeSet<InstanceNodeSet> {
    all_walks(graph, path)
        .into_iter()
        .filter(|w| w[0] != *w.last().unwrap() && w.contains(&anchor))
        .map(|w| InstanceNodeSet::from_walk(&w))
        .collect()
}

/// AUC as the fraction of (anomaly, normal) pairs ordered correctly, ties
/// counting one half.
pub fn pair_count_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &yi) in labels.iter().enumerate() {
        if yi != 1 {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj != 0 {
                continue;
            }
            den += 1.0;
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    num / den
}
