use std::collections::{BTreeSet, HashMap};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{HetGraph, NodeRef, NodeTypeId, Schema};
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

/// Ordered node-type sequence describing a composite relation, e.g.
/// paper-author-paper.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MetaPath {
    name: String,
    types: Vec<NodeTypeId>,
}

impl MetaPath {
    pub fn new(schema: &Schema, types: Vec<NodeTypeId>) -> Result<Self> {
        if types.len() < 3 {
            return Err(Error::Schema(format!(
                "a meta-path needs at least 3 node types, got {}",
                types.len()
            )));
        }
        for &t in &types {
            if t.0 as usize >= schema.num_node_types() {
                return Err(Error::Schema(format!("unknown node type id {}", t.0)));
            }
        }
        for w in types.windows(2) {
            if schema.edge_types_between(w[0], w[1]).is_empty() {
                return Err(Error::Schema(format!(
                    "no edge type joins '{}' and '{}'",
                    schema.node_type_name(w[0]),
                    schema.node_type_name(w[1])
                )));
            }
        }
        let name = types
            .iter()
            .map(|&t| schema.node_type_name(t))
            .collect::<Vec<_>>()
            .join("-");
        Ok(Self { name, types })
    }

    /// Parses `paper-author-paper` style names.
    pub fn parse(schema: &Schema, spec: &str) -> Result<Self> {
        let types = spec
            .split('-')
            .map(|n| {
                schema
                    .node_type(n.trim())
                    .ok_or_else(|| Error::Schema(format!("unknown node type '{}' in meta-path '{spec}'", n.trim())))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(schema, types)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn types(&self) -> &[NodeTypeId] {
        &self.types
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn start(&self) -> NodeTypeId {
        self.types[0]
    }

    pub fn end(&self) -> NodeTypeId {
        *self.types.last().expect("non-empty path")
    }

    pub fn is_square(&self) -> bool {
        self.start() == self.end()
    }

    fn require_square(&self) -> Result<()> {
        if !self.is_square() {
            return Err(Error::Schema(format!(
                "meta-path '{}' does not start and end on the same node type",
                self.name
            )));
        }
        Ok(())
    }

    fn check_against(&self, graph: &HetGraph) -> Result<()> {
        // Re-validate in case the path was built for another schema.
        MetaPath::new(graph.schema(), self.types.clone()).map(|_| ())
    }
}

/// Distinct nodes of one concrete meta-path instance, sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InstanceNodeSet {
    members: Vec<NodeRef>,
}

impl InstanceNodeSet {
    pub fn from_walk(walk: &[NodeRef]) -> Self {
        let mut members = walk.to_vec();
        members.sort_unstable();
        members.dedup();
        Self { members }
    }

    pub fn members(&self) -> &[NodeRef] {
        &self.members
    }

    pub fn contains(&self, node: NodeRef) -> bool {
        self.members.binary_search(&node).is_ok()
    }

    /// Indices of the members with type `t`.
    pub fn of_type(&self, t: NodeTypeId) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().filter(move |n| n.ty == t).map(|n| n.idx)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Tuning knobs for instance sampling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceOptions {
    /// Exact enumeration is used while the start type has at most this many nodes.
    pub enumeration_threshold: usize,
    /// Exact enumeration is skipped when more walks than this pass through the anchor.
    pub enumeration_cap: u128,
    /// Random-walk attempts per requested instance in the sampled regime.
    pub walk_attempts: usize,
}

impl Default for InstanceOptions {
    fn default() -> Self {
        Self {
            enumeration_threshold: 1000,
            enumeration_cap: 100_000,
            walk_attempts: 20,
        }
    }
}

fn step_matrix(graph: &HetGraph, from: NodeTypeId, to: NodeTypeId) -> Result<SparseMatrix> {
    let n = graph.node_count(from);
    let mut triplets = Vec::new();
    for i in 0..n {
        for &j in graph.neighbors_of_type(NodeRef::new(from, i), to) {
            triplets.push((i, j, 1.0));
        }
    }
    SparseMatrix::from_triplets(n, graph.node_count(to), &triplets)
}

/// Square binary matrix over the start type: `(i, j) = 1` iff some instance
/// of `path` joins `i` to `j`. The diagonal is always one.
pub fn metapath_adjacency(graph: &HetGraph, path: &MetaPath) -> Result<SparseMatrix> {
    path.check_against(graph)?;
    path.require_square()?;
    let types = path.types();
    let mut acc = step_matrix(graph, types[0], types[1])?;
    for w in types[1..].windows(2) {
        acc = acc.spgemm(&step_matrix(graph, w[0], w[1])?)?.binarize();
    }
    acc.with_unit_diagonal()
}

/// Meta-path neighbors of start-type node `node`, itself included.
pub fn metapath_neighbors(graph: &HetGraph, path: &MetaPath, node: usize) -> Result<BTreeSet<usize>> {
    path.check_against(graph)?;
    path.require_square()?;
    let start = NodeRef::new(path.start(), node);
    graph.check_node(start)?;
    let mut frontier: BTreeSet<usize> = BTreeSet::from([node]);
    for w in path.types().windows(2) {
        frontier = frontier
            .iter()
            .flat_map(|&i| graph.neighbors_of_type(NodeRef::new(w[0], i), w[1]).iter().copied())
            .collect();
    }
    frontier.insert(node);
    Ok(frontier)
}

/// Up to `max_count` distinct instances of `path` passing through `anchor`,
/// uniformly sampled with `seed`. Instances whose two endpoints coincide are
/// not counted.
pub fn metapath_instances(
    graph: &HetGraph,
    path: &MetaPath,
    anchor: NodeRef,
    max_count: usize,
    seed: u64,
) -> Result<Vec<InstanceNodeSet>> {
    metapath_instances_with(graph, path, anchor, max_count, seed, &InstanceOptions::default())
}

pub fn metapath_instances_with(
    graph: &HetGraph,
    path: &MetaPath,
    anchor: NodeRef,
    max_count: usize,
    seed: u64,
    opts: &InstanceOptions,
) -> Result<Vec<InstanceNodeSet>> {
    path.check_against(graph)?;
    graph.check_node(anchor)?;
    if max_count == 0 {
        return Err(Error::Config("max_count must be at least 1".into()));
    }
    let positions: Vec<usize> = (0..path.len()).filter(|&k| path.types()[k] == anchor.ty).collect();
    if positions.is_empty() {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: u128 = positions
        .iter()
        .map(|&k| count_walks_through(graph, path, anchor, k))
        .fold(0u128, u128::saturating_add);
    if total == 0 {
        return Ok(Vec::new());
    }
    let exact = graph.node_count(path.start()) <= opts.enumeration_threshold && total <= opts.enumeration_cap;
    if exact {
        let mut all = BTreeSet::new();
        for &k in &positions {
            enumerate_through(graph, path, anchor, k, &mut all);
        }
        let all: Vec<InstanceNodeSet> = all.into_iter().collect();
        if all.len() <= max_count {
            return Ok(all);
        }
        let mut picked = index::sample(&mut rng, all.len(), max_count).into_vec();
        picked.sort_unstable();
        return Ok(picked.into_iter().map(|i| all[i].clone()).collect());
    }

    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for _ in 0..max_count.saturating_mul(opts.walk_attempts) {
        if out.len() == max_count {
            break;
        }
        let k = positions[rng.random_range(0..positions.len())];
        if let Some(walk) = random_walk_through(graph, path, anchor, k, &mut rng) {
            let set = InstanceNodeSet::from_walk(&walk);
            if seen.insert(set.clone()) {
                out.push(set);
            }
        }
    }
    Ok(out)
}

/// Number of typed walks realizing `path` with `anchor` at position `k`.
fn count_walks_through(graph: &HetGraph, path: &MetaPath, anchor: NodeRef, k: usize) -> u128 {
    let types = path.types();
    let side = |range: Box<dyn Iterator<Item = (usize, usize)>>| -> u128 {
        let mut frontier: HashMap<usize, u128> = HashMap::from([(anchor.idx, 1u128)]);
        for (from, to) in range {
            let mut next: HashMap<usize, u128> = HashMap::new();
            for (&i, &c) in &frontier {
                for &j in graph.neighbors_of_type(NodeRef::new(types[from], i), types[to]) {
                    let e = next.entry(j).or_insert(0);
                    *e = e.saturating_add(c);
                }
            }
            frontier = next;
        }
        frontier.values().fold(0u128, |a, &b| a.saturating_add(b))
    };
    let left = side(Box::new((1..=k).rev().map(|j| (j, j - 1))));
    let right = side(Box::new((k..types.len() - 1).map(|j| (j, j + 1))));
    left.saturating_mul(right)
}

/// All partial walks from `anchor` (at position `k`) stepping in `steps`.
fn partial_walks(
    graph: &HetGraph,
    types: &[NodeTypeId],
    anchor: NodeRef,
    steps: &[(usize, usize)],
) -> Vec<Vec<NodeRef>> {
    let mut walks = vec![vec![anchor]];
    for &(from, to) in steps {
        let mut next = Vec::new();
        for w in &walks {
            let cur = *w.last().expect("non-empty walk");
            debug_assert_eq!(cur.ty, types[from]);
            for &j in graph.neighbors_of_type(cur, types[to]) {
                let mut w2 = w.clone();
                w2.push(NodeRef::new(types[to], j));
                next.push(w2);
            }
        }
        walks = next;
    }
    walks
}

fn enumerate_through(
    graph: &HetGraph,
    path: &MetaPath,
    anchor: NodeRef,
    k: usize,
    out: &mut BTreeSet<InstanceNodeSet>,
) {
    let types = path.types();
    let left_steps: Vec<_> = (1..=k).rev().map(|j| (j, j - 1)).collect();
    let right_steps: Vec<_> = (k..types.len() - 1).map(|j| (j, j + 1)).collect();
    let lefts = partial_walks(graph, types, anchor, &left_steps);
    let rights = partial_walks(graph, types, anchor, &right_steps);
    for l in &lefts {
        for r in &rights {
            // l runs anchor -> position 0, r runs anchor -> last position
            let first = *l.last().expect("non-empty");
            let last = *r.last().expect("non-empty");
            if first == last {
                continue;
            }
            let walk: Vec<NodeRef> = l.iter().rev().chain(r.iter().skip(1)).copied().collect();
            out.insert(InstanceNodeSet::from_walk(&walk));
        }
    }
}

/// One uniformly-stepped walk through `anchor` at position `k`, or `None`
/// on a dead end or a degenerate (closed) walk.
pub(crate) fn random_walk_through(
    graph: &HetGraph,
    path: &MetaPath,
    anchor: NodeRef,
    k: usize,
    rng: &mut impl Rng,
) -> Option<Vec<NodeRef>> {
    let types = path.types();
    let mut walk = vec![anchor; types.len()];
    let mut cur = anchor;
    for j in (0..k).rev() {
        let nbrs = graph.neighbors_of_type(cur, types[j]);
        if nbrs.is_empty() {
            return None;
        }
        cur = NodeRef::new(types[j], nbrs[rng.random_range(0..nbrs.len())]);
        walk[j] = cur;
    }
    cur = anchor;
    for j in (k + 1)..types.len() {
        let nbrs = graph.neighbors_of_type(cur, types[j]);
        if nbrs.is_empty() {
            return None;
        }
        cur = NodeRef::new(types[j], nbrs[rng.random_range(0..nbrs.len())]);
        walk[j] = cur;
    }
    if walk[0] == walk[types.len() - 1] {
        return None;
    }
    Some(walk)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::toy_apv;
    use super::*;
    use crate::linalg::DenseMatrix;

    fn types(g: &HetGraph) -> (NodeTypeId, NodeTypeId, NodeTypeId) {
        let s = g.schema();
        (
            s.node_type("author").unwrap(),
            s.node_type("paper").unwrap(),
            s.node_type("venue").unwrap(),
        )
    }

    #[test]
    fn parse_and_validate() {
        let g = toy_apv();
        let p = MetaPath::parse(g.schema(), "paper-venue-paper").unwrap();
        assert_eq!(p.name(), "paper-venue-paper");
        assert!(p.is_square());
        assert!(MetaPath::parse(g.schema(), "author-venue-author").is_err());
        assert!(MetaPath::parse(g.schema(), "author-paper").is_err());
        assert!(MetaPath::parse(g.schema(), "author-book-author").is_err());
        let apv = MetaPath::parse(g.schema(), "author-paper-venue").unwrap();
        assert!(matches!(metapath_adjacency(&g, &apv), Err(Error::Schema(_))));
    }

    #[test]
    fn apa_neighbors_include_self() {
        let g = toy_apv();
        let apa = MetaPath::parse(g.schema(), "author-paper-author").unwrap();
        let n = metapath_neighbors(&g, &apa, 1).unwrap();
        assert_eq!(n.into_iter().collect::<Vec<_>>(), vec![0, 1]);
        let adj = metapath_adjacency(&g, &apa).unwrap();
        for i in 0..4 {
            assert_eq!(adj.get(i, i), 1.0);
        }
        assert_eq!(adj.get(1, 0), 1.0);
        assert_eq!(adj.get(1, 2), 0.0);
        assert!(adj.is_symmetric());
    }

    #[test]
    fn edgeless_graph_gives_identity() {
        let mut s = Schema::new();
        let a = s.add_node_type("a").unwrap();
        let b = s.add_node_type("b").unwrap();
        s.add_edge_type("ab", a, b).unwrap();
        let g = HetGraph::new(
            s,
            vec![DenseMatrix::zeros(3, 1), DenseMatrix::zeros(2, 1)],
            vec![vec![]],
            None,
        )
        .unwrap();
        let aba = MetaPath::parse(g.schema(), "a-b-a").unwrap();
        assert_eq!(metapath_adjacency(&g, &aba).unwrap(), SparseMatrix::identity(3));
        assert_eq!(metapath_neighbors(&g, &aba, 2).unwrap(), BTreeSet::from([2]));
        assert!(metapath_instances(&g, &aba, NodeRef::new(a, 0), 5, 0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn neighbor_index_out_of_range() {
        let g = toy_apv();
        let apa = MetaPath::parse(g.schema(), "author-paper-author").unwrap();
        assert!(matches!(metapath_neighbors(&g, &apa, 4), Err(Error::Index { .. })));
    }

    #[test]
    fn pvp_instance_through_p0() {
        let g = toy_apv();
        let (_, p, v) = types(&g);
        let pvp = MetaPath::parse(g.schema(), "paper-venue-paper").unwrap();
        let inst = metapath_instances(&g, &pvp, NodeRef::new(p, 0), 10, 1).unwrap();
        assert_eq!(inst.len(), 1);
        assert_eq!(
            inst[0].members(),
            &[NodeRef::new(p, 0), NodeRef::new(p, 1), NodeRef::new(v, 0)]
        );
        // anchored at the venue in the middle
        let inst = metapath_instances(&g, &pvp, NodeRef::new(v, 1), 10, 1).unwrap();
        assert_eq!(inst.len(), 1);
        assert!(inst[0].contains(NodeRef::new(p, 2)) && inst[0].contains(NodeRef::new(p, 3)));
    }

    #[test]
    fn isolated_anchor_has_no_instances() {
        let g = toy_apv();
        let (a, _, _) = types(&g);
        let apa = MetaPath::parse(g.schema(), "author-paper-author").unwrap();
        // A2 writes only P2, which has no other author
        assert!(metapath_instances(&g, &apa, NodeRef::new(a, 2), 3, 9)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn sampling_respects_max_count_and_seed() {
        let g = toy_apv();
        let (_, p, _) = types(&g);
        let papap = MetaPath::parse(g.schema(), "paper-author-paper-author-paper").unwrap();
        let all = metapath_instances(&g, &papap, NodeRef::new(p, 0), 1000, 0).unwrap();
        assert!(all.len() >= 2);
        let one = metapath_instances(&g, &papap, NodeRef::new(p, 0), 1, 4).unwrap();
        assert_eq!(one.len(), 1);
        assert!(all.contains(&one[0]));
        assert_eq!(one, metapath_instances(&g, &papap, NodeRef::new(p, 0), 1, 4).unwrap());
    }

    #[test]
    fn random_walk_regime_returns_valid_instances() {
        let g = toy_apv();
        let (_, p, _) = types(&g);
        let pvp = MetaPath::parse(g.schema(), "paper-venue-paper").unwrap();
        let opts = InstanceOptions {
            enumeration_threshold: 0,
            ..InstanceOptions::default()
        };
        let got = metapath_instances_with(&g, &pvp, NodeRef::new(p, 2), 5, 3, &opts).unwrap();
        assert_eq!(got.len(), 1);
        assert!(got[0].contains(NodeRef::new(p, 2)) && got[0].contains(NodeRef::new(p, 3)));
    }
}
