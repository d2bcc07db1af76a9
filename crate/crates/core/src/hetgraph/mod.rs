//! Typed nodes, typed edges and per-type attribute matrices, plus the
//! meta-path machinery built on top of them.

mod io;
mod metapath;

pub use io::{read_graph, write_graph, GraphFiles};
pub(crate) use metapath::random_walk_through;
pub use metapath::{
    metapath_adjacency, metapath_instances, metapath_instances_with, metapath_neighbors, InstanceNodeSet,
    InstanceOptions, MetaPath,
};

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SparseMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeTypeId(pub u16);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeTypeId(pub u16);

/// A node addressed by its type and its index within that type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeRef {
    pub ty: NodeTypeId,
    pub idx: usize,
}

impl NodeRef {
    pub fn new(ty: NodeTypeId, idx: usize) -> Self {
        Self { ty, idx }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeTypeDecl {
    pub name: String,
    pub src: NodeTypeId,
    pub dst: NodeTypeId,
}

/// Registry of node and edge types.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    node_types: Vec<String>,
    edge_types: Vec<EdgeTypeDecl>,
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node_type(&mut self, name: &str) -> Result<NodeTypeId> {
        validate_name(name)?;
        if self.node_type(name).is_some() || self.edge_type(name).is_some() {
            return Err(Error::Schema(format!("duplicate type name '{name}'")));
        }
        self.node_types.push(name.to_string());
        Ok(NodeTypeId((self.node_types.len() - 1) as u16))
    }

    pub fn add_edge_type(&mut self, name: &str, src: NodeTypeId, dst: NodeTypeId) -> Result<EdgeTypeId> {
        validate_name(name)?;
        if self.node_type(name).is_some() || self.edge_type(name).is_some() {
            return Err(Error::Schema(format!("duplicate type name '{name}'")));
        }
        for t in [src, dst] {
            if t.0 as usize >= self.node_types.len() {
                return Err(Error::Schema(format!(
                    "edge type '{name}' references unknown node type {}",
                    t.0
                )));
            }
        }
        self.edge_types.push(EdgeTypeDecl {
            name: name.to_string(),
            src,
            dst,
        });
        Ok(EdgeTypeId((self.edge_types.len() - 1) as u16))
    }

    pub fn node_type(&self, name: &str) -> Option<NodeTypeId> {
        self.node_types
            .iter()
            .position(|n| n == name)
            .map(|i| NodeTypeId(i as u16))
    }

    pub fn edge_type(&self, name: &str) -> Option<EdgeTypeId> {
        self.edge_types
            .iter()
            .position(|e| e.name == name)
            .map(|i| EdgeTypeId(i as u16))
    }

    pub fn node_type_name(&self, t: NodeTypeId) -> &str {
        &self.node_types[t.0 as usize]
    }

    pub fn edge_decl(&self, e: EdgeTypeId) -> Result<&EdgeTypeDecl> {
        self.edge_types
            .get(e.0 as usize)
            .ok_or_else(|| Error::Schema(format!("unknown edge type id {}", e.0)))
    }

    pub fn num_node_types(&self) -> usize {
        self.node_types.len()
    }

    pub fn num_edge_types(&self) -> usize {
        self.edge_types.len()
    }

    pub fn node_type_ids(&self) -> impl Iterator<Item = NodeTypeId> {
        (0..self.node_types.len()).map(|i| NodeTypeId(i as u16))
    }

    pub fn edge_type_ids(&self) -> impl Iterator<Item = EdgeTypeId> {
        (0..self.edge_types.len()).map(|i| EdgeTypeId(i as u16))
    }

    /// Edge types joining `a` and `b` in either orientation.
    pub fn edge_types_between(&self, a: NodeTypeId, b: NodeTypeId) -> Vec<EdgeTypeId> {
        self.edge_type_ids()
            .filter(|&e| {
                let d = &self.edge_types[e.0 as usize];
                (d.src == a && d.dst == b) || (d.src == b && d.dst == a)
            })
            .collect()
    }

    /// Stable hex digest of the type tables.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for n in &self.node_types {
            h.update(b"node:");
            h.update(n.as_bytes());
            h.update(b"\n");
        }
        for e in &self.edge_types {
            h.update(format!("edge:{}:{}:{}\n", e.name, e.src.0, e.dst.0).as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn validate_name(name: &str) -> Result<()> {
    if name.is_empty() || name.contains(|c: char| c.is_whitespace() || c == ',' || c == '-' || c == '#') {
        return Err(Error::Schema(format!("invalid type name '{name}'")));
    }
    Ok(())
}

/// A heterogeneous attributed graph. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct HetGraph {
    schema: Schema,
    node_names: Vec<Vec<String>>,
    attributes: Vec<DenseMatrix>,
    edges: Vec<Vec<(usize, usize)>>,
    // (from type, to type) -> per-node sorted neighbor lists, edges taken as undirected.
    links: HashMap<(NodeTypeId, NodeTypeId), Vec<Vec<usize>>>,
}

impl HetGraph {
    /// Builds a graph, validating every edge endpoint and attribute shape.
    /// Node names default to `<type><index>` when `node_names` is `None`.
    pub fn new(
        schema: Schema,
        attributes: Vec<DenseMatrix>,
        edges: Vec<Vec<(usize, usize)>>,
        node_names: Option<Vec<Vec<String>>>,
    ) -> Result<Self> {
        if schema.num_node_types() + schema.num_edge_types() <= 2 {
            return Err(Error::Schema(format!(
                "a heterogeneous graph needs more than two node plus edge types, got {} + {}",
                schema.num_node_types(),
                schema.num_edge_types()
            )));
        }
        if attributes.len() != schema.num_node_types() {
            return Err(Error::Schema(format!(
                "{} attribute matrices for {} node types",
                attributes.len(),
                schema.num_node_types()
            )));
        }
        if edges.len() != schema.num_edge_types() {
            return Err(Error::Schema(format!(
                "{} edge lists for {} edge types",
                edges.len(),
                schema.num_edge_types()
            )));
        }
        let counts: Vec<usize> = attributes.iter().map(DenseMatrix::rows).collect();
        let node_names = match node_names {
            Some(names) => {
                if names.len() != counts.len() || names.iter().zip(&counts).any(|(n, &c)| n.len() != c) {
                    return Err(Error::Schema("node name table does not match node counts".into()));
                }
                names
            }
            None => schema
                .node_type_ids()
                .map(|t| {
                    (0..counts[t.0 as usize])
                        .map(|i| format!("{}{}", schema.node_type_name(t), i))
                        .collect()
                })
                .collect(),
        };
        let mut canonical = Vec::with_capacity(edges.len());
        for (e, list) in schema.edge_type_ids().zip(edges) {
            let decl = schema.edge_decl(e)?;
            let (ns, nd) = (counts[decl.src.0 as usize], counts[decl.dst.0 as usize]);
            for &(s, d) in &list {
                if s >= ns || d >= nd {
                    return Err(Error::Index {
                        what: format!("endpoint of '{}' edge ({s},{d})", decl.name),
                        index: if s >= ns { s } else { d },
                        len: if s >= ns { ns } else { nd },
                    });
                }
            }
            let mut list = list;
            list.sort_unstable();
            list.dedup();
            canonical.push(list);
        }
        let mut links: HashMap<(NodeTypeId, NodeTypeId), Vec<Vec<usize>>> = HashMap::new();
        for (e, list) in schema.edge_type_ids().zip(&canonical) {
            let decl = schema.edge_decl(e)?;
            let (src, dst) = (decl.src, decl.dst);
            let fwd = links
                .entry((src, dst))
                .or_insert_with(|| vec![Vec::new(); counts[src.0 as usize]]);
            for &(s, d) in list {
                fwd[s].push(d);
            }
            let rev = links
                .entry((dst, src))
                .or_insert_with(|| vec![Vec::new(); counts[dst.0 as usize]]);
            for &(s, d) in list {
                rev[d].push(s);
            }
        }
        for lists in links.values_mut() {
            for l in lists.iter_mut() {
                l.sort_unstable();
                l.dedup();
            }
        }
        Ok(Self {
            schema,
            node_names,
            attributes,
            edges: canonical,
            links,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn node_count(&self, t: NodeTypeId) -> usize {
        self.attributes[t.0 as usize].rows()
    }

    pub fn total_nodes(&self) -> usize {
        self.attributes.iter().map(DenseMatrix::rows).sum()
    }

    pub fn total_edges(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    pub fn attributes(&self, t: NodeTypeId) -> &DenseMatrix {
        &self.attributes[t.0 as usize]
    }

    pub fn edges(&self, e: EdgeTypeId) -> &[(usize, usize)] {
        &self.edges[e.0 as usize]
    }

    pub fn node_name(&self, node: NodeRef) -> &str {
        &self.node_names[node.ty.0 as usize][node.idx]
    }

    pub fn node_names(&self, t: NodeTypeId) -> &[String] {
        &self.node_names[t.0 as usize]
    }

    /// Same topology, replaced attribute matrix for one type.
    pub fn with_attributes(&self, t: NodeTypeId, attrs: DenseMatrix) -> Result<HetGraph> {
        let old = self.attributes(t);
        if attrs.rows() != old.rows() {
            return Err(Error::shape(
                "with_attributes",
                format!("{} rows for {} nodes", attrs.rows(), old.rows()),
            ));
        }
        let mut g = self.clone();
        g.attributes[t.0 as usize] = attrs;
        Ok(g)
    }

    pub fn check_node(&self, node: NodeRef) -> Result<()> {
        if node.ty.0 as usize >= self.schema.num_node_types() {
            return Err(Error::Schema(format!("unknown node type id {}", node.ty.0)));
        }
        let len = self.node_count(node.ty);
        if node.idx >= len {
            return Err(Error::Index {
                what: format!("{} node", self.schema.node_type_name(node.ty)),
                index: node.idx,
                len,
            });
        }
        Ok(())
    }

    /// Neighbors of `node` that have type `to`, over every edge type joining
    /// the two types, in either direction. Sorted, distinct.
    pub fn neighbors_of_type(&self, node: NodeRef, to: NodeTypeId) -> &[usize] {
        self.links
            .get(&(node.ty, to))
            .map(|l| l[node.idx].as_slice())
            .unwrap_or(&[])
    }

    /// All 1-hop neighbors of `node`, any edge type, sorted.
    pub fn direct_neighbors(&self, node: NodeRef) -> Vec<NodeRef> {
        let mut out: Vec<NodeRef> = self
            .schema
            .node_type_ids()
            .flat_map(|t| self.neighbors_of_type(node, t).iter().map(move |&i| NodeRef::new(t, i)))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

impl fmt::Display for HetGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let types: Vec<String> = self
            .schema
            .node_type_ids()
            .map(|t| format!("{}={}", self.schema.node_type_name(t), self.node_count(t)))
            .collect();
        let edges: Vec<String> = self
            .schema
            .edge_type_ids()
            .map(|e| format!("{}={}", self.schema.edge_types[e.0 as usize].name, self.edges(e).len()))
            .collect();
        write!(f, "nodes[{}] edges[{}]", types.join(" "), edges.join(" "))
    }
}

/// Binary `|src type| × |dst type|` matrix of one edge type.
pub fn typed_adjacency(graph: &HetGraph, edge_type: EdgeTypeId) -> Result<SparseMatrix> {
    let decl = graph.schema().edge_decl(edge_type)?;
    let triplets: Vec<_> = graph.edges(edge_type).iter().map(|&(s, d)| (s, d, 1.0)).collect();
    SparseMatrix::from_triplets(graph.node_count(decl.src), graph.node_count(decl.dst), &triplets)
}


#[cfg(test)]
mod tests {
    use super::fixtures::toy_apv;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn write_edges_of_toy_graph() {
        let g = toy_apv();
        let writes = g.schema().edge_type("writes").unwrap();
        let m = typed_adjacency(&g, writes).unwrap();
        assert_eq!(m.shape(), (4, 4));
        assert_eq!(m.row(1).0, &[0, 1]);
        assert_eq!(m.get(1, 0), 1.0);
        assert_eq!(m.get(1, 1), 1.0);
        assert_eq!(m.get(1, 2), 0.0);
    }

    #[test]
    fn empty_edge_type_gives_zero_matrix() {
        let mut s = Schema::new();
        let a = s.add_node_type("a").unwrap();
        let b = s.add_node_type("b").unwrap();
        let e = s.add_edge_type("ab", a, b).unwrap();
        let g = HetGraph::new(
            s,
            vec![DenseMatrix::zeros(3, 1), DenseMatrix::zeros(2, 1)],
            vec![vec![]],
            None,
        )
        .unwrap();
        let m = typed_adjacency(&g, e).unwrap();
        assert_eq!(m.shape(), (3, 2));
        assert_eq!(m.nnz(), 0);
    }

    #[test]
    fn unknown_edge_type_is_schema_error() {
        let g = toy_apv();
        assert!(matches!(typed_adjacency(&g, EdgeTypeId(9)), Err(Error::Schema(_))));
    }

    #[test]
    fn random_bipartite_matches_edge_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut s = Schema::new();
        let a = s.add_node_type("a").unwrap();
        let b = s.add_node_type("b").unwrap();
        let e = s.add_edge_type("ab", a, b).unwrap();
        let mut edges = Vec::new();
        for i in 0..6 {
            for j in 0..4 {
                if rng.random_bool(0.4) {
                    edges.push((i, j));
                }
            }
        }
        let g = HetGraph::new(
            s,
            vec![DenseMatrix::zeros(6, 1), DenseMatrix::zeros(4, 1)],
            vec![edges.clone()],
            None,
        )
        .unwrap();
        let m = typed_adjacency(&g, e).unwrap();
        for i in 0..6 {
            for j in 0..4 {
                let want = if edges.contains(&(i, j)) { 1.0 } else { 0.0 };
                assert_eq!(m.get(i, j), want);
            }
        }
    }

    #[test]
    fn construction_validates() {
        let mut s = Schema::new();
        let a = s.add_node_type("a").unwrap();
        assert!(s.add_node_type("a").is_err());
        assert!(s.add_node_type("bad name").is_err());
        // one node type + one edge type violates |A|+|R| > 2
        s.add_edge_type("aa", a, a).unwrap();
        let err = HetGraph::new(s.clone(), vec![DenseMatrix::zeros(2, 1)], vec![vec![]], None).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));

        let b = s.add_node_type("b").unwrap();
        s.add_edge_type("ab", a, b).unwrap();
        let attrs = vec![DenseMatrix::zeros(2, 1), DenseMatrix::zeros(1, 1)];
        let err = HetGraph::new(s.clone(), attrs.clone(), vec![vec![], vec![(0, 1)]], None).unwrap_err();
        assert!(matches!(err, Error::Index { .. }));
        assert!(HetGraph::new(s, attrs, vec![vec![(0, 1)], vec![(1, 0)]], None).is_ok());
    }

    #[test]
    fn undirected_neighbor_lookup() {
        let g = toy_apv();
        let (a, p, v) = (NodeTypeId(0), NodeTypeId(1), NodeTypeId(2));
        assert_eq!(g.neighbors_of_type(NodeRef::new(p, 0), a), &[0, 1]);
        assert_eq!(g.neighbors_of_type(NodeRef::new(a, 1), p), &[0, 1]);
        assert_eq!(g.neighbors_of_type(NodeRef::new(v, 1), p), &[2, 3]);
        assert_eq!(
            g.direct_neighbors(NodeRef::new(p, 0)),
            vec![NodeRef::new(a, 0), NodeRef::new(a, 1), NodeRef::new(v, 0)]
        );
    }

    #[test]
    fn fingerprint_tracks_schema() {
        let g = toy_apv();
        let mut s2 = g.schema().clone();
        assert_eq!(s2.fingerprint(), g.schema().fingerprint());
        s2.add_node_type("extra").unwrap();
        assert_ne!(s2.fingerprint(), g.schema().fingerprint());
    }
}
