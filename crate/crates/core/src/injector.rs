//! Synthetic heterogeneous graphs and contextual anomaly injection.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hetgraph::{HetGraph, NodeTypeId, Schema};
use crate::linalg::DenseMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthNodeType {
    pub name: String,
    pub count: usize,
}

/// Edges are generated from the source side: every source node gets
/// `per_src` edges on average (at least one).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthEdgeType {
    pub name: String,
    pub src: String,
    pub dst: String,
    pub per_src: f64,
}

/// Recipe for a community-structured graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSchema {
    pub node_types: Vec<SynthNodeType>,
    pub edge_types: Vec<SynthEdgeType>,
    pub communities: usize,
    pub attr_dim: usize,
    /// Weight of the community center in each attribute row, in `[0, 1]`.
    pub coherence: f64,
    /// Standard deviation of the Gaussian term added to every attribute.
    pub noise: f64,
    /// Probability that an edge endpoint is drawn from the source's community.
    pub intra_prob: f64,
    /// Fraction of nonzero coordinates in centers and private vectors.
    pub attr_density: f64,
    /// Node type that is scored and injected.
    pub scored_type: String,
    /// Meta-paths over the scored type, e.g. `paper-author-paper`.
    pub metapaths: Vec<String>,
}

impl SynthSchema {
    /// Author/Paper/Venue graph at roughly a tenth of the DBLP citation
    /// network.
    pub fn dblp() -> Self {
        Self::apv(1000, 360, 46, 3.65)
    }

    /// Author/Paper/Venue graph at roughly a tenth of the Aminer network.
    pub fn aminer() -> Self {
        Self::apv(1994, 761, 86, 2.88)
    }

    /// User/Business/Review graph at roughly a tenth of the Yelp network.
    pub fn yelp() -> Self {
        Self {
            node_types: vec![node("user", 289), node("business", 1027), node("review", 1288)],
            edge_types: vec![
                edge("rated_by", "business", "user", 1.21),
                edge("reviews", "review", "business", 1.0),
            ],
            scored_type: "business".into(),
            metapaths: vec!["business-user-business".into(), "business-review-business".into()],
            ..Self::base()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "dblp" => Ok(Self::dblp()),
            "aminer" => Ok(Self::aminer()),
            "yelp" => Ok(Self::yelp()),
            other => Err(Error::Config(format!("unknown preset '{other}' (dblp|aminer|yelp)"))),
        }
    }

    fn apv(authors: usize, papers: usize, venues: usize, authors_per_paper: f64) -> Self {
        Self {
            node_types: vec![node("author", authors), node("paper", papers), node("venue", venues)],
            edge_types: vec![
                edge("authored_by", "paper", "author", authors_per_paper),
                edge("published_in", "paper", "venue", 1.0),
            ],
            scored_type: "paper".into(),
            metapaths: vec!["paper-author-paper".into(), "paper-venue-paper".into()],
            ..Self::base()
        }
    }

    fn base() -> Self {
        Self {
            node_types: Vec::new(),
            edge_types: Vec::new(),
            communities: 8,
            attr_dim: 32,
            coherence: 0.8,
            noise: 0.05,
            intra_prob: 0.9,
            attr_density: 0.25,
            scored_type: String::new(),
            metapaths: Vec::new(),
        }
    }

    /// Same recipe with every edge rate multiplied by `factor`.
    pub fn with_edge_scale(mut self, factor: f64) -> Self {
        for e in &mut self.edge_types {
            e.per_src *= factor;
        }
        self
    }

    /// Same recipe with every node count multiplied by `factor`.
    pub fn with_node_scale(mut self, factor: f64) -> Self {
        for t in &mut self.node_types {
            t.count = ((t.count as f64 * factor).round() as usize).max(1);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.communities == 0 {
            return Err(Error::Config("synthetic schema needs at least one community".into()));
        }
        if self.attr_dim == 0 {
            return Err(Error::Config("attribute dimension must be at least 1".into()));
        }
        if let Some(t) = self.node_types.iter().find(|t| t.count == 0) {
            return Err(Error::Config(format!("node type '{}' has zero nodes", t.name)));
        }
        for (what, v) in [
            ("coherence", self.coherence),
            ("intra_prob", self.intra_prob),
            ("attr_density", self.attr_density),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{what} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Config(format!(
                "noise must be finite and non-negative, got {}",
                self.noise
            )));
        }
        if let Some(e) = self
            .edge_types
            .iter()
            .find(|e| !(e.per_src > 0.0 && e.per_src.is_finite()))
        {
            return Err(Error::Config(format!("edge type '{}' needs a positive rate", e.name)));
        }
        Ok(())
    }
}

fn node(name: &str, count: usize) -> SynthNodeType {
    SynthNodeType {
        name: name.into(),
        count,
    }
}

fn edge(name: &str, src: &str, dst: &str, per_src: f64) -> SynthEdgeType {
    SynthEdgeType {
        name: name.into(),
        src: src.into(),
        dst: dst.into(),
        per_src,
    }
}

/// Builds a graph whose nodes belong to latent communities. Edges prefer
/// endpoints in the same community and attribute rows are a blend of a
/// per-community center, a private vector and Gaussian noise, clipped at 0.
pub fn generate_synthetic(schema: &SynthSchema, seed: u64) -> Result<HetGraph> {
    schema.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Schema::new();
    for t in &schema.node_types {
        s.add_node_type(&t.name)?;
    }
    let lookup = |s: &Schema, name: &str| {
        s.node_type(name)
            .ok_or_else(|| Error::Config(format!("edge references unknown node type '{name}'")))
    };
    for e in &schema.edge_types {
        let (src, dst) = (lookup(&s, &e.src)?, lookup(&s, &e.dst)?);
        s.add_edge_type(&e.name, src, dst)?;
    }

    let c = schema.communities;
    let community: Vec<Vec<usize>> = schema
        .node_types
        .iter()
        .map(|t| (0..t.count).map(|_| rng.random_range(0..c)).collect())
        .collect();
    let members: Vec<Vec<Vec<usize>>> = community
        .iter()
        .map(|comm| {
            let mut by = vec![Vec::new(); c];
            for (i, &k) in comm.iter().enumerate() {
                by[k].push(i);
            }
            by
        })
        .collect();

    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let sparse_vec = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..schema.attr_dim)
            .map(|_| {
                if rng.random_bool(schema.attr_density) {
                    rng.random_range(0.5..1.0)
                } else {
                    0.0
                }
            })
            .collect()
    };
    let mut attributes = Vec::with_capacity(schema.node_types.len());
    for (ti, t) in schema.node_types.iter().enumerate() {
        let centers: Vec<Vec<f64>> = (0..c).map(|_| sparse_vec(&mut rng)).collect();
        let mut data = Vec::with_capacity(t.count * schema.attr_dim);
        for i in 0..t.count {
            let private = sparse_vec(&mut rng);
            let center = &centers[community[ti][i]];
            for j in 0..schema.attr_dim {
                let mut v = schema.coherence * center[j] + (1.0 - schema.coherence) * private[j];
                if schema.noise > 0.0 {
                    v += schema.noise * normal.sample(&mut rng);
                }
                data.push(v.max(0.0));
            }
        }
        attributes.push(DenseMatrix::from_vec(t.count, schema.attr_dim, data)?);
    }

    let mut edges = Vec::with_capacity(schema.edge_types.len());
    for e in &schema.edge_types {
        let (src, dst) = (lookup(&s, &e.src)?.0 as usize, lookup(&s, &e.dst)?.0 as usize);
        let n_dst = schema.node_types[dst].count;
        let whole = e.per_src.floor() as usize;
        let frac = e.per_src - whole as f64;
        let mut list = Vec::new();
        for i in 0..schema.node_types[src].count {
            let mut deg = whole + usize::from(rng.random_bool(frac));
            deg = deg.max(1);
            let pool = &members[dst][community[src][i]];
            for _ in 0..deg {
                let j = if !pool.is_empty() && rng.random_bool(schema.intra_prob) {
                    pool[rng.random_range(0..pool.len())]
                } else {
                    rng.random_range(0..n_dst)
                };
                list.push((i, j));
            }
        }
        edges.push(list);
    }
    HetGraph::new(s, attributes, edges, None)
}

/// What [`inject_contextual`] did, with enough detail to replay it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectionRecord {
    pub node_type: String,
    pub anomalies: Vec<usize>,
    /// Node whose attribute row was copied onto each anomaly.
    pub sources: Vec<usize>,
    /// Candidate set examined for each anomaly, ascending.
    pub candidates: Vec<Vec<usize>>,
    pub k: usize,
    pub seed: u64,
}

impl InjectionRecord {
    /// 0/1 label per node of the injected type.
    pub fn labels(&self, n: usize) -> Vec<u8> {
        let mut y = vec![0u8; n];
        for &a in &self.anomalies {
            y[a] = 1;
        }
        y
    }
}

/// Picks `m` distinct nodes of `target_type` and overwrites each one's
/// attributes with those of the farthest (Euclidean) of `k` random
/// candidates of the same type. Candidates exclude every selected anomaly;
/// distance ties go to the lowest node index. Edges are untouched.
pub fn inject_contextual(
    graph: &HetGraph,
    target_type: NodeTypeId,
    m: usize,
    k: usize,
    seed: u64,
) -> Result<(HetGraph, InjectionRecord)> {
    if target_type.0 as usize >= graph.schema().num_node_types() {
        return Err(Error::Schema(format!("unknown node type id {}", target_type.0)));
    }
    let n = graph.node_count(target_type);
    if m > n {
        return Err(Error::Config(format!("{m} anomalies requested from {n} nodes")));
    }
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if m > 0 && m == n {
        return Err(Error::Config("no nodes left to copy attributes from".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anomalies: Vec<usize> = sample(&mut rng, n, m).into_vec();
    let excluded: HashSet<usize> = anomalies.iter().copied().collect();
    let pool: Vec<usize> = (0..n).filter(|i| !excluded.contains(i)).collect();
    let original = graph.attributes(target_type);
    let mut attrs = original.clone();
    let mut sources = Vec::with_capacity(m);
    let mut candidates = Vec::with_capacity(m);
    for &t in &anomalies {
        let mut cand: Vec<usize> = sample(&mut rng, pool.len(), k.min(pool.len()))
            .into_iter()
            .map(|i| pool[i])
            .collect();
        cand.sort_unstable();
        let src = farthest(original, t, &cand);
        attrs.row_mut(t).copy_from_slice(original.row(src));
        sources.push(src);
        candidates.push(cand);
    }
    let injected = graph.with_attributes(target_type, attrs)?;
    let record = InjectionRecord {
        node_type: graph.schema().node_type_name(target_type).to_string(),
        anomalies,
        sources,
        candidates,
        k,
        seed,
    };
    Ok((injected, record))
}

/// First candidate (ascending) at the largest Euclidean distance.
fn farthest(x: &DenseMatrix, target: usize, cand: &[usize]) -> usize {
    let t = x.row(target);
    let mut best = (cand[0], f64::NEG_INFINITY);
    for &c in cand {
        let d = t
            .iter()
            .zip(x.row(c))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if d > best.1 {
            best = (c, d);
        }
    }
    best.0
}

/// Replays an injection against the original graph. Checks that candidate
/// sets avoid anomalies, that each source is the distance argmax of its
/// candidates, that exactly the anomaly rows differ and that no edge moved.
pub fn verify_injection(original: &HetGraph, injected: &HetGraph, record: &InjectionRecord) -> Result<()> {
    let fail = |msg: String| Err(Error::Data(format!("injection replay: {msg}")));
    let t = original
        .schema()
        .node_type(&record.node_type)
        .ok_or_else(|| Error::Data(format!("unknown node type '{}'", record.node_type)))?;
    if original.schema() != injected.schema() {
        return fail("schemas differ".into());
    }
    for e in original.schema().edge_type_ids() {
        if original.edges(e) != injected.edges(e) {
            return fail(format!("edge list {} changed", e.0));
        }
    }
    for other in original.schema().node_type_ids().filter(|&o| o != t) {
        if original.attributes(other) != injected.attributes(other) {
            return fail(format!("attributes of type {} changed", other.0));
        }
    }
    let x0 = original.attributes(t);
    let x1 = injected.attributes(t);
    let anomalies: HashSet<usize> = record.anomalies.iter().copied().collect();
    if anomalies.len() != record.anomalies.len() {
        return fail("duplicate anomaly".into());
    }
    let pool = x0.rows() - anomalies.len();
    for (i, &a) in record.anomalies.iter().enumerate() {
        let cand = &record.candidates[i];
        if cand.len() != record.k.min(pool) {
            return fail(format!(
                "node {a}: {} candidates, expected {}",
                cand.len(),
                record.k.min(pool)
            ));
        }
        if cand.iter().any(|c| anomalies.contains(c)) {
            return fail(format!("node {a}: candidate set contains an anomaly"));
        }
        // brute-force argmax over the recorded candidates
        let mut best = None;
        let mut best_d = -1.0;
        for &c in cand {
            let d: f64 = x0.row(a).iter().zip(x0.row(c)).map(|(p, q)| (p - q) * (p - q)).sum();
            if d > best_d || (d == best_d && best.is_some_and(|b| c < b)) {
                best = Some(c);
                best_d = d;
            }
        }
        if best != Some(record.sources[i]) {
            return fail(format!(
                "node {a}: source {} is not the farthest candidate",
                record.sources[i]
            ));
        }
        if x1.row(a) != x0.row(record.sources[i]) {
            return fail(format!("node {a}: row does not match its source"));
        }
    }
    for r in (0..x0.rows()).filter(|r| !anomalies.contains(r)) {
        if x0.row(r) != x1.row(r) {
            return fail(format!("non-anomalous row {r} changed"));
        }
    }
    Ok(())
}

/// Writes one `index,label` line per node.
pub fn write_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let mut out = String::with_capacity(labels.len() * 6);
    for (i, y) in labels.iter().enumerate() {
        writeln!(out, "{i},{y}").expect("write to string");
    }
    fs::write(path.as_ref(), out).map_err(|e| Error::io(path.as_ref(), e))
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let p = path.as_ref();
    let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
    let mut labels = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || Error::Data(format!("{}:{}: expected 'index,label'", p.display(), ln + 1));
        let (i, y) = line.split_once(',').ok_or_else(bad)?;
        let i: usize = i.trim().parse().map_err(|_| bad())?;
        let y: u8 = match y.trim() {
            "0" => 0,
            "1" => 1,
            _ => return Err(bad()),
        };
        if i != labels.len() {
            return Err(Error::Data(format!(
                "{}:{}: index {i} out of order, expected {}",
                p.display(),
                ln + 1,
                labels.len()
            )));
        }
        labels.push(y);
    }
    Ok(labels)
}
