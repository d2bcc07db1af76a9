//! The detector network: one two-layer GCN encoder and one attribute
//! decoder per meta-path, inner-product structure decoders, a bilinear
//! discriminator over instance pairs, the training loss with its
//! hand-derived gradients, and the per-node anomaly score.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hetgraph::{metapath_adjacency, HetGraph, MetaPath, NodeTypeId};
use crate::linalg::{dot, frobenius_sq, normalize_adjacency, row_l2, DenseMatrix, NormalizedAdjacency, SparseMatrix};
use crate::neural::{
    gcn_backward, gcn_forward, readout_backward, readout_rows, sigmoid, Activation, GcnLayer, Readout, ReadoutTrace,
    Tape,
};
use crate::sampler::{InstancePair, Polarity};

/// Discrimination scores are clamped to `[S_CLAMP, 1 − S_CLAMP]` before logs.
pub const S_CLAMP: f64 = 1e-7;

/// Loss weights, embedding width and pooling mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub dim: usize,
    pub readout: Readout,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            alpha: 0.8,
            beta: 0.2,
            gamma: 0.3,
            dim: 64,
            readout: Readout::Avg,
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<()> {
        for (what, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "{what} must be finite and non-negative, got {v}"
                )));
            }
        }
        if self.dim == 0 {
            return Err(Error::Config("embedding dimension must be at least 1".into()));
        }
        Ok(())
    }
}

/// Weights tied to one meta-path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    /// `relu(Â X W₁)`
    pub enc1: GcnLayer,
    /// `Â Z W₂`, linear
    pub enc2: GcnLayer,
    /// `relu(Â H W₃)`
    pub dec_attr: GcnLayer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EagleParams {
    pub paths: Vec<PathParams>,
    /// Bilinear discriminator matrix, `d × d`.
    pub w_d: DenseMatrix,
    pub hyper: Hyper,
}

impl EagleParams {
    /// Glorot-initialized parameters for `n_paths` meta-paths over
    /// `in_dim`-wide attributes.
    pub fn init(in_dim: usize, n_paths: usize, hyper: Hyper, seed: u64) -> Result<Self> {
        hyper.validate()?;
        if in_dim == 0 || n_paths == 0 {
            return Err(Error::Config(
                "need at least one attribute column and one meta-path".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = hyper.dim;
        let mut paths = Vec::with_capacity(n_paths);
        for _ in 0..n_paths {
            paths.push(PathParams {
                enc1: GcnLayer::glorot(in_dim, d, Activation::Relu, &mut rng)?,
                enc2: GcnLayer::glorot(d, d, Activation::Linear, &mut rng)?,
                dec_attr: GcnLayer::glorot(d, in_dim, Activation::Relu, &mut rng)?,
            });
        }
        let w_d = GcnLayer::glorot(d, d, Activation::Linear, &mut rng)?.weight().clone();
        Ok(Self { paths, w_d, hyper })
    }

    pub fn in_dim(&self) -> usize {
        self.paths[0].enc1.in_dim()
    }

    pub fn dim(&self) -> usize {
        self.hyper.dim
    }

    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    /// Every trainable matrix: `enc1, enc2, dec_attr` per path, then `w_d`.
    pub fn matrices(&self) -> Vec<&DenseMatrix> {
        let mut out: Vec<&DenseMatrix> = self
            .paths
            .iter()
            .flat_map(|p| [p.enc1.weight(), p.enc2.weight(), p.dec_attr.weight()])
            .collect();
        out.push(&self.w_d);
        out
    }

    /// Mutable view in the order of [`EagleParams::matrices`].
    pub fn matrices_mut(&mut self) -> Vec<&mut DenseMatrix> {
        let mut out: Vec<&mut DenseMatrix> = Vec::with_capacity(3 * self.paths.len() + 1);
        for p in &mut self.paths {
            out.push(p.enc1.weight_mut());
            out.push(p.enc2.weight_mut());
            out.push(p.dec_attr.weight_mut());
        }
        out.push(&mut self.w_d);
        out
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.matrices().iter().map(|m| m.shape()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.matrices().iter().all(|m| m.is_finite())
    }
}

/// Scored-type attributes plus, per meta-path, the binary adjacency and
/// its normalized form.
#[derive(Clone, Debug)]
pub struct ModelInput {
    pub x: DenseMatrix,
    pub adj: Vec<DenseMatrix>,
    pub norm: Vec<NormalizedAdjacency>,
}

impl ModelInput {
    /// From square binary adjacencies; asymmetric ones are replaced by
    /// `A ∨ Aᵀ`.
    pub fn new(x: DenseMatrix, adjs: &[SparseMatrix]) -> Result<Self> {
        if adjs.is_empty() {
            return Err(Error::Config("at least one meta-path adjacency is required".into()));
        }
        let mut adj = Vec::with_capacity(adjs.len());
        let mut norm = Vec::with_capacity(adjs.len());
        for a in adjs {
            if a.shape() != (x.rows(), x.rows()) {
                return Err(Error::shape(
                    "ModelInput::new",
                    format!("adjacency {:?} for {} nodes", a.shape(), x.rows()),
                ));
            }
            let sym = if a.is_symmetric() {
                a.clone()
            } else {
                a.union_binary(&a.transpose())?
            };
            norm.push(normalize_adjacency(&sym)?);
            adj.push(sym.to_dense());
        }
        Ok(Self { x, adj, norm })
    }

    /// Attributes of `scored` and the adjacency of every meta-path over it.
    pub fn from_graph(graph: &HetGraph, scored: NodeTypeId, paths: &[MetaPath]) -> Result<Self> {
        for p in paths {
            if p.start() != scored {
                return Err(Error::Config(format!(
                    "meta-path {} does not start at the scored type {}",
                    p.name(),
                    graph.schema().node_type_name(scored)
                )));
            }
        }
        let adjs = paths
            .iter()
            .map(|p| metapath_adjacency(graph, p))
            .collect::<Result<Vec<_>>>()?;
        Self::new(graph.attributes(scored).clone(), &adjs)
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn n_paths(&self) -> usize {
        self.adj.len()
    }
}

/// Instance pairs resolved to scored-type row indices. The pool of a pair
/// is the instance's scored-type members minus the target.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PairBatch {
    pub targets: Vec<usize>,
    pub pools: Vec<Vec<usize>>,
    pub labels: Vec<f64>,
}

impl PairBatch {
    /// Pairs whose pool would be empty are skipped.
    pub fn from_pairs(pairs: &[InstancePair], scored: NodeTypeId) -> Self {
        let mut b = PairBatch::default();
        for pr in pairs {
            if pr.target.ty != scored {
                continue;
            }
            let pool: Vec<usize> = pr.instance.of_type(scored).filter(|&i| i != pr.target.idx).collect();
            if pool.is_empty() {
                continue;
            }
            b.push(pr.target.idx, pool, pr.polarity);
        }
        b
    }

    pub fn push(&mut self, target: usize, pool: Vec<usize>, polarity: Polarity) {
        self.targets.push(target);
        self.pools.push(pool);
        self.labels.push(polarity.label());
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn extend(&mut self, other: PairBatch) {
        self.targets.extend(other.targets);
        self.pools.extend(other.pools);
        self.labels.extend(other.labels);
    }
}

#[derive(Clone, Debug)]
pub struct ForwardOutputs {
    /// Fused embeddings, the mean of the per-path embeddings.
    pub h: DenseMatrix,
    pub h_paths: Vec<DenseMatrix>,
    pub x_hat: Vec<DenseMatrix>,
    pub a_hat: Vec<DenseMatrix>,
    /// One discrimination score per pair of the batch.
    pub scores: Vec<f64>,
}

struct Cache {
    tape: Tape,
    pooled: Vec<Vec<f64>>,
    traces: Vec<ReadoutTrace>,
}

fn encode_taped(
    params: &EagleParams,
    x: &DenseMatrix,
    adjs: &[NormalizedAdjacency],
    tape: &mut Tape,
) -> Result<Vec<DenseMatrix>> {
    if adjs.len() != params.n_paths() {
        return Err(Error::shape(
            "encode",
            format!("{} adjacencies for {} meta-paths", adjs.len(), params.n_paths()),
        ));
    }
    let mut out = Vec::with_capacity(adjs.len());
    for (p, adj) in params.paths.iter().zip(adjs) {
        let z = gcn_forward(&p.enc1, x, adj, tape)?;
        out.push(gcn_forward(&p.enc2, &z, adj, tape)?);
    }
    Ok(out)
}

fn fuse(h_paths: &[DenseMatrix]) -> Result<DenseMatrix> {
    let mut h = h_paths[0].clone();
    for hp in &h_paths[1..] {
        h.add_scaled(hp, 1.0)?;
    }
    h.scale(1.0 / h_paths.len() as f64);
    Ok(h)
}

/// Per-path two-layer GCN embeddings averaged into one `n × d` matrix.
pub fn encode(params: &EagleParams, x: &DenseMatrix, adjs: &[NormalizedAdjacency]) -> Result<DenseMatrix> {
    fuse(&encode_taped(params, x, adjs, &mut Tape::new())?)
}

/// Attribute reconstruction `relu(Â H W)`.
pub fn decode_attr(layer: &GcnLayer, h: &DenseMatrix, adj: &NormalizedAdjacency) -> Result<DenseMatrix> {
    gcn_forward(layer, h, adj, &mut Tape::new())
}

/// Structure reconstruction `σ(H Hᵀ)`, mirrored so it is exactly symmetric.
pub fn decode_struct(h: &DenseMatrix) -> Result<DenseMatrix> {
    if !h.is_finite() {
        return Err(Error::Domain("non-finite embedding".into()));
    }
    let n = h.rows();
    let mut out = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = sigmoid(dot(h.row(i), h.row(j)));
            out.set(i, j, v);
            out.set(j, i, v);
        }
    }
    Ok(out)
}

/// `σ(h_targetᵀ · W · h_instance)`.
pub fn discriminate(w_d: &DenseMatrix, h_instance: &[f64], h_target: &[f64]) -> Result<f64> {
    Ok(sigmoid(bilinear(w_d, h_instance, h_target)?))
}

fn bilinear(w_d: &DenseMatrix, m: &[f64], t: &[f64]) -> Result<f64> {
    if w_d.rows() != t.len() || w_d.cols() != m.len() {
        return Err(Error::shape(
            "discriminate",
            format!("W {:?} with target {} and instance {}", w_d.shape(), t.len(), m.len()),
        ));
    }
    Ok(t.iter().enumerate().map(|(i, &ti)| ti * dot(w_d.row(i), m)).sum())
}

fn clamp_s(s: f64) -> f64 {
    s.clamp(S_CLAMP, 1.0 - S_CLAMP)
}

/// Summed binary cross-entropy, scores clamped away from 0 and 1.
pub fn loss_contrastive(s: &[f64], y: &[f64]) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::Domain("contrastive loss over an empty batch".into()));
    }
    if s.len() != y.len() {
        return Err(Error::shape(
            "loss_contrastive",
            format!("{} scores, {} labels", s.len(), y.len()),
        ));
    }
    Ok(s.iter()
        .zip(y)
        .map(|(&si, &yi)| {
            let c = clamp_s(si);
            -(yi * c.ln() + (1.0 - yi) * (1.0 - c).ln())
        })
        .sum())
}

/// `α Σ‖A − Â‖²_F + β Σ‖X − X̂‖²_F` over meta-paths.
pub fn loss_gae(
    a: &[DenseMatrix],
    a_hat: &[DenseMatrix],
    x: &DenseMatrix,
    x_hat: &[DenseMatrix],
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    if a.len() != a_hat.len() || a.len() != x_hat.len() {
        return Err(Error::shape(
            "loss_gae",
            format!(
                "{} adjacencies, {} reconstructions, {} attribute reconstructions",
                a.len(),
                a_hat.len(),
                x_hat.len()
            ),
        ));
    }
    let mut total = 0.0;
    for ((ap, ahp), xhp) in a.iter().zip(a_hat).zip(x_hat) {
        total += alpha * frobenius_sq(ap, ahp)? + beta * frobenius_sq(x, xhp)?;
    }
    Ok(total)
}

pub fn loss_total(l_gae: f64, l_con: f64, gamma: f64) -> f64 {
    l_gae + gamma * l_con
}

fn forward_cached(params: &EagleParams, input: &ModelInput, batch: &PairBatch) -> Result<(ForwardOutputs, Cache)> {
    if input.x.cols() != params.in_dim() {
        return Err(Error::shape(
            "forward",
            format!(
                "{} attribute columns, model expects {}",
                input.x.cols(),
                params.in_dim()
            ),
        ));
    }
    let mut tape = Tape::new();
    let h_paths = encode_taped(params, &input.x, &input.norm, &mut tape)?;
    let h = fuse(&h_paths)?;
    let mut x_hat = Vec::with_capacity(params.n_paths());
    for (p, adj) in params.paths.iter().zip(&input.norm) {
        x_hat.push(gcn_forward(&p.dec_attr, &h, adj, &mut tape)?);
    }
    let a_hat = h_paths.iter().map(decode_struct).collect::<Result<Vec<_>>>()?;
    let mut scores = Vec::with_capacity(batch.len());
    let mut pooled = Vec::with_capacity(batch.len());
    let mut traces = Vec::with_capacity(batch.len());
    for (&t, pool) in batch.targets.iter().zip(&batch.pools) {
        if t >= h.rows() {
            return Err(Error::Index {
                what: "pair target".into(),
                index: t,
                len: h.rows(),
            });
        }
        let (m, trace) = readout_rows(&h, pool, params.hyper.readout)?;
        scores.push(discriminate(&params.w_d, &m, h.row(t))?);
        pooled.push(m);
        traces.push(trace);
    }
    let out = ForwardOutputs {
        h,
        h_paths,
        x_hat,
        a_hat,
        scores,
    };
    Ok((out, Cache { tape, pooled, traces }))
}

/// Discrimination scores of every pair of `batch` given fused embeddings.
pub fn discriminate_batch(params: &EagleParams, h: &DenseMatrix, batch: &PairBatch) -> Result<Vec<f64>> {
    batch
        .targets
        .iter()
        .zip(&batch.pools)
        .map(|(&t, pool)| {
            if t >= h.rows() {
                return Err(Error::Index {
                    what: "pair target".into(),
                    index: t,
                    len: h.rows(),
                });
            }
            let (m, _) = readout_rows(h, pool, params.hyper.readout)?;
            discriminate(&params.w_d, &m, h.row(t))
        })
        .collect()
}

/// Full forward pass over every node and every pair of `batch`.
pub fn forward(params: &EagleParams, input: &ModelInput, batch: &PairBatch) -> Result<ForwardOutputs> {
    forward_cached(params, input, batch).map(|(f, _)| f)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    /// `Σ‖A − Â‖²_F`, unweighted.
    pub structure: f64,
    /// `Σ‖X − X̂‖²_F`, unweighted.
    pub attribute: f64,
    /// Summed BCE, unweighted; zero for an empty batch.
    pub contrastive: f64,
    pub total: f64,
}

fn losses(params: &EagleParams, input: &ModelInput, batch: &PairBatch, fwd: &ForwardOutputs) -> Result<LossParts> {
    let hp = &params.hyper;
    let structure = loss_gae(&input.adj, &fwd.a_hat, &input.x, &fwd.x_hat, 1.0, 0.0)?;
    let attribute = loss_gae(&input.adj, &fwd.a_hat, &input.x, &fwd.x_hat, 0.0, 1.0)?;
    let contrastive = if batch.is_empty() {
        0.0
    } else {
        loss_contrastive(&fwd.scores, &batch.labels)?
    };
    let total = loss_total(hp.alpha * structure + hp.beta * attribute, contrastive, hp.gamma);
    Ok(LossParts {
        structure,
        attribute,
        contrastive,
        total,
    })
}

pub fn loss(params: &EagleParams, input: &ModelInput, batch: &PairBatch) -> Result<LossParts> {
    let fwd = forward(params, input, batch)?;
    losses(params, input, batch, &fwd)
}

/// Gradients laid out like [`EagleParams::matrices`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients(pub Vec<DenseMatrix>);

/// Total loss and its gradient with respect to every parameter.
pub fn loss_and_gradients(
    params: &EagleParams,
    input: &ModelInput,
    batch: &PairBatch,
) -> Result<(LossParts, Gradients)> {
    let (fwd, mut cache) = forward_cached(params, input, batch)?;
    let parts = losses(params, input, batch, &fwd)?;
    let hp = params.hyper;
    let (n, d, np) = (input.n(), params.dim(), params.n_paths());
    let mut grads: Vec<DenseMatrix> = params.shapes().iter().map(|&(r, c)| DenseMatrix::zeros(r, c)).collect();

    // attribute decoders, popped in reverse order of the forward pass
    let mut d_h = DenseMatrix::zeros(n, d);
    for p in (0..np).rev() {
        let mut up = fwd.x_hat[p].zip_map(&input.x, |a, b| a - b)?;
        up.scale(2.0 * hp.beta);
        let (gw, gh) = gcn_backward(&params.paths[p].dec_attr, &input.norm[p], &mut cache.tape, &up, true)?;
        grads[3 * p + 2] = gw;
        d_h.add_scaled(&gh, 1.0)?;
    }

    // discriminator
    if hp.gamma > 0.0 {
        let gwd = &mut grads[3 * np];
        for k in 0..batch.len() {
            let s = fwd.scores[k];
            if s != clamp_s(s) {
                continue;
            }
            let du = hp.gamma * (s - batch.labels[k]);
            let t = batch.targets[k];
            let m = &cache.pooled[k];
            let ht = fwd.h.row(t).to_vec();
            for (i, &hi) in ht.iter().enumerate() {
                for (g, &mj) in gwd.row_mut(i).iter_mut().zip(m) {
                    *g += du * hi * mj;
                }
            }
            // ∂u/∂h_t = W m, ∂u/∂m = Wᵀ h_t
            for (i, g) in d_h.row_mut(t).iter_mut().enumerate() {
                *g += du * dot(params.w_d.row(i), m);
            }
            let mut dm = vec![0.0; d];
            for (i, &hi) in ht.iter().enumerate() {
                let c = du * hi;
                for (g, &w) in dm.iter_mut().zip(params.w_d.row(i)) {
                    *g += c * w;
                }
            }
            readout_backward(&cache.traces[k], &dm, &mut d_h);
        }
    }

    // structure decoders and encoders
    d_h.scale(1.0 / np as f64);
    for p in (0..np).rev() {
        let s = &fwd.a_hat[p];
        let g = s.zip_map(&input.adj[p], |sv, av| 2.0 * hp.alpha * (sv - av) * sv * (1.0 - sv))?;
        // G is symmetric, so ∂/∂H of Σ G∘(H Hᵀ) is 2 G H
        let mut d_hp = g.matmul(&fwd.h_paths[p])?;
        d_hp.scale(2.0);
        d_hp.add_scaled(&d_h, 1.0)?;
        let pp = &params.paths[p];
        let (gw2, dz) = gcn_backward(&pp.enc2, &input.norm[p], &mut cache.tape, &d_hp, true)?;
        let (gw1, _) = gcn_backward(&pp.enc1, &input.norm[p], &mut cache.tape, &dz, false)?;
        grads[3 * p] = gw1;
        grads[3 * p + 1] = gw2;
    }
    Ok((parts, Gradients(grads)))
}

/// Per-node score components.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeScore {
    /// Meta-path mean of `‖a − â‖₂`.
    pub structure: f64,
    /// Meta-path mean of `‖x − x̂‖₂`.
    pub attribute: f64,
    /// `s⁻ − s⁺`, absent when the node had no positive or no negative pair.
    pub contrast: Option<f64>,
    pub score: f64,
}

/// `α·struct + β·attr + γ·(s⁻ − s⁺)` for node `i`. `disc` holds the node's
/// mean `(s⁺, s⁻)`; without it the discrimination term is zero.
pub fn anomaly_score(
    input: &ModelInput,
    fwd: &ForwardOutputs,
    i: usize,
    disc: Option<(f64, f64)>,
    hyper: &Hyper,
) -> Result<NodeScore> {
    let np = input.n_paths() as f64;
    let mut structure = 0.0;
    let mut attribute = 0.0;
    for p in 0..input.n_paths() {
        structure += row_l2(&input.adj[p], &fwd.a_hat[p], i)?;
        attribute += row_l2(&input.x, &fwd.x_hat[p], i)?;
    }
    structure /= np;
    attribute /= np;
    let contrast = disc.map(|(pos, neg)| neg - pos);
    let score = hyper.alpha * structure + hyper.beta * attribute + hyper.gamma * contrast.unwrap_or(0.0);
    Ok(NodeScore {
        structure,
        attribute,
        contrast,
        score,
    })
}

/// Mean positive and negative score per target, `None` where either side
/// is missing.
pub fn mean_pair_scores(n: usize, batch: &PairBatch, scores: &[f64]) -> Vec<Option<(f64, f64)>> {
    let mut acc = vec![[0.0f64; 4]; n];
    for ((&t, &y), &s) in batch.targets.iter().zip(&batch.labels).zip(scores) {
        let k = if y > 0.5 { 0 } else { 2 };
        acc[t][k] += s;
        acc[t][k + 1] += 1.0;
    }
    acc.iter()
        .map(|a| (a[1] > 0.0 && a[3] > 0.0).then(|| (a[0] / a[1], a[2] / a[3])))
        .collect()
}

/// Current on-disk checkpoint layout.
pub const CHECKPOINT_VERSION: u32 = 1;
const CHECKPOINT_FORMAT: &str = "eagle-checkpoint";

/// Trained parameters together with what they were trained on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub schema_fingerprint: String,
    pub scored_type: String,
    pub metapaths: Vec<String>,
    pub params: EagleParams,
}

impl Checkpoint {
    pub fn new(graph: &HetGraph, scored: NodeTypeId, paths: &[MetaPath], params: EagleParams) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            schema_fingerprint: graph.schema().fingerprint(),
            scored_type: graph.schema().node_type_name(scored).into(),
            metapaths: paths.iter().map(|p| p.name().to_string()).collect(),
            params,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path.as_ref(), text).map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let p = path.as_ref();
        let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Compatibility(format!("{}: unreadable checkpoint: {e}", p.display())))?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Compatibility(format!(
                "{}: {} v{} is not {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION}",
                p.display(),
                ck.format,
                ck.version
            )));
        }
        if !ck.params.is_finite() || ck.params.paths.is_empty() {
            return Err(Error::Compatibility(format!(
                "{}: empty or non-finite parameters",
                p.display()
            )));
        }
        Ok(ck)
    }

    /// Errors unless the checkpoint fits `graph` scored on `scored` over `paths`.
    pub fn check_compatible(&self, graph: &HetGraph, scored: NodeTypeId, paths: &[MetaPath]) -> Result<()> {
        let fp = graph.schema().fingerprint();
        if self.schema_fingerprint != fp {
            return Err(Error::Compatibility(format!(
                "schema fingerprint {} does not match graph {}",
                self.schema_fingerprint, fp
            )));
        }
        let names: Vec<String> = paths.iter().map(|p| p.name().to_string()).collect();
        if self.metapaths != names {
            return Err(Error::Compatibility(format!(
                "trained on meta-paths {:?}, asked for {:?}",
                self.metapaths, names
            )));
        }
        let scored_name = graph.schema().node_type_name(scored);
        if self.scored_type != scored_name {
            return Err(Error::Compatibility(format!(
                "trained on node type {}, asked for {scored_name}",
                self.scored_type
            )));
        }
        let cols = graph.attributes(scored).cols();
        if self.params.in_dim() != cols {
            return Err(Error::Compatibility(format!(
                "trained on {}-dimensional attributes, graph has {cols}",
                self.params.in_dim()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hetgraph::NodeRef;
    use crate::sampler::{sample_negative, sample_positive};
    use rand::Rng;

    fn random_input(n: usize, f: usize, np: usize, seed: u64) -> ModelInput {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DenseMatrix::from_fn(n, f, |_, _| rng.random_range(0.0..1.0));
        let adjs: Vec<SparseMatrix> = (0..np)
            .map(|_| {
                let mut t = Vec::new();
                for i in 0..n {
                    for j in i + 1..n {
                        if rng.random_bool(0.2) {
                            t.push((i, j, 1.0));
                            t.push((j, i, 1.0));
                        }
                    }
                }
                SparseMatrix::from_triplets(n, n, &t)
                    .unwrap()
                    .with_unit_diagonal()
                    .unwrap()
            })
            .collect();
        ModelInput::new(x, &adjs).unwrap()
    }

    fn random_batch(n: usize, count: usize, seed: u64) -> PairBatch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = PairBatch::default();
        for k in 0..count {
            let t = rng.random_range(0..n);
            let pool: Vec<usize> = (0..rng.random_range(1..4))
                .map(|_| rng.random_range(0..n))
                .filter(|&i| i != t)
                .collect();
            if pool.is_empty() {
                continue;
            }
            let pol = if k % 2 == 0 {
                Polarity::Positive
            } else {
                Polarity::Negative
            };
            b.push(t, pool, pol);
        }
        b
    }

    fn small_hyper() -> Hyper {
        Hyper {
            dim: 5,
            ..Hyper::default()
        }
    }

    #[test]
    fn decode_struct_of_zero_is_half() {
        let a = decode_struct(&DenseMatrix::zeros(3, 4)).unwrap();
        assert!(a.as_slice().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn decode_struct_orthonormal_rows() {
        let a = decode_struct(&DenseMatrix::identity(3)).unwrap();
        let s1 = 1.0 / (1.0 + (-1.0f64).exp());
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { s1 } else { 0.5 };
                assert!((a.get(i, j) - want).abs() < 1e-15);
            }
        }
        assert!((s1 - 0.7311).abs() < 1e-4);
    }

    #[test]
    fn decode_struct_symmetric_and_open_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = DenseMatrix::from_fn(12, 4, |_, _| rng.random_range(-2.0..2.0));
        let a = decode_struct(&h).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                assert_eq!(a.get(i, j), a.get(j, i));
                assert!(a.get(i, j) > 0.0 && a.get(i, j) < 1.0);
                let want = 1.0 / (1.0 + (-(0..4).map(|k| h.get(i, k) * h.get(j, k)).sum::<f64>()).exp());
                assert!((a.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn discriminator_hand_cases() {
        let z = DenseMatrix::zeros(2, 2);
        assert_eq!(discriminate(&z, &[1.0, 2.0], &[3.0, 4.0]).unwrap(), 0.5);
        let s = discriminate(&DenseMatrix::identity(2), &[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((s - 0.7310585786300049).abs() < 1e-15);
        assert!(discriminate(&z, &[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn bce_hand_cases() {
        let l = loss_contrastive(&[0.9], &[1.0]).unwrap();
        assert!((l - 0.10536051565782628).abs() < 1e-12);
        let l = loss_contrastive(&[0.5; 6], &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]).unwrap();
        assert!((l - 6.0 * 2f64.ln()).abs() < 1e-12);
        // clamped: finite at the limits
        assert!(loss_contrastive(&[0.0, 1.0], &[1.0, 0.0]).unwrap().is_finite());
        assert!(matches!(loss_contrastive(&[], &[]), Err(Error::Domain(_))));
    }

    #[test]
    fn gae_loss_hand_cases() {
        let a = vec![DenseMatrix::identity(2)];
        let x = DenseMatrix::filled(2, 3, 1.0);
        assert_eq!(loss_gae(&a, &a, &x, std::slice::from_ref(&x), 0.8, 0.2).unwrap(), 0.0);
        let mut off = a[0].clone();
        off.set(0, 1, 2.0);
        assert_eq!(
            loss_gae(&a, &[off], &x, std::slice::from_ref(&x), 1.0, 0.0).unwrap(),
            4.0
        );
        assert_eq!(loss_total(2.0, 10.0, 0.0), 2.0);
        assert!((loss_total(2.0, 10.0, 0.3) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn single_path_fusion_is_identity() {
        let input = random_input(8, 3, 1, 1);
        let params = EagleParams::init(3, 1, small_hyper(), 4).unwrap();
        let h = encode(&params, &input.x, &input.norm).unwrap();
        let mut tape = Tape::new();
        let z = gcn_forward(&params.paths[0].enc1, &input.x, &input.norm[0], &mut tape).unwrap();
        let h1 = gcn_forward(&params.paths[0].enc2, &z, &input.norm[0], &mut tape).unwrap();
        assert_eq!(h, h1);
    }

    #[test]
    fn encode_matches_dense_oracle() {
        let input = random_input(10, 4, 2, 5);
        let params = EagleParams::init(4, 2, small_hyper(), 6).unwrap();
        let h = encode(&params, &input.x, &input.norm).unwrap();
        let mut want = DenseMatrix::zeros(10, 5);
        for (p, adj) in params.paths.iter().zip(&input.norm) {
            let a = adj.matrix().to_dense();
            let z = a
                .matmul(&input.x)
                .unwrap()
                .matmul(p.enc1.weight())
                .unwrap()
                .map(|v| v.max(0.0));
            let hp = a.matmul(&z).unwrap().matmul(p.enc2.weight()).unwrap();
            want.add_scaled(&hp, 0.5).unwrap();
        }
        for (a, b) in h.as_slice().iter().zip(want.as_slice()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_embedding_decodes_to_zero_attributes() {
        let input = random_input(6, 3, 1, 7);
        let params = EagleParams::init(3, 1, small_hyper(), 1).unwrap();
        let x_hat = decode_attr(&params.paths[0].dec_attr, &DenseMatrix::zeros(6, 5), &input.norm[0]).unwrap();
        assert_eq!(x_hat, DenseMatrix::zeros(6, 3));
    }

    fn numeric_grad(params: &EagleParams, input: &ModelInput, batch: &PairBatch, k: usize, idx: usize) -> f64 {
        let step = 1e-5;
        let mut p = params.clone();
        p.matrices_mut()[k].as_mut_slice()[idx] += step;
        let up = loss(&p, input, batch).unwrap().total;
        p.matrices_mut()[k].as_mut_slice()[idx] -= 2.0 * step;
        let down = loss(&p, input, batch).unwrap().total;
        (up - down) / (2.0 * step)
    }

    #[test]
    fn gradients_match_finite_differences() {
        for (seed, readout) in [(1, Readout::Avg), (2, Readout::Max), (3, Readout::Min)] {
            let input = random_input(9, 4, 2, seed);
            let hyper = Hyper {
                readout,
                ..small_hyper()
            };
            let params = EagleParams::init(4, 2, hyper, seed + 10).unwrap();
            let batch = random_batch(9, 12, seed + 20);
            let (_, grads) = loss_and_gradients(&params, &input, &batch).unwrap();
            for (k, g) in grads.0.iter().enumerate() {
                for idx in 0..g.as_slice().len() {
                    let num = numeric_grad(&params, &input, &batch, k, idx);
                    let ana = g.as_slice()[idx];
                    let rel = (ana - num).abs() / ana.abs().max(num.abs()).max(1e-6);
                    assert!(
                        rel < 1e-4,
                        "{readout} matrix {k} entry {idx}: analytic {ana}, numeric {num}"
                    );
                }
            }
        }
    }

    #[test]
    fn zero_gamma_ignores_discriminator() {
        let input = random_input(8, 3, 2, 3);
        let hyper = Hyper {
            gamma: 0.0,
            ..small_hyper()
        };
        let params = EagleParams::init(3, 2, hyper, 2).unwrap();
        let batch = random_batch(8, 10, 1);
        let (parts, grads) = loss_and_gradients(&params, &input, &batch).unwrap();
        assert!(grads.0.last().unwrap().as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(parts.total, 0.8 * parts.structure + 0.2 * parts.attribute);
    }

    #[test]
    fn ideal_normal_node_scores_minus_gamma() {
        let input = random_input(4, 2, 1, 0);
        let fwd = ForwardOutputs {
            h: DenseMatrix::zeros(4, 1),
            h_paths: vec![DenseMatrix::zeros(4, 1)],
            x_hat: vec![input.x.clone()],
            a_hat: vec![input.adj[0].clone()],
            scores: vec![],
        };
        let hp = Hyper::default();
        let s = anomaly_score(&input, &fwd, 1, Some((1.0, 0.0)), &hp).unwrap();
        assert!((s.score + 0.3).abs() < 1e-15);
        let s = anomaly_score(&input, &fwd, 1, Some((0.5, 0.5)), &hp).unwrap();
        assert_eq!(s.score, 0.0);
        let s = anomaly_score(&input, &fwd, 1, None, &hp).unwrap();
        assert_eq!((s.score, s.contrast), (0.0, None));
    }

    #[test]
    fn pair_batch_excludes_target_and_other_types() {
        let g = crate::hetgraph::fixtures::toy_apv();
        let s = g.schema();
        let p = s.node_type("paper").unwrap();
        let paths = vec![
            MetaPath::parse(s, "paper-author-paper").unwrap(),
            MetaPath::parse(s, "paper-venue-paper").unwrap(),
        ];
        let pos = sample_positive(&g, NodeRef::new(p, 0), &paths, 5, 0).unwrap();
        let b = PairBatch::from_pairs(&pos, p);
        assert_eq!(b.pools, vec![vec![1], vec![1]]);
        assert_eq!(b.labels, vec![1.0, 1.0]);
        let neg = sample_negative(&g, NodeRef::new(p, 2), &paths, 3, 0).unwrap();
        let b = PairBatch::from_pairs(&neg, p);
        assert!(b.labels.iter().all(|&y| y == 0.0));
        assert!(b.pools.iter().all(|pool| !pool.contains(&2)));
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let g = crate::hetgraph::fixtures::toy_apv();
        let s = g.schema();
        let p = s.node_type("paper").unwrap();
        let paths = vec![MetaPath::parse(s, "paper-venue-paper").unwrap()];
        let params = EagleParams::init(2, 1, small_hyper(), 9).unwrap();
        let ck = Checkpoint::new(&g, p, &paths, params.clone());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        for (a, b) in back.params.matrices().iter().zip(params.matrices()) {
            let bits = |m: &DenseMatrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
        back.check_compatible(&g, p, &paths).unwrap();
        let pap = vec![MetaPath::parse(s, "paper-author-paper").unwrap()];
        assert!(matches!(
            back.check_compatible(&g, p, &pap),
            Err(Error::Compatibility(_))
        ));
        fs::write(&path, "{\"format\":\"other\"}").unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(Error::Compatibility(_))));
    }

    #[test]
    fn mean_pair_scores_requires_both_sides() {
        let mut b = PairBatch::default();
        b.push(0, vec![1], Polarity::Positive);
        b.push(0, vec![1], Polarity::Positive);
        b.push(0, vec![2], Polarity::Negative);
        b.push(1, vec![0], Polarity::Positive);
        let m = mean_pair_scores(3, &b, &[0.75, 0.25, 0.2, 0.6]);
        assert_eq!(m[0], Some((0.5, 0.2)));
        assert_eq!(m[1], None);
        assert_eq!(m[2], None);
    }
}
