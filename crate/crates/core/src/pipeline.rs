//! End-to-end orchestration: configuration, graph splitting, training
//! loops, detection, benchmarks and parameter sweeps.

use std::collections::BTreeMap;
use std::time::Instant;

use log::{debug, info};
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{ScoreReport, SweepPoint};
use crate::hetgraph::{HetGraph, MetaPath, NodeRef, NodeTypeId};
use crate::injector::{generate_synthetic, inject_contextual, InjectionRecord, SynthSchema};
use crate::linalg::DenseMatrix;
use crate::model::{
    anomaly_score, discriminate_batch, forward, loss_and_gradients, mean_pair_scores, Checkpoint, EagleParams, Hyper,
    LossParts, ModelInput, PairBatch,
};
use crate::neural::{AdamState, Readout};
use crate::sampler::{derive_seed, sample_negative, sample_positive};

/// Seed-derivation tags, one per consumer of randomness.
pub const TAG_INIT: u64 = 1;
pub const TAG_TRAIN: u64 = 2;
pub const TAG_SCORE: u64 = 3;
pub const TAG_SPLIT: u64 = 4;
pub const TAG_INJECT: u64 = 5;
pub const TAG_GEN: u64 = 6;

/// Every knob of a run. Unset fields take the defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Synthetic recipe name used by `gen` and as the source of the default
    /// scored type and meta-paths.
    pub preset: String,
    /// Explicit synthetic recipe; overrides `preset` for generation.
    pub synth: Option<SynthSchema>,
    /// Scored node type; defaults to the preset's.
    pub scored_type: Option<String>,
    /// Meta-paths such as `paper-author-paper`; defaults to the preset's.
    pub metapaths: Vec<String>,
    pub dim: usize,
    pub lr: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub readout: Readout,
    pub pretrain_epochs: usize,
    pub finetune_epochs: usize,
    pub pos_per_node: usize,
    pub neg_per_node: usize,
    /// Share of every node type that goes to the pretraining graph.
    pub pretrain_fraction: f64,
    /// Share of scored nodes turned into anomalies.
    pub anomaly_fraction: f64,
    pub k: usize,
    /// Sampling rounds averaged into each node's discrimination term.
    pub score_rounds: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            preset: "dblp".into(),
            synth: None,
            scored_type: None,
            metapaths: Vec::new(),
            dim: 64,
            lr: 0.001,
            alpha: 0.8,
            beta: 0.2,
            gamma: 0.3,
            readout: Readout::Avg,
            pretrain_epochs: 300,
            finetune_epochs: 100,
            pos_per_node: 1,
            neg_per_node: 1,
            pretrain_fraction: 0.3,
            anomaly_fraction: 0.05,
            k: 50,
            score_rounds: 8,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Defaults tuned per dataset shape: learning rate and pretraining share.
    pub fn profile(name: &str) -> Result<Self> {
        let base = Self {
            preset: name.into(),
            ..Self::default()
        };
        match name {
            "dblp" => Ok(base),
            "aminer" => Ok(Self { lr: 0.006, ..base }),
            "yelp" => Ok(Self {
                pretrain_fraction: 0.7,
                ..base
            }),
            other => Err(Error::Config(format!("unknown profile '{other}' (dblp|aminer|yelp)"))),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Overrides one key. The value is read as JSON when it parses as such,
    /// otherwise as a plain string.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut v = serde_json::to_value(&*self)?;
        let obj = v.as_object_mut().expect("config serializes to an object");
        if !obj.contains_key(key) {
            return Err(Error::Config(format!("unknown config key '{key}'")));
        }
        let parsed = serde_json::from_str(value).unwrap_or_else(|_| serde_json::Value::String(value.into()));
        obj.insert(key.into(), parsed);
        *self = serde_json::from_value(v).map_err(|e| Error::Config(format!("{key}={value}: {e}")))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper().validate()?;
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        for (what, v) in [
            ("pretrain_fraction", self.pretrain_fraction),
            ("anomaly_fraction", self.anomaly_fraction),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{what} must lie in (0, 1), got {v}")));
            }
        }
        if self.pos_per_node == 0 || self.neg_per_node == 0 {
            return Err(Error::Config("pairs per node must be at least 1".into()));
        }
        if self.k == 0 || self.score_rounds == 0 {
            return Err(Error::Config("k and score_rounds must be at least 1".into()));
        }
        Ok(())
    }

    pub fn hyper(&self) -> Hyper {
        Hyper {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            dim: self.dim,
            readout: self.readout,
        }
    }

    pub fn synth_schema(&self) -> Result<SynthSchema> {
        match &self.synth {
            Some(s) => Ok(s.clone()),
            None => SynthSchema::preset(&self.preset),
        }
    }

    /// Scored type and meta-paths for `graph`, falling back to the preset.
    pub fn resolve(&self, graph: &HetGraph) -> Result<(NodeTypeId, Vec<MetaPath>)> {
        let scored_name = match &self.scored_type {
            Some(s) => s.clone(),
            None => self.synth_schema()?.scored_type,
        };
        let names = if self.metapaths.is_empty() {
            self.synth_schema()?.metapaths
        } else {
            self.metapaths.clone()
        };
        let scored = graph
            .schema()
            .node_type(&scored_name)
            .ok_or_else(|| Error::Config(format!("scored type '{scored_name}' is not in the graph")))?;
        let paths = names
            .iter()
            .map(|n| MetaPath::parse(graph.schema(), n))
            .collect::<Result<Vec<_>>>()?;
        if paths.is_empty() {
            return Err(Error::Config("no meta-paths configured".into()));
        }
        Ok((scored, paths))
    }
}

/// Two node-disjoint subgraphs plus, per node type, the original index of
/// each of their nodes.
#[derive(Clone, Debug)]
pub struct Split {
    pub pretrain: HetGraph,
    pub finetune: HetGraph,
    pub pretrain_index: Vec<Vec<usize>>,
    pub finetune_index: Vec<Vec<usize>>,
}

impl Split {
    /// Labels of the original scored nodes restricted to each side.
    pub fn project_labels(&self, scored: NodeTypeId, labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
        let t = scored.0 as usize;
        (
            self.pretrain_index[t].iter().map(|&i| labels[i]).collect(),
            self.finetune_index[t].iter().map(|&i| labels[i]).collect(),
        )
    }
}

/// Randomly assigns `fraction` of every node type to the pretraining side
/// and the rest to the fine-tuning side. Edges crossing sides are dropped.
pub fn split_graph(graph: &HetGraph, fraction: f64, seed: u64) -> Result<Split> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Split(format!("fraction must lie in (0, 1), got {fraction}")));
    }
    let schema = graph.schema();
    let mut side: Vec<Vec<Option<(bool, usize)>>> = Vec::new();
    let mut pre_idx = Vec::new();
    let mut fin_idx = Vec::new();
    for t in schema.node_type_ids() {
        let n = graph.node_count(t);
        let take = (fraction * n as f64).round() as usize;
        let name = schema.node_type_name(t);
        if take == 0 || take == n {
            return Err(Error::Split(format!(
                "fraction {fraction} of {n} {name} nodes leaves one side empty"
            )));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(seed, &[t.0 as u64]));
        let mut chosen = rand::seq::index::sample(&mut rng, n, take).into_vec();
        chosen.sort_unstable();
        let mut is_pre = vec![false; n];
        for &i in &chosen {
            is_pre[i] = true;
        }
        let (mut pre, mut fin) = (Vec::new(), Vec::new());
        let mut map = vec![None; n];
        for i in 0..n {
            if is_pre[i] {
                map[i] = Some((true, pre.len()));
                pre.push(i);
            } else {
                map[i] = Some((false, fin.len()));
                fin.push(i);
            }
        }
        side.push(map);
        pre_idx.push(pre);
        fin_idx.push(fin);
    }
    let build = |keep: bool, index: &[Vec<usize>]| -> Result<HetGraph> {
        let attrs = schema
            .node_type_ids()
            .map(|t| {
                let x = graph.attributes(t);
                let rows = &index[t.0 as usize];
                DenseMatrix::from_fn(rows.len(), x.cols(), |r, c| x.get(rows[r], c))
            })
            .collect();
        let names = schema
            .node_type_ids()
            .map(|t| {
                let all = graph.node_names(t);
                index[t.0 as usize].iter().map(|&i| all[i].clone()).collect()
            })
            .collect();
        let edges = schema
            .edge_type_ids()
            .map(|e| {
                let d = schema.edge_decl(e).expect("registered edge type");
                let (s, t) = (d.src.0 as usize, d.dst.0 as usize);
                graph
                    .edges(e)
                    .iter()
                    .filter_map(|&(a, b)| match (side[s][a], side[t][b]) {
                        (Some((sa, ia)), Some((sb, ib))) if sa == keep && sb == keep => Some((ia, ib)),
                        _ => None,
                    })
                    .collect()
            })
            .collect();
        HetGraph::new(schema.clone(), attrs, edges, Some(names))
    };
    Ok(Split {
        pretrain: build(true, &pre_idx)?,
        finetune: build(false, &fin_idx)?,
        pretrain_index: pre_idx,
        finetune_index: fin_idx,
    })
}

/// Positive and negative pairs for every scored node, sampled in parallel
/// with per-node seeds so the result does not depend on thread count.
pub fn sample_batch(
    graph: &HetGraph,
    scored: NodeTypeId,
    paths: &[MetaPath],
    pos: usize,
    neg: usize,
    seed: u64,
) -> Result<PairBatch> {
    let parts: Vec<Result<PairBatch>> = (0..graph.node_count(scored))
        .into_par_iter()
        .map(|i| {
            let target = NodeRef::new(scored, i);
            let s = derive_seed(seed, &[i as u64]);
            let mut pairs = sample_positive(graph, target, paths, pos, derive_seed(s, &[0]))?;
            pairs.extend(sample_negative(graph, target, paths, neg, derive_seed(s, &[1]))?);
            Ok(PairBatch::from_pairs(&pairs, scored))
        })
        .collect();
    let mut batch = PairBatch::default();
    for p in parts {
        batch.extend(p?);
    }
    Ok(batch)
}

/// Per-epoch losses and where the time went.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub losses: Vec<LossParts>,
    pub sampling_secs: f64,
    pub training_secs: f64,
}

impl TrainTrace {
    pub fn totals(&self) -> Vec<f64> {
        self.losses.iter().map(|l| l.total).collect()
    }

    /// `epoch<TAB>structure<TAB>attribute<TAB>contrastive<TAB>total`, epochs from 1.
    pub fn to_tsv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("epoch\tstructure\tattribute\tcontrastive\ttotal\n");
        for (e, l) in self.losses.iter().enumerate() {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                e + 1,
                l.structure,
                l.attribute,
                l.contrastive,
                l.total
            )
            .expect("write to string");
        }
        out
    }

    /// First epoch (1-based) whose total loss is at most `target`.
    pub fn epochs_to_reach(&self, target: f64) -> Option<usize> {
        self.losses.iter().position(|l| l.total <= target).map(|e| e + 1)
    }
}

/// Full-batch Adam on `graph` for `epochs` epochs, fresh pairs every epoch.
/// Any non-finite loss or gradient aborts with a divergence error.
pub fn train(
    params: &mut EagleParams,
    graph: &HetGraph,
    scored: NodeTypeId,
    paths: &[MetaPath],
    cfg: &RunConfig,
    epochs: usize,
    seed: u64,
) -> Result<TrainTrace> {
    let input = ModelInput::from_graph(graph, scored, paths)?;
    let mut adam = AdamState::new(cfg.lr, &params.shapes());
    let mut trace = TrainTrace::default();
    for epoch in 0..epochs {
        let t0 = Instant::now();
        let batch = sample_batch(
            graph,
            scored,
            paths,
            cfg.pos_per_node,
            cfg.neg_per_node,
            derive_seed(seed, &[TAG_TRAIN, epoch as u64]),
        )?;
        let t1 = Instant::now();
        let (parts, grads) = loss_and_gradients(params, &input, &batch).map_err(|e| match e {
            Error::Domain(m) => Error::Divergence(format!("epoch {epoch}: {m}")),
            other => other,
        })?;
        if !parts.total.is_finite() {
            return Err(Error::Divergence(format!(
                "epoch {epoch}: loss {} (structure {}, attribute {}, contrastive {})",
                parts.total, parts.structure, parts.attribute, parts.contrastive
            )));
        }
        adam.step(&mut params.matrices_mut(), &grads.0).map_err(|e| match e {
            Error::Divergence(m) => Error::Divergence(format!("epoch {epoch}: {m}")),
            other => other,
        })?;
        trace.sampling_secs += (t1 - t0).as_secs_f64();
        trace.training_secs += t1.elapsed().as_secs_f64();
        debug!("epoch {epoch}: loss {:.6} ({} pairs)", parts.total, batch.len());
        trace.losses.push(parts);
    }
    Ok(trace)
}

/// Trains freshly initialized parameters on `graph` and wraps them as a
/// checkpoint.
pub fn pretrain(cfg: &RunConfig, graph: &HetGraph) -> Result<(Checkpoint, TrainTrace)> {
    cfg.validate()?;
    let (scored, paths) = cfg.resolve(graph)?;
    let in_dim = graph.attributes(scored).cols();
    let mut params = EagleParams::init(in_dim, paths.len(), cfg.hyper(), derive_seed(cfg.seed, &[TAG_INIT]))?;
    let trace = train(
        &mut params,
        graph,
        scored,
        &paths,
        cfg,
        cfg.pretrain_epochs,
        derive_seed(cfg.seed, &[TAG_TRAIN, 0]),
    )?;
    if let Some(last) = trace.losses.last() {
        info!(
            "pretrained {} epochs, final loss {:.4}",
            cfg.pretrain_epochs, last.total
        );
    }
    Ok((Checkpoint::new(graph, scored, &paths, params), trace))
}

/// Anomaly scores of every scored node under frozen parameters. The
/// discrimination term averages `cfg.score_rounds` fresh samples.
pub fn score_graph(
    params: &EagleParams,
    graph: &HetGraph,
    scored: NodeTypeId,
    paths: &[MetaPath],
    cfg: &RunConfig,
    labels: Option<&[u8]>,
) -> Result<ScoreReport> {
    let input = ModelInput::from_graph(graph, scored, paths)?;
    let fwd = forward(params, &input, &PairBatch::default())?;
    let n = input.n();
    let mut all = PairBatch::default();
    let mut scores = Vec::new();
    for r in 0..cfg.score_rounds {
        let batch = sample_batch(
            graph,
            scored,
            paths,
            cfg.pos_per_node,
            cfg.neg_per_node,
            derive_seed(cfg.seed, &[TAG_SCORE, r as u64]),
        )?;
        scores.extend(discriminate_batch(params, &fwd.h, &batch)?);
        all.extend(batch);
    }
    let disc = mean_pair_scores(n, &all, &scores);
    let hyper = params.hyper;
    let node_scores = (0..n)
        .map(|i| anomaly_score(&input, &fwd, i, disc[i], &hyper).map(|s| s.score))
        .collect::<Result<Vec<_>>>()?;
    let mut report = ScoreReport::new(&node_scores, labels)?;
    report.unpaired = (0..n).filter(|&i| disc[i].is_none()).collect();
    Ok(report)
}

/// Outcome of fine-tuning and scoring one graph.
#[derive(Clone, Debug)]
pub struct Detection {
    pub report: ScoreReport,
    pub trace: TrainTrace,
    pub params: EagleParams,
}

/// Starts from `checkpoint` (or a random init when `None`), trains
/// `cfg.finetune_epochs` epochs on `graph`, then scores it.
pub fn finetune_and_detect(
    cfg: &RunConfig,
    checkpoint: Option<&Checkpoint>,
    graph: &HetGraph,
    labels: Option<&[u8]>,
) -> Result<Detection> {
    cfg.validate()?;
    let (scored, paths) = cfg.resolve(graph)?;
    if let Some(y) = labels {
        if y.len() != graph.node_count(scored) {
            return Err(Error::Data(format!(
                "{} labels for {} scored nodes",
                y.len(),
                graph.node_count(scored)
            )));
        }
    }
    let mut params = match checkpoint {
        Some(ck) => {
            ck.check_compatible(graph, scored, &paths)?;
            let mut p = ck.params.clone();
            // loss weights and pooling follow the run, not the checkpoint
            let dim = p.hyper.dim;
            p.hyper = Hyper { dim, ..cfg.hyper() };
            p
        }
        None => {
            let in_dim = graph.attributes(scored).cols();
            EagleParams::init(in_dim, paths.len(), cfg.hyper(), derive_seed(cfg.seed, &[TAG_INIT, 1]))?
        }
    };
    let t0 = Instant::now();
    let trace = train(
        &mut params,
        graph,
        scored,
        &paths,
        cfg,
        cfg.finetune_epochs,
        derive_seed(cfg.seed, &[TAG_TRAIN, 1]),
    )?;
    let finetune_secs = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let mut report = score_graph(&params, graph, scored, &paths, cfg, labels)?;
    report.timings.insert("finetune".into(), finetune_secs);
    report.timings.insert("sampling".into(), trace.sampling_secs);
    report.timings.insert("training".into(), trace.training_secs);
    report.timings.insert("scoring".into(), t1.elapsed().as_secs_f64());
    Ok(Detection { report, trace, params })
}

/// A generated graph with injected anomalies, split for pretraining and
/// fine-tuning.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub graph: HetGraph,
    pub injection: InjectionRecord,
    pub split: Split,
    pub scored: NodeTypeId,
    /// Labels of the fine-tuning side's scored nodes.
    pub finetune_labels: Vec<u8>,
}

/// Generate, inject `anomaly_fraction` of the scored type, then split.
pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    cfg.validate()?;
    let synth = cfg.synth_schema()?;
    let clean = generate_synthetic(&synth, derive_seed(cfg.seed, &[TAG_GEN]))?;
    let (scored, _) = cfg.resolve(&clean)?;
    let n = clean.node_count(scored);
    let m = ((cfg.anomaly_fraction * n as f64).round() as usize).max(1);
    let (graph, injection) = inject_contextual(&clean, scored, m, cfg.k, derive_seed(cfg.seed, &[TAG_INJECT]))?;
    let split = split_graph(&graph, cfg.pretrain_fraction, derive_seed(cfg.seed, &[TAG_SPLIT]))?;
    let labels = injection.labels(n);
    let (_, finetune_labels) = split.project_labels(scored, &labels);
    Ok(Prepared {
        graph,
        injection,
        split,
        scored,
        finetune_labels,
    })
}

/// Result of [`run_experiment`].
#[derive(Clone, Debug)]
pub struct Experiment {
    pub detection: Detection,
    pub pretrain_trace: Option<TrainTrace>,
    pub checkpoint: Option<Checkpoint>,
}

impl Experiment {
    pub fn auc(&self) -> f64 {
        self.detection.report.auc.unwrap_or(f64::NAN)
    }
}

/// Pretrain on the pretraining side (unless `no_pretrain`), then fine-tune
/// and score the fine-tuning side.
pub fn run_experiment(cfg: &RunConfig, prepared: &Prepared, no_pretrain: bool) -> Result<Experiment> {
    let (checkpoint, pretrain_trace) = if no_pretrain {
        (None, None)
    } else {
        let t0 = Instant::now();
        let (ck, tr) = pretrain(cfg, &prepared.split.pretrain)?;
        let secs = t0.elapsed().as_secs_f64();
        debug!("pretraining took {secs:.2}s");
        (Some(ck), Some(tr))
    };
    let mut detection = finetune_and_detect(
        cfg,
        checkpoint.as_ref(),
        &prepared.split.finetune,
        Some(&prepared.finetune_labels),
    )?;
    if let Some(tr) = &pretrain_trace {
        detection
            .report
            .timings
            .insert("pretrain".into(), tr.sampling_secs + tr.training_secs);
    }
    Ok(Experiment {
        detection,
        pretrain_trace,
        checkpoint,
    })
}

/// Which dimension of the graph a benchmark grows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleAxis {
    /// Edge rates multiplied, node counts fixed.
    Edges,
    /// Node counts multiplied, edge rates fixed.
    Nodes,
}

impl std::str::FromStr for ScaleAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edges" => Ok(ScaleAxis::Edges),
            "nodes" => Ok(ScaleAxis::Nodes),
            other => Err(Error::Config(format!("unknown axis '{other}' (edges|nodes)"))),
        }
    }
}

/// Timings for one graph size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scale: f64,
    pub scored_nodes: usize,
    pub edges: usize,
    /// Nonzeros over all meta-path adjacencies.
    pub metapath_nnz: usize,
    /// Pairs sampled per epoch.
    pub pairs: usize,
    pub sampling_secs: f64,
    pub epoch_secs: f64,
    pub scoring_secs: f64,
}

/// Generates one graph per scale factor and times sampling, a training
/// epoch (mean over `epochs`) and scoring on each.
pub fn benchmark(cfg: &RunConfig, axis: ScaleAxis, scales: &[f64], epochs: usize) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    if scales.is_empty() || epochs == 0 {
        return Err(Error::Config("benchmark needs at least one scale and one epoch".into()));
    }
    let base = cfg.synth_schema()?;
    let mut rows = Vec::with_capacity(scales.len());
    for &f in scales {
        let synth = match axis {
            ScaleAxis::Edges => base.clone().with_edge_scale(f),
            ScaleAxis::Nodes => base.clone().with_node_scale(f),
        };
        let graph = generate_synthetic(&synth, derive_seed(cfg.seed, &[TAG_GEN]))?;
        let (scored, paths) = cfg.resolve(&graph)?;
        let input = ModelInput::from_graph(&graph, scored, &paths)?;
        let nnz = input.norm.iter().map(|a| a.matrix().nnz()).sum();
        let mut params = EagleParams::init(input.x.cols(), paths.len(), cfg.hyper(), cfg.seed)?;

        let t0 = Instant::now();
        let batch = sample_batch(&graph, scored, &paths, cfg.pos_per_node, cfg.neg_per_node, cfg.seed)?;
        let sampling_secs = t0.elapsed().as_secs_f64();

        // one untimed warm-up epoch
        let mut cfg1 = cfg.clone();
        cfg1.score_rounds = 1;
        train(&mut params, &graph, scored, &paths, &cfg1, 1, cfg.seed)?;
        let tr = train(&mut params, &graph, scored, &paths, &cfg1, epochs, cfg.seed)?;
        let epoch_secs = tr.training_secs / epochs as f64;

        let t2 = Instant::now();
        score_graph(&params, &graph, scored, &paths, &cfg1, None)?;
        let scoring_secs = t2.elapsed().as_secs_f64();
        info!(
            "bench scale {f}: {} edges, {:.4}s/epoch",
            graph.total_edges(),
            epoch_secs
        );
        rows.push(BenchRow {
            scale: f,
            scored_nodes: graph.node_count(scored),
            edges: graph.total_edges(),
            metapath_nnz: nnz,
            pairs: batch.len(),
            sampling_secs,
            epoch_secs,
            scoring_secs,
        });
    }
    Ok(rows)
}

pub fn bench_tsv(rows: &[BenchRow]) -> String {
    use std::fmt::Write as _;
    let mut out = String::from("scale\tscored_nodes\tedges\tmetapath_nnz\tpairs\tsampling_s\tepoch_s\tscoring_s\n");
    for r in rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}",
            r.scale, r.scored_nodes, r.edges, r.metapath_nnz, r.pairs, r.sampling_secs, r.epoch_secs, r.scoring_secs
        )
        .expect("write to string");
    }
    out
}

/// AUC of the full pipeline for each embedding width.
pub fn dimension_sweep(cfg: &RunConfig, prepared: &Prepared, dims: &[usize]) -> Result<Vec<SweepPoint>> {
    dims.iter()
        .map(|&dim| {
            let c = RunConfig { dim, ..cfg.clone() };
            let e = run_experiment(&c, prepared, false)?;
            Ok(SweepPoint { dim, auc: e.auc() })
        })
        .collect()
}

/// AUC of the full pipeline for each pooling mode.
pub fn readout_comparison(cfg: &RunConfig, prepared: &Prepared) -> Result<BTreeMap<Readout, f64>> {
    let mut out = BTreeMap::new();
    for mode in Readout::ALL {
        let c = RunConfig {
            readout: mode,
            ..cfg.clone()
        };
        out.insert(mode, run_experiment(&c, prepared, false)?.auc());
    }
    Ok(out)
}

pub fn readout_tsv(table: &BTreeMap<Readout, f64>) -> String {
    let mut out = String::from("readout\tauc\n");
    for (m, a) in table {
        out.push_str(&format!("{m}\t{a}\n"));
    }
    out
}
