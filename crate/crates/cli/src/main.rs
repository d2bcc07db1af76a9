use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eagle_core::evaluation::{rank_and_threshold, sweep_tsv, Cutoff, ScoreReport};
use eagle_core::hetgraph::{read_graph, write_graph, GraphFiles, HetGraph};
use eagle_core::injector::{generate_synthetic, inject_contextual, read_labels, write_labels};
use eagle_core::model::Checkpoint;
use eagle_core::neural::Readout;
use eagle_core::pipeline::{
    bench_tsv, benchmark, dimension_sweep, finetune_and_detect, prepare, pretrain, readout_comparison, readout_tsv,
    run_experiment, split_graph, RunConfig, ScaleAxis, TAG_GEN, TAG_INJECT, TAG_SPLIT,
};
use eagle_core::sampler::derive_seed;
use eagle_core::{Error, Result};
use log::info;

#[derive(Parser)]
#[command(name = "eagle", version, about = "Anomaly detection on heterogeneous graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every verb. Precedence: profile, config file, `--set`,
/// then dedicated flags.
#[derive(Args, Clone)]
struct Common {
    /// Master seed for generation, injection, splitting, init and sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// JSON file with any subset of the run configuration keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory that receives every output file.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Named defaults: dblp, aminer or yelp.
    #[arg(long)]
    profile: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic graph from the configured preset.
    Gen {
        #[command(flatten)]
        common: Common,
    },
    /// Inject contextual anomalies into the scored node type.
    Inject {
        #[command(flatten)]
        common: Common,
        /// Directory holding schema.txt, nodes.txt and edges.txt.
        #[arg(long)]
        graph: PathBuf,
        /// Number of anomalies; defaults to anomaly_fraction of the scored nodes.
        #[arg(long)]
        m: Option<usize>,
    },
    /// Split a graph into node-disjoint pretraining and fine-tuning graphs.
    Split {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        graph: PathBuf,
        /// Labels of the scored type, projected onto both sides.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Train on a graph and save a checkpoint.
    Pretrain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        graph: PathBuf,
    },
    /// Fine-tune and score every node of the scored type.
    Detect {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, conflicts_with = "no_pretrain")]
        checkpoint: Option<PathBuf>,
        /// Start from random weights instead of a checkpoint.
        #[arg(long)]
        no_pretrain: bool,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        readout: Option<String>,
    },
    /// AUC and flagged nodes of a scores file.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scores: PathBuf,
        /// Ground truth; defaults to the label column of the scores file.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, conflicts_with = "threshold")]
        top_k: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Generate, inject, split, pretrain and detect in one go.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        no_pretrain: bool,
    },
    /// Time sampling, training and scoring across graph sizes.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "edges")]
        axis: String,
        /// Comma-separated size multipliers.
        #[arg(long, default_value = "1,2,4,8", value_delimiter = ',')]
        scales: Vec<f64>,
        #[arg(long, default_value_t = 3)]
        epochs: usize,
    },
    /// Detection AUC across embedding widths or pooling modes.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(value_enum)]
        over: SweepOver,
        #[arg(long, default_value = "16,32,64,128", value_delimiter = ',')]
        dims: Vec<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepOver {
    Dim,
    Readout,
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let mut base = serde_json::to_value(RunConfig::profile(c.profile.as_deref().unwrap_or("dblp"))?)?;
            let overrides: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let Some(obj) = overrides.as_object() else {
                return Err(Error::Config(format!("{}: expected a JSON object", path.display())));
            };
            for (k, v) in obj {
                base[k.as_str()] = v.clone();
            }
            RunConfig::from_json(&base.to_string())?
        }
        None => RunConfig::profile(c.profile.as_deref().unwrap_or("dblp"))?,
    };
    for kv in &c.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(c: &Common) -> Result<&Path> {
    fs::create_dir_all(&c.out_dir).map_err(|e| Error::Io {
        path: c.out_dir.display().to_string(),
        source: e,
    })?;
    Ok(&c.out_dir)
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    info!("wrote {}", path.display());
    Ok(())
}

fn load_graph(dir: &Path) -> Result<HetGraph> {
    read_graph(&GraphFiles::in_dir(dir))
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Gen { common } => {
            let cfg = load_config(&common)?;
            let g = generate_synthetic(&cfg.synth_schema()?, derive_seed(cfg.seed, &[TAG_GEN]))?;
            write_graph(&g, out_dir(&common)?)?;
            info!("generated {g}");
        }
        Command::Inject { common, graph, m } => {
            let cfg = load_config(&common)?;
            let g = load_graph(&graph)?;
            let (scored, _) = cfg.resolve(&g)?;
            let n = g.node_count(scored);
            let m = m.unwrap_or_else(|| ((cfg.anomaly_fraction * n as f64).round() as usize).max(1));
            let (injected, record) = inject_contextual(&g, scored, m, cfg.k, derive_seed(cfg.seed, &[TAG_INJECT]))?;
            let dir = out_dir(&common)?;
            write_graph(&injected, dir)?;
            write_labels(dir.join("labels.csv"), &record.labels(n))?;
            write(dir.join("injection.json"), &serde_json::to_string_pretty(&record)?)?;
            info!("injected {m} anomalies into {} {} nodes", n, record.node_type);
        }
        Command::Split { common, graph, labels } => {
            let cfg = load_config(&common)?;
            let g = load_graph(&graph)?;
            let split = split_graph(&g, cfg.pretrain_fraction, derive_seed(cfg.seed, &[TAG_SPLIT]))?;
            let dir = out_dir(&common)?;
            let names: Vec<String> = g
                .schema()
                .node_type_ids()
                .map(|t| g.schema().node_type_name(t).to_string())
                .collect();
            for (side, sub, index) in [
                ("pretrain", &split.pretrain, &split.pretrain_index),
                ("finetune", &split.finetune, &split.finetune_index),
            ] {
                let d = dir.join(side);
                write_graph(sub, &d)?;
                let mut map = String::from("type,index,original\n");
                for (t, idx) in index.iter().enumerate() {
                    for (i, o) in idx.iter().enumerate() {
                        map.push_str(&format!("{},{i},{o}\n", names[t]));
                    }
                }
                write(d.join("index.csv"), &map)?;
            }
            if let Some(path) = labels {
                let (scored, _) = cfg.resolve(&g)?;
                let y = read_labels(path)?;
                if y.len() != g.node_count(scored) {
                    return Err(Error::Data(format!(
                        "{} labels for {} scored nodes",
                        y.len(),
                        g.node_count(scored)
                    )));
                }
                let (pre, fin) = split.project_labels(scored, &y);
                write_labels(dir.join("pretrain").join("labels.csv"), &pre)?;
                write_labels(dir.join("finetune").join("labels.csv"), &fin)?;
            }
        }
        Command::Pretrain { common, graph } => {
            let cfg = load_config(&common)?;
            let g = load_graph(&graph)?;
            let (ck, trace) = pretrain(&cfg, &g)?;
            let dir = out_dir(&common)?;
            ck.save(dir.join("checkpoint.json"))?;
            write(dir.join("loss.tsv"), &trace.to_tsv())?;
        }
        Command::Detect {
            common,
            graph,
            checkpoint,
            no_pretrain,
            labels,
            gamma,
            readout,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(g) = gamma {
                cfg.gamma = g;
            }
            if let Some(r) = readout {
                cfg.readout = r.parse::<Readout>()?;
            }
            cfg.validate()?;
            let ck = match (checkpoint, no_pretrain) {
                (Some(path), _) => Some(Checkpoint::load(path)?),
                (None, true) => None,
                (None, false) => return Err(Error::Config("pass --checkpoint or --no-pretrain".into())),
            };
            let g = load_graph(&graph)?;
            let y = labels.map(read_labels).transpose()?;
            let det = finetune_and_detect(&cfg, ck.as_ref(), &g, y.as_deref())?;
            let dir = out_dir(&common)?;
            det.report.write(dir)?;
            write(dir.join("loss.tsv"), &det.trace.to_tsv())?;
            if let Some(auc) = det.report.auc {
                println!("auc\t{auc}");
            }
        }
        Command::Eval {
            common,
            scores,
            labels,
            top_k,
            threshold,
        } => {
            let text = fs::read_to_string(&scores).map_err(|e| Error::Io {
                path: scores.display().to_string(),
                source: e,
            })?;
            let mut report = ScoreReport::from_csv(&text)?;
            if let Some(path) = labels {
                let y = read_labels(path)?;
                report = ScoreReport::new(&report.scores(), Some(&y))?;
            }
            let cutoff = match (top_k, threshold) {
                (Some(k), _) => Some(Cutoff::TopK(k)),
                (None, Some(t)) => Some(Cutoff::Threshold(t)),
                (None, None) => None,
            };
            let dir = out_dir(&common)?;
            if let Some(c) = cutoff {
                let flagged = rank_and_threshold(&report, c)?;
                let lines: String = flagged.iter().map(|n| format!("{n}\n")).collect();
                write(dir.join("flagged.txt"), &lines)?;
            }
            write(dir.join("eval.json"), &report.metrics_json()?)?;
            match report.auc {
                Some(auc) => println!("auc\t{auc}"),
                None => println!("auc\tNA"),
            }
        }
        Command::Run { common, no_pretrain } => {
            let cfg = load_config(&common)?;
            let prep = prepare(&cfg)?;
            let exp = run_experiment(&cfg, &prep, no_pretrain)?;
            let dir = out_dir(&common)?;
            exp.detection.report.write(dir)?;
            if let Some(ck) = &exp.checkpoint {
                ck.save(dir.join("checkpoint.json"))?;
            }
            println!("auc\t{}", exp.auc());
        }
        Command::Bench {
            common,
            axis,
            scales,
            epochs,
        } => {
            let cfg = load_config(&common)?;
            let rows = benchmark(&cfg, axis.parse::<ScaleAxis>()?, &scales, epochs)?;
            let tsv = bench_tsv(&rows);
            write(out_dir(&common)?.join("bench.tsv"), &tsv)?;
            print!("{tsv}");
        }
        Command::Sweep { common, over, dims } => {
            let cfg = load_config(&common)?;
            let prep = prepare(&cfg)?;
            let (name, tsv) = match over {
                SweepOver::Dim => ("sweep.tsv", sweep_tsv(&dimension_sweep(&cfg, &prep, &dims)?)),
                SweepOver::Readout => ("readout.tsv", readout_tsv(&readout_comparison(&cfg, &prep)?)),
            };
            write(out_dir(&common)?.join(name), &tsv)?;
            print!("{tsv}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
