//! Command-line entry points.
//!
//! Subcommands: `prep-graph` (derive and export the graph matrices),
//! `gen-synthetic` (write a synthetic dataset), `train`, `evaluate`,
//! `export-weights` (averaged convolution weights), and `gradcheck` (the
//! finite-difference suite). Exit codes: 0 success, 1 runtime failure,
//! 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::data::{
    export_speed_csv, generate_synthetic_with, load_speed_csv, prepare, prepare_with_record,
    ImputePolicy, SyntheticConfig, Topology,
};
use crate::error::{Error, Result};
use crate::graph::{
    build_graph_matrices, load_node_ids, load_speed_limits, load_topology, write_bool_matrix_csv,
    write_matrix_csv, write_node_ids, write_topology_csv, GraphMatrices, NodeSpeeds, TrafficGraph,
};
use crate::gradsuite::run_suite;
use crate::metrics::{evaluate_model_on_split, export_avg_weights, write_avg_weights_csv, MetricsResult};
use crate::model::{Model, ModelKind};
use crate::training::{train, TrainConfig, TrainReport};

#[derive(Parser)]
#[command(
    name = "tgc-lstm",
    version,
    about = "Network-wide traffic speed forecasting on road-network graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive adjacency, k-hop, distance, reachability, and mask matrices
    PrepGraph(PrepGraphArgs),
    /// Generate a synthetic congestion-wave dataset
    GenSynthetic(GenSyntheticArgs),
    /// Train a forecaster and write its checkpoint and report
    Train(TrainArgs),
    /// Evaluate trained checkpoints on a dataset's test split
    Evaluate(EvaluateArgs),
    /// Export the averaged graph convolution weight matrix of a checkpoint
    ExportWeights(ExportWeightsArgs),
    /// Run the finite-difference gradient verification suite
    Gradcheck(GradcheckArgs),
}

fn parse_model_kind(s: &str) -> std::result::Result<ModelKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_topology(s: &str) -> std::result::Result<Topology, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_impute(s: &str) -> std::result::Result<ImputePolicy, String> {
    match s {
        "forward-fill" => Ok(ImputePolicy::ForwardFillThenBackfill),
        "node-mean" => Ok(ImputePolicy::NodeMean),
        other => Err(format!("unknown impute policy '{other}' (expected forward-fill or node-mean)")),
    }
}

fn parse_split(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected three comma-separated fractions, e.g. 0.7,0.1,0.2".into());
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.trim().parse().map_err(|_| format!("bad fraction '{p}'"))?;
    }
    Ok(out)
}

/// Graph inputs shared by prep-graph and train.
#[derive(Args)]
struct GraphArgs {
    /// Edge list CSV: node_i,node_j,length_miles
    #[arg(long)]
    topology: PathBuf,
    /// Node-id file: one sensor identifier per line, line number = index
    #[arg(long)]
    node_ids: PathBuf,
    /// Optional per-node speed limit CSV: node_id,free_flow_mph
    #[arg(long)]
    speed_limits: Option<PathBuf>,
    /// Network-wide free-flow speed in mph (fallback when no file is given)
    #[arg(long, default_value_t = 60.0)]
    free_flow: f64,
    /// Hop order K of the graph convolution
    #[arg(long, default_value_t = 3)]
    k_hops: usize,
    /// Reachability horizon in time steps (defaults to K)
    #[arg(long)]
    m_steps: Option<usize>,
    /// Time quantum in minutes
    #[arg(long, default_value_t = 5.0)]
    delta_t_min: f64,
}

impl GraphArgs {
    fn load(&self) -> Result<(Vec<String>, TrafficGraph<f64>, GraphMatrices<f64>)> {
        let node_ids = load_node_ids(&self.node_ids)?;
        let edges = load_topology(&self.topology, &node_ids)?;
        let speeds = match &self.speed_limits {
            Some(path) => load_speed_limits(path, &node_ids, self.free_flow)?,
            None => NodeSpeeds::Uniform(self.free_flow),
        };
        let graph = TrafficGraph::new(node_ids.len(), edges, speeds)?;
        let horizon = self.m_steps.unwrap_or(self.k_hops);
        let matrices = build_graph_matrices(&graph, self.k_hops, horizon, self.delta_t_min)?;
        Ok((node_ids, graph, matrices))
    }
}

#[derive(Args)]
struct PrepGraphArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Output directory for the matrix CSVs
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GenSyntheticArgs {
    /// Number of nodes
    #[arg(long, default_value_t = 20)]
    nodes: usize,
    /// Network shape: ring, path, or grid
    #[arg(long, default_value = "ring", value_parser = parse_topology)]
    topology: Topology,
    /// Number of 5-minute time steps
    #[arg(long, default_value_t = 5000)]
    steps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Probability per step of a new congestion event
    #[arg(long, default_value_t = 0.02)]
    event_rate: f64,
    /// Observation noise bound in mph
    #[arg(long, default_value_t = 1.0)]
    noise_mph: f64,
    /// Output directory (speeds.csv, topology.csv, node_ids.txt)
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Speed CSV: timestamp header plus one column per node id
    #[arg(long)]
    speeds: PathBuf,
    #[arg(long, default_value = "tgc-lstm", value_parser = parse_model_kind)]
    model: ModelKind,
    /// Input window length T
    #[arg(long, default_value_t = 10)]
    window_len: usize,
    /// Chronological train/validation/test fractions
    #[arg(long, default_value = "0.7,0.1,0.2", value_parser = parse_split)]
    split: [f64; 3],
    /// Missing-value policy: forward-fill or node-mean
    #[arg(long, default_value = "forward-fill", value_parser = parse_impute)]
    impute: ImputePolicy,
    /// Config file of `key = value` lines; explicit flags win
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// RMSProp learning rate
    #[arg(long)]
    lr: Option<f64>,
    /// RMSProp smoothing constant
    #[arg(long)]
    alpha: Option<f64>,
    /// RMSProp denominator epsilon
    #[arg(long)]
    epsilon: Option<f64>,
    /// Global gradient-norm clip (0 disables)
    #[arg(long)]
    clip_norm: Option<f64>,
    /// Output directory for the checkpoint and training report
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Speed CSV to evaluate on
    #[arg(long)]
    speeds: PathBuf,
    /// Checkpoint to score; repeat the flag to compare several models
    #[arg(long, required = true)]
    checkpoint: Vec<PathBuf>,
    #[arg(long, default_value = "0.7,0.1,0.2", value_parser = parse_split)]
    split: [f64; 3],
    #[arg(long, default_value = "forward-fill", value_parser = parse_impute)]
    impute: ImputePolicy,
    /// Optional path for the metrics CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportWeightsArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Output CSV path
    #[arg(long, default_value = "avg_weights.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Number of graph nodes
    #[arg(long, default_value_t = 5)]
    n: usize,
    /// Hop order
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Sequence length
    #[arg(long, default_value_t = 3)]
    t: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// How many consecutive seeds to run
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Maximum tolerated relative error
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

/// Parses the argument vector and runs the selected subcommand, mapping the
/// outcome to a process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::PrepGraph(args) => prep_graph(args),
        Command::GenSynthetic(args) => gen_synthetic(args),
        Command::Train(args) => run_train(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::ExportWeights(args) => run_export_weights(args),
        Command::Gradcheck(args) => run_gradcheck(args),
    }
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn prep_graph(args: PrepGraphArgs) -> Result<i32> {
    let (node_ids, _, matrices) = args.graph.load()?;
    ensure_dir(&args.out_dir)?;
    for khop in &matrices.khops {
        let path = args.out_dir.join(format!("khop_{}.csv", khop.order()));
        write_bool_matrix_csv(&path, khop.values(), &node_ids)?;
    }
    write_matrix_csv(&args.out_dir.join("dist.csv"), matrices.dist.values(), &node_ids)?;
    write_bool_matrix_csv(&args.out_dir.join("ffr.csv"), matrices.ffr.values(), &node_ids)?;
    for mask in &matrices.masks {
        let path = args.out_dir.join(format!("support_mask_{}.csv", mask.order()));
        write_bool_matrix_csv(&path, mask.values(), &node_ids)?;
    }
    println!(
        "wrote {} matrices for {} nodes to {}",
        matrices.khops.len() * 2 + 2,
        node_ids.len(),
        args.out_dir.display()
    );
    println!("k_max = {}", matrices.k_max);
    Ok(0)
}

fn gen_synthetic(args: GenSyntheticArgs) -> Result<i32> {
    let mut cfg = SyntheticConfig::new(args.nodes, args.topology, args.steps, args.seed);
    cfg.event_rate = args.event_rate;
    cfg.noise_mph = args.noise_mph;
    let (graph, dataset) = generate_synthetic_with::<f64>(&cfg)?;
    ensure_dir(&args.out_dir)?;
    export_speed_csv(&args.out_dir.join("speeds.csv"), &dataset)?;
    write_topology_csv(&args.out_dir.join("topology.csv"), &graph, dataset.node_ids())?;
    write_node_ids(&args.out_dir.join("node_ids.txt"), dataset.node_ids())?;
    println!(
        "wrote {} steps x {} nodes ({} topology) to {}",
        dataset.rows(),
        dataset.node_count(),
        args.topology,
        args.out_dir.display()
    );
    Ok(0)
}

/// Builds the training configuration from defaults, then the config file,
/// then explicit flags (strongest).
fn resolve_train_config(args: &TrainArgs) -> Result<TrainConfig<f64>> {
    let mut cfg = TrainConfig::<f64>::default();
    if let Some(path) = &args.config {
        apply_config_file(&mut cfg, path)?;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.lambda1 {
        cfg.lambda1 = v;
    }
    if let Some(v) = args.lambda2 {
        cfg.lambda2 = v;
    }
    if let Some(v) = args.max_epochs {
        cfg.max_epochs = v;
    }
    if let Some(v) = args.patience {
        cfg.patience = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.lr {
        cfg.optimizer.learning_rate = v;
    }
    if let Some(v) = args.alpha {
        cfg.optimizer.alpha = v;
    }
    if let Some(v) = args.epsilon {
        cfg.optimizer.epsilon = v;
    }
    if let Some(v) = args.clip_norm {
        cfg.clip_norm = if v > 0.0 { Some(v) } else { None };
    }
    cfg.validate()?;
    Ok(cfg)
}

/// `key = value` lines; `#` starts a comment. Keys mirror the training
/// configuration fields.
fn apply_config_file(cfg: &mut TrainConfig<f64>, path: &Path) -> Result<()> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Data(format!(
                "{}:{}: expected 'key = value', got '{raw}'",
                path.display(),
                lineno + 1
            ))
        })?;
        let key = key.trim();
        let value = value.trim();
        let bad = |what: &str| {
            Error::Data(format!(
                "{}:{}: bad {what} value '{value}'",
                path.display(),
                lineno + 1
            ))
        };
        match key {
            "batch_size" => cfg.batch_size = value.parse().map_err(|_| bad("batch_size"))?,
            "lambda1" => cfg.lambda1 = value.parse().map_err(|_| bad("lambda1"))?,
            "lambda2" => cfg.lambda2 = value.parse().map_err(|_| bad("lambda2"))?,
            "max_epochs" => cfg.max_epochs = value.parse().map_err(|_| bad("max_epochs"))?,
            "patience" => cfg.patience = value.parse().map_err(|_| bad("patience"))?,
            "seed" => cfg.seed = value.parse().map_err(|_| bad("seed"))?,
            "lr" | "learning_rate" => {
                cfg.optimizer.learning_rate = value.parse().map_err(|_| bad("learning rate"))?
            }
            "alpha" => cfg.optimizer.alpha = value.parse().map_err(|_| bad("alpha"))?,
            "epsilon" => cfg.optimizer.epsilon = value.parse().map_err(|_| bad("epsilon"))?,
            "clip_norm" => {
                let v: f64 = value.parse().map_err(|_| bad("clip_norm"))?;
                cfg.clip_norm = if v > 0.0 { Some(v) } else { None };
            }
            other => {
                return Err(Error::Data(format!(
                    "{}:{}: unknown config key '{other}'",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    Ok(())
}

fn run_train(args: TrainArgs) -> Result<i32> {
    let cfg = resolve_train_config(&args)?;
    let (node_ids, _, matrices) = args.graph.load()?;
    let raw = load_speed_csv::<f64>(&args.speeds, &node_ids)?;
    let data = prepare(&raw, args.window_len, args.split, args.impute)?;
    if data.imputed_cells > 0 {
        println!("imputed {} missing cells", data.imputed_cells);
    }
    let mut model = Model::build(args.model, &matrices, cfg.seed)?;
    println!(
        "training {} on {} windows ({} validation, {} test), N={}, K={}",
        args.model,
        data.splits.train.len(),
        data.splits.val.len(),
        data.splits.test.len(),
        node_ids.len(),
        matrices.masks.len(),
    );
    let (best, report) = train(&mut model, &data, &cfg)?;

    ensure_dir(&args.out_dir)?;
    let ckpt_path = args.out_dir.join(format!("{}.ckpt", args.model));
    save_checkpoint(
        &ckpt_path,
        &Checkpoint {
            model: best,
            node_ids,
            norm: Some(data.record),
            window_len: args.window_len,
        },
    )?;
    let report_path = args.out_dir.join("train_report.csv");
    write_train_report(&report_path, &report)?;

    println!(
        "stopped after {} epochs; best validation loss {:.6e} at epoch {}",
        report.epochs.len(),
        report.best_val_loss,
        report.best_epoch
    );
    if let Some(metrics) = &report.test_metrics {
        print_metrics_table(&[(args.model.to_string(), metrics.clone())]);
    }
    println!("checkpoint: {}", ckpt_path.display());
    println!("report:     {}", report_path.display());
    Ok(0)
}

fn write_train_report(path: &Path, report: &TrainReport<f64>) -> Result<()> {
    let mut out = String::from("epoch,train_loss,val_loss,seconds\n");
    for e in &report.epochs {
        out.push_str(&format!("{},{},{},{:.3}\n", e.epoch, e.train_loss, e.val_loss, e.seconds));
    }
    crate::graph::write_file(path, out.as_bytes())
}

fn metrics_csv(rows: &[(String, MetricsResult<f64>)]) -> String {
    let mut out = String::from("model,mae_mph,mape_percent,rmse_mph,samples,mape_excluded_cells\n");
    for (name, m) in rows {
        out.push_str(&format!(
            "{name},{},{},{},{},{}\n",
            m.mae, m.mape_percent, m.rmse, m.samples, m.mape_excluded_cells
        ));
    }
    out
}

fn print_metrics_table(rows: &[(String, MetricsResult<f64>)]) {
    println!("{:<12} {:>10} {:>10} {:>10} {:>8}", "model", "MAE(mph)", "MAPE(%)", "RMSE(mph)", "samples");
    for (name, m) in rows {
        println!(
            "{:<12} {:>10.4} {:>10.4} {:>10.4} {:>8}",
            name, m.mae, m.mape_percent, m.rmse, m.samples
        );
    }
    print!("{}", metrics_csv(rows));
}

fn run_evaluate(args: EvaluateArgs) -> Result<i32> {
    let mut rows = Vec::new();
    for path in &args.checkpoint {
        let ckpt: Checkpoint<f64> = load_checkpoint(path)?;
        let record = ckpt.norm.ok_or_else(|| {
            Error::Checkpoint(format!(
                "{} carries no normalization record, cannot evaluate",
                path.display()
            ))
        })?;
        let raw = load_speed_csv::<f64>(&args.speeds, &ckpt.node_ids)?;
        let data = prepare_with_record(&raw, ckpt.window_len, args.split, args.impute, record)?;
        let metrics = evaluate_model_on_split(&ckpt.model, &data, &data.splits.test)?;
        rows.push((ckpt.model.kind().to_string(), metrics));
    }
    print_metrics_table(&rows);
    if let Some(out) = &args.out {
        crate::graph::write_file(out, metrics_csv(&rows).as_bytes())?;
        println!("metrics written to {}", out.display());
    }
    Ok(0)
}

fn run_export_weights(args: ExportWeightsArgs) -> Result<i32> {
    let ckpt: Checkpoint<f64> = load_checkpoint(&args.checkpoint)?;
    let layer = match &ckpt.model {
        Model::TgcLstm(cell) => cell.tgc(),
        other => {
            return Err(Error::InvalidArgument(format!(
                "checkpoint holds a {} model; only tgc-lstm has graph convolution weights",
                other.kind()
            )))
        }
    };
    let avg = export_avg_weights(layer);
    write_avg_weights_csv(&args.out, &avg, &ckpt.node_ids)?;
    println!("averaged weight matrix written to {}", args.out.display());
    Ok(0)
}

fn run_gradcheck(args: GradcheckArgs) -> Result<i32> {
    let mut worst = 0.0f64;
    let mut failed = false;
    for seed in args.seed..args.seed + args.seeds.max(1) {
        let report = run_suite::<f64>(args.n, args.k, args.t, seed)?;
        for c in &report.components {
            let ok = c.max_rel_err < args.tolerance;
            failed |= !ok;
            println!(
                "seed {seed:>3}  {:<20} max rel err {:>12.3e}  {}",
                c.name,
                c.max_rel_err,
                if ok { "ok" } else { "FAIL" }
            );
        }
        worst = worst.max(report.max_rel_err());
    }
    println!("max relative error over all components: {worst:.3e} (tolerance {:.1e})", args.tolerance);
    Ok(if failed { 1 } else { 0 })
}
