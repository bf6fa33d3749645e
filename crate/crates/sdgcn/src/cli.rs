//! Command-line interface: dataset verification, training, evaluation, the
//! q and sampling-ratio sweeps, and Laplacian export.
//!
//! Every command is a pure function of (config, input files); reruns produce
//! byte-identical outputs. Wall-clock information goes to `run.log` only.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use crate::graph::{load_edge_list, EdgeListFormat, SignedDigraph};
use crate::metrics::{aggregate_runs, EvalReport};
use crate::model::{
    evaluate, train, Checkpoint, FeatureSpec, ModelError, TrainConfig, TrainOutcome,
};
use crate::spectral::{
    hermitian_adjacency, magnetic_laplacian, verify_psd, LaplacianKind, MagneticLaplacian,
    PhaseParams, DEFAULT_DENSE_CAP,
};

/// Exit codes: 0 success, 1 verification/assertion failure, 2 input error,
/// 3 runtime divergence.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Check(String),
    Divergence(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Check(_) => 1,
            CliError::Input(_) => 2,
            CliError::Divergence(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Check(m) => write!(f, "check failed: {m}"),
            CliError::Divergence(m) => write!(f, "divergence: {m}"),
        }
    }
}

impl From<crate::graph::GraphError> for CliError {
    fn from(e: crate::graph::GraphError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Diverged { .. } => CliError::Divergence(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<crate::spectral::SpectralError> for CliError {
    fn from(e: crate::spectral::SpectralError) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "sdgcn", about = "Spectral graph convolution for signed directed graphs")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Numerically verify the Laplacian theorems on a dataset
    Verify(VerifyArgs),
    /// Train one model per seed and evaluate on the test split
    Train(TrainArgs),
    /// Re-evaluate a saved checkpoint on the test split
    Eval(EvalArgs),
    /// Train across a grid of q values and emit plot-ready CSV
    SweepQ(SweepQArgs),
    /// Train across positive sampling ratios and emit plot-ready CSV
    SweepRatio(SweepRatioArgs),
    /// Export a magnetic Laplacian in MatrixMarket form
    ExportLaplacian(ExportArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FormatArg {
    Csv,
    Tsv,
}

impl FormatArg {
    fn to_format(self) -> EdgeListFormat {
        match self {
            FormatArg::Csv => EdgeListFormat::Csv,
            // TSV rows split fine on general whitespace
            FormatArg::Tsv => EdgeListFormat::Whitespace,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FeatureArg {
    Gaussian,
    Degree,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum KindArg {
    Unnormalized,
    Normalized,
    Renormalized,
}

impl KindArg {
    fn to_kind(self) -> LaplacianKind {
        match self {
            KindArg::Unnormalized => LaplacianKind::Unnormalized,
            KindArg::Normalized => LaplacianKind::Normalized,
            KindArg::Renormalized => LaplacianKind::Renormalized,
        }
    }
}

/// Shared flags for every training-shaped command. All are optional here;
/// `Experiment::resolve` merges them with the config file (flags win) and the
/// built-in defaults.
#[derive(Args, Debug, Clone)]
struct CommonFlags {
    /// Signed edge list (`src,dst,weight` CSV or `src dst sign`; `.gz` ok)
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Input format override; inferred from the extension when omitted
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// key=value config file; command-line flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// Phase parameter; accepts `0.1pi` or a plain float in radians
    #[arg(long, value_parser = parse_pi)]
    q: Option<f64>,
    /// Number of spectral convolution layers
    #[arg(long)]
    layers: Option<usize>,
    /// Hidden width and embedding dimension
    #[arg(long)]
    dim: Option<usize>,
    /// Adam learning rate
    #[arg(long)]
    lr: Option<f64>,
    /// L2 weight decay
    #[arg(long)]
    weight_decay: Option<f64>,
    /// Positive sampling ratio
    #[arg(long)]
    ratio: Option<f64>,
    /// Comma-separated training seeds
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Maximum training epochs
    #[arg(long)]
    epochs: Option<usize>,
    /// Early-stopping patience (consecutive rising validation epochs)
    #[arg(long)]
    patience: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Pin imaginary weight parts to zero
    #[arg(long)]
    real_weights: Option<bool>,
    /// Input signal: seeded gaussian or signed degree counts
    #[arg(long, value_enum)]
    features: Option<FeatureArg>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonFlags,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonFlags,
    /// Checkpoint JSON written by `train`
    #[arg(long)]
    checkpoint: PathBuf,
}

#[derive(Args, Debug)]
struct SweepQArgs {
    #[command(flatten)]
    common: CommonFlags,
    /// q grid; repeat the flag per value (default 0 to 0.5pi step 0.05pi)
    #[arg(long = "sweep-q", value_parser = parse_pi)]
    grid: Vec<f64>,
}

#[derive(Args, Debug)]
struct SweepRatioArgs {
    #[command(flatten)]
    common: CommonFlags,
    /// Ratio grid; repeat the flag per value (default 1..9)
    #[arg(long = "sweep-ratio")]
    grid: Vec<f64>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// q values to verify; repeat the flag per value
    #[arg(long, value_parser = parse_pi)]
    q: Vec<f64>,
    /// Verify on the induced subgraph of the first k nodes
    #[arg(long)]
    sample_nodes: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Test hook: corrupt the Laplacian before checking (must fail)
    #[arg(long, hide = true)]
    corrupt: bool,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_pi)]
    q: Option<f64>,
    /// Which Laplacian to export
    #[arg(long, value_enum, default_value = "renormalized")]
    kind: KindArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `0.1pi`, `pi`, or a plain float in radians.
fn parse_pi(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim();
    if let Some(prefix) = t.strip_suffix("pi") {
        let factor = if prefix.is_empty() {
            1.0
        } else {
            prefix
                .parse::<f64>()
                .map_err(|_| format!("bad pi multiple {t:?}"))?
        };
        Ok(factor * std::f64::consts::PI)
    } else {
        t.parse::<f64>().map_err(|_| format!("bad float {t:?}"))
    }
}

/// `key = value` lines; `#` comments and blank lines skipped.
fn load_config_file(path: &Path) -> Result<HashMap<String, String>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))?;
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Input(format!(
                "config {} line {}: expected key=value",
                path.display(),
                lineno + 1
            ))
        })?;
        map.insert(key.trim().to_string(), value.trim().trim_matches('"').to_string());
    }
    Ok(map)
}

/// Fully resolved experiment settings: flags override the config file, the
/// config file overrides built-in defaults.
#[derive(Debug, Clone)]
struct Experiment {
    dataset: PathBuf,
    format: Option<EdgeListFormat>,
    train: TrainConfig,
    seeds: Vec<u64>,
    out: PathBuf,
}

impl Experiment {
    fn resolve(flags: &CommonFlags) -> Result<Experiment> {
        let file = match &flags.config {
            Some(p) => load_config_file(p)?,
            None => HashMap::new(),
        };
        let from_file = |key: &str| file.get(key).cloned();
        fn parse<T: std::str::FromStr>(key: &str, v: String) -> Result<T> {
            v.parse()
                .map_err(|_| CliError::Input(format!("config key {key}: bad value {v:?}")))
        }

        let dataset = flags
            .dataset
            .clone()
            .or_else(|| from_file("dataset").map(PathBuf::from))
            .ok_or_else(|| CliError::Input("--dataset is required".into()))?;
        let format = match (&flags.format, from_file("format")) {
            (Some(f), _) => Some(f.to_format()),
            (None, Some(v)) => match v.as_str() {
                "csv" => Some(EdgeListFormat::Csv),
                "tsv" => Some(EdgeListFormat::Whitespace),
                other => {
                    return Err(CliError::Input(format!("config key format: {other:?}")))
                }
            },
            (None, None) => None,
        };

        let mut train = TrainConfig::default();
        if let Some(q) = flags.q.or(match from_file("q") {
            Some(v) => Some(parse_pi(&v).map_err(CliError::Input)?),
            None => None,
        }) {
            train.q = q;
        }
        if let Some(v) = pick(flags.layers, from_file("layers"), "layers")? {
            train.num_layers = v;
        }
        if let Some(v) = pick(flags.dim, from_file("dim"), "dim")? {
            train.hidden_dim = v;
            train.embed_dim = v;
        }
        if let Some(v) = pick(flags.lr, from_file("lr"), "lr")? {
            train.learning_rate = v;
        }
        if let Some(v) = pick(flags.weight_decay, from_file("weight_decay"), "weight_decay")? {
            train.weight_decay = v;
        }
        if let Some(v) = pick(flags.ratio, from_file("ratio"), "ratio")? {
            train.positive_ratio = v;
        }
        if let Some(v) = pick(flags.epochs, from_file("epochs"), "epochs")? {
            train.max_epochs = v;
        }
        if let Some(v) = pick(flags.patience, from_file("patience"), "patience")? {
            train.patience = v;
        }
        if let Some(v) = pick(flags.real_weights, from_file("real_weights"), "real_weights")? {
            train.real_weights = v;
        }
        let feature_kind = match (&flags.features, from_file("features")) {
            (Some(FeatureArg::Degree), _) => Some("degree".to_string()),
            (Some(FeatureArg::Gaussian), _) => Some("gaussian".to_string()),
            (None, v) => v,
        };
        train.features = match feature_kind.as_deref() {
            None | Some("gaussian") => FeatureSpec::Gaussian {
                dim: train.embed_dim,
            },
            Some("degree") => FeatureSpec::Degree,
            Some(other) => {
                return Err(CliError::Input(format!("unknown feature spec {other:?}")))
            }
        };
        if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&train.q) {
            return Err(CliError::Input(format!(
                "q = {} outside [0, pi/2]",
                train.q
            )));
        }
        if train.positive_ratio <= 0.0 {
            return Err(CliError::Input("ratio must be positive".into()));
        }

        let seeds = match (&flags.seeds, from_file("seeds")) {
            (Some(s), _) => s.clone(),
            (None, Some(v)) => {
                let mut out = Vec::new();
                for part in v.split(',') {
                    out.push(parse("seeds", part.trim().to_string())?);
                }
                out
            }
            (None, None) => (0..10).map(|i| i * 10).collect(),
        };
        if seeds.is_empty() {
            return Err(CliError::Input("seed list must be nonempty".into()));
        }
        let out = flags
            .out
            .clone()
            .or_else(|| from_file("out").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok(Experiment {
            dataset,
            format,
            train,
            seeds,
            out,
        })
    }

    fn load_graph(&self) -> Result<SignedDigraph> {
        let (g, _) = load_edge_list(&self.dataset, self.format)?;
        Ok(g)
    }

    fn dataset_name(&self) -> String {
        let name = self
            .dataset
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or("dataset");
        let name = name.strip_suffix(".gz").unwrap_or(name);
        match name.rsplit_once('.') {
            Some((stem, _)) => stem.to_string(),
            None => name.to_string(),
        }
    }

    fn config_for_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            ..self.train.clone()
        }
    }
}

fn pick<T: std::str::FromStr>(flag: Option<T>, file: Option<String>, key: &str) -> Result<Option<T>> {
    match (flag, file) {
        (Some(v), _) => Ok(Some(v)),
        (None, Some(v)) => v
            .parse()
            .map(Some)
            .map_err(|_| CliError::Input(format!("config key {key}: bad value {v:?}"))),
        (None, None) => Ok(None),
    }
}

/// Writes via a hidden temp file in the same directory, then renames.
fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let tmp = path.with_file_name(format!(
        ".{}.tmp",
        path.file_name().and_then(|s| s.to_str()).unwrap_or("out")
    ));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

fn worker_count() -> usize {
    std::env::var("SDGRAPH_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}

/// Runs `f` over `0..n` on up to `workers` scoped threads, preserving index
/// order in the returned vector.
fn parallel_map<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = workers.min(n).max(1);
    if workers == 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let value = f(i);
                slots.lock().unwrap()[i] = Some(value);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|v| v.expect("worker filled every slot"))
        .collect()
}

pub fn run() -> Result<()> {
    run_with(Cli::parse())
}

fn run_with(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Verify(args) => cmd_verify(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::SweepQ(args) => cmd_sweep_q(args),
        Command::SweepRatio(args) => cmd_sweep_ratio(args),
        Command::ExportLaplacian(args) => cmd_export(args),
    }
}

/// Entry point for the binary; parses real argv.
pub fn main() -> i32 {
    match run() {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.code()
        }
    }
}

fn induced_prefix(g: &SignedDigraph, k: usize) -> SignedDigraph {
    SignedDigraph {
        num_nodes: k.min(g.num_nodes),
        edges: g
            .edges
            .iter()
            .copied()
            .filter(|e| e.source < k && e.target < k)
            .collect(),
        original_ids: g.original_ids[..k.min(g.num_nodes)].to_vec(),
    }
}

/// Asymmetric perturbation of one entry; breaks Hermitian symmetry so the
/// verifier must report failure.
fn corrupt_laplacian(l: &MagneticLaplacian) -> MagneticLaplacian {
    let mut triplets: Vec<(usize, usize, Complex64)> = l.matrix.iter().collect();
    triplets.push((0, 1, Complex64::new(0.5, 0.0)));
    triplets.push((1, 0, Complex64::new(-0.5, 0.25)));
    MagneticLaplacian {
        matrix: crate::linalg::SparseComplexMatrix::from_triplets(
            l.matrix.rows(),
            l.matrix.cols(),
            triplets,
        ),
        kind: l.kind,
        params: l.params,
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<()> {
    let common = CommonFlags {
        dataset: args.dataset.clone(),
        format: args.format,
        config: args.config.clone(),
        q: None,
        layers: None,
        dim: None,
        lr: None,
        weight_decay: None,
        ratio: None,
        seeds: Some(vec![0]),
        epochs: None,
        patience: None,
        out: args.out.clone(),
        real_weights: None,
        features: None,
    };
    let exp = Experiment::resolve(&common)?;
    let mut g = exp.load_graph()?;
    if let Some(k) = args.sample_nodes {
        if k < 2 {
            return Err(CliError::Input("--sample-nodes must be at least 2".into()));
        }
        g = induced_prefix(&g, k);
    }
    if g.num_nodes > DEFAULT_DENSE_CAP {
        return Err(CliError::Input(format!(
            "{} nodes exceeds the dense eigensolver cap {DEFAULT_DENSE_CAP}; \
             use --sample-nodes k",
            g.num_nodes
        )));
    }
    let qs = if args.q.is_empty() {
        vec![0.1 * std::f64::consts::PI]
    } else {
        args.q.clone()
    };
    let mut reports = Vec::new();
    let mut all_pass = true;
    for &q in &qs {
        let params = PhaseParams::new(q)?;
        let h = hermitian_adjacency(&g, &params);
        for kind in [LaplacianKind::Unnormalized, LaplacianKind::Normalized] {
            let mut l = magnetic_laplacian(&h, kind);
            if args.corrupt {
                l = corrupt_laplacian(&l);
            }
            let report = verify_psd(&l, DEFAULT_DENSE_CAP)?;
            println!(
                "q={q:.6} kind={kind} min={:.3e} max={:.3e} dev={:.3e} {}",
                report.min_eigenvalue,
                report.max_eigenvalue,
                report.hermitian_deviation,
                if report.pass { "PASS" } else { "FAIL" }
            );
            all_pass &= report.pass;
            reports.push(report);
        }
    }
    fs::create_dir_all(&exp.out)?;
    let json = serde_json::to_string_pretty(&reports)
        .map_err(|e| CliError::Input(e.to_string()))?;
    write_atomic(&exp.out.join("verify_report.json"), &json)?;
    if all_pass {
        Ok(())
    } else {
        Err(CliError::Check("one or more spectral checks failed".into()))
    }
}

fn history_csv(outcome: &TrainOutcome) -> String {
    let mut s = String::from("epoch,train_loss,val_loss,val_auc\n");
    for h in &outcome.history {
        let _ = writeln!(s, "{},{},{},{}", h.epoch, h.train_loss, h.val_loss, h.val_auc);
    }
    s
}

struct SeedRun {
    seed: u64,
    result: std::result::Result<(TrainOutcome, EvalReport), ModelError>,
}

fn run_seed(g: &SignedDigraph, config: TrainConfig) -> SeedRun {
    let seed = config.seed;
    let result = train(g, &config).and_then(|outcome| {
        let report = evaluate(
            &outcome.model,
            &outcome.operator,
            &outcome.features,
            &outcome.split.test_edges(g),
            seed,
        )?;
        Ok((outcome, report))
    });
    SeedRun { seed, result }
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let exp = Experiment::resolve(&args.common)?;
    let g = exp.load_graph()?;
    let name = exp.dataset_name();
    fs::create_dir_all(&exp.out)?;

    let start = std::time::Instant::now();
    let runs = parallel_map(exp.seeds.len(), worker_count(), |i| {
        run_seed(&g, exp.config_for_seed(exp.seeds[i]))
    });

    let mut id_map = Vec::new();
    g.write_node_id_map(&mut id_map)?;
    write_atomic(
        &exp.out.join("node_id_map.tsv"),
        std::str::from_utf8(&id_map).unwrap(),
    )?;

    let mut results_csv = format!("{}\n", EvalReport::CSV_HEADER);
    let mut reports = Vec::new();
    let mut log = String::new();
    let mut diverged = Vec::new();
    for run in &runs {
        match &run.result {
            Ok((outcome, report)) => {
                let ckpt = Checkpoint::from_model(&outcome.model, exp.train.q);
                let json = serde_json::to_string(&ckpt)
                    .map_err(|e| CliError::Input(e.to_string()))?;
                write_atomic(&exp.out.join(format!("checkpoint_seed{}.json", run.seed)), &json)?;
                write_atomic(
                    &exp.out.join(format!("history_seed{}.csv", run.seed)),
                    &history_csv(outcome),
                )?;
                let split = serde_json::to_string(&outcome.split)
                    .map_err(|e| CliError::Input(e.to_string()))?;
                write_atomic(&exp.out.join(format!("split_seed{}.json", run.seed)), &split)?;
                let eval = serde_json::to_string_pretty(report)
                    .map_err(|e| CliError::Input(e.to_string()))?;
                write_atomic(&exp.out.join(format!("eval_seed{}.json", run.seed)), &eval)?;
                let _ = writeln!(results_csv, "{}", report.csv_row(&name));
                let _ = writeln!(
                    log,
                    "seed {}: best_epoch {} epochs {} early_stop {}",
                    run.seed,
                    outcome.best_epoch,
                    outcome.history.len(),
                    outcome.stopped_early
                );
                reports.push(report.clone());
            }
            Err(e) => {
                let _ = writeln!(log, "seed {}: FAILED: {e}", run.seed);
                diverged.push((run.seed, e.to_string()));
            }
        }
    }
    write_atomic(&exp.out.join("results.csv"), &results_csv)?;
    if reports.len() >= 2 {
        let agg = aggregate_runs(&reports).map_err(|e| CliError::Input(e.to_string()))?;
        let json = serde_json::to_string_pretty(&agg)
            .map_err(|e| CliError::Input(e.to_string()))?;
        write_atomic(&exp.out.join("aggregate.json"), &json)?;
        println!(
            "{name}: AUC {:.3}({:.4})  binary-F1 {:.3}({:.4})  over {} seeds",
            agg.auc.mean,
            agg.auc.std,
            agg.binary_f1.mean,
            agg.binary_f1.std,
            reports.len()
        );
    } else if let Some(r) = reports.first() {
        println!(
            "{name}: AUC {:.3}  binary-F1 {:.3}  (seed {})",
            r.auc, r.binary_f1, r.seed
        );
    }
    let _ = writeln!(log, "total wall time: {:?}", start.elapsed());
    fs::write(exp.out.join("run.log"), log)?;

    if let Some((seed, msg)) = diverged.first() {
        return Err(CliError::Divergence(format!("seed {seed}: {msg}")));
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let exp = Experiment::resolve(&args.common)?;
    if exp.seeds.len() != 1 {
        return Err(CliError::Input(
            "eval expects exactly one seed (--seeds S, the seed the checkpoint was trained with)"
                .into(),
        ));
    }
    let seed = exp.seeds[0];
    let g = exp.load_graph()?;
    let text = fs::read_to_string(&args.checkpoint)
        .map_err(|e| CliError::Input(format!("checkpoint {}: {e}", args.checkpoint.display())))?;
    let ckpt: Checkpoint =
        serde_json::from_str(&text).map_err(|e| CliError::Input(e.to_string()))?;
    let q = ckpt.q;
    let model = ckpt.into_model()?;

    let mut config = exp.config_for_seed(seed);
    config.q = q;
    if model.widths[0] != config.features.width() {
        return Err(CliError::Input(format!(
            "checkpoint expects {}-wide features but the requested spec gives {}",
            model.widths[0],
            config.features.width()
        )));
    }
    // rebuild the training-subgraph operator and features exactly as train did
    let split = crate::graph::split_edges(&g, seed, config.split_ratios)?;
    let train_graph = g.with_edges(split.train_edges(&g));
    let params = PhaseParams::with_epsilon(config.q, config.epsilon)?;
    let operator = crate::model::build_operator(&train_graph, &params);
    let features = crate::model::init_features(&train_graph, config.features, seed);
    let report = evaluate(&model, &operator, &features, &split.test_edges(&g), seed)?;

    fs::create_dir_all(&exp.out)?;
    let json =
        serde_json::to_string_pretty(&report).map_err(|e| CliError::Input(e.to_string()))?;
    write_atomic(&exp.out.join(format!("eval_seed{seed}.json")), &json)?;
    println!(
        "{}: AUC {:.3}  binary-F1 {:.3}  (seed {seed})",
        exp.dataset_name(),
        report.auc,
        report.binary_f1
    );
    Ok(())
}

fn sweep_csv_header() -> &'static str {
    "param,seed,auc,macro_f1,micro_f1,binary_f1"
}

/// Shared sweep driver: one training run per (grid value, seed), then
/// mean/std aggregate rows per grid value.
fn run_sweep(
    exp: &Experiment,
    grid: &[f64],
    param_label: impl Fn(f64) -> String,
    configure: impl Fn(&mut TrainConfig, f64) + Sync,
    out_file: &str,
) -> Result<()> {
    let g = exp.load_graph()?;
    fs::create_dir_all(&exp.out)?;
    let jobs: Vec<(f64, u64)> = grid
        .iter()
        .flat_map(|&v| exp.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let runs = parallel_map(jobs.len(), worker_count(), |i| {
        let (value, seed) = jobs[i];
        let mut config = exp.config_for_seed(seed);
        configure(&mut config, value);
        run_seed(&g, config)
    });

    let mut csv = format!("{}\n", sweep_csv_header());
    let mut diverged = Vec::new();
    for (&(value, _), run) in jobs.iter().zip(&runs) {
        match &run.result {
            Ok((_, r)) => {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    param_label(value),
                    run.seed,
                    r.auc,
                    r.macro_f1,
                    r.micro_f1,
                    r.binary_f1
                );
            }
            Err(e) => {
                let _ = writeln!(csv, "{},{},,,,", param_label(value), run.seed);
                diverged.push((run.seed, e.to_string()));
            }
        }
    }
    for &value in grid {
        let group: Vec<EvalReport> = jobs
            .iter()
            .zip(&runs)
            .filter(|((v, _), run)| *v == value && run.result.is_ok())
            .map(|(_, run)| run.result.as_ref().unwrap().1.clone())
            .collect();
        if group.len() >= 2 {
            let agg = aggregate_runs(&group).map_err(|e| CliError::Input(e.to_string()))?;
            let _ = writeln!(
                csv,
                "{},mean,{},{},{},{}",
                param_label(value),
                agg.auc.mean,
                agg.macro_f1.mean,
                agg.micro_f1.mean,
                agg.binary_f1.mean
            );
            let _ = writeln!(
                csv,
                "{},std,{},{},{},{}",
                param_label(value),
                agg.auc.std,
                agg.macro_f1.std,
                agg.micro_f1.std,
                agg.binary_f1.std
            );
        }
    }
    write_atomic(&exp.out.join(out_file), &csv)?;
    println!("wrote {}", exp.out.join(out_file).display());
    if let Some((seed, msg)) = diverged.first() {
        return Err(CliError::Divergence(format!("seed {seed}: {msg}")));
    }
    Ok(())
}

fn cmd_sweep_q(args: SweepQArgs) -> Result<()> {
    let exp = Experiment::resolve(&args.common)?;
    let grid = if args.grid.is_empty() {
        (0..=10)
            .map(|i| i as f64 * 0.05 * std::f64::consts::PI)
            .collect()
    } else {
        args.grid.clone()
    };
    for &q in &grid {
        if !(0.0..=std::f64::consts::FRAC_PI_2 + 1e-12).contains(&q) {
            return Err(CliError::Input(format!("sweep q = {q} outside [0, pi/2]")));
        }
    }
    run_sweep(
        &exp,
        &grid,
        // the q column is in units of pi, for direct plotting
        |q| format!("{}", q / std::f64::consts::PI),
        |config, q| config.q = q,
        "sweep_q.csv",
    )
}

fn cmd_sweep_ratio(args: SweepRatioArgs) -> Result<()> {
    let exp = Experiment::resolve(&args.common)?;
    let grid = if args.grid.is_empty() {
        (1..=9).map(|r| r as f64).collect()
    } else {
        args.grid.clone()
    };
    for &r in &grid {
        if r <= 0.0 {
            return Err(CliError::Input(format!("sweep ratio = {r} must be positive")));
        }
    }
    run_sweep(
        &exp,
        &grid,
        |r| format!("{r}"),
        |config, r| config.positive_ratio = r,
        "sweep_ratio.csv",
    )
}

/// MatrixMarket coordinate/complex/general, 1-based indices, CSR order.
fn matrix_market(l: &MagneticLaplacian) -> String {
    let m = &l.matrix;
    let mut s = String::from("%%MatrixMarket matrix coordinate complex general\n");
    let _ = writeln!(s, "% magnetic laplacian kind={} q={}", l.kind, l.params.q());
    let _ = writeln!(s, "{} {} {}", m.rows(), m.cols(), m.nnz());
    for (i, j, v) in m.iter() {
        let _ = writeln!(s, "{} {} {} {}", i + 1, j + 1, v.re, v.im);
    }
    s
}

fn cmd_export(args: ExportArgs) -> Result<()> {
    let common = CommonFlags {
        dataset: args.dataset.clone(),
        format: args.format,
        config: args.config.clone(),
        q: args.q,
        layers: None,
        dim: None,
        lr: None,
        weight_decay: None,
        ratio: None,
        seeds: Some(vec![0]),
        epochs: None,
        patience: None,
        out: args.out.clone(),
        real_weights: None,
        features: None,
    };
    let exp = Experiment::resolve(&common)?;
    let g = exp.load_graph()?;
    let params = PhaseParams::new(exp.train.q)?;
    let h = hermitian_adjacency(&g, &params);
    let l = magnetic_laplacian(&h, args.kind.to_kind());
    fs::create_dir_all(&exp.out)?;
    write_atomic(
        &exp.out.join(format!("laplacian_{}.mtx", l.kind)),
        &matrix_market(&l),
    )?;
    let mut id_map = Vec::new();
    g.write_node_id_map(&mut id_map)?;
    write_atomic(
        &exp.out.join("node_id_map.tsv"),
        std::str::from_utf8(&id_map).unwrap(),
    )?;
    println!(
        "wrote {}",
        exp.out.join(format!("laplacian_{}.mtx", l.kind)).display()
    );
    Ok(())
}
