//! `ckrl` — pipeline driver for confidence-aware knowledge-graph embedding
//! experiments: noisy-dataset construction, path precomputation, training,
//! and evaluation, all seeded and reproducible.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ckrl_core::error::CkrlError;
use config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "ckrl",
    version,
    about = "Confidence-aware knowledge-graph embeddings over noisy triple sets"
)]
struct Cli {
    /// TOML run configuration; flags override config keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (default: config, then $CKRL_OUTPUT_ROOT, then ./ckrl-out).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Master RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for path precomputation and evaluation (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build noisy training sets with ground-truth labels.
    InjectNoise(InjectNoiseArgs),
    /// Precompute the relation-path index and statistics caches.
    PrecomputePaths(PrecomputePathsArgs),
    /// Train embeddings with the chosen confidence variant.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the selected tasks.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args, Default)]
struct DataArgs {
    /// Training triple file.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Validation triple file.
    #[arg(long)]
    valid: Option<PathBuf>,
    /// Test triple file.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Column layout of the triple files: htr (FB15K native) or hrt.
    #[arg(long)]
    column_order: Option<String>,
}

#[derive(Debug, Args)]
struct InjectNoiseArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated noise ratios, one dataset directory per ratio.
    #[arg(long, value_delimiter = ',')]
    ratios: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct PrecomputePathsArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Smoothing for the prior relation-path quality.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Neighbor cap per (entity, edge) during two-step expansion.
    #[arg(long)]
    fanout_cap: Option<usize>,
    /// Skip recomputation when existing caches match the inputs.
    #[arg(long)]
    reuse_cache: bool,
    /// Path-index cache file (default: <out-dir>/paths-index.tsv).
    #[arg(long)]
    index_file: Option<PathBuf>,
    /// Path-statistics cache file (default: <out-dir>/paths-stats.tsv).
    #[arg(long)]
    stats_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Confidence strategy: transe, lt, lt+pp or lt+pp+ap.
    #[arg(long)]
    variant: Option<String>,
    /// Embedding dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// Margin of the pair-wise objective.
    #[arg(long)]
    gamma: Option<f64>,
    /// SGD learning rate.
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Energy norm: l1 or l2.
    #[arg(long)]
    norm: Option<String>,
    /// LT decay factor on margin violations.
    #[arg(long)]
    alpha: Option<f64>,
    /// LT recovery step.
    #[arg(long)]
    beta: Option<f64>,
    /// Combination weights lambda1,lambda2,lambda3 (default: per variant).
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    /// Corruption weights w_head,w_tail,w_rel for negative sampling.
    #[arg(long, value_delimiter = ',')]
    corruption_weights: Option<Vec<f64>>,
    /// Draw a separate negative for the quality signal.
    #[arg(long)]
    fresh_quality_negative: bool,
    /// Warm-start from an existing checkpoint.
    #[arg(long)]
    pretrained: Option<PathBuf>,
    /// Also write an intermediate checkpoint every N epochs.
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Export embeddings as TSV next to the checkpoint.
    #[arg(long)]
    export_tsv: bool,
    /// Path-index cache file (default: <out-dir>/paths-index.tsv).
    #[arg(long)]
    index_file: Option<PathBuf>,
    /// Path-statistics cache file (default: <out-dir>/paths-stats.tsv).
    #[arg(long)]
    stats_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Trained checkpoint to evaluate.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Comma-separated tasks: noise-detection, completion, classification,
    /// relation-prediction.
    #[arg(long, value_delimiter = ',')]
    tasks: Option<Vec<String>>,
    /// Ground-truth label file for noise detection.
    #[arg(long)]
    labels: Option<PathBuf>,
}

fn apply_data_args(cfg: &mut RunConfig, args: &DataArgs) {
    if let Some(p) = &args.train {
        cfg.data.train = Some(p.clone());
    }
    if let Some(p) = &args.valid {
        cfg.data.valid = Some(p.clone());
    }
    if let Some(p) = &args.test {
        cfg.data.test = Some(p.clone());
    }
    if let Some(o) = &args.column_order {
        cfg.data.column_order = o.clone();
    }
}

fn triple_weights(v: &[f64], what: &str) -> Result<[f64; 3], CkrlError> {
    <[f64; 3]>::try_from(v)
        .map_err(|_| CkrlError::InvalidConfig(format!("{what} needs exactly 3 values, got {v:?}")))
}

/// Folds the config file and the command line into one effective config;
/// flags win over file keys.
fn resolve_config(cli: &Cli) -> Result<RunConfig, CkrlError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = &cli.out_dir {
        cfg.output.dir = Some(dir.clone());
    }
    if let Some(seed) = cli.seed {
        cfg.seed = config::Seed(seed);
    }
    if let Some(threads) = cli.threads {
        cfg.threads = threads;
    }

    match &cli.command {
        Command::InjectNoise(args) => {
            apply_data_args(&mut cfg, &args.data);
            if let Some(ratios) = &args.ratios {
                cfg.noise.ratios = ratios.clone();
            }
            if cfg.noise.ratios.iter().any(|&r| r < 0.0) {
                return Err(CkrlError::InvalidConfig(
                    "noise ratios must be nonnegative".to_owned(),
                ));
            }
        }
        Command::PrecomputePaths(args) => {
            apply_data_args(&mut cfg, &args.data);
            if let Some(v) = args.epsilon {
                cfg.paths.epsilon = v;
            }
            if let Some(v) = args.fanout_cap {
                cfg.paths.fanout_cap = v;
            }
            if args.reuse_cache {
                cfg.paths.reuse_cache = true;
            }
            if let Some(p) = &args.index_file {
                cfg.paths.index_file = Some(p.clone());
            }
            if let Some(p) = &args.stats_file {
                cfg.paths.stats_file = Some(p.clone());
            }
        }
        Command::Train(args) => {
            apply_data_args(&mut cfg, &args.data);
            if let Some(v) = &args.variant {
                cfg.training.variant = v.clone();
            }
            if let Some(v) = args.dim {
                cfg.training.dim = v;
            }
            if let Some(v) = args.gamma {
                cfg.training.gamma = v;
            }
            if let Some(v) = args.learning_rate {
                cfg.training.learning_rate = v;
            }
            if let Some(v) = args.epochs {
                cfg.training.epochs = v;
            }
            if let Some(v) = args.batch_size {
                cfg.training.batch_size = v;
            }
            if let Some(v) = &args.norm {
                cfg.training.norm = v.clone();
            }
            if let Some(v) = args.alpha {
                cfg.confidence.alpha = v;
            }
            if let Some(v) = args.beta {
                cfg.confidence.beta = v;
            }
            if let Some(v) = &args.lambda {
                cfg.confidence.lambda = Some(triple_weights(v, "--lambda")?);
            }
            if let Some(v) = &args.corruption_weights {
                cfg.training.corruption_weights = triple_weights(v, "--corruption-weights")?;
            }
            if args.fresh_quality_negative {
                cfg.training.fresh_quality_negative = true;
            }
            if let Some(p) = &args.pretrained {
                cfg.training.pretrained = Some(p.clone());
            }
            if let Some(v) = args.checkpoint_every {
                cfg.training.checkpoint_every = v;
            }
            if args.export_tsv {
                cfg.training.export_tsv = true;
            }
            if let Some(p) = &args.index_file {
                cfg.paths.index_file = Some(p.clone());
            }
            if let Some(p) = &args.stats_file {
                cfg.paths.stats_file = Some(p.clone());
            }
        }
        Command::Evaluate(args) => {
            apply_data_args(&mut cfg, &args.data);
            if let Some(p) = &args.checkpoint {
                cfg.eval.checkpoint = Some(p.clone());
            }
            if let Some(tasks) = &args.tasks {
                cfg.eval.tasks = tasks.clone();
            }
            if let Some(p) = &args.labels {
                cfg.eval.labels = Some(p.clone());
            }
        }
    }
    Ok(cfg)
}

/// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
fn exit_code_for(err: &CkrlError) -> u8 {
    match err {
        CkrlError::InvalidConfig(_) => 1,
        CkrlError::NonFiniteLoss { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are successes; anything else is usage.
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    let cfg = match resolve_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code_for(&e));
        }
    };

    if cfg.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
        {
            log::warn!("could not configure thread pool: {e}");
        }
    }

    let result = match &cli.command {
        Command::InjectNoise(_) => commands::cmd_inject_noise(&cfg),
        Command::PrecomputePaths(_) => commands::cmd_precompute_paths(&cfg),
        Command::Train(_) => commands::cmd_train(&cfg),
        Command::Evaluate(_) => commands::cmd_evaluate(&cfg),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
