//! Command-line surface: synthetic data generation, training, evaluation,
//! and the softmax baseline.
//!
//! Exit codes: 0 success; 1 usage or configuration problems; 2 data or
//! format problems; 3 numeric abort during training.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use genclass::baseline::{evaluate_softmax, train_softmax_on_generated, SoftmaxConfig};
use genclass::checkpoint::Checkpoint;
use genclass::config::ConfigFile;
use genclass::data::{make_synthetic, Dataset, Precision, SyntheticSpec};
use genclass::inference::{evaluate_gzsl, evaluate_zsl, EvalMode, EvalReport};
use genclass::trainer::{train_to_dir, TrainConfig};
use genclass::{Error, Result};

#[derive(Parser)]
#[command(
    name = "genclass",
    about = "Generative zero-shot classification: train, evaluate, baseline",
    long_about = "Trains a conditional WGAN-GP feature generator jointly with a \
                  pairwise similarity classifier and evaluates zero-shot and \
                  generalized zero-shot accuracy via generated class prototypes.\n\
                  The GENCLASS_SEED environment variable, when set, overrides every \
                  seed default (flags still win).",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and print its content hash
    Synth(SynthArgs),
    /// Train generator, critic, and classifier on a dataset
    Train(TrainArgs),
    /// Evaluate a checkpoint with the integrated pairwise classifier
    Eval(EvalArgs),
    /// Evaluate a softmax classifier trained on generated features
    Baseline(BaselineArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for the dataset
    #[arg(long)]
    out: PathBuf,
    /// Config file with synthetic-data keys
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of seen classes (>= 2)
    #[arg(long)]
    k: Option<usize>,
    /// Number of unseen classes (>= 2)
    #[arg(long)]
    l: Option<usize>,
    /// Attribute dimension
    #[arg(long)]
    da: Option<usize>,
    /// Feature dimension
    #[arg(long)]
    dx: Option<usize>,
    /// Training samples per seen class
    #[arg(long)]
    train_per_class: Option<usize>,
    /// Test samples per class
    #[arg(long)]
    test_per_class: Option<usize>,
    /// Cluster noise scale (> 0)
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Stored value width: single or double
    #[arg(long)]
    precision: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory
    #[arg(long)]
    data: PathBuf,
    /// Output directory for checkpoint, loss log, and run manifest
    #[arg(long)]
    out: PathBuf,
    /// Config file with training keys
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    n_dis: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    ng: Option<usize>,
    #[arg(long)]
    dz: Option<usize>,
    /// Comma-separated hidden widths, e.g. 32 or 4096,4096
    #[arg(long)]
    hidden_generator: Option<String>,
    #[arg(long)]
    hidden_critic: Option<String>,
    #[arg(long)]
    hidden_classifier: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    log_interval: Option<u64>,
    #[arg(long)]
    precision: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint directory written by `train`
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset directory
    #[arg(long)]
    data: PathBuf,
    /// zsl or gzsl
    #[arg(long)]
    mode: String,
    /// Generated samples per prototype
    #[arg(long)]
    ng: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Optional report file (the report always goes to stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    /// Checkpoint directory written by `train`
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset directory
    #[arg(long)]
    data: PathBuf,
    /// zsl or gzsl
    #[arg(long)]
    mode: String,
    /// Generated training samples per class (>= 1)
    #[arg(long, default_value_t = 200)]
    samples_per_class: usize,
    /// Softmax training steps
    #[arg(long)]
    steps: Option<u64>,
    /// Softmax learning rate
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Optional report file (the report always goes to stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

fn env_seed() -> Option<u64> {
    std::env::var("GENCLASS_SEED").ok().and_then(|s| s.parse().ok())
}

fn effective_seed(flag: Option<u64>, fallback: u64) -> u64 {
    flag.or_else(env_seed).unwrap_or(fallback)
}

fn load_config(path: &Option<PathBuf>) -> Result<ConfigFile> {
    match path {
        Some(p) => ConfigFile::load(p),
        None => Ok(ConfigFile::default()),
    }
}

fn parse_dims_flag(raw: &str, flag: &str) -> Result<Vec<usize>> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("--{flag}: invalid width '{s}' in '{raw}'")))
        })
        .collect()
}

fn check_compat(cp: &Checkpoint, ds: &Dataset) -> Result<()> {
    if cp.generator.d_x != ds.feature_dim() || cp.generator.d_a != ds.attribute_dim() {
        return Err(Error::Data(format!(
            "checkpoint dimensions (d_x = {}, d_a = {}) do not match dataset \
             (d_x = {}, d_a = {})",
            cp.generator.d_x,
            cp.generator.d_a,
            ds.feature_dim(),
            ds.attribute_dim()
        )));
    }
    Ok(())
}

fn emit_report(report: &EvalReport, out: Option<&Path>) -> Result<()> {
    let text = report.render();
    print!("{text}");
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::io(path.display().to_string(), e)),
        None => Ok(()),
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let mut spec = SyntheticSpec::default();
    load_config(&args.config)?.apply_synth(&mut spec)?;
    if let Some(v) = args.k {
        spec.seen_classes = v;
    }
    if let Some(v) = args.l {
        spec.unseen_classes = v;
    }
    if let Some(v) = args.da {
        spec.d_a = v;
    }
    if let Some(v) = args.dx {
        spec.d_x = v;
    }
    if let Some(v) = args.train_per_class {
        spec.train_per_class = v;
    }
    if let Some(v) = args.test_per_class {
        spec.test_per_class = v;
    }
    if let Some(v) = args.sigma {
        spec.noise_scale = v;
    }
    spec.seed = effective_seed(args.seed, spec.seed);
    let precision = match &args.precision {
        Some(p) => p.parse::<Precision>()?,
        None => Precision::Double,
    };
    let dataset = make_synthetic(&spec)?;
    dataset.save(&args.out, precision)?;
    let hash = Dataset::content_hash(&args.out)?;
    println!("{hash}");
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut config = TrainConfig::default();
    load_config(&args.config)?.apply_train(&mut config)?;
    if let Some(v) = args.iterations {
        config.iterations = v;
    }
    if let Some(v) = args.learning_rate {
        config.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = args.n_dis {
        config.n_dis = v;
    }
    if let Some(v) = args.lambda {
        config.lambda = v;
    }
    if let Some(v) = args.gamma {
        config.gamma = v;
    }
    if let Some(v) = args.ng {
        config.n_g = v;
    }
    if let Some(v) = args.dz {
        config.d_z = Some(v);
    }
    if let Some(raw) = &args.hidden_generator {
        config.hidden_generator = parse_dims_flag(raw, "hidden-generator")?;
    }
    if let Some(raw) = &args.hidden_critic {
        config.hidden_critic = parse_dims_flag(raw, "hidden-critic")?;
    }
    if let Some(raw) = &args.hidden_classifier {
        config.hidden_classifier = parse_dims_flag(raw, "hidden-classifier")?;
    }
    if let Some(raw) = &args.precision {
        config.precision = raw.parse()?;
    }
    if let Some(v) = args.log_interval {
        config.log_interval = v;
    }
    config.seed = effective_seed(args.seed, config.seed);

    let dataset = Dataset::load(&args.data)?;
    let hash = Dataset::content_hash(&args.data)?;
    let (outcome, fingerprint) = train_to_dir(&config, &dataset, &hash, &args.out)?;
    println!("checkpoint_fingerprint = {fingerprint}");
    println!("final_iteration = {}", outcome.checkpoint.iteration);
    println!("{}", outcome.loss_log.last().map(String::as_str).unwrap_or(""));
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let mode: EvalMode = args.mode.parse()?;
    let n_g = args.ng.unwrap_or(50);
    let seed = effective_seed(args.seed, 0);
    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    let fingerprint = Checkpoint::fingerprint(&args.checkpoint)?;
    let dataset = Dataset::load(&args.data)?;
    check_compat(&checkpoint, &dataset)?;
    let report = match mode {
        EvalMode::Zsl => evaluate_zsl(
            &checkpoint.generator,
            &checkpoint.classifier,
            &dataset,
            n_g,
            seed,
            &fingerprint,
        )?,
        EvalMode::Gzsl => evaluate_gzsl(
            &checkpoint.generator,
            &checkpoint.classifier,
            &dataset,
            n_g,
            seed,
            &fingerprint,
        )?,
    };
    emit_report(&report, args.out.as_deref())
}

fn cmd_baseline(args: BaselineArgs) -> Result<()> {
    let mode: EvalMode = args.mode.parse()?;
    if args.samples_per_class < 1 {
        return Err(Error::Config("--samples-per-class must be >= 1".into()));
    }
    let seed = effective_seed(args.seed, 0);
    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    let fingerprint = Checkpoint::fingerprint(&args.checkpoint)?;
    let dataset = Dataset::load(&args.data)?;
    check_compat(&checkpoint, &dataset)?;

    let mut softmax_config = SoftmaxConfig::default();
    if let Some(v) = args.steps {
        softmax_config.steps = v;
    }
    if let Some(v) = args.learning_rate {
        softmax_config.learning_rate = v;
    }

    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let classifier = match mode {
        EvalMode::Zsl => train_softmax_on_generated(
            &checkpoint.generator,
            &dataset.attributes,
            &dataset.unseen_classes,
            args.samples_per_class,
            None,
            &softmax_config,
            &mut rng,
        )?,
        EvalMode::Gzsl => {
            let mut all_classes = dataset.seen_classes.clone();
            all_classes.extend_from_slice(&dataset.unseen_classes);
            let real_features = dataset.features.gather_rows(&dataset.train_idx);
            let real_labels: Vec<u32> =
                dataset.train_idx.iter().map(|&i| dataset.labels[i]).collect();
            train_softmax_on_generated(
                &checkpoint.generator,
                &dataset.attributes,
                &all_classes,
                args.samples_per_class,
                Some((&real_features, &real_labels)),
                &softmax_config,
                &mut rng,
            )?
        }
    };
    let report = evaluate_softmax(&classifier, &dataset, mode, seed, &fingerprint)?;
    emit_report(&report, args.out.as_deref())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Baseline(args) => cmd_baseline(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // help/version requests are successes; everything else is usage
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
