use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gpo_core::datagen::{generate_training_set, read_dataset, write_dataset};
use gpo_core::eval::{compute_ordering, run_benchmark, Method};
use gpo_core::policy::{load_checkpoint, save_checkpoint, Backbone, NetConfig};
use gpo_core::sparsity::load_matrix_market;
use gpo_core::symbolic::symbolic_factorize;
use gpo_core::trainer::{train_with, RewardVariant, TrainerConfig};

#[derive(Parser)]
#[command(
    name = "gpo",
    version,
    about = "Fill-reducing orderings from a learned graph policy"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset of Delaunay graphs.
    Gen(GenArgs),
    /// Train a policy on a generated dataset.
    Train(TrainArgs),
    /// Write an elimination ordering for one matrix.
    Order(OrderArgs),
    /// Compare fill-in ratios of several methods over a set of matrices.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 60)]
    min: usize,
    #[arg(long, default_value_t = 200)]
    max: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackboneArg {
    Mixhop,
    Singlehop,
}

#[derive(Clone, Copy, ValueEnum)]
enum RewardArg {
    Asr,
    Raw,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory written by `gen`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 1)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "mixhop")]
    backbone: BackboneArg,
    #[arg(long, value_enum, default_value = "asr")]
    reward: RewardArg,
    #[arg(long, default_value_t = 1)]
    episodes_per_graph: usize,
    /// Training log (`epoch,graph_id,total_fill,l_actor,l_critic`).
    #[arg(long)]
    log: Option<PathBuf>,
    /// Save the model to `--out` every N episodes as well as at the end.
    #[arg(long)]
    checkpoint_every: Option<usize>,
}

#[derive(Args)]
struct OrderArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    method: Method,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Seed for the random method.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Permutation, one node index per line.
    #[arg(long)]
    out: PathBuf,
    /// Also write the per-step elimination trace.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Glob pattern for Matrix Market files.
    #[arg(long)]
    matrices: String,
    /// Comma-separated methods: natural, random, mindeg, gpo.
    #[arg(long, value_delimiter = ',', default_value = "natural,random,mindeg")]
    methods: Vec<Method>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn gen(args: GenArgs) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let graphs = generate_training_set(args.count, args.min, args.max, &mut rng)?;
    write_dataset(&args.out, &graphs)?;
    eprintln!("wrote {} graphs to {}", graphs.len(), args.out.display());
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    if args.checkpoint_every == Some(0) {
        bail!("--checkpoint-every must be positive");
    }
    let graphs: Vec<_> = read_dataset(&args.data)
        .with_context(|| format!("cannot read dataset {}", args.data.display()))?
        .into_iter()
        .map(|(_, p)| p)
        .collect();
    let backbone = match args.backbone {
        BackboneArg::Mixhop => Backbone::MixHop,
        BackboneArg::Singlehop => Backbone::SingleHop,
    };
    let cfg = TrainerConfig {
        epochs: args.epochs,
        episodes_per_graph: args.episodes_per_graph,
        seed: args.seed,
        net: NetConfig::for_backbone(backbone),
        reward: match args.reward {
            RewardArg::Asr => RewardVariant::Asr,
            RewardArg::Raw => RewardVariant::Raw,
        },
        ..TrainerConfig::default()
    };

    let mut log = args.log.as_deref().map(create).transpose()?;
    if let Some(w) = log.as_mut() {
        writeln!(w, "epoch,graph_id,total_fill,l_actor,l_critic")?;
    }
    let mut episodes = 0usize;
    let out = train_with(&graphs, &cfg, |r, net| {
        episodes += 1;
        if let Some(w) = log.as_mut() {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.epoch, r.graph_id, r.total_fill, r.actor_loss, r.critic_loss
            )?;
        }
        if args.checkpoint_every.is_some_and(|k| episodes.is_multiple_of(k)) {
            save_checkpoint(net, &args.out)?;
        }
        Ok(())
    })?;
    if let Some(mut w) = log {
        w.flush()?;
    }
    save_checkpoint(&out.net, &args.out)?;

    let mean_last = |epoch: usize| {
        let fills: Vec<usize> = out
            .log
            .iter()
            .filter(|r| r.epoch == epoch)
            .map(|r| r.total_fill)
            .collect();
        fills.iter().sum::<usize>() as f64 / fills.len().max(1) as f64
    };
    eprintln!(
        "trained on {} graphs for {} epochs; mean fill in last epoch {:.2}; model written to {}",
        graphs.len(),
        cfg.epochs,
        mean_last(cfg.epochs),
        args.out.display()
    );
    Ok(())
}

fn order(args: OrderArgs) -> Result<()> {
    let pattern =
        load_matrix_market(&args.matrix).with_context(|| format!("cannot read {}", args.matrix.display()))?;
    let net = match (&args.model, args.method) {
        (Some(path), Method::Gpo) => Some(load_checkpoint(path, None)?),
        (None, Method::Gpo) => bail!("method gpo requires --model"),
        _ => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let ordering = compute_ordering(args.method, &pattern, net.as_ref(), &mut rng)?;

    let mut w = create(&args.out)?;
    ordering.write(&mut w)?;
    w.flush()?;

    let factor = symbolic_factorize(&pattern, &ordering)?;
    if let Some(path) = &args.trace {
        let mut w = create(path)?;
        factor.trace.write_text(&mut w)?;
        w.flush()?;
    }
    eprintln!(
        "{}: n = {}, fill = {}",
        args.method,
        pattern.n(),
        factor.fill_count()
    );
    Ok(())
}

fn bench(args: BenchArgs) -> Result<ExitCode> {
    let mut matrices = Vec::new();
    for entry in glob::glob(&args.matrices).context("invalid --matrices pattern")? {
        matrices.push(entry?);
    }
    if matrices.is_empty() {
        bail!("no files match {}", args.matrices);
    }
    if args.methods.is_empty() {
        bail!("no methods given");
    }
    let report = run_benchmark(&matrices, &args.methods, args.model.as_deref(), args.seed);
    let mut w = create(&args.out)?;
    report.write_csv(&mut w)?;
    w.flush()?;

    for (method, mean, count) in report.mean_fir() {
        eprintln!("{method:>8}  mean FIR {mean:.6}  over {count} matrices");
    }
    if report.successes() == 0 {
        bail!("every cell failed; see {}", args.out.display());
    }
    Ok(if report.has_errors() {
        eprintln!(
            "some cells failed; see the errors block in {}",
            args.out.display()
        );
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn main() -> ExitCode {
    // Usage errors exit with 1; 2 is reserved for partial benchmark results.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Gen(args) => gen(args).map(|_| ExitCode::SUCCESS),
        Command::Train(args) => train(args).map(|_| ExitCode::SUCCESS),
        Command::Order(args) => order(args).map(|_| ExitCode::SUCCESS),
        Command::Bench(args) => bench(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
