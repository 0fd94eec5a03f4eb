use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use poi_embed::cache::{load_corpus, save_corpus};
use poi_embed::corpus::{ingest, IngestOptions, DEFAULT_TRAIN_RATIO};
use poi_embed::embedding::TrainConfig;
use poi_embed::evaluator::{evaluate, EvalReport, DEFAULT_K_VALUES};
use poi_embed::recommender::{init_from_embeddings, recommend_topk, train_recommender, RecommenderConfig};
use poi_embed::synth::{generate, to_tsv, SyntheticConfig};
use poi_embed::trainer::{
    export_category_embeddings, export_poi_embeddings, train_with_threads, write_log, EmbeddingMetadata, Mode,
};
use poi_embed::Corpus;

pub const POI_FILE: &str = "poi.vec";
pub const CATEGORY_FILE: &str = "category.vec";
pub const META_FILE: &str = "meta.json";
pub const LOG_FILE: &str = "train_log.jsonl";

#[derive(Parser)]
#[command(name = "poi-embed", version, about = "Category-aware POI embeddings and top-k POI recommendation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a check-in TSV into a corpus cache and print its statistics.
    Ingest(IngestArgs),
    /// Train POI (and category) embeddings from a corpus cache.
    Train(TrainArgs),
    /// Emit top-k recommendations as TSV.
    Recommend(RecommendArgs),
    /// Compute Precision@k / Recall@k and optional paired t-tests.
    Evaluate(EvaluateArgs),
    /// Write a synthetic check-in TSV with latent category structure.
    Synth(SynthArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Map check-ins without categories to `__UNK__` instead of failing.
    #[arg(long)]
    sentinel_category: bool,
    #[arg(long, default_value_t = DEFAULT_TRAIN_RATIO)]
    train_ratio: f64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Directory receiving the embedding files, metadata and training log.
    #[arg(long)]
    output_dir: PathBuf,
    #[arg(long, default_value = "full", value_parser = parse_mode)]
    mode: Mode,
    #[arg(long, default_value_t = 100)]
    dim: usize,
    /// Category vector dimension [default: same as --dim]
    #[arg(long)]
    cat_dim: Option<usize>,
    #[arg(long, default_value_t = 4)]
    window: usize,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    lr: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.75)]
    alpha: f64,
    /// Worker threads; more than one enables non-deterministic parallel SGD.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args, Clone)]
struct RecommenderArgs {
    #[arg(long, default_value_t = 20)]
    mf_epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    mf_lr: f64,
    #[arg(long, default_value_t = 0.5)]
    margin: f64,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long, default_value_t = 4)]
    mf_negatives: usize,
    /// Keep POI positions at their pre-trained values.
    #[arg(long)]
    freeze_poi: bool,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

impl RecommenderArgs {
    fn config(&self) -> RecommenderConfig {
        RecommenderConfig {
            margin: self.margin,
            radius: self.radius,
            epochs: self.mf_epochs,
            learning_rate: self.mf_lr,
            negatives: self.mf_negatives,
            freeze_poi: self.freeze_poi,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct RecommendArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Restrict output to these users (repeatable); all users by default.
    #[arg(long = "user")]
    users: Vec<String>,
    /// Write TSV here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    recommender: RecommenderArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, required_unless_present = "compare", conflicts_with = "compare")]
    embeddings: Option<PathBuf>,
    /// Evaluate two embedding files and compare them with a paired t-test.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    compare: Option<Vec<PathBuf>>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_K_VALUES)]
    k: Vec<usize>,
    /// Include per-user metrics in the report.
    #[arg(long)]
    per_user: bool,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    recommender: RecommenderArgs,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 100)]
    users: usize,
    #[arg(long, default_value_t = 8)]
    categories: usize,
    #[arg(long, default_value_t = 30)]
    pois_per_category: usize,
    #[arg(long, default_value_t = 30)]
    checkins_per_user: usize,
    #[arg(long, default_value_t = 2)]
    categories_per_user: usize,
    #[arg(long, default_value_t = 0.7)]
    stickiness: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse().map_err(|e: poi_embed::Error| e.to_string())
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_ingest(args: IngestArgs) -> Result<()> {
    let options = IngestOptions {
        sentinel_category: args.sentinel_category,
        train_ratio: args.train_ratio,
    };
    let corpus = ingest(&args.input, &options)?;
    save_corpus(&args.output, &corpus)?;
    println!("{}", corpus.stats_line());
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let config = TrainConfig {
        dim: args.dim,
        cat_dim: args.cat_dim.unwrap_or(args.dim),
        window: args.window,
        negatives: args.negatives,
        learning_rate: args.lr,
        epochs: args.epochs,
        alpha: args.alpha,
        seed: args.seed,
    };
    let output = train_with_threads(&corpus, &config, args.mode, args.threads)?;

    fs::create_dir_all(&args.output_dir)?;
    let dir = &args.output_dir;
    export_poi_embeddings(&output.table, &corpus.poi_vocab, &dir.join(POI_FILE))?;
    let category_path = dir.join(CATEGORY_FILE);
    match args.mode {
        Mode::Full => export_category_embeddings(&output.table, &corpus.cat_vocab, &category_path)?,
        Mode::NoCat => {
            if category_path.exists() {
                fs::remove_file(&category_path)?;
            }
        }
    }
    let meta = EmbeddingMetadata::new(&config, args.mode, args.threads, &output.table);
    let mut meta_json = serde_json::to_string_pretty(&meta)?;
    meta_json.push('\n');
    fs::write(dir.join(META_FILE), meta_json)?;
    write_log(BufWriter::new(File::create(dir.join(LOG_FILE))?), &output.log)?;

    if let Some(last) = output.log.last() {
        eprintln!(
            "trained {} epochs ({}): check-in loss {:.4}{}",
            last.epoch,
            args.mode,
            last.checkin_loss,
            last.category_loss
                .map(|l| format!(", category loss {l:.4}"))
                .unwrap_or_default()
        );
    }
    Ok(())
}

fn trained_model(corpus: &Corpus, embeddings: &Path, args: &RecommenderArgs) -> Result<poi_embed::RecommenderModel> {
    let config = args.config();
    let mut model = init_from_embeddings(embeddings, corpus, &config)
        .with_context(|| format!("loading {}", embeddings.display()))?;
    train_recommender(&mut model, corpus, &config)?;
    Ok(model)
}

fn cmd_recommend(args: RecommendArgs) -> Result<()> {
    if args.k == 0 {
        bail!("--k must be positive");
    }
    let corpus = load_corpus(&args.corpus)?;
    let model = trained_model(&corpus, &args.embeddings, &args.recommender)?;
    let users: Vec<usize> = if args.users.is_empty() {
        (0..corpus.num_users()).collect()
    } else {
        args.users
            .iter()
            .map(|u| corpus.user_index(u).with_context(|| format!("unknown user {u:?}")))
            .collect::<Result<_>>()?
    };
    let lists = poi_embed::parallel::map_indices(users.len(), |i| {
        let u = users[i];
        recommend_topk(&model, u as u32, args.k, &corpus.train_poi_set(u))
    });
    let mut out = open_output(args.output.as_deref())?;
    for list in lists {
        let user = &corpus.users()[list.user as usize];
        for (rank, (poi, score)) in list.items.iter().enumerate() {
            writeln!(out, "{user}\t{}\t{}\t{score:.6}", rank + 1, corpus.poi_vocab.token(*poi))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let corpus = load_corpus(&args.corpus)?;
    let files: Vec<PathBuf> = match (&args.embeddings, &args.compare) {
        (Some(e), None) => vec![e.clone()],
        (None, Some(pair)) => pair.clone(),
        _ => bail!("pass exactly one of --embeddings or --compare A B"),
    };
    let mut systems = Vec::with_capacity(files.len());
    for (i, file) in files.iter().enumerate() {
        let model = trained_model(&corpus, file, &args.recommender)?;
        let evaluation = evaluate(
            |u, k| recommend_topk(&model, u as u32, k, &corpus.train_poi_set(u)).pois(),
            &corpus,
            &args.k,
        )?;
        let mut name = file.display().to_string();
        if files[..i].contains(file) {
            name.push_str(&format!(" ({})", i + 1));
        }
        systems.push((name, evaluation));
    }
    let report = EvalReport::new(&systems, args.per_user)?;
    let mut out = open_output(args.output.as_deref())?;
    out.write_all(report.to_json()?.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    if args.categories_per_user == 0 || args.categories_per_user > args.categories {
        bail!("--categories-per-user must lie in 1..=--categories");
    }
    let config = SyntheticConfig {
        users: args.users,
        categories: args.categories,
        pois_per_category: args.pois_per_category,
        checkins_per_user: args.checkins_per_user,
        categories_per_user: args.categories_per_user,
        stickiness: args.stickiness,
        seed: args.seed,
    };
    fs::write(&args.output, to_tsv(&generate(&config)))?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Train(a) => cmd_train(a),
        Command::Recommend(a) => cmd_recommend(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
