//! Command-line front end: train, evaluate, query, and generate.
//!
//! Evaluation subcommands print a human-readable summary plus one
//! machine-readable line prefixed with `RESULT<TAB>` for harnesses to grep.
//! Configuration comes from flags and an optional `key=value` file; the
//! environment is never consulted.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::corpus::{MweLexicon, UtteranceCorpus, Vocabulary};
use crate::eval::{self, PosLexicon, SimilarityDataset};
use crate::io::{load_vectors, save_checkpoint, save_vectors_split};
use crate::model::{PartSelector, Variant};
use crate::synthgen::{self, StyleWorldConfig};
use crate::trainer::{TrainConfig, Trainer};
use crate::{Error, Result};

#[derive(Parser)]
#[command(
    name = "stylevec",
    version,
    about = "Train and evaluate style-sensitive word embeddings: CBOW over near, utterance-wide, or distant context windows, plus a split-subspace variant"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Train word vectors on an utterance-per-line corpus
    Train(TrainArgs),
    /// Correlate vector cosines with gold similarity judgments (Spearman x100)
    EvalStyle(EvalStyleArgs),
    /// POS agreement of each word's nearest neighbors (SyntaxAcc@N)
    EvalSyntax(EvalSyntaxArgs),
    /// List the words most similar to a query
    Neighbors(NeighborsArgs),
    /// Generate a synthetic dialog world with controlled style structure
    Synth(SynthArgs),
    /// Count a corpus and dump its vocabulary as word<TAB>count
    ExportVocab(ExportVocabArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum VariantArg {
    /// Near window only (baseline CBOW)
    Near,
    /// The whole utterance
    All,
    /// Distant words only
    Dist,
    /// Split vectors: near trains everything, distant trains the style half
    Sep,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Variant {
        match v {
            VariantArg::Near => Variant::NearCtx,
            VariantArg::All => Variant::AllCtx,
            VariantArg::Dist => Variant::DistCtx,
            VariantArg::Sep => Variant::SepCtx,
        }
    }
}

#[derive(Args)]
pub struct TrainArgs {
    /// Training corpus: UTF-8, one utterance per line, space-separated tokens
    #[arg(long)]
    pub corpus: PathBuf,
    /// Multi-word-expression lexicon merged into single tokens before counting
    #[arg(long)]
    pub mwe: Option<PathBuf>,
    /// Prefix for the emitted vector files (.full, and .style/.synsem for sep)
    #[arg(long)]
    pub out: PathBuf,
    /// key=value configuration file; explicit flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Context strategy [default: sep]
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// Near-window half-width [default: 5]
    #[arg(long)]
    pub delta: Option<usize>,
    /// Passes over the corpus [default: 10]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Negative samples per update [default: 5]
    #[arg(long)]
    pub negatives: Option<usize>,
    /// Base learning rate [default: 0.05]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Subsampling threshold, 0 disables [default: 0.001]
    #[arg(long)]
    pub subsample: Option<f64>,
    /// Discard words seen fewer than this many times [default: 5]
    #[arg(long)]
    pub min_count: Option<u64>,
    /// Style-half dimension [default: 300]
    #[arg(long)]
    pub d_style: Option<usize>,
    /// Synsem-half dimension, sep variant only [default: 300]
    #[arg(long)]
    pub d_synsem: Option<usize>,
    /// RNG seed [default: 1]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training threads; more than one trades determinism for speed [default: 1]
    #[arg(long)]
    pub workers: Option<usize>,
    /// Ablation: skip the distant-context pass of the sep variant
    #[arg(long)]
    pub disable_p2: bool,
    /// Also write a <out>.ckpt sidecar with outputs and configuration
    #[arg(long)]
    pub save_checkpoint: bool,
    /// Suppress progress output on stderr
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Args)]
pub struct EvalStyleArgs {
    /// Vector file to evaluate
    #[arg(long)]
    pub vectors: PathBuf,
    /// Gold pairs: word1<TAB>word2<TAB>score
    #[arg(long)]
    pub pairs: PathBuf,
}

#[derive(Args)]
pub struct EvalSyntaxArgs {
    /// Vector file to evaluate
    #[arg(long)]
    pub vectors: PathBuf,
    /// POS lexicon: word<TAB>tag
    #[arg(long)]
    pub pos: PathBuf,
    /// Neighborhood size
    #[arg(long, default_value_t = 5)]
    pub n: usize,
}

#[derive(Args)]
pub struct NeighborsArgs {
    /// Vector file to query
    #[arg(long)]
    pub vectors: PathBuf,
    /// Query word
    #[arg(long)]
    pub word: String,
    /// Number of neighbors
    #[arg(long, default_value_t = 10)]
    pub n: usize,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Output directory for corpus.txt, pairs.tsv, pos.tsv, manifest.txt
    #[arg(long)]
    pub out: PathBuf,
    /// key=value configuration file; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the world seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the utterance count
    #[arg(long)]
    pub utterances: Option<usize>,
}

#[derive(Args)]
pub struct ExportVocabArgs {
    /// Corpus to count
    #[arg(long)]
    pub corpus: PathBuf,
    /// Multi-word-expression lexicon applied before counting
    #[arg(long)]
    pub mwe: Option<PathBuf>,
    /// Discard words seen fewer than this many times
    #[arg(long, default_value_t = 5)]
    pub min_count: u64,
    /// Output file; stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parse the process arguments and run; convenience for `main`.
pub fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => run_train(&args),
        Command::EvalStyle(args) => run_eval_style(&args),
        Command::EvalSyntax(args) => run_eval_syntax(&args),
        Command::Neighbors(args) => run_neighbors(&args),
        Command::Synth(args) => run_synth(&args),
        Command::ExportVocab(args) => run_export_vocab(&args),
    }
}

/// Defaults, then the config file, then explicit flags.
fn resolve_train_config(args: &TrainArgs) -> Result<TrainConfig> {
    let mut from_file = TrainConfig::default();
    if let Some(path) = &args.config {
        from_file.update_from_file(path)?;
    }
    let variant: Variant = args.variant.map(Into::into).unwrap_or(from_file.variant);

    let mut config = TrainConfig::for_variant(variant);
    if let Some(path) = &args.config {
        config.update_from_file(path)?;
    }
    config.variant = variant;
    if !variant.is_sep() && args.config.is_none() {
        config.d_synsem = 0;
    }

    if let Some(v) = args.delta {
        config.delta = v;
    }
    if let Some(v) = args.epochs {
        config.epochs = v;
    }
    if let Some(v) = args.negatives {
        config.negatives = v;
    }
    if let Some(v) = args.lr {
        config.base_lr = v;
    }
    if let Some(v) = args.subsample {
        config.subsample = v;
    }
    if let Some(v) = args.min_count {
        config.min_count = v;
    }
    if let Some(v) = args.d_style {
        config.d_style = v;
    }
    if let Some(v) = args.d_synsem {
        if !variant.is_sep() {
            return Err(Error::InvalidConfig(
                "--d-synsem is only valid with --variant sep".into(),
            ));
        }
        config.d_synsem = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.workers {
        config.workers = v;
    }
    if args.disable_p2 {
        config.disable_p2 = true;
    }
    config.validate()?;
    Ok(config)
}

fn run_train(args: &TrainArgs) -> Result<()> {
    let config = resolve_train_config(args)?;
    let lexicon = match &args.mwe {
        Some(path) => Some(MweLexicon::from_path(path)?),
        None => None,
    };
    let vocab = Vocabulary::from_corpus_file(&args.corpus, lexicon.as_ref(), config.min_count)?;
    let corpus = UtteranceCorpus::from_corpus_file(&args.corpus, lexicon.as_ref(), &vocab)?;
    if !args.quiet {
        eprintln!(
            "training {} on {} utterances, |V| = {}, {} tokens",
            config.variant,
            corpus.len(),
            vocab.len(),
            corpus.total_tokens()
        );
    }

    let mut trainer = Trainer::new(&config, &corpus, &vocab)?;
    let total = trainer.total_scheduled();
    let quiet = args.quiet;
    let model = trainer.run_with(move |p| {
        if !quiet {
            eprint!(
                "\rtokens {:>12}/{} lr {:.6} loss {:.4} ",
                p.tokens_done, total, p.current_lr, p.running_loss
            );
        }
    })?;
    if !quiet {
        eprintln!();
    }

    let mut written = save_vectors_split(&model, &vocab, &args.out)?;
    if args.save_checkpoint {
        let ckpt = append_ext(&args.out, ".ckpt");
        save_checkpoint(&model, &vocab, &config, &ckpt)?;
        written.push(ckpt);
    }
    let files: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
    println!(
        "RESULT\tcommand=train\tvariant={}\ttokens={}\tvocab={}\tfiles={}",
        config.variant,
        trainer.progress().tokens_done,
        vocab.len(),
        files.join(",")
    );
    Ok(())
}

fn run_eval_style(args: &EvalStyleArgs) -> Result<()> {
    let vectors = load_vectors(&args.vectors)?;
    let dataset = SimilarityDataset::from_path(&args.pairs)?;
    let report = eval::similarity_correlation(&vectors, PartSelector::Full, &dataset)?;
    println!(
        "rho = {:.2}  (coverage {:.3}, {} of {} pairs)",
        report.value,
        report.coverage,
        report.n_items,
        dataset.len()
    );
    println!(
        "RESULT\tmetric=rho\tvalue={}\tcoverage={}\tn={}",
        report.value, report.coverage, report.n_items
    );
    Ok(())
}

fn run_eval_syntax(args: &EvalSyntaxArgs) -> Result<()> {
    let vectors = load_vectors(&args.vectors)?;
    let pos = PosLexicon::from_path(&args.pos)?;
    let report = eval::syntax_acc(&vectors, PartSelector::Full, &pos, args.n)?;
    println!(
        "SyntaxAcc@{} = {:.4}  (coverage {:.3}, {} words)",
        args.n, report.value, report.coverage, report.n_items
    );
    println!(
        "RESULT\tmetric=syntax_acc@{}\tvalue={}\tcoverage={}\tn={}",
        args.n, report.value, report.coverage, report.n_items
    );
    Ok(())
}

fn run_neighbors(args: &NeighborsArgs) -> Result<()> {
    let vectors = load_vectors(&args.vectors)?;
    let listing = eval::neighbors(&vectors, PartSelector::Full, &args.word, args.n)?;
    println!("top {} neighbors of {:?}:", args.n, args.word);
    for (rank, (word, score)) in listing.iter().enumerate() {
        println!("{:>4}  {:<24} {:.6}", rank + 1, word, score);
    }
    let flat: Vec<String> = listing
        .iter()
        .map(|(w, s)| format!("{w}:{s:.6}"))
        .collect();
    println!(
        "RESULT\tquery={}\tn={}\tneighbors={}",
        args.word,
        args.n,
        flat.join(",")
    );
    Ok(())
}

fn run_synth(args: &SynthArgs) -> Result<()> {
    let mut config = StyleWorldConfig::default();
    if let Some(path) = &args.config {
        config.update_from_file(path)?;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(n) = args.utterances {
        config.n_utterances = n;
    }
    let world = synthgen::generate(&config)?;
    let paths = world.write_to_dir(&args.out)?;
    println!(
        "RESULT\tcommand=synth\tutterances={}\tpairs={}\tcorpus={}\tgold={}\tpos={}\tmanifest={}",
        world.utterances.len(),
        world.gold_pairs.len(),
        paths.corpus.display(),
        paths.pairs.display(),
        paths.pos.display(),
        paths.manifest.display()
    );
    Ok(())
}

fn run_export_vocab(args: &ExportVocabArgs) -> Result<()> {
    let lexicon = match &args.mwe {
        Some(path) => Some(MweLexicon::from_path(path)?),
        None => None,
    };
    let vocab = Vocabulary::from_corpus_file(&args.corpus, lexicon.as_ref(), args.min_count)?;
    match &args.out {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|e| Error::from(e).in_file(path))?;
            vocab.write_tsv(std::io::BufWriter::new(file))?;
        }
        None => {
            let stdout = std::io::stdout();
            vocab.write_tsv(stdout.lock())?;
        }
    }
    Ok(())
}

fn append_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut os = prefix.as_os_str().to_owned();
    os.push(ext);
    PathBuf::from(os)
}
