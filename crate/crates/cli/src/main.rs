//! `synsrl`: path features, training, prediction, scoring and attention
//! inspection for dependency-informed semantic role labeling.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use synsrl::config::{Mode, Repr};

#[derive(Parser, Debug)]
#[command(name = "synsrl", version, about = "Dependency-informed semantic role labeling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dump DepPath, RelPath, Dep and Rel for every (sentence, predicate, token).
    ///
    /// Output columns: sentence, predicate id, token id, form, DepPath,
    /// RelPath, head word, relation. `_` marks features a pruned tree lacks.
    Paths {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        trees: TreesArg,
        #[arg(long)]
        output: PathBuf,
    },
    /// Train a model and write the best checkpoint.
    Train(TrainArgs),
    /// Label a corpus with a trained model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        trees: OptionalTreesArg,
        #[arg(long)]
        output: PathBuf,
    },
    /// Score predicted roles against gold roles.
    Score {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Count each predicate sense as one more labeled arc.
        #[arg(long)]
        with_senses: bool,
    },
    /// Print one attention head's weights for one predicate.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
struct TreesArg {
    /// gold, pred, autodel, or a CoNLL file whose HEAD/DEPREL columns hold the trees.
    #[arg(long)]
    trees: String,
}

#[derive(Args, Debug)]
struct OptionalTreesArg {
    /// gold, pred, autodel, or a CoNLL file whose HEAD/DEPREL columns hold the trees.
    #[arg(long)]
    trees: Option<String>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    dev: Option<PathBuf>,
    #[command(flatten)]
    trees: OptionalTreesArg,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    #[arg(long = "repr", value_parser = parse_repr)]
    reprs: Vec<Repr>,
    /// Starting hyperparameters: full or tiny.
    #[arg(long, default_value = "full")]
    profile: String,
    /// key=value settings applied over the profile.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Checkpoint directory.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Metric log; standard output when omitted.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    trees: OptionalTreesArg,
    /// 1-based sentence index.
    #[arg(long)]
    sentence: usize,
    /// 1-based position among the sentence's predicates.
    #[arg(long, default_value_t = 1)]
    predicate: usize,
    /// 1-based encoder block.
    #[arg(long)]
    layer: usize,
    /// 0-based head within the block.
    #[arg(long)]
    head: usize,
    /// Also write the weights at full precision, one tab-separated row per line.
    #[arg(long)]
    tsv: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: synsrl::Error| e.to_string())
}

fn parse_repr(s: &str) -> Result<Repr, String> {
    s.parse().map_err(|e: synsrl::Error| e.to_string())
}

/// Why a command stopped.
#[derive(Debug)]
pub enum Failure {
    /// Flags are inconsistent; nothing was read or written.
    Usage(String),
    Runtime(String),
}

macro_rules! runtime_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::Runtime(e.to_string())
            }
        }
    )*};
}

runtime_from!(synsrl::Error, synsrl::syntax::SyntaxError, synsrl::conll::ConllError);

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = match cli.command {
        Command::Paths { input, trees, output } => commands::paths(&input, &trees.trees, &output),
        Command::Train(args) => commands::train(args),
        Command::Predict {
            model,
            input,
            trees,
            output,
        } => commands::predict(&model, &input, trees.trees.as_deref(), &output),
        Command::Score { gold, pred, with_senses } => commands::score(&gold, &pred, with_senses),
        Command::Inspect(args) => commands::inspect(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
