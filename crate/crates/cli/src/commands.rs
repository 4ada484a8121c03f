use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use synsrl::config::{read_settings, Mode, ModelConfig, TrainSchedule};
use synsrl::conll::{read_corpus, score as score_corpus, write_corpus, Sentence, TreeColumns};
use synsrl::encoder::Model;
use synsrl::syntax::{path_feature, trees_for, Arcs, DependencyTree, PrunedTree, TreeSource, ROOT_WORD};
use synsrl::training::{load_model, Trainer};

use crate::{Failure, InspectArgs, TrainArgs};

type Outcome = Result<(), Failure>;

/// A parsed `--trees` value.
enum Trees {
    Source(TreeSource),
    File(PathBuf),
}

fn parse_trees(s: &str) -> Trees {
    match s {
        "gold" => Trees::Source(TreeSource::Gold),
        "pred" => Trees::Source(TreeSource::Predicted),
        "autodel" => Trees::Source(TreeSource::AutoDel),
        path => Trees::File(path.into()),
    }
}

fn runtime(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| Failure::Runtime(format!("{}: {e}", path.display()))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(runtime(path))
}

fn load_corpus(path: &Path) -> Result<Vec<Sentence>, Failure> {
    read_corpus(&read_text(path)?).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Outcome {
    fs::write(path, contents).map_err(runtime(path))
}

/// Checks that a file-valued `--trees` exists before any work starts.
fn check_trees_flag(trees: &Trees) -> Outcome {
    match trees {
        Trees::File(p) if !p.is_file() => Err(Failure::Usage(format!(
            "--trees must be gold, pred, autodel or an existing file; {} is none of these",
            p.display()
        ))),
        _ => Ok(()),
    }
}

fn load_trees(corpus: &[Sentence], trees: &Trees) -> Result<Vec<PrunedTree>, Failure> {
    match trees {
        Trees::Source(source) => Ok(trees_for(corpus, source)?),
        Trees::File(path) => {
            let other = load_corpus(path)?;
            if other.len() != corpus.len() {
                return Err(Failure::Runtime(format!(
                    "{} holds {} sentences, the corpus {}",
                    path.display(),
                    other.len(),
                    corpus.len()
                )));
            }
            corpus
                .iter()
                .zip(&other)
                .enumerate()
                .map(|(i, (s, t))| {
                    let same = s.len() == t.len() && s.tokens().iter().zip(t.tokens()).all(|(a, b)| a.form == b.form);
                    if !same {
                        return Err(Failure::Runtime(format!(
                            "sentence {} of {} does not match the corpus",
                            i + 1,
                            path.display()
                        )));
                    }
                    let tree = DependencyTree::from_sentence(t, TreeColumns::Gold).map_err(synsrl::Error::from)?;
                    Ok(PrunedTree::from(&tree))
                })
                .collect()
        }
    }
}

/// Trees for a model: the requested source, or detached trees when the
/// model reads no syntax and no source was given.
fn trees_for_model(corpus: &[Sentence], trees: Option<&Trees>) -> Result<Vec<PrunedTree>, Failure> {
    match trees {
        Some(t) => load_trees(corpus, t),
        None => Ok(corpus.iter().map(|s| PrunedTree::detached(s.len())).collect()),
    }
}

fn require_trees(mode: Mode, trees: Option<&str>) -> Result<Option<Trees>, Failure> {
    let trees = trees.map(parse_trees);
    if let Some(t) = &trees {
        check_trees_flag(t)?;
    }
    if mode != Mode::None && trees.is_none() {
        return Err(Failure::Usage(format!("mode {mode} reads dependency trees; pass --trees")));
    }
    Ok(trees)
}

pub fn paths(input: &Path, trees: &str, output: &Path) -> Outcome {
    let trees = parse_trees(trees);
    check_trees_flag(&trees)?;
    let corpus = load_corpus(input)?;
    let trees = load_trees(&corpus, &trees)?;
    let mut out = String::new();
    for (si, (s, t)) in corpus.iter().zip(&trees).enumerate() {
        for &p in s.predicates() {
            for c in 1..=s.len() {
                let (dep_path, rel_path) = match path_feature(t, p, c) {
                    Some(f) => (f.dep_path, f.rel_path),
                    None => ("_".into(), "_".into()),
                };
                let (dep, rel) = match t.arc(c) {
                    Some((0, l)) => (ROOT_WORD, l),
                    Some((h, l)) => (s.token(h).form.as_str(), l),
                    None => ("_", "_"),
                };
                let form = &s.token(c).form;
                writeln!(out, "{}\t{p}\t{c}\t{form}\t{dep_path}\t{rel_path}\t{dep}\t{rel}", si + 1)
                    .expect("writing to a string");
            }
        }
    }
    write_file(output, &out)
}

fn train_setup(args: &TrainArgs) -> Result<(ModelConfig, TrainSchedule, Option<Trees>), Failure> {
    let (mut config, mut schedule) = match args.profile.as_str() {
        "full" => (ModelConfig::full(), TrainSchedule::full()),
        "tiny" => (ModelConfig::tiny(), TrainSchedule::desk()),
        other => return Err(Failure::Usage(format!("unknown profile {other:?}; expected full or tiny"))),
    };
    if let Some(path) = &args.config {
        read_settings(&read_text(path)?, &mut config, &mut schedule)
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    }
    if let Some(mode) = args.mode {
        let reprs = if args.reprs.is_empty() { config.reprs.clone() } else { args.reprs.clone() };
        config = config.with_mode(mode, &reprs);
    } else if !args.reprs.is_empty() {
        config = config.clone().with_mode(config.mode, &args.reprs);
    }
    if config.mode == Mode::None && !config.reprs.is_empty() {
        return Err(Failure::Usage("--repr has no effect without a syntax --mode".into()));
    }
    if let Some(seed) = args.seed {
        schedule.seed = seed;
    }
    if let Some(steps) = args.steps {
        schedule.max_steps = steps;
    }
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    schedule.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let trees = require_trees(config.mode, args.trees.trees.as_deref())?;
    Ok((config, schedule, trees))
}

pub fn train(args: TrainArgs) -> Outcome {
    let (config, schedule, trees) = train_setup(&args)?;
    let train = load_corpus(&args.train)?;
    let train_trees = trees_for_model(&train, trees.as_ref())?;
    let dev = match &args.dev {
        Some(path) => {
            let corpus = load_corpus(path)?;
            let t = trees_for_model(&corpus, trees.as_ref())?;
            Some((corpus, t))
        }
        None => None,
    };

    let existed = args.checkpoint.exists();
    let result = (|| -> Outcome {
        let mut trainer = Trainer::<f64>::new(config, schedule, &train, &train_trees)?;
        let mut log: Box<dyn Write> = match &args.log {
            Some(p) => Box::new(BufWriter::new(fs::File::create(p).map_err(runtime(p))?)),
            None => Box::new(io::stdout().lock()),
        };
        let dev = dev.as_ref().map(|(c, t)| (c.as_slice(), t.as_slice()));
        let summary = trainer.train(dev, Some(&args.checkpoint), &mut log)?;
        log.flush().map_err(|e| Failure::Runtime(format!("metric log: {e}")))?;
        match summary.best {
            Some((step, r)) => eprintln!("best dev F1 {} at step {step}", r.f1),
            None => eprintln!("trained {} steps", summary.steps),
        }
        Ok(())
    })();
    if result.is_err() && !existed {
        let _ = fs::remove_dir_all(&args.checkpoint);
    }
    let mut partial = args.checkpoint.clone().into_os_string();
    partial.push(".partial");
    let _ = fs::remove_dir_all(PathBuf::from(partial));
    result
}

/// Loads a model and the trees it needs for `input`.
fn model_and_corpus(
    model_dir: &Path,
    input: &Path,
    trees: Option<&str>,
) -> Result<(Model, Vec<Sentence>, Vec<PrunedTree>), Failure> {
    // Only the mode is needed to validate flags; read it before any real work.
    let mode = read_mode(model_dir)?;
    let trees = require_trees(mode, trees)?;
    let model: Model = load_model(model_dir)?;
    let corpus = load_corpus(input)?;
    let trees = trees_for_model(&corpus, trees.as_ref())?;
    Ok((model, corpus, trees))
}

fn read_mode(model_dir: &Path) -> Result<Mode, Failure> {
    let path = model_dir.join("config.txt");
    let config = ModelConfig::from_manifest(&read_text(&path)?)?;
    Ok(config.mode)
}

pub fn predict(model_dir: &Path, input: &Path, trees: Option<&str>, output: &Path) -> Outcome {
    let (model, corpus, trees) = model_and_corpus(model_dir, input, trees)?;
    let predicted = corpus
        .iter()
        .zip(&trees)
        .map(|(s, t)| model.predict(s, t))
        .collect::<synsrl::Result<Vec<_>>>()?;
    write_file(output, &write_corpus(&predicted))
}

pub fn score(gold: &Path, pred: &Path, with_senses: bool) -> Outcome {
    let report = score_corpus(&load_corpus(gold)?, &load_corpus(pred)?, !with_senses)?;
    println!("{report}");
    println!("{}", report.machine_line());
    Ok(())
}

pub fn inspect(args: InspectArgs) -> Outcome {
    if let Some(t) = &args.tsv {
        if t.is_dir() {
            return Err(Failure::Usage(format!("--tsv {} is a directory", t.display())));
        }
    }
    let (model, corpus, trees) = model_and_corpus(&args.model, &args.input, args.trees.trees.as_deref())?;
    let out_of = |what: &str, got: usize, lo: usize, hi: usize| {
        Failure::Runtime(format!("{what} {got} is outside {lo}..={hi}"))
    };
    if args.sentence == 0 || args.sentence > corpus.len() {
        return Err(out_of("sentence", args.sentence, 1, corpus.len()));
    }
    let (s, t) = (&corpus[args.sentence - 1], &trees[args.sentence - 1]);
    let preds = s.predicates();
    if preds.is_empty() {
        return Err(Failure::Runtime(format!("sentence {} has no predicates", args.sentence)));
    }
    if args.predicate == 0 || args.predicate > preds.len() {
        return Err(out_of("predicate", args.predicate, 1, preds.len()));
    }
    let c = &model.config;
    if args.layer == 0 || args.layer > c.n_blocks {
        return Err(out_of("layer", args.layer, 1, c.n_blocks));
    }
    if args.head >= c.n_heads() {
        return Err(out_of("head", args.head, 0, c.n_heads() - 1));
    }
    let p = preds[args.predicate - 1];
    let (_, attention) = model.run(s, p, t)?;
    let w = &attention[args.layer - 1][args.head];
    let n = s.len();

    let mut text = format!(
        "# sentence={} predicate={p} ({}) layer={} head={}\n    ",
        args.sentence,
        s.token(p).form,
        args.layer,
        args.head
    );
    for j in 1..=n {
        write!(text, " {j:>5}").expect("writing to a string");
    }
    text.push('\n');
    let mut tsv = String::new();
    for i in 0..n {
        write!(text, "{:>4}", i + 1).expect("writing to a string");
        for j in 0..n {
            write!(text, " {:>5.3}", w.at(i, j)).expect("writing to a string");
        }
        writeln!(text, "  {}", s.token(i + 1).form).expect("writing to a string");
        let row: Vec<String> = (0..n).map(|j| w.at(i, j).to_string()).collect();
        tsv.push_str(&row.join("\t"));
        tsv.push('\n');
    }
    if let Some(path) = &args.tsv {
        write_file(path, &tsv)?;
    }
    print!("{text}");
    Ok(())
}
