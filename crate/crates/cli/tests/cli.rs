use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use synsrl::conll::{read_corpus, write_corpus};
use synsrl::encoder::Model;
use synsrl::synthetic::separable_fixture;
use synsrl::syntax::{trees_for, TreeSource};
use synsrl::training::load_model;
use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_synsrl")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn separable(dir: &TempDir) -> PathBuf {
    let path = dir.path().join("separable.conll");
    fs::write(&path, write_corpus(&separable_fixture())).unwrap();
    path
}

/// Trains a tiny model and returns its checkpoint directory and log text.
fn train(dir: &TempDir, name: &str, extra: &[&str]) -> (PathBuf, String) {
    let data = separable(dir);
    let ckpt = dir.path().join(name);
    let log = dir.path().join(format!("{name}.log"));
    let mut args = vec![
        "train",
        "--train",
        s(&data),
        "--dev",
        s(&data),
        "--profile",
        "tiny",
        "--checkpoint",
        s(&ckpt),
        "--log",
        s(&log),
    ];
    args.extend_from_slice(extra);
    let out = run(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    (ckpt.clone(), fs::read_to_string(log).unwrap())
}

// ---- paths ----

#[test]
fn paths_reproduce_the_worked_example() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("paths.tsv");
    let o = run(&["paths", "--input", s(&fixture("encourage.conll")), "--trees", "gold", "--output", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.lines().any(|l| l == "1\t3\t6\t农业\t2,0\tCOMP_COMP,\t投资\tCOMP"), "{text}");
    assert!(text.lines().any(|l| l == "1\t3\t2\t中国\t1,0\tSBJ,\t鼓励\tSBJ"));
    assert!(text.lines().any(|l| l == "1\t3\t3\t鼓励\t0,0\t,\t<root>\tROOT"));
}

#[test]
fn paths_emit_one_record_per_predicate_and_token() {
    let dir = TempDir::new().unwrap();
    let cases = [(fixture("roundtrip20.conll"), "gold"), (separable(&dir), "pred"), (separable(&dir), "autodel")];
    for (input, trees) in cases {
        let corpus = read_corpus(&fs::read_to_string(&input).unwrap()).unwrap();
        let expect: usize = corpus.iter().map(|s| s.len() * s.predicates().len()).sum();
        let out = dir.path().join(format!("{trees}.tsv"));
        let o = run(&["paths", "--input", s(&input), "--trees", trees, "--output", s(&out)]);
        assert!(o.status.success(), "{trees}: {}", stderr(&o));
        assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), expect, "{trees}");
    }
}

#[test]
fn missing_predicted_columns_fail_without_output() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out.tsv");
    let o = run(&["paths", "--input", s(&fixture("roundtrip20.conll")), "--trees", "pred", "--output", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("predicted"));
    assert!(!out.exists());
}

#[test]
fn empty_input_gives_empty_output() {
    let dir = TempDir::new().unwrap();
    let (input, out) = (dir.path().join("empty.conll"), dir.path().join("out.tsv"));
    fs::write(&input, "").unwrap();
    let o = run(&["paths", "--input", s(&input), "--trees", "gold", "--output", s(&out)]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(&out).unwrap(), "");
}

#[test]
fn external_tree_files_supply_heads() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(fixture("encourage.conll")).unwrap();
    // attach 农业 to 鼓励 instead of 投资
    let other: String = text
        .lines()
        .map(|l| if l.starts_with("6\t") { l.replacen("\t5\t5\t", "\t3\t5\t", 1) } else { l.to_string() })
        .collect::<Vec<_>>()
        .join("\n");
    let trees = dir.path().join("trees.conll");
    fs::write(&trees, other + "\n\n").unwrap();
    let out = dir.path().join("paths.tsv");
    let o = run(&["paths", "--input", s(&fixture("encourage.conll")), "--trees", s(&trees), "--output", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(fs::read_to_string(&out).unwrap().lines().any(|l| l == "1\t3\t6\t农业\t1,0\tCOMP,\t鼓励\tCOMP"));
    let missing = dir.path().join("nope.conll");
    let o = run(&["paths", "--input", s(&fixture("encourage.conll")), "--trees", s(&missing), "--output", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

// ---- train ----

#[test]
fn training_logs_every_step_and_each_evaluation() {
    let dir = TempDir::new().unwrap();
    let (ckpt, log) = train(&dir, "none", &["--steps", "200", "--seed", "3"]);
    let evals = log.lines().filter(|l| l.contains(" dev_F1=")).count();
    let losses = log.lines().filter(|l| !l.contains(" dev_F1=")).count();
    assert_eq!((losses, evals), (200, 2));
    assert!(ckpt.join("params.bin").is_file());
    let (_, again) = train(&dir, "none2", &["--steps", "200", "--seed", "3"]);
    assert_eq!(log, again);
}

#[test]
fn bad_flags_are_usage_errors_and_write_nothing() {
    let dir = TempDir::new().unwrap();
    let data = separable(&dir);
    let ckpt = dir.path().join("ckpt");
    let log = dir.path().join("log.txt");
    let base = ["train", "--train", s(&data), "--profile", "tiny", "--checkpoint", s(&ckpt), "--log", s(&log)];
    let cases: [&[&str]; 6] = [
        &["--mode", "bogus"],
        &["--mode", "lisa", "--repr", "dep"],
        &["--mode", "lisa", "--repr", "dep", "--repr", "deppath", "--trees", "gold"],
        &["--repr", "rel"],
        &["--mode", "relawe", "--trees", "gold"],
        &["--profile", "huge"],
    ];
    for extra in cases {
        let o = run(&[&base[..], extra].concat());
        assert_eq!(o.status.code(), Some(2), "{extra:?}: {}", stderr(&o));
        assert!(!ckpt.exists() && !log.exists(), "{extra:?}");
    }
    let settings = dir.path().join("bad.cfg");
    fs::write(&settings, "head_dim=7\n").unwrap();
    let o = run(&[&base[..], &["--config", s(&settings)]].concat());
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["train", "--train", s(&data)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!ckpt.exists() && !log.exists());
}

#[test]
fn failed_runs_leave_no_checkpoint() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.conll");
    fs::write(&bad, "1\tx\n").unwrap();
    let ckpt = dir.path().join("ckpt");
    let o = run(&["train", "--train", s(&bad), "--profile", "tiny", "--checkpoint", s(&ckpt)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!ckpt.exists());
}

#[test]
fn settings_files_override_the_profile() {
    let dir = TempDir::new().unwrap();
    let settings = dir.path().join("run.cfg");
    fs::write(&settings, "# short run\nmax_steps=5\neval_every=0\nd_ff=16\n").unwrap();
    let (ckpt, log) = train(&dir, "cfg", &["--config", s(&settings), "--mode", "relawe", "--repr", "relpath", "--trees", "gold"]);
    assert_eq!(log.lines().count(), 6);
    let config = fs::read_to_string(ckpt.join("config.txt")).unwrap();
    assert!(config.contains("d_ff=16") && config.contains("mode=relawe"), "{config}");
}

// ---- predict and score ----

#[test]
fn predictions_score_perfectly_against_themselves() {
    let dir = TempDir::new().unwrap();
    let (ckpt, _) = train(&dir, "m", &["--steps", "20"]);
    let out = dir.path().join("pred.conll");
    let o = run(&["predict", "--model", s(&ckpt), "--input", s(&separable(&dir)), "--output", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["score", "--gold", s(&out), "--pred", s(&out)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().last(), Some("P=1 R=1 F1=1"));
}

#[test]
fn score_fixture_counts() {
    let o = run(&["score", "--gold", s(&fixture("score_gold.conll")), "--pred", s(&fixture("score_pred.conll"))]);
    assert!(o.status.success());
    let out = stdout(&o);
    let line = out.lines().last().unwrap();
    let values: Vec<f64> = line.split(' ').map(|kv| kv.split_once('=').unwrap().1.parse().unwrap()).collect();
    assert!((values[0] - 0.6).abs() < 1e-9 && (values[1] - 0.75).abs() < 1e-9);
    assert!((values[2] - 2.0 * 0.6 * 0.75 / 1.35).abs() < 1e-9);
    assert!(out.contains("(3 / 5)") && out.contains("(3 / 4)"));
    let o = run(&["score", "--gold", s(&fixture("score_gold.conll")), "--pred", s(&fixture("score_pred.conll")), "--with-senses"]);
    assert!(stdout(&o).contains("(5 / 8)"));
}

#[test]
fn lisa_prediction_needs_trees() {
    let dir = TempDir::new().unwrap();
    let (ckpt, _) = train(&dir, "lisa", &["--steps", "5", "--mode", "lisa", "--repr", "dep", "--trees", "gold"]);
    let out = dir.path().join("pred.conll");
    let o = run(&["predict", "--model", s(&ckpt), "--input", s(&fixture("encourage.conll")), "--output", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--trees"));
    assert!(!out.exists());
    let o = run(&["predict", "--model", s(&ckpt), "--input", s(&fixture("encourage.conll")), "--trees", "gold", "--output", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_corpus(&fs::read_to_string(&out).unwrap()).unwrap().len(), 1);
}

#[test]
fn vocabulary_mismatch_names_the_vocabulary() {
    let dir = TempDir::new().unwrap();
    let (ckpt, _) = train(&dir, "m", &["--steps", "2"]);
    let vocab = ckpt.join("vocab.word.tsv");
    let text = fs::read_to_string(&vocab).unwrap();
    let shorter: String = text.lines().take(text.lines().count() - 1).map(|l| format!("{l}\n")).collect();
    fs::write(&vocab, shorter).unwrap();
    let out = dir.path().join("pred.conll");
    let o = run(&["predict", "--model", s(&ckpt), "--input", s(&fixture("encourage.conll")), "--output", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("word vocabulary"), "{}", stderr(&o));
    assert!(!out.exists());
}

// ---- inspect ----

fn inspect(ckpt: &Path, layer: &str, head: &str, tsv: Option<&Path>) -> Output {
    let mut args = vec![
        "inspect",
        "--model",
        s(ckpt),
        "--input",
        s(Box::leak(Box::new(fixture("encourage.conll")))),
        "--trees",
        "gold",
        "--sentence",
        "1",
        "--layer",
        layer,
        "--head",
        head,
    ];
    if let Some(p) = tsv {
        args.extend(["--tsv", s(p)]);
    }
    run(&args)
}

fn printed_rows(out: &str) -> Vec<Vec<f64>> {
    out.lines()
        .skip(2)
        .map(|l| l.split_whitespace().skip(1).filter_map(|v| v.parse().ok()).collect())
        .collect()
}

#[test]
fn lisa_head_dump_is_one_hot_at_the_gold_head() {
    let dir = TempDir::new().unwrap();
    let (ckpt, _) = train(&dir, "lisa", &["--steps", "5", "--mode", "lisa", "--repr", "dep", "--repr", "rel", "--trees", "gold"]);
    let tsv = dir.path().join("w.tsv");
    let o = inspect(&ckpt, "2", "0", Some(&tsv));
    assert!(o.status.success(), "{}", stderr(&o));
    let heads = [3, 3, 3, 3, 3, 5];
    for (i, row) in printed_rows(&stdout(&o)).iter().enumerate() {
        assert_eq!(row.len(), 6);
        for (j, &v) in row.iter().enumerate() {
            assert_eq!(v, if j + 1 == heads[i] { 1.0 } else { 0.0 }, "row {i}");
        }
    }
    // the full-precision dump matches the in-memory weights exactly
    let model: Model = load_model(&ckpt).unwrap();
    let corpus = read_corpus(&fs::read_to_string(fixture("encourage.conll")).unwrap()).unwrap();
    let trees = trees_for(&corpus, &TreeSource::Gold).unwrap();
    for (layer, head) in [(2, 0), (1, 1)] {
        let o = inspect(&ckpt, &layer.to_string(), &head.to_string(), Some(&tsv));
        assert!(o.status.success());
        let (_, attention) = model.run(&corpus[0], 3, &trees[0]).unwrap();
        let w = &attention[layer - 1][head];
        let dumped: Vec<Vec<f64>> = fs::read_to_string(&tsv)
            .unwrap()
            .lines()
            .map(|l| l.split('\t').map(|v| v.parse().unwrap()).collect())
            .collect();
        for (i, row) in dumped.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v, w.at(i, j));
            }
        }
    }
}

#[test]
fn standard_head_rows_sum_to_one() {
    let dir = TempDir::new().unwrap();
    let (ckpt, _) = train(&dir, "m", &["--steps", "5"]);
    let o = run(&[
        "inspect", "--model", s(&ckpt), "--input", s(&fixture("encourage.conll")), "--sentence", "1", "--layer", "1", "--head", "1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for row in printed_rows(&stdout(&o)) {
        // six values each rounded to three places
        assert!((row.iter().sum::<f64>() - 1.0).abs() <= 0.003 + 1e-12, "{row:?}");
    }
}

#[test]
fn inspect_reports_index_ranges() {
    let dir = TempDir::new().unwrap();
    let (ckpt, _) = train(&dir, "m", &["--steps", "2"]);
    let o = inspect(&ckpt, "3", "0", None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("layer 3 is outside 1..=2"), "{}", stderr(&o));
    let o = inspect(&ckpt, "1", "2", None);
    assert!(stderr(&o).contains("head 2 is outside 0..=1"));
}
