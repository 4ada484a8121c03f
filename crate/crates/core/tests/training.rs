use proptest::prelude::*;
use synsrl::config::{Mode, ModelConfig, Repr, TrainSchedule};
use synsrl::conll::{read_corpus, score, Sentence};
use synsrl::encoder::{Model, ParamStore};
use synsrl::synthetic::separable_fixture;
use synsrl::syntax::{trees_for, PrunedTree, TreeSource};
use synsrl::training::{
    corpus_loss, evaluate, label_smoothed_cross_entropy, load_model, make_batches, smoothed_cross_entropy_sum,
    smoothed_targets, Adadelta, Trainer, CHECKPOINT_FILES,
};
use synsrl::Error;
use synsrl_tensor::{Graph, Rng, Tensor};

fn fixture() -> (Vec<Sentence>, Vec<PrunedTree>) {
    let corpus = separable_fixture();
    let trees = trees_for(&corpus, &TreeSource::Gold).unwrap();
    (corpus, trees)
}

fn all_modes() -> Vec<ModelConfig> {
    let tiny = ModelConfig::tiny();
    vec![
        tiny.clone(),
        tiny.clone().with_mode(Mode::Input, &[Repr::Dep, Repr::Rel]),
        tiny.clone().with_mode(Mode::Lisa, &[Repr::Dep, Repr::Rel]),
        tiny.with_mode(Mode::RelAwe, &[Repr::RelPath]),
    ]
}

fn schedule(max_steps: usize, seed: u64) -> TrainSchedule {
    TrainSchedule {
        max_steps,
        eval_every: 10,
        seed,
        word_budget: 40,
    }
}

fn loss_of(logits: Vec<Vec<f64>>, targets: &[usize], eps: f64) -> (f64, Tensor) {
    let g = Graph::<f64>::new();
    let x = g.param(Tensor::from_rows(&logits).unwrap());
    let l = smoothed_cross_entropy_sum(&g, x, targets, eps).unwrap();
    let grads = g.backward(l).unwrap();
    (g.value(l).data()[0], grads.get(x).unwrap().clone())
}

// ---- loss ----

#[test]
fn smoothed_targets_spread_eps_over_the_other_labels() {
    let q: Tensor = smoothed_targets(&[2, 0], 5, 0.1).unwrap();
    assert_eq!(q.row(0), [0.025, 0.025, 0.9, 0.025, 0.025]);
    assert!((q.row(1).iter().sum::<f64>() - 1.0).abs() < 1e-15);
    let single: Tensor = smoothed_targets(&[0, 0], 1, 0.1).unwrap();
    assert_eq!(single.data(), [1.0, 1.0]);
    assert!(matches!(
        smoothed_targets::<f64>(&[3], 3, 0.1),
        Err(Error::TargetOutOfRange { target: 3, classes: 3 })
    ));
}

#[test]
fn uniform_logits_cost_log_of_the_label_count() {
    for eps in [0.0, 0.1, 0.5] {
        let (l, _) = loss_of(vec![vec![0.3; 7]; 3], &[0, 4, 6], eps);
        assert!((l - 3.0 * 7f64.ln()).abs() < 1e-12);
    }
}

#[test]
fn two_labels_without_smoothing_is_logistic_loss() {
    let rows = vec![vec![0.4, -1.3], vec![2.0, 0.5], vec![-0.2, -0.2]];
    let targets = [1, 0, 1];
    let (l, _) = loss_of(rows.clone(), &targets, 0.0);
    let expect: f64 = rows
        .iter()
        .zip(targets)
        .map(|(r, t)| {
            let z = r[t] - r[1 - t];
            (1.0 + (-z).exp()).ln()
        })
        .sum();
    assert!((l - expect).abs() < 1e-12);
}

#[test]
fn mean_loss_divides_by_the_token_count() {
    let g = Graph::<f64>::new();
    let x = g.constant(Tensor::from_rows(&[vec![1.0, 0.0, -1.0], vec![0.5, 0.5, 2.0]]).unwrap());
    let sum = smoothed_cross_entropy_sum(&g, x, &[0, 2], 0.1).unwrap();
    let mean = label_smoothed_cross_entropy(&g, x, &[0, 2], 0.1).unwrap();
    assert!((g.value(sum).data()[0] / 2.0 - g.value(mean).data()[0]).abs() < 1e-15);
    assert!(smoothed_cross_entropy_sum(&g, x, &[0], 0.1).is_err());
}

fn softmax(r: &[f64]) -> Vec<f64> {
    let m = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = r.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn loss_gradient_is_softmax_minus_target_and_loss_bounds_entropy(
        rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 4), 1..6),
        seed in any::<u64>(),
        eps in 0.0f64..0.5,
    ) {
        let mut rng = Rng::seed(seed);
        let targets: Vec<usize> = rows.iter().map(|_| rng.below(4)).collect();
        let (l, grad) = loss_of(rows.clone(), &targets, eps);
        let q: Tensor = smoothed_targets(&targets, 4, eps).unwrap();
        let mut entropy = 0.0;
        for (i, r) in rows.iter().enumerate() {
            let p = softmax(r);
            for (c, pc) in p.iter().enumerate() {
                prop_assert!((grad.at(i, c) - (pc - q.at(i, c))).abs() < 1e-12);
                if q.at(i, c) > 0.0 {
                    entropy -= q.at(i, c) * q.at(i, c).ln();
                }
            }
        }
        prop_assert!(l >= entropy - 1e-9);
    }
}

// ---- optimizer ----

#[test]
fn adadelta_matches_a_scalar_recurrence() {
    let mut store = ParamStore::new();
    store.insert("x", Tensor::new(vec![1], vec![1.0]).unwrap());
    let mut opt = Adadelta::<f64>::default();
    assert_eq!((opt.rho, opt.eps, opt.lr), (0.95, 1e-6, 1.0));
    let (mut x, mut eg2, mut edx2) = (1.0f64, 0.0f64, 0.0f64);
    for g in [0.5, -0.25, 2.0, 0.0] {
        opt.update(&mut store, &[("x".to_string(), Tensor::new(vec![1], vec![g]).unwrap())]).unwrap();
        eg2 = 0.95 * eg2 + 0.05 * g * g;
        let dx = ((edx2 + 1e-6) / (eg2 + 1e-6)).sqrt() * g;
        edx2 = 0.95 * edx2 + 0.05 * dx * dx;
        x -= dx;
        assert!((store.get("x").unwrap().data()[0] - x).abs() < 1e-15);
        assert!((opt.eg2("x").unwrap().data()[0] - eg2).abs() < 1e-15);
        assert!((opt.edx2("x").unwrap().data()[0] - edx2).abs() < 1e-15);
    }
}

#[test]
fn zero_gradients_only_decay_the_averages() {
    let mut store = ParamStore::new();
    store.insert("x", Tensor::new(vec![2], vec![1.0, -1.0]).unwrap());
    store.insert("untouched", Tensor::new(vec![1], vec![3.0]).unwrap());
    let mut opt = Adadelta::<f64>::default();
    let g = |a: f64, b: f64| vec![("x".to_string(), Tensor::new(vec![2], vec![a, b]).unwrap())];
    opt.update(&mut store, &g(1.0, 1.0)).unwrap();
    let before = store.get("x").unwrap().clone();
    let eg2 = opt.eg2("x").unwrap().clone();
    opt.update(&mut store, &g(0.0, 0.0)).unwrap();
    assert_eq!(store.get("x").unwrap(), &before);
    for (a, b) in opt.eg2("x").unwrap().data().iter().zip(eg2.data()) {
        assert!((a - 0.95 * b).abs() < 1e-18);
    }
    assert_eq!(store.get("untouched").unwrap().data(), [3.0]);
    assert!(opt.eg2("untouched").is_none());
    let wrong = vec![("x".to_string(), Tensor::new(vec![3], vec![0.0; 3]).unwrap())];
    assert!(opt.update(&mut store, &wrong).is_err());
    let unknown = vec![("y".to_string(), Tensor::new(vec![1], vec![0.0]).unwrap())];
    assert!(opt.update(&mut store, &unknown).is_err());
}

// ---- batching ----

#[test]
fn equal_sentences_pack_in_pairs() {
    let batches = make_batches(&[10; 10], 25, &mut Rng::seed(1));
    assert_eq!(batches.len(), 5);
    assert!(batches.iter().all(|b| b.items.len() == 2 && b.words == 20));
}

#[test]
fn oversized_instances_travel_alone() {
    let batches = make_batches(&[5000, 10, 10], 4096, &mut Rng::seed(2));
    let big = batches.iter().find(|b| b.items.contains(&0)).unwrap();
    assert_eq!(big.items, [0]);
    assert_eq!(big.words, 5000);
}

proptest! {
    #[test]
    fn batches_partition_the_instances(
        words in prop::collection::vec(1usize..60, 0..80),
        budget in 1usize..200,
        seed in any::<u64>(),
    ) {
        let batches = make_batches(&words, budget, &mut Rng::seed(seed));
        let mut seen: Vec<usize> = batches.iter().flat_map(|b| b.items.clone()).collect();
        seen.sort();
        prop_assert_eq!(seen, (0..words.len()).collect::<Vec<_>>());
        for b in &batches {
            prop_assert!(!b.items.is_empty());
            prop_assert_eq!(b.words, b.items.iter().map(|&i| words[i]).sum::<usize>());
            prop_assert!(b.words <= budget || b.items.len() == 1);
        }
        // same seed, same batches
        prop_assert_eq!(batches, make_batches(&words, budget, &mut Rng::seed(seed)));
    }
}

// ---- training ----

#[test]
fn every_mode_fits_the_separable_fixture() {
    let (corpus, trees) = fixture();
    for config in all_modes() {
        let mode = config.mode;
        let mut trainer = Trainer::<f64>::new(config, schedule(2000, 7), &corpus, &trees).unwrap();
        let mut f1 = 0.0;
        while trainer.steps_done() < 2000 && f1 < 1.0 {
            for _ in 0..25 {
                trainer.step().unwrap();
            }
            f1 = evaluate(&trainer.model, &corpus, &trees, true).unwrap().f1;
        }
        assert_eq!(f1, 1.0, "{mode} stopped at step {}", trainer.steps_done());
    }
}

#[test]
fn loss_falls_within_fifty_steps() {
    let (corpus, trees) = fixture();
    for config in all_modes() {
        let mut trainer = Trainer::<f64>::new(config, schedule(50, 3), &corpus, &trees).unwrap();
        let start = corpus_loss(&trainer.model, &corpus, &trees).unwrap();
        for _ in 0..50 {
            trainer.step().unwrap();
        }
        let end = corpus_loss(&trainer.model, &corpus, &trees).unwrap();
        assert!(end < start, "{}: {start} -> {end}", trainer.model.config.mode);
    }
}

#[test]
fn every_parameter_moves_on_the_first_update() {
    let (corpus, trees) = fixture();
    for config in all_modes() {
        let sched = TrainSchedule {
            word_budget: 10_000,
            ..schedule(1, 5)
        };
        let mut trainer = Trainer::<f64>::new(config, sched, &corpus, &trees).unwrap();
        let before = trainer.model.params.clone();
        trainer.step().unwrap();
        for (name, p) in before.iter() {
            assert_ne!(trainer.model.params.get(name).unwrap(), p, "{}: {name}", trainer.model.config.mode);
        }
    }
}

fn log_of(seed: u64) -> String {
    let (corpus, trees) = fixture();
    let config = ModelConfig::tiny().with_mode(Mode::RelAwe, &[Repr::DepPath, Repr::RelPath]);
    let mut trainer = Trainer::<f64>::new(config, schedule(30, seed), &corpus, &trees).unwrap();
    let mut log = Vec::new();
    trainer.train(Some((&corpus, &trees)), None, &mut log).unwrap();
    String::from_utf8(log).unwrap()
}

#[test]
fn fixed_seed_logs_are_identical() {
    let a = log_of(11);
    assert_eq!(a, log_of(11));
    assert_ne!(a, log_of(12));
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines.len(), 33);
    assert!(lines[0].starts_with("step=1 loss="));
    assert!(lines[10].starts_with("step=10 loss=") && lines[10].contains(" dev_F1="));
}

#[test]
fn resuming_reproduces_the_next_losses() {
    let (corpus, trees) = fixture();
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("ckpt");
    for config in all_modes() {
        // 7 steps leaves the batch cursor in the middle of an epoch
        let mut a = Trainer::<f64>::new(config, schedule(100, 9), &corpus, &trees).unwrap();
        for _ in 0..7 {
            a.step().unwrap();
        }
        a.save(&ckpt).unwrap();
        let expect: Vec<f64> = (0..12).map(|_| a.step().unwrap()).collect();
        let mut b = Trainer::<f64>::resume(&ckpt, &corpus, &trees).unwrap();
        assert_eq!(b.steps_done(), 7);
        let got: Vec<f64> = (0..12).map(|_| b.step().unwrap()).collect();
        assert_eq!(got.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), expect.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(a.model.params, b.model.params);
    }
}

#[test]
fn checkpoints_round_trip_the_model() {
    let (corpus, trees) = fixture();
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("model");
    let config = ModelConfig::tiny().with_mode(Mode::Lisa, &[Repr::Dep, Repr::RelPath]);
    let mut trainer = Trainer::<f64>::new(config, schedule(20, 4), &corpus, &trees).unwrap();
    let summary = trainer.train(Some((&corpus, &trees)), Some(&ckpt), &mut std::io::sink()).unwrap();
    assert_eq!(summary.steps, 20);
    for f in CHECKPOINT_FILES {
        assert!(ckpt.join(f).is_file(), "{f}");
    }
    assert!(!dir.path().join("model.partial").exists());
    let model: Model = load_model(&ckpt).unwrap();
    let (best_step, best) = summary.best.unwrap();
    assert_eq!(evaluate(&model, &corpus, &trees, true).unwrap(), best);
    if best_step == 20 {
        assert_eq!(model.params, trainer.model.params);
    }
    std::fs::write(ckpt.join("config.txt"), "mode=none\nd_w=12\n").unwrap();
    assert!(load_model::<f64>(&ckpt).is_err());
}

#[test]
fn evaluation_is_deterministic_and_matches_the_scorer() {
    let (corpus, trees) = fixture();
    let trainer = Trainer::<f64>::new(ModelConfig::tiny(), schedule(1, 2), &corpus, &trees).unwrap();
    let a = evaluate(&trainer.model, &corpus, &trees, true).unwrap();
    assert_eq!(a, evaluate(&trainer.model, &corpus, &trees, true).unwrap());
    let predicted: Vec<Sentence> = corpus.iter().zip(&trees).map(|(s, t)| trainer.model.predict(s, t).unwrap()).collect();
    assert_eq!(a, score(&corpus, &predicted, true).unwrap());
    assert!(evaluate(&trainer.model, &corpus, &trees[..3], true).is_err());
}

#[test]
fn corpora_without_predicates_are_rejected() {
    let corpus = read_corpus("1\ta\t_\t_\tNN\tNN\t_\t_\t0\t0\tROOT\tROOT\t_\t_\n").unwrap();
    let trees = trees_for(&corpus, &TreeSource::Gold).unwrap();
    assert!(matches!(
        Trainer::<f64>::new(ModelConfig::tiny(), schedule(1, 1), &corpus, &trees),
        Err(Error::Config(_))
    ));
}
