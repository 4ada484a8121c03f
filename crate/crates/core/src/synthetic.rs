//! Generated corpora with known structure, for training checks.

use synsrl_tensor::Rng;

use crate::conll::{Sentence, Token};
use crate::syntax::{build_tree, DependencyTree};

const LABELS: [&str; 5] = ["SBJ", "OBJ", "TMP", "NMOD", "COMP"];

/// Heads of a random tree over `n` tokens: tokens are visited in random
/// order and each attaches to one visited before it (the first to the
/// root).
pub fn random_heads(n: usize, rng: &mut Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (1..=n).collect();
    rng.shuffle(&mut order);
    let mut heads = vec![0; n];
    for i in 1..n {
        heads[order[i] - 1] = order[rng.below(i)];
    }
    heads
}

fn random_labels(n: usize, rng: &mut Rng) -> Vec<String> {
    (0..n).map(|_| LABELS[rng.below(LABELS.len())].to_string()).collect()
}

fn descends_from(heads: &[usize], node: usize, ancestor: usize) -> bool {
    let mut x = node;
    while x != 0 {
        if x == ancestor {
            return true;
        }
        x = heads[x - 1];
    }
    false
}

/// Reattaches each token, with probability `rate`, to a different head
/// that keeps the tree acyclic, and gives it a different label. Returns
/// the corrupted copy.
pub fn corrupt_tree(heads: &[usize], labels: &[String], rate: f64, rng: &mut Rng) -> (Vec<usize>, Vec<String>) {
    let mut heads = heads.to_vec();
    let mut labels = labels.to_vec();
    for i in 1..=heads.len() {
        if !rng.bernoulli(rate) {
            continue;
        }
        let options: Vec<usize> = (0..=heads.len())
            .filter(|&h| h != i && h != heads[i - 1] && (h == 0 || !descends_from(&heads, h, i)))
            .collect();
        if !options.is_empty() {
            heads[i - 1] = options[rng.below(options.len())];
        }
        let others: Vec<&str> = LABELS.iter().copied().filter(|l| *l != labels[i - 1]).collect();
        labels[i - 1] = others[rng.below(others.len())].to_string();
    }
    (heads, labels)
}

fn sentence(
    forms: &[String],
    tags: &[&str],
    gold: (&[usize], &[String]),
    pred: (&[usize], &[String]),
    predicates: &[usize],
    roles: &[Vec<Option<String>>],
) -> Sentence {
    let tokens = (0..forms.len())
        .map(|i| {
            let id = i + 1;
            let is_pred = predicates.contains(&id);
            Token {
                id,
                form: forms[i].clone(),
                lemma: Some(forms[i].clone()),
                plemma: Some(forms[i].clone()),
                pos: Some(tags[i].to_string()),
                ppos: Some(tags[i].to_string()),
                feat: None,
                pfeat: None,
                head: gold.0[i],
                phead: Some(pred.0[i]),
                deprel: gold.1[i].clone(),
                pdeprel: Some(pred.1[i].clone()),
                fill_pred: is_pred,
                pred_sense: is_pred.then(|| format!("{}.01", forms[i])),
                apreds: roles.iter().map(|col| col[i].clone()).collect(),
            }
        })
        .collect();
    Sentence::new(tokens).expect("generated sentences are well formed")
}

/// Ten short sentences whose roles are a fixed function of the word form,
/// so any model that can read its input can fit them exactly. Gold and
/// predicted trees coincide.
pub fn separable_fixture() -> Vec<Sentence> {
    const ROLES: [Option<&str>; 5] = [None, Some("A0"), Some("A1"), Some("A2"), Some("AM-TMP")];
    let mut rng = Rng::seed(0x5eed_0010);
    (0..10)
        .map(|_| {
            let n = 5 + rng.below(4);
            let n_preds = 1 + rng.below(2);
            let mut slots: Vec<usize> = (1..=n).collect();
            rng.shuffle(&mut slots);
            let mut predicates: Vec<usize> = slots[..n_preds].to_vec();
            predicates.sort();
            let forms: Vec<String> = (1..=n)
                .map(|id| {
                    if predicates.contains(&id) {
                        format!("v{}", rng.below(4))
                    } else {
                        format!("w{}", rng.below(15))
                    }
                })
                .collect();
            let role_of = |form: &str| -> Option<String> {
                let k: usize = form[1..].parse().expect("generated form");
                ROLES[k % ROLES.len()].map(str::to_string)
            };
            let roles: Vec<Vec<Option<String>>> = predicates
                .iter()
                .map(|_| {
                    forms
                        .iter()
                        .enumerate()
                        .map(|(i, f)| if predicates.contains(&(i + 1)) { None } else { role_of(f) })
                        .collect()
                })
                .collect();
            let heads = random_heads(n, &mut rng);
            let labels = random_labels(n, &mut rng);
            let tags = vec!["NN"; n];
            sentence(&forms, &tags, (&heads, &labels), (&heads, &labels), &predicates, &roles)
        })
        .collect()
}

/// Role of a candidate as a function of its gold relation path.
pub fn role_for_rel_path(rel_path: &str) -> Option<&'static str> {
    match rel_path {
        "SBJ," => Some("A0"),
        "OBJ," => Some("A1"),
        "TMP," => Some("AM-TMP"),
        "COMP_OBJ," => Some("A2"),
        _ => None,
    }
}

/// Sentences with random words and trees, one predicate each, and roles
/// determined by [`role_for_rel_path`] on the gold tree. The predicted
/// columns hold the gold tree with a `corruption` share of its arcs
/// reattached and relabeled.
pub fn rel_path_corpus(sentences: usize, corruption: f64, seed: u64) -> Vec<Sentence> {
    let mut rng = Rng::seed(seed);
    (0..sentences)
        .map(|_| {
            let n = 5 + rng.below(6);
            let heads = random_heads(n, &mut rng);
            let labels = random_labels(n, &mut rng);
            let tree: DependencyTree = build_tree(heads.clone(), labels.clone()).expect("generated tree");
            let with_children: Vec<usize> = (1..=n).filter(|&p| heads.contains(&p)).collect();
            let predicate = with_children[rng.below(with_children.len())];
            let roles: Vec<Option<String>> = (1..=n)
                .map(|c| {
                    if c == predicate {
                        None
                    } else {
                        role_for_rel_path(&tree.rel_path(predicate, c)).map(str::to_string)
                    }
                })
                .collect();
            let forms: Vec<String> = (0..n).map(|_| format!("w{}", rng.below(30))).collect();
            let tags: Vec<&str> = (0..n).map(|_| ["NN", "VV", "AD", "P"][rng.below(4)]).collect();
            let (ph, pl) = corrupt_tree(&heads, &labels, corruption, &mut rng);
            let mut forms = forms;
            forms[predicate - 1] = format!("v{}", rng.below(5));
            sentence(&forms, &tags, (&heads, &labels), (&ph, &pl), &[predicate], &[roles])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conll::TreeColumns;

    #[test]
    fn fixtures_are_valid_and_deterministic() {
        let a = separable_fixture();
        assert_eq!(a.len(), 10);
        assert_eq!(a, separable_fixture());
        for s in &a {
            DependencyTree::from_sentence(s, TreeColumns::Gold).unwrap();
            assert!(!s.predicates().is_empty());
        }
        let c = rel_path_corpus(50, 0.3, 7);
        assert_eq!(c, rel_path_corpus(50, 0.3, 7));
        let mut changed = 0;
        let mut total = 0;
        for s in &c {
            DependencyTree::from_sentence(s, TreeColumns::Predicted).unwrap();
            for t in s.tokens() {
                total += 1;
                changed += usize::from(Some(t.head) != t.phead || Some(&t.deprel) != t.pdeprel.as_ref());
            }
        }
        let share = changed as f64 / total as f64;
        assert!((0.2..0.4).contains(&share), "corrupted share {share}");
    }
}
