#![allow(dead_code)]

use std::path::PathBuf;

use synsrl::config::{Mode, ModelConfig, Repr};
use synsrl::conll::{read_corpus, Sentence};
use synsrl::encoder::Model;
use synsrl::syntax::{trees_for, PrunedTree, TreeSource};
use synsrl::vocabs::Vocabs;
use synsrl::Error;
use synsrl::encoder::{build_input, encoder_block, forward, Binding};
use synsrl_tensor::{grad_check, GradCheckReport, Rng, Tensor, TensorError, Var};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap()
}

pub fn fixture(name: &str) -> Vec<Sentence> {
    read_corpus(&fixture_text(name)).unwrap()
}

/// Form of token `id`.
pub fn form(s: &Sentence, id: usize) -> &str {
    &s.token(id).form
}

/// Token id with the given form.
pub fn id_of(s: &Sentence, form: &str) -> usize {
    s.tokens().iter().find(|t| t.form == form).unwrap().id
}

const FIVE_TOKENS: &str = "\
1\t中国\t_\t_\tNR\tNR\t_\t_\t2\t2\tSBJ\tSBJ\t_\t_\tA0
2\t鼓励\t_\t_\tVV\tVV\t_\t_\t0\t0\tROOT\tROOT\tY\t鼓励.01\t_
3\t外商\t_\t_\tNN\tNN\t_\t_\t2\t2\tCOMP\tCOMP\t_\t_\tA1
4\t投资\t_\t_\tVV\tVV\t_\t_\t2\t2\tCOMP\tCOMP\t_\t_\tA2
5\t农业\t_\t_\tNN\tNN\t_\t_\t4\t4\tCOMP\tCOMP\t_\t_\t_
";

pub fn five_tokens() -> (Sentence, PrunedTree) {
    let s = read_corpus(FIVE_TOKENS).unwrap().remove(0);
    let t = trees_for(std::slice::from_ref(&s), &TreeSource::Gold).unwrap().remove(0);
    (s, t)
}

pub fn model_for(config: ModelConfig, s: &Sentence, t: &PrunedTree, seed: u64) -> Model {
    let vocabs = Vocabs::build(std::slice::from_ref(s), std::slice::from_ref(t), 1).unwrap();
    Model::new(config, vocabs, seed).unwrap()
}

pub fn to_tensor_error(e: Error) -> TensorError {
    TensorError::InvalidArgument {
        op: "model",
        reason: e.to_string(),
    }
}

pub fn rows(t: &Tensor) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|i| t.row(i).to_vec()).collect()
}

pub fn random(shape: Vec<usize>, rng: &mut Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.uniform_in(-2.0, 2.0)).collect()).unwrap()
}

pub fn modes() -> Vec<ModelConfig> {
    vec![
        ModelConfig::tiny(),
        ModelConfig {
            d_w: 4,
            d_t: 2,
            d_p: 2,
            d_s: 4,
            ..ModelConfig::tiny()
        }
        .with_mode(Mode::Input, &[Repr::Dep, Repr::Rel]),
        ModelConfig::tiny().with_mode(Mode::Lisa, &[Repr::Dep, Repr::RelPath]),
        ModelConfig {
            relawe_layers: 2,
            ..ModelConfig::tiny()
        }
        .with_mode(Mode::RelAwe, &[Repr::DepPath, Repr::RelPath]),
    ]
}

/// Central-difference check of `names` through either the first encoder
/// block or the full model's logits, in eval mode.
pub fn param_grad_check(
    model: &Model,
    s: &Sentence,
    t: &PrunedTree,
    names: &[String],
    block_only: bool,
    tol: f64,
) -> GradCheckReport {
    let inputs: Vec<Tensor> = names.iter().map(|n| model.params.get(n).unwrap().clone()).collect();
    let predicate = s.predicates()[0];
    let input = model.encode(s, predicate, t);
    grad_check(
        |g, v| {
            let bind = Binding::new(g, &model.params, false);
            for (n, &var) in names.iter().zip(v) {
                bind.bind(n, var);
            }
            let run = || -> synsrl::Result<Var> {
                if block_only {
                    let vars = build_input(&bind, &input, &model.config)?;
                    let (z, _) = encoder_block(&bind, vars.x, &vars, &model.config, 1, false, &mut Rng::seed(0))?;
                    Ok(z)
                } else {
                    Ok(forward(&bind, &input, &model.config, false, &mut Rng::seed(0))?.logits)
                }
            };
            run().map_err(to_tensor_error)
        },
        &inputs,
        1e-5,
        tol,
    )
    .unwrap()
}
