//! Self-attention encoder with three ways of adding syntax.

mod layers;
mod params;

use synsrl_tensor::{Graph, Rng, Scalar, Tensor, Var};

pub use layers::{
    build_input, encoder_block, encoder_block_ordered, ffn, lisa_head, multi_head, relaware_attention,
    scaled_dot_attention, sinusoidal_positions, BlockOrder, InputVars,
};
pub use params::{wo_width, Binding, ParamStore};

use crate::config::{ModelConfig, Repr};
use crate::conll::Sentence;
use crate::error::{Error, Result};
use crate::syntax::{filter_rel_path, head_word, one_hot_head_matrix, path_feature, pos_tag, Arcs, UNK};
use crate::vocabs::{RoleLabels, Vocabs};

/// Id-level encoding of one (sentence, predicate) instance.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedInput<T: Scalar = f64> {
    /// 1-based predicate token id.
    pub predicate: usize,
    pub word_ids: Vec<usize>,
    pub pos_ids: Vec<usize>,
    /// 1 at the predicate, 0 elsewhere.
    pub pred_ids: Vec<usize>,
    pub dep_ids: Vec<usize>,
    pub rel_ids: Vec<usize>,
    pub dep_path_ids: Vec<usize>,
    pub rel_path_ids: Vec<usize>,
    pub head_matrix: Tensor<T>,
}

impl<T: Scalar> EncodedInput<T> {
    pub fn len(&self) -> usize {
        self.word_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word_ids.is_empty()
    }

    pub fn ids(&self, r: Repr) -> &[usize] {
        match r {
            Repr::Dep => &self.dep_ids,
            Repr::Rel => &self.rel_ids,
            Repr::DepPath => &self.dep_path_ids,
            Repr::RelPath => &self.rel_path_ids,
        }
    }
}

/// Looks up every id the model may need. Missing tree slots and
/// disconnected paths map to the unknown id.
pub fn encode_instance<T: Scalar, A: Arcs + ?Sized>(
    sentence: &Sentence,
    predicate: usize,
    tree: &A,
    config: &ModelConfig,
    vocabs: &Vocabs,
) -> EncodedInput<T> {
    let n = sentence.len();
    let ids = 1..=n;
    let arc_id = |id: usize, f: &dyn Fn(usize, &str) -> usize| tree.arc(id).map_or(UNK, |(h, l)| f(h, l));
    let paths: Vec<_> = ids.clone().map(|c| path_feature(tree, predicate, c)).collect();
    EncodedInput {
        predicate,
        word_ids: sentence.tokens().iter().map(|t| vocabs.word.id(&t.form)).collect(),
        pos_ids: sentence.tokens().iter().map(|t| vocabs.pos.id(pos_tag(t))).collect(),
        pred_ids: ids.clone().map(|i| usize::from(i == predicate)).collect(),
        dep_ids: ids
            .clone()
            .map(|i| arc_id(i, &|h, _| vocabs.dep_word.id(head_word(sentence, h))))
            .collect(),
        rel_ids: ids.map(|i| arc_id(i, &|_, l| vocabs.rel_label.id(l))).collect(),
        dep_path_ids: paths
            .iter()
            .map(|p| p.as_ref().map_or(UNK, |f| vocabs.dep_path.id(&f.dep_path)))
            .collect(),
        rel_path_ids: paths
            .iter()
            .map(|p| {
                p.as_ref().map_or(UNK, |f| {
                    filter_rel_path(f, &vocabs.rel_path, config.rel_path_max_dist, config.rel_path_min_freq)
                })
            })
            .collect(),
        head_matrix: one_hot_head_matrix(tree),
    }
}

pub struct ForwardOutput {
    /// `n x |labels|` role logits.
    pub logits: Var,
    /// Attention weights per block, per head.
    pub attention: Vec<Vec<Var>>,
}

/// Input layer, `n_blocks` encoder blocks, and the affine prediction layer.
pub fn forward<T: Scalar>(
    bind: &Binding<'_, T>,
    input: &EncodedInput<T>,
    config: &ModelConfig,
    train: bool,
    rng: &mut Rng,
) -> Result<ForwardOutput> {
    let g = bind.graph();
    let vars = build_input(bind, input, config)?;
    let mut x = vars.x;
    let mut attention = Vec::with_capacity(config.n_blocks);
    for layer in 1..=config.n_blocks {
        let (next, w) = encoder_block(bind, x, &vars, config, layer, train, rng)?;
        x = next;
        attention.push(w);
    }
    let logits = g.add(g.matmul(x, bind.var("out.w")?)?, bind.var("out.b")?)?;
    Ok(ForwardOutput { logits, attention })
}

/// Per-token argmax; ties go to the lowest id and the no-role id maps to
/// `None`.
pub fn predict_roles<T: Scalar>(logits: &Tensor<T>, labels: &RoleLabels) -> Result<Vec<Option<String>>> {
    (0..logits.rows())
        .map(|i| {
            let row = logits.row(i);
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteLogits { token: i + 1 });
            }
            let best = row
                .iter()
                .enumerate()
                .fold(0, |best, (j, v)| if *v > row[best] { j } else { best });
            Ok(labels.role(best))
        })
        .collect()
}

/// Logits and, per block, the attention weights of every head.
pub type Evaluated<T> = (Tensor<T>, Vec<Vec<Tensor<T>>>);

/// Configuration, vocabularies and parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T: Scalar = f64> {
    pub config: ModelConfig,
    pub vocabs: Vocabs,
    pub params: ParamStore<T>,
}

impl<T: Scalar> Model<T> {
    pub fn new(config: ModelConfig, vocabs: Vocabs, seed: u64) -> Result<Self> {
        let params = ParamStore::init(&config, &vocabs, &mut Rng::seed(seed))?;
        Ok(Model { config, vocabs, params })
    }

    pub fn encode<A: Arcs + ?Sized>(&self, sentence: &Sentence, predicate: usize, tree: &A) -> EncodedInput<T> {
        encode_instance(sentence, predicate, tree, &self.config, &self.vocabs)
    }

    /// Eval-mode logits and attention weights for one instance.
    pub fn run<A: Arcs + ?Sized>(&self, sentence: &Sentence, predicate: usize, tree: &A) -> Result<Evaluated<T>> {
        let g = Graph::new();
        let bind = Binding::new(&g, &self.params, false);
        let input = self.encode(sentence, predicate, tree);
        // eval mode never draws from the generator
        let out = forward(&bind, &input, &self.config, false, &mut Rng::seed(0))?;
        let attention = out
            .attention
            .iter()
            .map(|heads| heads.iter().map(|&w| g.value(w)).collect())
            .collect();
        Ok((g.value(out.logits), attention))
    }

    pub fn logits<A: Arcs + ?Sized>(&self, sentence: &Sentence, predicate: usize, tree: &A) -> Result<Tensor<T>> {
        Ok(self.run(sentence, predicate, tree)?.0)
    }

    /// `sentence` with every predicate's role column replaced by the
    /// model's predictions.
    pub fn predict<A: Arcs + ?Sized>(&self, sentence: &Sentence, tree: &A) -> Result<Sentence> {
        let mut out = sentence.clone();
        for (k, &p) in sentence.predicates().iter().enumerate() {
            let roles = predict_roles(&self.logits(sentence, p, tree)?, &self.vocabs.roles)?;
            out = out.with_roles(k, &roles)?;
        }
        Ok(out)
    }
}
