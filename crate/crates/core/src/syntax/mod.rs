//! Dependency trees and the syntactic representations derived from them:
//! head words, relation labels, tree-position paths (DepPath), relation
//! label paths (RelPath), the one-hot head matrix used for head
//! replacement, and AutoDel pruning of erroneous arcs.

mod prune;
mod tree;
mod vocab;

use thiserror::Error;

pub use prune::{prune_erroneous_arcs, PrunedTree};
pub use tree::{
    build_tree, head_positions, one_hot_head_matrix, partial_lca, path_feature, Arcs,
    DependencyTree, PathFeature,
};
pub use vocab::{build_syntax_vocab, syntax_strings, Vocab, VocabKind, PAD, ROOT_WORD, UNK};
pub(crate) use vocab::{head_word, pos_tag};

use crate::conll::{ConllError, Sentence, TreeColumns};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SyntaxError {
    #[error("dependency cycle through token {token}")]
    CyclicTree { token: usize },

    #[error("token {token} has head {head} outside 0..={len}")]
    IndexOutOfRange { token: usize, head: usize, len: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("{0}")]
    Vocab(String),

    #[error(transparent)]
    Conll(#[from] ConllError),
}

pub type Result<T> = std::result::Result<T, SyntaxError>;

/// Default maximum tree distance for a RelPath to keep its own id.
pub const MAX_REL_PATH_DISTANCE: usize = 4;
/// Default minimum training frequency for a RelPath to keep its own id.
pub const MIN_REL_PATH_FREQ: usize = 10;

/// Vocabulary id of a RelPath feature, or [`UNK`] when the endpoints are
/// more than `max_dist` arcs apart or the path was seen fewer than
/// `min_freq` times in training.
pub fn filter_rel_path(feature: &PathFeature, vocab: &Vocab, max_dist: usize, min_freq: usize) -> usize {
    if feature.distance > max_dist {
        return UNK;
    }
    match vocab.get(&feature.rel_path) {
        Some(id) if vocab.freq(id) >= min_freq => id,
        _ => UNK,
    }
}

/// Where dependency trees come from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TreeSource {
    /// Gold `HEAD`/`DEPREL` columns.
    Gold,
    /// Predicted `PHEAD`/`PDEPREL` columns.
    Predicted,
    /// Predicted trees with every arc that disagrees with gold deleted.
    AutoDel,
}

/// One (possibly partial) tree per sentence.
pub fn trees_for(corpus: &[Sentence], source: &TreeSource) -> Result<Vec<PrunedTree>> {
    corpus
        .iter()
        .map(|s| match source {
            TreeSource::Gold => Ok(PrunedTree::from(&DependencyTree::from_sentence(s, TreeColumns::Gold)?)),
            TreeSource::Predicted => Ok(PrunedTree::from(&DependencyTree::from_sentence(
                s,
                TreeColumns::Predicted,
            )?)),
            TreeSource::AutoDel => {
                let gold = DependencyTree::from_sentence(s, TreeColumns::Gold)?;
                let auto = DependencyTree::from_sentence(s, TreeColumns::Predicted)?;
                prune_erroneous_arcs(&auto, &gold)
            }
        })
        .collect()
}
