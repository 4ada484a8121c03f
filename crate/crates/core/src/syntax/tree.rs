use synsrl_tensor::{Scalar, Tensor};

use super::{Result, SyntaxError};
use crate::conll::{Sentence, TreeColumns};

/// Read access to dependency arcs, some of which may be missing.
///
/// Token ids are 1-based and `0` is the virtual root.
pub trait Arcs {
    fn len(&self) -> usize;

    /// Head and label of token `id`, or `None` when the slot is absent.
    fn arc(&self, id: usize) -> Option<(usize, &str)>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A validated dependency tree: every token reaches the virtual root.
/// Several tokens may attach to the root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DependencyTree {
    heads: Vec<usize>,
    labels: Vec<String>,
    depths: Vec<usize>,
}

/// Validates `heads` (1-based, `0` = root) and `labels` into a tree.
pub fn build_tree(heads: Vec<usize>, labels: Vec<String>) -> Result<DependencyTree> {
    DependencyTree::new(heads, labels)
}

impl DependencyTree {
    pub fn new(heads: Vec<usize>, labels: Vec<String>) -> Result<Self> {
        let n = heads.len();
        if labels.len() != n {
            return Err(SyntaxError::LengthMismatch {
                left: n,
                right: labels.len(),
            });
        }
        if let Some(i) = heads.iter().position(|&h| h > n) {
            return Err(SyntaxError::IndexOutOfRange {
                token: i + 1,
                head: heads[i],
                len: n,
            });
        }
        // depth 0 is the virtual root; 0 in `depths` below means unknown
        let mut depths = vec![0usize; n + 1];
        let mut on_path = vec![false; n + 1];
        for start in 1..=n {
            let mut chain = Vec::new();
            let mut node = start;
            while node != 0 && depths[node] == 0 {
                if on_path[node] {
                    return Err(SyntaxError::CyclicTree { token: node });
                }
                on_path[node] = true;
                chain.push(node);
                node = heads[node - 1];
            }
            let mut d = if node == 0 { 0 } else { depths[node] };
            for &c in chain.iter().rev() {
                d += 1;
                depths[c] = d;
                on_path[c] = false;
            }
        }
        Ok(DependencyTree {
            heads,
            labels,
            depths,
        })
    }

    pub fn from_sentence(s: &Sentence, which: TreeColumns) -> Result<Self> {
        let (heads, labels) = s.dependencies(which)?;
        Self::new(heads, labels)
    }

    pub fn heads(&self) -> &[usize] {
        &self.heads
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn head(&self, id: usize) -> usize {
        self.heads[id - 1]
    }

    pub fn label(&self, id: usize) -> &str {
        &self.labels[id - 1]
    }

    /// Number of arcs between `id` and the virtual root (root itself is 0).
    pub fn depth(&self, id: usize) -> usize {
        self.depths[id]
    }

    /// `id`, its parent, ..., ending with the virtual root `0`.
    pub fn root_path(&self, id: usize) -> Vec<usize> {
        let mut path = vec![id];
        let mut node = id;
        while node != 0 {
            node = self.heads[node - 1];
            path.push(node);
        }
        path
    }

    /// Lowest common ancestor of `a` and `b`; may be the virtual root `0`.
    pub fn lca(&self, mut a: usize, mut b: usize) -> usize {
        while self.depths[a] > self.depths[b] {
            a = self.heads[a - 1];
        }
        while self.depths[b] > self.depths[a] {
            b = self.heads[b - 1];
        }
        while a != b {
            a = self.heads[a - 1];
            b = self.heads[b - 1];
        }
        a
    }

    pub fn path_feature(&self, predicate: usize, candidate: usize) -> PathFeature {
        path_feature(self, predicate, candidate).expect("a complete tree connects every pair")
    }

    /// `"<candidate-side distance>,<predicate-side distance>"`.
    pub fn dep_path(&self, predicate: usize, candidate: usize) -> String {
        self.path_feature(predicate, candidate).dep_path
    }

    /// Label chains from the common ancestor down to the candidate and down
    /// to the predicate, each joined by `_`, separated by `,`.
    pub fn rel_path(&self, predicate: usize, candidate: usize) -> String {
        self.path_feature(predicate, candidate).rel_path
    }
}

impl Arcs for DependencyTree {
    fn len(&self) -> usize {
        self.heads.len()
    }

    fn arc(&self, id: usize) -> Option<(usize, &str)> {
        Some((self.heads[id - 1], &self.labels[id - 1]))
    }
}

/// Tree-based position feature and shortest relation path for one
/// (predicate, candidate) pair.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PathFeature {
    /// e.g. `"2,0"`
    pub dep_path: String,
    /// e.g. `"COMP_COMP,"`
    pub rel_path: String,
    /// Number of arcs between the two endpoints (sum of both sides).
    pub distance: usize,
}

/// Climbs from `id` until the root or a node whose own arc is absent.
fn chain<A: Arcs + ?Sized>(tree: &A, id: usize) -> Vec<usize> {
    let mut out = vec![id];
    let mut node = id;
    while node != 0 {
        match tree.arc(node) {
            Some((h, _)) => {
                node = h;
                out.push(node);
            }
            None => break,
        }
        if out.len() > tree.len() + 1 {
            // only reachable for cyclic input, which validated trees exclude
            break;
        }
    }
    out
}

/// Path feature between two tokens of a possibly partial tree. `None` when
/// the tokens are not connected (a pruned slot separates them).
pub fn path_feature<A: Arcs + ?Sized>(tree: &A, predicate: usize, candidate: usize) -> Option<PathFeature> {
    let cand_chain = chain(tree, candidate);
    let pred_chain = chain(tree, predicate);
    if cand_chain.last() != pred_chain.last() {
        return None;
    }
    let (ci, pi) = cand_chain
        .iter()
        .enumerate()
        .find_map(|(ci, n)| pred_chain.iter().position(|m| m == n).map(|pi| (ci, pi)))?;
    let labels = |nodes: &[usize]| -> String {
        nodes
            .iter()
            .rev()
            .map(|&n| tree.arc(n).map(|(_, l)| l).unwrap_or_default())
            .collect::<Vec<_>>()
            .join("_")
    };
    Some(PathFeature {
        dep_path: format!("{ci},{pi}"),
        rel_path: format!("{},{}", labels(&cand_chain[..ci]), labels(&pred_chain[..pi])),
        distance: ci + pi,
    })
}

/// Lowest common ancestor in a possibly partial tree.
pub fn partial_lca<A: Arcs + ?Sized>(tree: &A, a: usize, b: usize) -> Option<usize> {
    let ca = chain(tree, a);
    let cb = chain(tree, b);
    if ca.last() != cb.last() {
        return None;
    }
    ca.into_iter().find(|n| cb.contains(n))
}

/// `n x n` matrix whose row `i` is one-hot at the head of token `i + 1`.
/// Root-attached tokens, and tokens whose arc is absent, point at
/// themselves.
pub fn one_hot_head_matrix<T: Scalar, A: Arcs + ?Sized>(tree: &A) -> Tensor<T> {
    let n = tree.len();
    let mut data = vec![T::zero(); n * n];
    for id in 1..=n {
        let col = match tree.arc(id) {
            Some((h, _)) if h != 0 => h,
            _ => id,
        };
        data[(id - 1) * n + col - 1] = T::one();
    }
    Tensor::new(vec![n, n], data).expect("positive length")
}

/// Head index (0-based position) each row of [`one_hot_head_matrix`]
/// selects.
pub fn head_positions<A: Arcs + ?Sized>(tree: &A) -> Vec<usize> {
    (1..=tree.len())
        .map(|id| match tree.arc(id) {
            Some((h, _)) if h != 0 => h - 1,
            _ => id - 1,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn detects_cycles_and_bad_indices() {
        assert_eq!(
            build_tree(vec![2, 1], labels(&["a", "b"])),
            Err(SyntaxError::CyclicTree { token: 1 })
        );
        assert!(matches!(
            build_tree(vec![0, 1, 4, 3], labels(&["a", "b", "c", "d"])),
            Err(SyntaxError::CyclicTree { .. })
        ));
        assert!(matches!(
            build_tree(vec![1], labels(&["a"])),
            Err(SyntaxError::CyclicTree { token: 1 })
        ));
        assert_eq!(
            build_tree(vec![0, 5], labels(&["a", "b"])),
            Err(SyntaxError::IndexOutOfRange {
                token: 2,
                head: 5,
                len: 2
            })
        );
        assert!(matches!(
            build_tree(vec![0], labels(&[])),
            Err(SyntaxError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn multiple_root_attachments_are_allowed() {
        let t = build_tree(vec![0, 0, 1], labels(&["a", "b", "c"])).unwrap();
        assert_eq!(t.lca(3, 2), 0);
        assert_eq!(t.dep_path(2, 3), "2,1");
        assert_eq!(t.rel_path(2, 3), "a_c,b");
        assert_eq!(t.depth(3), 2);
    }

    #[test]
    fn predicate_below_candidate() {
        // 1 <- 2 <- 3 ; predicate 3, candidate 1: ancestor is 1
        let t = build_tree(vec![0, 1, 2], labels(&["R", "X", "Y"])).unwrap();
        assert_eq!(t.dep_path(3, 1), "0,2");
        assert_eq!(t.rel_path(3, 1), ",X_Y");
    }
}
