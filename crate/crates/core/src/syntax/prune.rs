use super::tree::{Arcs, DependencyTree};
use super::{Result, SyntaxError};

/// A tree with some arcs deleted. Kept slots are unchanged gold arcs;
/// deleted slots are never replaced.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrunedTree {
    slots: Vec<Option<(usize, String)>>,
}

impl PrunedTree {
    /// `len` tokens with every slot deleted, for models that ignore syntax.
    pub fn detached(len: usize) -> Self {
        PrunedTree { slots: vec![None; len] }
    }

    pub fn slots(&self) -> &[Option<(usize, String)>] {
        &self.slots
    }

    /// Number of deleted slots.
    pub fn absent(&self) -> usize {
        self.slots.iter().filter(|s| s.is_none()).count()
    }
}

impl From<&DependencyTree> for PrunedTree {
    fn from(t: &DependencyTree) -> Self {
        PrunedTree {
            slots: t
                .heads()
                .iter()
                .zip(t.labels())
                .map(|(&h, l)| Some((h, l.clone())))
                .collect(),
        }
    }
}

impl Arcs for PrunedTree {
    fn len(&self) -> usize {
        self.slots.len()
    }

    fn arc(&self, id: usize) -> Option<(usize, &str)> {
        self.slots[id - 1].as_ref().map(|(h, l)| (*h, l.as_str()))
    }
}

/// Keeps slot `i` iff the automatic head and label both equal gold.
pub fn prune_erroneous_arcs(auto: &DependencyTree, gold: &DependencyTree) -> Result<PrunedTree> {
    if auto.len() != gold.len() {
        return Err(SyntaxError::LengthMismatch {
            left: auto.len(),
            right: gold.len(),
        });
    }
    let slots = (1..=auto.len())
        .map(|id| {
            let keep = auto.head(id) == gold.head(id) && auto.label(id) == gold.label(id);
            keep.then(|| (gold.head(id), gold.label(id).to_string()))
        })
        .collect();
    Ok(PrunedTree { slots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::build_tree;

    fn tree(heads: &[usize], labels: &[&str]) -> DependencyTree {
        build_tree(heads.to_vec(), labels.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    #[test]
    fn identity_prunes_nothing() {
        let g = tree(&[3, 3, 0, 3, 3, 5], &["ROOT", "SBJ", "ROOT", "COMP", "COMP", "COMP"]);
        let p = prune_erroneous_arcs(&g, &g).unwrap();
        assert_eq!(p.absent(), 0);
        assert_eq!(p, PrunedTree::from(&g));
    }

    #[test]
    fn single_error_prunes_one_slot() {
        let g = tree(&[2, 0, 2], &["A", "R", "B"]);
        let wrong_head = tree(&[3, 0, 2], &["A", "R", "B"]);
        let wrong_label = tree(&[2, 0, 2], &["A", "R", "C"]);
        let p = prune_erroneous_arcs(&wrong_head, &g).unwrap();
        assert_eq!(p.slots()[0], None);
        assert_eq!(p.absent(), 1);
        let p = prune_erroneous_arcs(&wrong_label, &g).unwrap();
        assert_eq!(p.slots()[2], None);
        assert_eq!(p.slots()[0], Some((2, "A".to_string())));
    }

    #[test]
    fn length_mismatch() {
        let a = tree(&[0], &["R"]);
        let b = tree(&[0, 1], &["R", "X"]);
        assert!(matches!(
            prune_erroneous_arcs(&a, &b),
            Err(SyntaxError::LengthMismatch { left: 1, right: 2 })
        ));
    }
}
