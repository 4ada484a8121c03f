//! Every string-to-id map a model needs, built from the training split.

use std::collections::BTreeSet;
use std::path::Path;

use crate::conll::Sentence;
use crate::error::{io_error, Error, Result};
use crate::syntax::{build_syntax_vocab, Arcs, Vocab, VocabKind};

/// Role labels; id 0 is the no-role label `_`, the rest are sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoleLabels {
    labels: Vec<String>,
}

pub const NO_ROLE: usize = 0;

impl RoleLabels {
    pub fn new<I: IntoIterator<Item = String>>(labels: I) -> Self {
        let set: BTreeSet<String> = labels.into_iter().filter(|l| l != "_").collect();
        let mut all = vec!["_".to_string()];
        all.extend(set);
        RoleLabels { labels: all }
    }

    pub fn from_corpus(corpus: &[Sentence]) -> Self {
        Self::new(
            corpus
                .iter()
                .flat_map(|s| s.tokens().iter())
                .flat_map(|t| t.apreds.iter().flatten().cloned()),
        )
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.len() == 1
    }

    pub fn label(&self, id: usize) -> &str {
        &self.labels[id]
    }

    pub fn id(&self, role: Option<&str>) -> Option<usize> {
        match role {
            None => Some(NO_ROLE),
            Some(r) => self.labels.iter().skip(1).position(|l| l == r).map(|i| i + 1),
        }
    }

    /// `None` for the no-role id.
    pub fn role(&self, id: usize) -> Option<String> {
        (id != NO_ROLE).then(|| self.labels[id].clone())
    }

    pub fn to_text(&self) -> String {
        self.labels.iter().map(|l| format!("{l}\n")).collect()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let labels: Vec<String> = text.lines().map(str::to_string).collect();
        let bad = |reason: &str| Error::Vocab {
            vocab: "role".into(),
            reason: reason.into(),
        };
        if labels.first().map(String::as_str) != Some("_") {
            return Err(bad("first label must be _"));
        }
        if labels.iter().any(|l| l.is_empty() || l.contains(char::is_whitespace)) {
            return Err(bad("empty label or label with whitespace"));
        }
        if labels[1..].windows(2).any(|w| w[0] >= w[1]) || labels[1..].iter().any(|l| l == "_") {
            return Err(bad("labels must be unique and sorted"));
        }
        Ok(RoleLabels { labels })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabs {
    pub word: Vocab,
    pub pos: Vocab,
    pub dep_word: Vocab,
    pub rel_label: Vocab,
    pub dep_path: Vocab,
    pub rel_path: Vocab,
    pub roles: RoleLabels,
}

impl Vocabs {
    /// All vocabularies over `corpus`, with syntax strings read from
    /// `trees` (one per sentence). RelPath frequencies are kept unfiltered
    /// so that frequency filtering can happen at lookup time.
    pub fn build<A: Arcs>(corpus: &[Sentence], trees: &[A], min_freq: usize) -> Result<Self> {
        let get = |kind, min| build_syntax_vocab(corpus, trees, kind, min);
        Ok(Vocabs {
            word: get(VocabKind::Word, min_freq)?,
            pos: get(VocabKind::Pos, min_freq)?,
            dep_word: get(VocabKind::DepWord, min_freq)?,
            rel_label: get(VocabKind::RelLabel, min_freq)?,
            dep_path: get(VocabKind::DepPath, min_freq)?,
            rel_path: get(VocabKind::RelPath, 1)?,
            roles: RoleLabels::from_corpus(corpus),
        })
    }

    pub fn syntax(&self) -> [&Vocab; 6] {
        [&self.word, &self.pos, &self.dep_word, &self.rel_label, &self.dep_path, &self.rel_path]
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        for v in self.syntax() {
            let path = dir.join(format!("vocab.{}.tsv", v.kind()));
            std::fs::write(&path, v.to_text()).map_err(io_error(&path))?;
        }
        let path = dir.join("vocab.role.txt");
        std::fs::write(&path, self.roles.to_text()).map_err(io_error(&path))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let read = |kind: VocabKind| -> Result<Vocab> {
            let path = dir.join(format!("vocab.{kind}.tsv"));
            let text = std::fs::read_to_string(&path).map_err(io_error(&path))?;
            Vocab::from_text(kind, &text).map_err(|e| Error::Vocab {
                vocab: kind.to_string(),
                reason: e.to_string(),
            })
        };
        let path = dir.join("vocab.role.txt");
        let roles = std::fs::read_to_string(&path).map_err(io_error(&path))?;
        Ok(Vocabs {
            word: read(VocabKind::Word)?,
            pos: read(VocabKind::Pos)?,
            dep_word: read(VocabKind::DepWord)?,
            rel_label: read(VocabKind::RelLabel)?,
            dep_path: read(VocabKind::DepPath)?,
            rel_path: read(VocabKind::RelPath)?,
            roles: RoleLabels::from_text(&roles)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn role_labels() {
        let r = RoleLabels::new(["A1", "A0", "_", "A0", "AM-TMP"].map(String::from));
        assert_eq!(r.len(), 4);
        assert_eq!(r.id(None), Some(0));
        assert_eq!(r.id(Some("A0")), Some(1));
        assert_eq!(r.id(Some("AM-TMP")), Some(3));
        assert_eq!(r.id(Some("A9")), None);
        assert_eq!(r.role(0), None);
        assert_eq!(r.role(2).as_deref(), Some("A1"));
        assert_eq!(RoleLabels::from_text(&r.to_text()).unwrap(), r);
        assert!(RoleLabels::from_text("A0\n_\n").is_err());
        assert!(RoleLabels::from_text("_\nA1\nA0\n").is_err());
    }
}
