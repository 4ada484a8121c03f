use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use super::tree::{path_feature, Arcs};
use super::{Result, SyntaxError};
use crate::conll::Sentence;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
const PAD_STR: &str = "<pad>";
const UNK_STR: &str = "<unk>";
/// Dep-word string for tokens attached to the virtual root.
pub const ROOT_WORD: &str = "<root>";

/// Which strings a vocabulary collects.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VocabKind {
    /// Word forms.
    Word,
    /// Part-of-speech tags (predicted column, falling back to gold).
    Pos,
    /// Surface form of each token's syntactic head.
    DepWord,
    /// Dependency relation label of each token.
    RelLabel,
    /// DepPath strings of every (predicate, candidate) pair.
    DepPath,
    /// RelPath strings of every (predicate, candidate) pair.
    RelPath,
}

impl VocabKind {
    pub const ALL: [VocabKind; 6] = [
        VocabKind::Word,
        VocabKind::Pos,
        VocabKind::DepWord,
        VocabKind::RelLabel,
        VocabKind::DepPath,
        VocabKind::RelPath,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VocabKind::Word => "word",
            VocabKind::Pos => "pos",
            VocabKind::DepWord => "dep-word",
            VocabKind::RelLabel => "rel-label",
            VocabKind::DepPath => "dep-path",
            VocabKind::RelPath => "rel-path",
        }
    }
}

impl fmt::Display for VocabKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VocabKind {
    type Err = SyntaxError;

    fn from_str(s: &str) -> Result<Self> {
        VocabKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| SyntaxError::Vocab(format!("unknown vocabulary kind {s:?}")))
    }
}

/// Dense string-to-id map with training frequencies. Ids `0` and `1` are
/// reserved for padding and unknown strings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    kind: VocabKind,
    strings: Vec<String>,
    freqs: Vec<usize>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Entries sorted by frequency (descending) then string (ascending);
    /// entries seen fewer than `min_freq` times are dropped.
    pub fn from_counts(kind: VocabKind, counts: HashMap<String, usize>, min_freq: usize) -> Self {
        let mut entries: Vec<(String, usize)> =
            counts.into_iter().filter(|(_, c)| *c >= min_freq.max(1)).collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut strings = vec![PAD_STR.to_string(), UNK_STR.to_string()];
        let mut freqs = vec![0, 0];
        for (s, c) in entries {
            strings.push(s);
            freqs.push(c);
        }
        Self::from_parts(kind, strings, freqs)
    }

    fn from_parts(kind: VocabKind, strings: Vec<String>, freqs: Vec<usize>) -> Self {
        let index = strings.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Vocab {
            kind,
            strings,
            freqs,
            index,
        }
    }

    pub fn kind(&self) -> VocabKind {
        self.kind
    }

    /// Number of ids including the reserved ones.
    pub fn len(&self) -> usize {
        self.strings.len()
    }

    /// True when only the reserved ids exist.
    pub fn is_empty(&self) -> bool {
        self.strings.len() == 2
    }

    pub fn get(&self, s: &str) -> Option<usize> {
        self.index.get(s).copied().filter(|&i| i > UNK)
    }

    /// Id of `s`, or [`UNK`].
    pub fn id(&self, s: &str) -> usize {
        self.get(s).unwrap_or(UNK)
    }

    pub fn string(&self, id: usize) -> &str {
        &self.strings[id]
    }

    pub fn freq(&self, id: usize) -> usize {
        self.freqs[id]
    }

    /// Non-reserved entries with their ids and frequencies.
    pub fn entries(&self) -> impl Iterator<Item = (&str, usize, usize)> {
        self.strings
            .iter()
            .zip(&self.freqs)
            .enumerate()
            .skip(2)
            .map(|(i, (s, &f))| (s.as_str(), i, f))
    }

    /// One `<string>\t<id>\t<freq>` line per id, reserved ids first.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, (s, f)) in self.strings.iter().zip(&self.freqs).enumerate() {
            out.push_str(&format!("{s}\t{i}\t{f}\n"));
        }
        out
    }

    pub fn from_text(kind: VocabKind, text: &str) -> Result<Self> {
        let mut strings = Vec::new();
        let mut freqs = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let bad = |why: &str| SyntaxError::Vocab(format!("{kind} vocabulary line {}: {why}", i + 1));
            let fields: Vec<&str> = line.split('\t').collect();
            let [s, id, freq] = fields.as_slice() else {
                return Err(bad("expected 3 tab-separated fields"));
            };
            if id.parse::<usize>().ok() != Some(i) {
                return Err(bad("ids must be dense and in order"));
            }
            let freq = freq.parse::<usize>().map_err(|_| bad("bad frequency"))?;
            if s.is_empty() || !seen.insert(s.to_string()) {
                return Err(bad("empty or duplicate string"));
            }
            let reserved = match i {
                PAD => Some(PAD_STR),
                UNK => Some(UNK_STR),
                _ => None,
            };
            if let Some(r) = reserved {
                if *s != r {
                    return Err(bad("reserved entries must come first"));
                }
            } else if *s == PAD_STR || *s == UNK_STR {
                return Err(bad("reserved string used as an entry"));
            }
            strings.push(s.to_string());
            freqs.push(freq);
        }
        if strings.len() < 2 {
            return Err(SyntaxError::Vocab(format!("{kind} vocabulary lacks reserved entries")));
        }
        Ok(Self::from_parts(kind, strings, freqs))
    }
}

/// The strings a sentence contributes to a vocabulary of `kind`. Paths are
/// enumerated over every predicate and every real token (the virtual root
/// is never a candidate); unconnected pairs and absent slots contribute
/// nothing.
pub fn syntax_strings<A: Arcs + ?Sized>(sentence: &Sentence, tree: &A, kind: VocabKind) -> Vec<String> {
    let n = sentence.len();
    match kind {
        VocabKind::Word => sentence.tokens().iter().map(|t| t.form.clone()).collect(),
        VocabKind::Pos => sentence.tokens().iter().map(|t| pos_tag(t).to_string()).collect(),
        VocabKind::DepWord => (1..=n)
            .filter_map(|id| tree.arc(id).map(|(h, _)| head_word(sentence, h).to_string()))
            .collect(),
        VocabKind::RelLabel => (1..=n)
            .filter_map(|id| tree.arc(id).map(|(_, l)| l.to_string()))
            .collect(),
        VocabKind::DepPath | VocabKind::RelPath => {
            let mut out = Vec::new();
            for &p in sentence.predicates() {
                for c in 1..=n {
                    if let Some(f) = path_feature(tree, p, c) {
                        out.push(if kind == VocabKind::DepPath { f.dep_path } else { f.rel_path });
                    }
                }
            }
            out
        }
    }
}

pub(crate) fn pos_tag(t: &crate::conll::Token) -> &str {
    t.ppos.as_deref().or(t.pos.as_deref()).unwrap_or("_")
}

pub(crate) fn head_word(s: &Sentence, head: usize) -> &str {
    if head == 0 {
        ROOT_WORD
    } else {
        &s.token(head).form
    }
}

/// Counts `kind` strings over `corpus` (with one tree per sentence) and
/// builds a vocabulary. Counting should use the training split only.
pub fn build_syntax_vocab<A: Arcs>(
    corpus: &[Sentence],
    trees: &[A],
    kind: VocabKind,
    min_freq: usize,
) -> Result<Vocab> {
    if corpus.len() != trees.len() {
        return Err(SyntaxError::LengthMismatch {
            left: corpus.len(),
            right: trees.len(),
        });
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for (s, t) in corpus.iter().zip(trees) {
        for string in syntax_strings(s, t, kind) {
            *counts.entry(string).or_default() += 1;
        }
    }
    Ok(Vocab::from_counts(kind, counts, min_freq))
}
