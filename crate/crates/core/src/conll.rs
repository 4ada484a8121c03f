//! CoNLL-2009 corpora: reading, writing, per-predicate instances and
//! labeled argument scoring.
//!
//! Column layout (tab separated, one token per line, blank line between
//! sentences):
//!
//! ```text
//! ID FORM LEMMA PLEMMA POS PPOS FEAT PFEAT HEAD PHEAD DEPREL PDEPREL FILLPRED PRED APRED1 .. APREDn
//! ```
//!
//! `_` marks an absent value. There is one APRED column per predicate of the
//! sentence, in token order.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConllError {
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },

    #[error("corpora are not aligned: {0}")]
    Alignment(String),

    #[error("sentence has no {0} dependency columns")]
    MissingTree(&'static str),
}

pub type Result<T> = std::result::Result<T, ConllError>;

const ABSENT: &str = "_";
const FIXED_COLUMNS: usize = 14;

/// Which pair of dependency columns to read: gold `HEAD`/`DEPREL` or
/// predicted `PHEAD`/`PDEPREL`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TreeColumns {
    Gold,
    Predicted,
}

/// One CoNLL-2009 row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    /// 1-based position in the sentence.
    pub id: usize,
    pub form: String,
    pub lemma: Option<String>,
    pub plemma: Option<String>,
    pub pos: Option<String>,
    pub ppos: Option<String>,
    pub feat: Option<String>,
    pub pfeat: Option<String>,
    /// Gold head id, `0` for the virtual root.
    pub head: usize,
    pub phead: Option<usize>,
    pub deprel: String,
    pub pdeprel: Option<String>,
    pub fill_pred: bool,
    pub pred_sense: Option<String>,
    /// One slot per predicate of the sentence.
    pub apreds: Vec<Option<String>>,
}

/// A validated sentence. Immutable once built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    tokens: Vec<Token>,
    predicates: Vec<usize>,
}

fn opt(field: &str) -> Option<String> {
    (field != ABSENT).then(|| field.to_string())
}

fn show(field: &Option<String>) -> &str {
    field.as_deref().unwrap_or(ABSENT)
}

impl Sentence {
    /// Validates the token invariants and derives the predicate list.
    pub fn new(tokens: Vec<Token>) -> Result<Self> {
        let err = |i: usize, reason: String| ConllError::MalformedRow { line: i + 1, reason };
        if tokens.is_empty() {
            return Err(err(0, "empty sentence".into()));
        }
        let n = tokens.len();
        let predicates: Vec<usize> = tokens.iter().filter(|t| t.fill_pred).map(|t| t.id).collect();
        for (i, t) in tokens.iter().enumerate() {
            if t.id != i + 1 {
                return Err(err(i, format!("expected id {}, found {}", i + 1, t.id)));
            }
            for (name, head) in [("HEAD", Some(t.head)), ("PHEAD", t.phead)] {
                if let Some(h) = head {
                    if h > n || h == t.id {
                        return Err(err(i, format!("{name} {h} invalid for token {} of {n}", t.id)));
                    }
                }
            }
            if t.fill_pred != t.pred_sense.is_some() {
                return Err(err(i, "FILLPRED and PRED disagree".into()));
            }
            if t.apreds.len() != predicates.len() {
                return Err(err(
                    i,
                    format!("{} APRED columns for {} predicates", t.apreds.len(), predicates.len()),
                ));
            }
            if t.apreds.iter().flatten().any(|r| r.is_empty()) {
                return Err(err(i, "empty role label".into()));
            }
        }
        Ok(Sentence { tokens, predicates })
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    /// Token with 1-based id `id`.
    pub fn token(&self, id: usize) -> &Token {
        &self.tokens[id - 1]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Predicate token ids in increasing order.
    pub fn predicates(&self) -> &[usize] {
        &self.predicates
    }

    /// Head ids and labels from the selected columns.
    pub fn dependencies(&self, which: TreeColumns) -> Result<(Vec<usize>, Vec<String>)> {
        match which {
            TreeColumns::Gold => Ok(self
                .tokens
                .iter()
                .map(|t| (t.head, t.deprel.clone()))
                .unzip()),
            TreeColumns::Predicted => self
                .tokens
                .iter()
                .map(|t| match (t.phead, &t.pdeprel) {
                    (Some(h), Some(l)) => Ok((h, l.clone())),
                    _ => Err(ConllError::MissingTree("predicted")),
                })
                .collect::<Result<Vec<_>>>()
                .map(|pairs| pairs.into_iter().unzip()),
        }
    }

    /// Copy of the sentence with the `k`-th predicate's role column replaced.
    pub fn with_roles(&self, k: usize, roles: &[Option<String>]) -> Result<Self> {
        if k >= self.predicates.len() || roles.len() != self.len() {
            return Err(ConllError::Alignment(format!(
                "role column {k} of length {} for sentence of length {} with {} predicates",
                roles.len(),
                self.len(),
                self.predicates.len()
            )));
        }
        let mut tokens = self.tokens.clone();
        for (t, r) in tokens.iter_mut().zip(roles) {
            t.apreds[k] = r.clone();
        }
        Sentence::new(tokens)
    }

    /// Copy with the predicted dependency columns replaced.
    pub fn with_predicted_tree(&self, heads: &[usize], labels: &[String]) -> Result<Self> {
        if heads.len() != self.len() || labels.len() != self.len() {
            return Err(ConllError::Alignment("tree length differs from sentence".into()));
        }
        let mut tokens = self.tokens.clone();
        for ((t, &h), l) in tokens.iter_mut().zip(heads).zip(labels) {
            t.phead = Some(h);
            t.pdeprel = Some(l.clone());
        }
        Sentence::new(tokens)
    }
}

/// Parses one blank-line-delimited block. `first_line` is the 1-based line
/// number of `lines[0]` in its file, used in error messages.
pub fn parse_sentence(lines: &[&str], first_line: usize) -> Result<Sentence> {
    if lines.is_empty() {
        return Err(ConllError::MalformedRow {
            line: first_line,
            reason: "empty sentence block".into(),
        });
    }
    let mut tokens = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        let lineno = first_line + i;
        let err = |reason: String| ConllError::MalformedRow {
            line: lineno,
            reason,
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() < FIXED_COLUMNS {
            return Err(err(format!("{} fields, need at least {FIXED_COLUMNS}", f.len())));
        }
        if let Some(col) = f.iter().position(|s| s.is_empty()) {
            return Err(err(format!("empty field in column {}", col + 1)));
        }
        let int = |s: &str, name: &str| {
            s.parse::<usize>()
                .map_err(|_| err(format!("{name} {s:?} is not a non-negative integer")))
        };
        let id = int(f[0], "ID")?;
        if id != i + 1 {
            return Err(err(format!("expected ID {}, found {id}", i + 1)));
        }
        let head = int(f[8], "HEAD")?;
        let phead = match f[9] {
            ABSENT => None,
            s => Some(int(s, "PHEAD")?),
        };
        let fill_pred = match f[12] {
            "Y" => true,
            ABSENT => false,
            other => return Err(err(format!("FILLPRED must be Y or _, found {other:?}"))),
        };
        tokens.push(Token {
            id,
            form: f[1].to_string(),
            lemma: opt(f[2]),
            plemma: opt(f[3]),
            pos: opt(f[4]),
            ppos: opt(f[5]),
            feat: opt(f[6]),
            pfeat: opt(f[7]),
            head,
            phead,
            deprel: f[10].to_string(),
            pdeprel: opt(f[11]),
            fill_pred,
            pred_sense: opt(f[13]),
            apreds: f[FIXED_COLUMNS..].iter().map(|s| opt(s)).collect(),
        });
    }
    Sentence::new(tokens).map_err(|e| match e {
        ConllError::MalformedRow { line, reason } => ConllError::MalformedRow {
            line: first_line + line - 1,
            reason,
        },
        other => other,
    })
}

/// Parses a whole file. Blank (or whitespace-only) lines delimit sentences;
/// an empty input yields an empty corpus.
pub fn read_corpus(text: &str) -> Result<Vec<Sentence>> {
    let mut corpus = Vec::new();
    let mut block: Vec<&str> = Vec::new();
    let mut start = 1;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            if !block.is_empty() {
                corpus.push(parse_sentence(&block, start)?);
                block.clear();
            }
            start = i + 2;
        } else {
            block.push(line);
        }
    }
    if !block.is_empty() {
        corpus.push(parse_sentence(&block, start)?);
    }
    Ok(corpus)
}

/// Inverse of [`parse_sentence`].
pub fn write_sentence(s: &Sentence) -> Vec<String> {
    s.tokens
        .iter()
        .map(|t| {
            let mut cols: Vec<&str> = Vec::with_capacity(FIXED_COLUMNS + t.apreds.len());
            let id = t.id.to_string();
            let head = t.head.to_string();
            let phead = t.phead.map(|h| h.to_string());
            cols.extend([
                id.as_str(),
                &t.form,
                show(&t.lemma),
                show(&t.plemma),
                show(&t.pos),
                show(&t.ppos),
                show(&t.feat),
                show(&t.pfeat),
                &head,
                phead.as_deref().unwrap_or(ABSENT),
                &t.deprel,
                show(&t.pdeprel),
                if t.fill_pred { "Y" } else { ABSENT },
                show(&t.pred_sense),
            ]);
            cols.extend(t.apreds.iter().map(show));
            cols.join("\t")
        })
        .collect()
}

/// Each sentence's lines followed by one blank line.
pub fn write_corpus(corpus: &[Sentence]) -> String {
    let mut out = String::new();
    for s in corpus {
        for line in write_sentence(s) {
            out.push_str(&line);
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

/// Semantic roles of one predicate over its sentence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredicateInstance<'a> {
    pub sentence: &'a Sentence,
    /// Token id of the predicate.
    pub predicate: usize,
    /// Position of the predicate among the sentence's predicates, i.e. the
    /// APRED column it reads.
    pub column: usize,
    /// Role of each token (index = id - 1); `None` is the `_` column value.
    pub roles: Vec<Option<String>>,
}

impl PredicateInstance<'_> {
    /// Role of the token with 1-based id `id`.
    pub fn role(&self, id: usize) -> Option<&str> {
        self.roles[id - 1].as_deref()
    }
}

pub fn extract_instances(s: &Sentence) -> Vec<PredicateInstance<'_>> {
    s.predicates
        .iter()
        .enumerate()
        .map(|(k, &p)| PredicateInstance {
            sentence: s,
            predicate: p,
            column: k,
            roles: s.tokens.iter().map(|t| t.apreds[k].clone()).collect(),
        })
        .collect()
}

/// Labeled precision, recall and F1 over argument arcs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoreReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub predicted: usize,
    pub gold: usize,
    pub correct: usize,
}

impl ScoreReport {
    pub fn from_counts(predicted: usize, gold: usize, correct: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(correct, predicted);
        let recall = ratio(correct, gold);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ScoreReport {
            precision,
            recall,
            f1,
            predicted,
            gold,
            correct,
        }
    }

    /// `P=<f> R=<f> F1=<f>`; values print with full round-trip precision.
    pub fn machine_line(&self) -> String {
        format!("P={} R={} F1={}", self.precision, self.recall, self.f1)
    }
}

impl fmt::Display for ScoreReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "  Labeled precision: ({} / {}) = {:6.2} %", self.correct, self.predicted, 100.0 * self.precision)?;
        writeln!(f, "  Labeled recall:    ({} / {}) = {:6.2} %", self.correct, self.gold, 100.0 * self.recall)?;
        write!(f, "  Labeled F1:        {:6.2}", 100.0 * self.f1)
    }
}

type Arc<'a> = (usize, usize, usize, &'a str);

fn arcs(corpus: &[Sentence], with_senses: bool) -> HashSet<Arc<'_>> {
    let mut out = HashSet::new();
    for (si, s) in corpus.iter().enumerate() {
        for (k, &p) in s.predicates.iter().enumerate() {
            for t in &s.tokens {
                if let Some(role) = &t.apreds[k] {
                    out.insert((si, p, t.id, role.as_str()));
                }
            }
            if with_senses {
                if let Some(sense) = &s.token(p).pred_sense {
                    // a sense is an arc from the predicate to itself with id 0
                    out.insert((si, p, 0, sense.as_str()));
                }
            }
        }
    }
    out
}

/// Scores `pred` against `gold`. An argument arc is (sentence, predicate,
/// token, role) and counts as correct on an exact label match. With
/// `exclude_pred_sense` predicate senses contribute nothing; otherwise each
/// predicate's sense is one extra labeled arc.
pub fn score(gold: &[Sentence], pred: &[Sentence], exclude_pred_sense: bool) -> Result<ScoreReport> {
    if gold.len() != pred.len() {
        return Err(ConllError::Alignment(format!(
            "{} gold sentences vs {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(ConllError::Alignment(format!(
                "sentence {}: {} gold tokens vs {} predicted",
                i + 1,
                g.len(),
                p.len()
            )));
        }
        if g.predicates != p.predicates {
            return Err(ConllError::Alignment(format!(
                "sentence {}: predicate sets differ ({:?} vs {:?})",
                i + 1,
                g.predicates,
                p.predicates
            )));
        }
    }
    let gold_arcs = arcs(gold, !exclude_pred_sense);
    let pred_arcs = arcs(pred, !exclude_pred_sense);
    let correct = pred_arcs.intersection(&gold_arcs).count();
    Ok(ScoreReport::from_counts(pred_arcs.len(), gold_arcs.len(), correct))
}
