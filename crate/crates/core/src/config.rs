//! Hyperparameters and their `key=value` manifest form.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// How syntax enters the encoder.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// No syntax.
    None,
    /// Syntax embeddings concatenated to the input.
    Input,
    /// One head of one block replaced by a copy of the dependency heads.
    Lisa,
    /// Syntax embeddings added to queries and values of the lower blocks.
    RelAwe,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::None, Mode::Input, Mode::Lisa, Mode::RelAwe];

    pub fn name(self) -> &'static str {
        match self {
            Mode::None => "none",
            Mode::Input => "input",
            Mode::Lisa => "lisa",
            Mode::RelAwe => "relawe",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode {s:?} (none, input, lisa, relawe)")))
    }
}

/// A syntactic representation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Repr {
    /// Head word.
    Dep,
    /// Relation label to the head.
    Rel,
    /// Tree distances to the common ancestor.
    DepPath,
    /// Relation label chains to the common ancestor.
    RelPath,
}

impl Repr {
    pub const ALL: [Repr; 4] = [Repr::Dep, Repr::Rel, Repr::DepPath, Repr::RelPath];

    pub fn name(self) -> &'static str {
        match self {
            Repr::Dep => "dep",
            Repr::Rel => "rel",
            Repr::DepPath => "deppath",
            Repr::RelPath => "relpath",
        }
    }

    /// Relation-side representations feed `E_R`; the others feed `E_D`.
    pub fn is_relation(self) -> bool {
        matches!(self, Repr::Rel | Repr::RelPath)
    }
}

impl fmt::Display for Repr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Repr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Repr::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown representation {s:?} (dep, rel, deppath, relpath)")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub mode: Mode,
    /// Sorted, without duplicates.
    pub reprs: Vec<Repr>,
    /// Word embedding width.
    pub d_w: usize,
    /// POS embedding width.
    pub d_t: usize,
    /// Predicate indicator embedding width.
    pub d_p: usize,
    /// Width of each syntax embedding table.
    pub d_s: usize,
    pub d_ff: usize,
    pub n_blocks: usize,
    pub head_dim: usize,
    /// 1-based block whose first head is replaced in LISA mode.
    pub lisa_layer: usize,
    /// Number of lower blocks made relation-aware in RelAwe mode.
    pub relawe_layers: usize,
    pub dropout_attn: f64,
    pub dropout_res: f64,
    pub dropout_ffn: f64,
    pub label_smoothing: f64,
    pub ln_eps: f64,
    pub rel_path_max_dist: usize,
    pub rel_path_min_freq: usize,
    /// Minimum training frequency for every vocabulary entry.
    pub vocab_min_freq: usize,
}

impl ModelConfig {
    /// Full-size settings used for the published experiments.
    pub fn full() -> Self {
        ModelConfig {
            mode: Mode::None,
            reprs: Vec::new(),
            d_w: 100,
            d_t: 50,
            d_p: 100,
            d_s: 50,
            d_ff: 800,
            n_blocks: 10,
            head_dim: 25,
            lisa_layer: 5,
            relawe_layers: 5,
            dropout_attn: 0.2,
            dropout_res: 0.3,
            dropout_ffn: 0.2,
            label_smoothing: 0.1,
            ln_eps: 1e-6,
            rel_path_max_dist: 4,
            rel_path_min_freq: 10,
            vocab_min_freq: 1,
        }
    }

    /// A two-block, two-head model small enough for tests and desk runs.
    pub fn tiny() -> Self {
        ModelConfig {
            d_w: 8,
            d_t: 4,
            d_p: 4,
            d_s: 8,
            d_ff: 32,
            n_blocks: 2,
            head_dim: 8,
            lisa_layer: 2,
            relawe_layers: 1,
            rel_path_min_freq: 1,
            ..Self::full()
        }
    }

    pub fn with_mode(mut self, mode: Mode, reprs: &[Repr]) -> Self {
        self.mode = mode;
        self.reprs = reprs.to_vec();
        self.reprs.sort();
        self.reprs.dedup();
        self
    }

    /// Representations that actually enter the model.
    pub fn active_reprs(&self) -> &[Repr] {
        if self.mode == Mode::None {
            &[]
        } else {
            &self.reprs
        }
    }

    /// Representations with their own embedding table. LISA takes heads
    /// from the tree directly, so only its relation side is embedded.
    pub fn embedded_reprs(&self) -> Vec<Repr> {
        match self.mode {
            Mode::None => Vec::new(),
            Mode::Lisa => self.reprs.iter().copied().filter(|r| r.is_relation()).collect(),
            Mode::Input | Mode::RelAwe => self.reprs.clone(),
        }
    }

    pub fn d_f(&self) -> usize {
        let syntax = if self.mode == Mode::Input {
            self.reprs.len() * self.d_s
        } else {
            0
        };
        self.d_w + self.d_t + syntax
    }

    pub fn d_model(&self) -> usize {
        self.d_f() + self.d_p
    }

    pub fn n_heads(&self) -> usize {
        self.d_model() / self.head_dim
    }

    /// Width of the relation embedding concatenated onto the LISA head.
    pub fn lisa_rel_dim(&self) -> usize {
        if self.mode == Mode::Lisa {
            self.reprs.iter().filter(|r| r.is_relation()).count() * self.d_s
        } else {
            0
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        let positive = [
            ("d_w", self.d_w),
            ("d_t", self.d_t),
            ("d_p", self.d_p),
            ("d_s", self.d_s),
            ("d_ff", self.d_ff),
            ("n_blocks", self.n_blocks),
            ("head_dim", self.head_dim),
        ];
        for (name, v) in positive {
            if v == 0 {
                return fail(format!("{name} must be positive"));
            }
        }
        let d = self.d_model();
        if !d.is_multiple_of(self.head_dim) {
            return fail(format!("d_model {d} is not divisible by head_dim {}", self.head_dim));
        }
        if !d.is_multiple_of(2) {
            return fail(format!("d_model {d} must be even for positional embeddings"));
        }
        if self.lisa_layer == 0 || self.lisa_layer > self.n_blocks {
            return fail(format!("lisa_layer {} outside 1..={}", self.lisa_layer, self.n_blocks));
        }
        if self.relawe_layers > self.n_blocks {
            return fail(format!("relawe_layers {} exceeds n_blocks {}", self.relawe_layers, self.n_blocks));
        }
        for (name, p) in [
            ("dropout_attn", self.dropout_attn),
            ("dropout_res", self.dropout_res),
            ("dropout_ffn", self.dropout_ffn),
        ] {
            if !(0.0..1.0).contains(&p) {
                return fail(format!("{name} {p} outside [0, 1)"));
            }
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return fail(format!("label_smoothing {} outside [0, 1)", self.label_smoothing));
        }
        if self.ln_eps.is_nan() || self.ln_eps < 0.0 {
            return fail("ln_eps must be nonnegative".into());
        }
        match self.mode {
            Mode::None => {}
            Mode::Input | Mode::RelAwe if self.reprs.is_empty() => {
                return fail(format!("mode {} needs at least one representation", self.mode));
            }
            Mode::Lisa if !self.reprs.contains(&Repr::Dep) => {
                return fail("mode lisa needs the dep representation".into());
            }
            Mode::Lisa if self.reprs.contains(&Repr::DepPath) => {
                return fail("mode lisa cannot copy heads from deppath".into());
            }
            _ => {}
        }
        Ok(())
    }

    /// Applies one manifest entry.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "mode" => self.mode = value.parse()?,
            "reprs" => {
                let mut reprs = value
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(str::parse)
                    .collect::<Result<Vec<Repr>>>()?;
                reprs.sort();
                reprs.dedup();
                self.reprs = reprs;
            }
            "d_w" => self.d_w = parse(key, value)?,
            "d_t" => self.d_t = parse(key, value)?,
            "d_p" => self.d_p = parse(key, value)?,
            "d_s" => self.d_s = parse(key, value)?,
            "d_ff" => self.d_ff = parse(key, value)?,
            "n_blocks" => self.n_blocks = parse(key, value)?,
            "head_dim" => self.head_dim = parse(key, value)?,
            "lisa_layer" => self.lisa_layer = parse(key, value)?,
            "relawe_layers" => self.relawe_layers = parse(key, value)?,
            "dropout_attn" => self.dropout_attn = parse(key, value)?,
            "dropout_res" => self.dropout_res = parse(key, value)?,
            "dropout_ffn" => self.dropout_ffn = parse(key, value)?,
            "label_smoothing" => self.label_smoothing = parse(key, value)?,
            "ln_eps" => self.ln_eps = parse(key, value)?,
            "rel_path_max_dist" => self.rel_path_max_dist = parse(key, value)?,
            "rel_path_min_freq" => self.rel_path_min_freq = parse(key, value)?,
            "vocab_min_freq" => self.vocab_min_freq = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn to_manifest(&self) -> String {
        let reprs: Vec<&str> = self.reprs.iter().map(|r| r.name()).collect();
        format!(
            "mode={}\nreprs={}\nd_w={}\nd_t={}\nd_p={}\nd_s={}\nd_ff={}\nn_blocks={}\nhead_dim={}\n\
             lisa_layer={}\nrelawe_layers={}\ndropout_attn={:?}\ndropout_res={:?}\ndropout_ffn={:?}\n\
             label_smoothing={:?}\nln_eps={:?}\nrel_path_max_dist={}\nrel_path_min_freq={}\nvocab_min_freq={}\n",
            self.mode,
            reprs.join(","),
            self.d_w,
            self.d_t,
            self.d_p,
            self.d_s,
            self.d_ff,
            self.n_blocks,
            self.head_dim,
            self.lisa_layer,
            self.relawe_layers,
            self.dropout_attn,
            self.dropout_res,
            self.dropout_ffn,
            self.label_smoothing,
            self.ln_eps,
            self.rel_path_max_dist,
            self.rel_path_min_freq,
            self.vocab_min_freq,
        )
    }

    /// Parses a manifest written by [`to_manifest`](Self::to_manifest),
    /// starting from the full profile. Unknown keys are errors.
    pub fn from_manifest(text: &str) -> Result<Self> {
        let mut config = Self::full();
        for (key, value) in parse_manifest(text)? {
            if !config.set(&key, &value)? {
                return Err(Error::Config(format!("unknown key {key:?}")));
            }
        }
        config.validate()?;
        Ok(config)
    }
}

/// Training loop settings.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainSchedule {
    pub max_steps: usize,
    /// Dev evaluation period in steps; 0 disables periodic evaluation.
    pub eval_every: usize,
    pub seed: u64,
    /// Words per batch.
    pub word_budget: usize,
}

impl TrainSchedule {
    pub fn full() -> Self {
        TrainSchedule {
            max_steps: 200_000,
            eval_every: 1000,
            seed: 1,
            word_budget: 4096,
        }
    }

    pub fn desk() -> Self {
        TrainSchedule {
            max_steps: 500,
            eval_every: 100,
            ..Self::full()
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "max_steps" => self.max_steps = parse(key, value)?,
            "eval_every" => self.eval_every = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "word_budget" => self.word_budget = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        if self.word_budget == 0 {
            return Err(Error::Config("word_budget must be positive".into()));
        }
        Ok(())
    }

    pub fn to_manifest(&self) -> String {
        format!(
            "max_steps={}\neval_every={}\nseed={}\nword_budget={}\n",
            self.max_steps, self.eval_every, self.seed, self.word_budget
        )
    }
}

/// Model and schedule read from one manifest file.
pub fn read_settings(text: &str, model: &mut ModelConfig, schedule: &mut TrainSchedule) -> Result<()> {
    for (key, value) in parse_manifest(text)? {
        if !model.set(&key, &value)? && !schedule.set(&key, &value)? {
            return Err(Error::Config(format!("unknown key {key:?}")));
        }
    }
    Ok(())
}

fn parse<V: FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

/// `key=value` lines; blank lines and `#` comments are skipped. Keys may
/// not repeat.
pub fn parse_manifest(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        if out.iter().any(|(k, _)| k == key) {
            return Err(Error::Config(format!("line {}: duplicate key {key:?}", i + 1)));
        }
        out.push((key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}
