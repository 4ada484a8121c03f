use std::io::Write;
use std::path::Path;

use synsrl_tensor::{Graph, Rng, Scalar};

use super::{checkpoint, make_batches, smoothed_cross_entropy_sum, Adadelta, Batch};
use crate::config::{ModelConfig, TrainSchedule};
use crate::conll::{score, ScoreReport, Sentence};
use crate::encoder::{forward, Binding, EncodedInput, Model};
use crate::error::{Error, Result};
use crate::syntax::Arcs;
use crate::vocabs::{RoleLabels, Vocabs};

// Keeps the epoch shuffles on streams disjoint from the per-step dropout
// streams, which are numbered by step.
const SHUFFLE_STREAM: u64 = 1 << 63;

struct Prepared<T: Scalar> {
    input: EncodedInput<T>,
    targets: Vec<usize>,
}

fn gold_targets(s: &Sentence, column: usize, roles: &RoleLabels) -> Result<Vec<usize>> {
    s.tokens()
        .iter()
        .map(|t| {
            let role = t.apreds[column].as_deref();
            roles.id(role).ok_or_else(|| Error::Vocab {
                vocab: "role".into(),
                reason: format!("unknown role {:?}", role.unwrap_or("_")),
            })
        })
        .collect()
}

fn prepare<T: Scalar, A: Arcs>(model: &Model<T>, corpus: &[Sentence], trees: &[A]) -> Result<Vec<Prepared<T>>> {
    if corpus.len() != trees.len() {
        return Err(Error::Config(format!(
            "{} sentences but {} trees",
            corpus.len(),
            trees.len()
        )));
    }
    let mut out = Vec::new();
    for (s, tree) in corpus.iter().zip(trees) {
        for (k, &p) in s.predicates().iter().enumerate() {
            out.push(Prepared {
                input: model.encode(s, p, tree),
                targets: gold_targets(s, k, &model.vocabs.roles)?,
            });
        }
    }
    Ok(out)
}

/// Outcome of [`Trainer::train`].
#[derive(Clone, Debug, PartialEq)]
pub struct TrainSummary {
    pub steps: usize,
    pub last_loss: f64,
    /// Best dev score and the step it was reached at.
    pub best: Option<(usize, ScoreReport)>,
}

/// Owns the model, optimizer state and the position in the batch stream.
pub struct Trainer<T: Scalar = f64> {
    pub model: Model<T>,
    pub optimizer: Adadelta<T>,
    pub schedule: TrainSchedule,
    pub(super) step: usize,
    pub(super) epoch: u64,
    pub(super) cursor: usize,
    batches: Vec<Batch>,
    instances: Vec<Prepared<T>>,
}

impl<T: Scalar> Trainer<T> {
    /// Builds vocabularies from `train` and initializes a model from the
    /// schedule's seed.
    pub fn new<A: Arcs>(config: ModelConfig, schedule: TrainSchedule, train: &[Sentence], trees: &[A]) -> Result<Self> {
        let vocabs = Vocabs::build(train, trees, config.vocab_min_freq)?;
        let model = Model::new(config, vocabs, schedule.seed)?;
        Self::with_model(model, Adadelta::default(), schedule, train, trees)
    }

    pub fn with_model<A: Arcs>(
        model: Model<T>,
        optimizer: Adadelta<T>,
        schedule: TrainSchedule,
        train: &[Sentence],
        trees: &[A],
    ) -> Result<Self> {
        schedule.validate()?;
        let instances = prepare(&model, train, trees)?;
        if instances.is_empty() {
            return Err(Error::Config("training corpus has no predicates".into()));
        }
        let mut t = Trainer {
            model,
            optimizer,
            schedule,
            step: 0,
            epoch: 0,
            cursor: 0,
            batches: Vec::new(),
            instances,
        };
        t.batches = t.epoch_batches(0);
        Ok(t)
    }

    /// Continues from a checkpoint written by [`Trainer::save`]. The
    /// training data must be the data the checkpoint was trained on.
    pub fn resume<A: Arcs>(dir: &Path, train: &[Sentence], trees: &[A]) -> Result<Self> {
        let (model, optimizer, schedule, step, epoch, cursor) = checkpoint::load_training(dir)?;
        let mut t = Self::with_model(model, optimizer, schedule, train, trees)?;
        t.step = step;
        t.epoch = epoch;
        t.batches = t.epoch_batches(epoch);
        if cursor > t.batches.len() {
            return Err(Error::Checkpoint("batch cursor beyond the epoch".into()));
        }
        t.cursor = cursor;
        Ok(t)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        checkpoint::save(self, dir)
    }

    /// Updates completed so far.
    pub fn steps_done(&self) -> usize {
        self.step
    }

    pub fn instance_count(&self) -> usize {
        self.instances.len()
    }

    fn epoch_batches(&self, epoch: u64) -> Vec<Batch> {
        let words: Vec<usize> = self.instances.iter().map(|p| p.input.len()).collect();
        let mut rng = Rng::stream(self.schedule.seed, SHUFFLE_STREAM | epoch);
        make_batches(&words, self.schedule.word_budget, &mut rng)
    }

    /// Runs one batch forward and backward, applies Adadelta and returns
    /// the batch loss (token-summed loss over batch words) from before the
    /// update.
    pub fn step(&mut self) -> Result<f64> {
        if self.cursor >= self.batches.len() {
            self.epoch += 1;
            self.cursor = 0;
            self.batches = self.epoch_batches(self.epoch);
        }
        let batch = self.batches[self.cursor].clone();
        self.cursor += 1;

        let g = Graph::new();
        let bind = Binding::new(&g, &self.model.params, true);
        let mut rng = Rng::stream(self.schedule.seed, self.step as u64);
        let mut total = None;
        for &i in &batch.items {
            let inst = &self.instances[i];
            let out = forward(&bind, &inst.input, &self.model.config, true, &mut rng)?;
            let l = smoothed_cross_entropy_sum(&g, out.logits, &inst.targets, self.model.config.label_smoothing)?;
            total = Some(match total {
                Some(acc) => g.add(acc, l)?,
                None => l,
            });
        }
        let loss = g.scale(total.expect("batches are nonempty"), T::from_f64(1.0 / batch.words as f64));
        let value = g.value_ref(loss).data()[0].as_f64();
        let mut grads = g.backward(loss)?;
        let named: Vec<_> = bind
            .bound()
            .into_iter()
            .filter_map(|(name, v)| grads.take(v).map(|t| (name, t)))
            .collect();
        drop(bind);
        self.optimizer.update(&mut self.model.params, &named)?;
        self.step += 1;
        Ok(value)
    }

    /// Trains until `schedule.max_steps`, writing `step=<n> loss=<f>` per
    /// update and `step=<n> loss=<f> dev_P=<f> dev_R=<f> dev_F1=<f>` per
    /// dev evaluation. With a dev set the best-scoring model is saved to
    /// `checkpoint`; without one the final model is.
    pub fn train<A: Arcs>(
        &mut self,
        dev: Option<(&[Sentence], &[A])>,
        checkpoint: Option<&Path>,
        log: &mut dyn Write,
    ) -> Result<TrainSummary> {
        let log_err = |source| Error::Io {
            path: "metric log".into(),
            source,
        };
        let mut best: Option<(usize, ScoreReport)> = None;
        let mut last_loss = f64::NAN;
        while self.step < self.schedule.max_steps {
            last_loss = self.step()?;
            let n = self.step;
            writeln!(log, "step={n} loss={last_loss}").map_err(log_err)?;
            let due = (self.schedule.eval_every > 0 && n.is_multiple_of(self.schedule.eval_every)) || n == self.schedule.max_steps;
            if let (Some((sentences, trees)), true) = (dev, due) {
                let r = evaluate(&self.model, sentences, trees, true)?;
                writeln!(
                    log,
                    "step={n} loss={last_loss} dev_P={} dev_R={} dev_F1={}",
                    r.precision, r.recall, r.f1
                )
                .map_err(log_err)?;
                if best.as_ref().is_none_or(|(_, b)| r.f1 > b.f1) {
                    if let Some(dir) = checkpoint {
                        self.save(dir)?;
                    }
                    best = Some((n, r));
                }
            }
        }
        if let (None, Some(dir)) = (dev, checkpoint) {
            self.save(dir)?;
        }
        Ok(TrainSummary {
            steps: self.step,
            last_loss,
            best,
        })
    }
}

/// Predicts every predicate of `corpus` and scores against its gold roles.
pub fn evaluate<T: Scalar, A: Arcs>(
    model: &Model<T>,
    corpus: &[Sentence],
    trees: &[A],
    exclude_pred_sense: bool,
) -> Result<ScoreReport> {
    if corpus.len() != trees.len() {
        return Err(Error::Config(format!(
            "{} sentences but {} trees",
            corpus.len(),
            trees.len()
        )));
    }
    let predicted = corpus
        .iter()
        .zip(trees)
        .map(|(s, t)| model.predict(s, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(score(corpus, &predicted, exclude_pred_sense)?)
}

/// Eval-mode label-smoothed loss over every instance, divided by the total
/// number of words.
pub fn corpus_loss<T: Scalar, A: Arcs>(model: &Model<T>, corpus: &[Sentence], trees: &[A]) -> Result<f64> {
    let prepared = prepare(model, corpus, trees)?;
    let mut sum = 0.0;
    let mut words = 0;
    for p in &prepared {
        let g = Graph::new();
        let bind = Binding::new(&g, &model.params, false);
        let out = forward(&bind, &p.input, &model.config, false, &mut Rng::seed(0))?;
        let l = smoothed_cross_entropy_sum(&g, out.logits, &p.targets, model.config.label_smoothing)?;
        sum += g.value_ref(l).data()[0].as_f64();
        words += p.targets.len();
    }
    Ok(sum / words.max(1) as f64)
}
