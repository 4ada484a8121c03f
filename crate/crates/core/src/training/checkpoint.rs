//! Checkpoint directory layout:
//!
//! - `params.bin`: parameters plus `opt.eg2.<name>` / `opt.edx2.<name>`
//!   optimizer accumulators, in the tensor archive format
//! - `config.txt`: model configuration as `key=value` lines
//! - `state.txt`: schedule and position in the batch stream
//! - `vocab.*.tsv`, `vocab.role.txt`: vocabularies

use std::path::{Path, PathBuf};

use synsrl_tensor::{read_archive, write_archive, Scalar, Tensor};

use super::{Adadelta, Trainer};
use crate::config::{parse_manifest, ModelConfig, TrainSchedule};
use crate::encoder::{Model, ParamStore};
use crate::error::{io_error, Error, Result};
use crate::vocabs::Vocabs;

pub const CHECKPOINT_FILES: [&str; 3] = ["params.bin", "config.txt", "state.txt"];

fn partial_path(dir: &Path) -> PathBuf {
    let mut name = dir.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    dir.with_file_name(name)
}

/// Writes into a sibling directory first and swaps it in at the end, so a
/// failed save never leaves a half-written checkpoint behind.
pub(super) fn save<T: Scalar>(trainer: &Trainer<T>, dir: &Path) -> Result<()> {
    let tmp = partial_path(dir);
    let result = write_all(trainer, &tmp).and_then(|()| {
        if dir.exists() {
            std::fs::remove_dir_all(dir).map_err(io_error(dir))?;
        }
        std::fs::rename(&tmp, dir).map_err(io_error(dir))
    });
    if result.is_err() {
        let _ = std::fs::remove_dir_all(&tmp);
    }
    result
}

fn write_all<T: Scalar>(trainer: &Trainer<T>, dir: &Path) -> Result<()> {
    if dir.exists() {
        std::fs::remove_dir_all(dir).map_err(io_error(dir))?;
    }
    std::fs::create_dir_all(dir).map_err(io_error(dir))?;
    let model = &trainer.model;
    let opt_names: Vec<(String, String)> = trainer
        .optimizer
        .state()
        .map(|(n, _, _)| (format!("opt.eg2.{n}"), format!("opt.edx2.{n}")))
        .collect();
    let mut entries: Vec<(&str, &Tensor<T>)> = model.params.iter().collect();
    for ((eg2_name, edx2_name), (_, eg2, edx2)) in opt_names.iter().zip(trainer.optimizer.state()) {
        entries.push((eg2_name, eg2));
        entries.push((edx2_name, edx2));
    }
    let mut bytes = Vec::new();
    write_archive(&mut bytes, &entries).map_err(io_error(&dir.join("params.bin")))?;
    let write = |name: &str, contents: &[u8]| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(io_error(&path))
    };
    write("params.bin", &bytes)?;
    write("config.txt", model.config.to_manifest().as_bytes())?;
    let opt = &trainer.optimizer;
    let state = format!(
        "{}step={}\nepoch={}\ncursor={}\nrho={:?}\nopt_eps={:?}\nlr={:?}\n",
        trainer.schedule.to_manifest(),
        trainer.step,
        trainer.epoch,
        trainer.cursor,
        opt.rho,
        opt.eps,
        opt.lr
    );
    write("state.txt", state.as_bytes())?;
    model.vocabs.save(dir)
}

fn read_params<T: Scalar>(dir: &Path) -> Result<(ParamStore<T>, Adadelta<T>)> {
    let path = dir.join("params.bin");
    let bytes = std::fs::read(&path).map_err(io_error(&path))?;
    let mut params = ParamStore::new();
    let mut eg2 = std::collections::BTreeMap::new();
    let mut edx2 = std::collections::BTreeMap::new();
    for e in read_archive::<T>(&bytes)? {
        if let Some(n) = e.name.strip_prefix("opt.eg2.") {
            eg2.insert(n.to_string(), e.tensor);
        } else if let Some(n) = e.name.strip_prefix("opt.edx2.") {
            edx2.insert(n.to_string(), e.tensor);
        } else {
            params.insert(e.name, e.tensor);
        }
    }
    let mut opt = Adadelta::default();
    for (name, a) in eg2 {
        let b = edx2
            .remove(&name)
            .ok_or_else(|| Error::Checkpoint(format!("optimizer state for {name} is incomplete")))?;
        if params.get(&name).map(Tensor::shape) != Some(a.shape()) || a.shape() != b.shape() {
            return Err(Error::Checkpoint(format!("optimizer state for {name} does not match")));
        }
        opt.restore(&name, a, b);
    }
    if let Some(name) = edx2.keys().next() {
        return Err(Error::Checkpoint(format!("optimizer state for {name} is incomplete")));
    }
    Ok((params, opt))
}

/// Vocabulary whose size fixes the leading (or, for the output layer,
/// trailing) dimension of `param`.
fn vocab_of(param: &str) -> Option<&'static str> {
    Some(match param {
        "emb.word" => "word",
        "emb.pos" => "pos",
        "emb.dep" => "dep-word",
        "emb.rel" => "rel-label",
        "emb.deppath" => "dep-path",
        "emb.relpath" => "rel-path",
        "out.w" | "out.b" => "role",
        _ => return None,
    })
}

/// Checks that `params` has exactly the shapes a fresh model would have.
fn check_shapes<T: Scalar>(config: &ModelConfig, vocabs: &Vocabs, params: &ParamStore<T>) -> Result<()> {
    let fresh = ParamStore::<T>::init(config, vocabs, &mut synsrl_tensor::Rng::seed(0))?;
    for (name, t) in fresh.iter() {
        match params.get(name) {
            None => return Err(Error::Checkpoint(format!("missing parameter {name}"))),
            Some(p) if p.shape() != t.shape() => {
                if let Some(vocab) = vocab_of(name) {
                    return Err(Error::Vocab {
                        vocab: vocab.into(),
                        reason: format!(
                            "checkpoint parameter {name} has shape {:?} but the vocabulary implies {:?}",
                            p.shape(),
                            t.shape()
                        ),
                    });
                }
                return Err(Error::Checkpoint(format!(
                    "parameter {name} has shape {:?}, expected {:?} (vocabulary or config mismatch)",
                    p.shape(),
                    t.shape()
                )))
            }
            _ => {}
        }
    }
    if let Some(extra) = params.names().find(|n| fresh.get(n).is_none()) {
        return Err(Error::Checkpoint(format!("unexpected parameter {extra}")));
    }
    Ok(())
}

fn read_config(dir: &Path) -> Result<ModelConfig> {
    let path = dir.join("config.txt");
    ModelConfig::from_manifest(&std::fs::read_to_string(&path).map_err(io_error(&path))?)
}

pub fn load_model<T: Scalar>(dir: &Path) -> Result<Model<T>> {
    let config = read_config(dir)?;
    let vocabs = Vocabs::load(dir)?;
    let (params, _) = read_params(dir)?;
    check_shapes(&config, &vocabs, &params)?;
    Ok(Model { config, vocabs, params })
}

type TrainingState<T> = (Model<T>, Adadelta<T>, TrainSchedule, usize, u64, usize);

pub(super) fn load_training<T: Scalar>(dir: &Path) -> Result<TrainingState<T>> {
    let config = read_config(dir)?;
    let vocabs = Vocabs::load(dir)?;
    let (params, mut opt) = read_params(dir)?;
    check_shapes(&config, &vocabs, &params)?;
    let path = dir.join("state.txt");
    let text = std::fs::read_to_string(&path).map_err(io_error(&path))?;
    let mut schedule = TrainSchedule::full();
    let (mut step, mut epoch, mut cursor) = (None, None, None);
    let bad = |k: &str, v: &str| Error::Checkpoint(format!("bad {k} value {v:?}"));
    for (k, v) in parse_manifest(&text)? {
        match k.as_str() {
            "step" => step = Some(v.parse().map_err(|_| bad(&k, &v))?),
            "epoch" => epoch = Some(v.parse().map_err(|_| bad(&k, &v))?),
            "cursor" => cursor = Some(v.parse().map_err(|_| bad(&k, &v))?),
            "rho" => opt.rho = v.parse().map_err(|_| bad(&k, &v))?,
            "opt_eps" => opt.eps = v.parse().map_err(|_| bad(&k, &v))?,
            "lr" => opt.lr = v.parse().map_err(|_| bad(&k, &v))?,
            _ => {
                if !schedule.set(&k, &v)? {
                    return Err(Error::Checkpoint(format!("unknown state key {k:?}")));
                }
            }
        }
    }
    let missing = |k| Error::Checkpoint(format!("state.txt lacks {k}"));
    Ok((
        Model { config, vocabs, params },
        opt,
        schedule,
        step.ok_or_else(|| missing("step"))?,
        epoch.ok_or_else(|| missing("epoch"))?,
        cursor.ok_or_else(|| missing("cursor"))?,
    ))
}
