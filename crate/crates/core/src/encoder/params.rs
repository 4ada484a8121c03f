use std::cell::RefCell;
use std::collections::BTreeMap;

use synsrl_tensor::{Graph, Rng, Scalar, Tensor, Var};

use crate::config::{Mode, ModelConfig};
use crate::error::{Error, Result};
use crate::vocabs::Vocabs;

/// Named parameter tensors, iterated in name order.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParamStore<T: Scalar = f64> {
    params: BTreeMap<String, Tensor<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            params: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor<T>) {
        self.params.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.params.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn numel(&self) -> usize {
        self.params.values().map(Tensor::numel).sum()
    }

    /// Freshly initialized parameters for `config`. Embedding tables are
    /// drawn from a zero-mean Gaussian with variance `1/sqrt(d)`; weight
    /// matrices use Glorot-uniform; biases and layer-norm shifts are zero
    /// and layer-norm gains one.
    pub fn init(config: &ModelConfig, vocabs: &Vocabs, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let mut p = ParamStore::new();
        let d = config.d_model();
        let hd = config.head_dim;
        let emb = |p: &mut Self, rng: &mut Rng, name: String, rows: usize, width: usize| -> Result<()> {
            let std = (width as f64).powf(-0.25);
            let data = (0..rows * width).map(|_| T::from_f64(rng.normal(0.0, std))).collect();
            p.insert(name, Tensor::new(vec![rows, width], data)?);
            Ok(())
        };
        let lin = |p: &mut Self, rng: &mut Rng, name: String, fan_in: usize, fan_out: usize| -> Result<()> {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data = (0..fan_in * fan_out).map(|_| T::from_f64(rng.uniform_in(-a, a))).collect();
            p.insert(name, Tensor::new(vec![fan_in, fan_out], data)?);
            Ok(())
        };
        let zeros = |p: &mut Self, name: String, n: usize| -> Result<()> {
            p.insert(name, Tensor::zeros(vec![n])?);
            Ok(())
        };
        let ones = |p: &mut Self, name: String, n: usize| -> Result<()> {
            p.insert(name, Tensor::ones(vec![n])?);
            Ok(())
        };

        emb(&mut p, rng, "emb.word".into(), vocabs.word.len(), config.d_w)?;
        emb(&mut p, rng, "emb.pos".into(), vocabs.pos.len(), config.d_t)?;
        emb(&mut p, rng, "emb.pred".into(), 2, config.d_p)?;
        for r in config.embedded_reprs() {
            let rows = match r {
                crate::config::Repr::Dep => vocabs.dep_word.len(),
                crate::config::Repr::Rel => vocabs.rel_label.len(),
                crate::config::Repr::DepPath => vocabs.dep_path.len(),
                crate::config::Repr::RelPath => vocabs.rel_path.len(),
            };
            emb(&mut p, rng, format!("emb.{r}"), rows, config.d_s)?;
        }
        for l in 1..=config.n_blocks {
            let b = format!("block{l}");
            lin(&mut p, rng, format!("{b}.ffn.w1"), d, config.d_ff)?;
            zeros(&mut p, format!("{b}.ffn.b1"), config.d_ff)?;
            lin(&mut p, rng, format!("{b}.ffn.w2"), config.d_ff, d)?;
            zeros(&mut p, format!("{b}.ffn.b2"), d)?;
            ones(&mut p, format!("{b}.ln1.gain"), d)?;
            zeros(&mut p, format!("{b}.ln1.bias"), d)?;
            ones(&mut p, format!("{b}.ln2.gain"), d)?;
            zeros(&mut p, format!("{b}.ln2.bias"), d)?;
            for h in 0..config.n_heads() {
                // the dependency head matrix stands in for query and key
                let replaced = config.mode == Mode::Lisa && l == config.lisa_layer && h == 0;
                let mats: &[&str] = if replaced { &["v"] } else { &["q", "k", "v"] };
                for m in mats {
                    lin(&mut p, rng, format!("{b}.head{h}.w{m}"), d, hd)?;
                    zeros(&mut p, format!("{b}.head{h}.b{m}"), hd)?;
                }
            }
            lin(&mut p, rng, format!("{b}.wo"), wo_width(config, l), d)?;
            if config.mode == Mode::RelAwe && l <= config.relawe_layers {
                for &r in &config.reprs {
                    lin(&mut p, rng, format!("{b}.relawe.{r}"), config.d_s, hd)?;
                }
            }
        }
        lin(&mut p, rng, "out.w".into(), d, vocabs.roles.len())?;
        zeros(&mut p, "out.b".into(), vocabs.roles.len())?;
        Ok(p)
    }
}

/// Input width of block `layer`'s output projection.
pub fn wo_width(config: &ModelConfig, layer: usize) -> usize {
    let base = config.n_heads() * config.head_dim;
    if config.mode == Mode::Lisa && layer == config.lisa_layer {
        base + config.lisa_rel_dim()
    } else {
        base
    }
}

/// Lazily places parameters on a graph: each name becomes one leaf the
/// first time it is used. Names can be pre-bound to caller-owned variables
/// (gradient checks do this).
pub struct Binding<'a, T: Scalar = f64> {
    graph: &'a Graph<T>,
    store: &'a ParamStore<T>,
    trainable: bool,
    vars: RefCell<BTreeMap<String, Var>>,
}

impl<'a, T: Scalar> Binding<'a, T> {
    /// `trainable` decides whether leaves record gradients.
    pub fn new(graph: &'a Graph<T>, store: &'a ParamStore<T>, trainable: bool) -> Self {
        Binding {
            graph,
            store,
            trainable,
            vars: RefCell::new(BTreeMap::new()),
        }
    }

    pub fn graph(&self) -> &'a Graph<T> {
        self.graph
    }

    pub fn bind(&self, name: &str, var: Var) {
        self.vars.borrow_mut().insert(name.to_string(), var);
    }

    pub fn var(&self, name: &str) -> Result<Var> {
        if let Some(&v) = self.vars.borrow().get(name) {
            return Ok(v);
        }
        let t = self
            .store
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))?
            .clone();
        let v = if self.trainable {
            self.graph.param(t)
        } else {
            self.graph.constant(t)
        };
        self.vars.borrow_mut().insert(name.to_string(), v);
        Ok(v)
    }

    /// Every name used so far with its variable.
    pub fn bound(&self) -> Vec<(String, Var)> {
        self.vars.borrow().iter().map(|(k, &v)| (k.clone(), v)).collect()
    }
}
