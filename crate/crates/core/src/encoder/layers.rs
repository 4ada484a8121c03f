use synsrl_tensor::{Graph, Rng, Scalar, Tensor, Var};

use super::params::Binding;
use super::EncodedInput;
use crate::config::{Mode, ModelConfig};
use crate::error::{Error, Result};

/// `n x d` sinusoidal position table: even column `2i` of row `t` holds
/// `sin(t / 10000^(2i/d))` and odd column `2i+1` the matching cosine.
pub fn sinusoidal_positions<T: Scalar>(n: usize, d: usize) -> Result<Tensor<T>> {
    if !d.is_multiple_of(2) {
        return Err(Error::OddWidth(d));
    }
    let mut data = Vec::with_capacity(n * d);
    for t in 0..n {
        for c in 0..d {
            let i2 = (c - c % 2) as f64;
            let angle = t as f64 / 10000f64.powf(i2 / d as f64);
            data.push(T::from_f64(if c % 2 == 0 { angle.sin() } else { angle.cos() }));
        }
    }
    Ok(Tensor::new(vec![n, d], data)?)
}

fn affine<T: Scalar>(g: &Graph<T>, x: Var, w: Var, b: Var) -> Result<Var> {
    Ok(g.add(g.matmul(x, w)?, b)?)
}

/// `max(0, x W1 + b1) W2 + b2` with dropout on the hidden layer.
#[allow(clippy::too_many_arguments)]
pub fn ffn<T: Scalar>(
    g: &Graph<T>,
    x: Var,
    w1: Var,
    b1: Var,
    w2: Var,
    b2: Var,
    dropout: f64,
    train: bool,
    rng: &mut Rng,
) -> Result<Var> {
    let hidden = g.relu(affine(g, x, w1, b1)?);
    let hidden = g.dropout(hidden, dropout, train, rng)?;
    affine(g, hidden, w2, b2)
}

/// `softmax(Q K^T / sqrt(d_k)) V`. Returns the output and the attention
/// weights before dropout.
pub fn scaled_dot_attention<T: Scalar>(
    g: &Graph<T>,
    q: Var,
    k: Var,
    v: Var,
    dropout: f64,
    train: bool,
    rng: &mut Rng,
) -> Result<(Var, Var)> {
    let d_k = *g.shape(q).last().expect("rank >= 1");
    let scores = g.matmul(q, g.transpose(k)?)?;
    let weights = g.softmax(g.scale(scores, T::from_f64(1.0 / (d_k as f64).sqrt())));
    let dropped = g.dropout(weights, dropout, train, rng)?;
    Ok((g.matmul(dropped, v)?, weights))
}

/// `M_D (V ⊕ E_R)`: row `i` copies the value (and relation embedding) of
/// the head of token `i`. No softmax, no scaling.
pub fn lisa_head<T: Scalar>(g: &Graph<T>, m_d: Var, v: Var, e_r: Option<Var>) -> Result<Var> {
    let values = match e_r {
        Some(e) => g.concat(&[v, e], 1)?,
        None => v,
    };
    Ok(g.matmul(m_d, values)?)
}

/// `softmax((Q + E_D + E_R) K^T / sqrt(d_k)) (V + E_D + E_R)`.
#[allow(clippy::too_many_arguments)]
pub fn relaware_attention<T: Scalar>(
    g: &Graph<T>,
    q: Var,
    k: Var,
    v: Var,
    e_d: Var,
    e_r: Var,
    dropout: f64,
    train: bool,
    rng: &mut Rng,
) -> Result<(Var, Var)> {
    let syntax = g.add(e_d, e_r)?;
    let q = g.add(q, syntax)?;
    let v = g.add(v, syntax)?;
    scaled_dot_attention(g, q, k, v, dropout, train, rng)
}

/// Multi-head attention of block `layer` (1-based). Returns the projected
/// output and each head's weight matrix.
pub fn multi_head<T: Scalar>(
    bind: &Binding<'_, T>,
    x: Var,
    input: &InputVars,
    config: &ModelConfig,
    layer: usize,
    train: bool,
    rng: &mut Rng,
) -> Result<(Var, Vec<Var>)> {
    let g = bind.graph();
    let b = format!("block{layer}");
    let relawe = config.mode == Mode::RelAwe && layer <= config.relawe_layers;
    let syntax = if relawe {
        let n = g.shape(x)[0];
        let zero = || g.constant(Tensor::zeros(vec![n, config.head_dim]).expect("positive"));
        let (mut e_d, mut e_r) = (None, None);
        for (r, emb) in &input.syntax {
            let proj = g.matmul(*emb, bind.var(&format!("{b}.relawe.{r}"))?)?;
            let side = if r.is_relation() { &mut e_r } else { &mut e_d };
            *side = Some(match side.take() {
                Some(acc) => g.add(acc, proj)?,
                None => proj,
            });
        }
        Some((e_d.unwrap_or_else(zero), e_r.unwrap_or_else(zero)))
    } else {
        None
    };

    let mut heads = Vec::with_capacity(config.n_heads());
    let mut weights = Vec::with_capacity(config.n_heads());
    for h in 0..config.n_heads() {
        let proj = |m: &str| -> Result<Var> {
            affine(
                g,
                x,
                bind.var(&format!("{b}.head{h}.w{m}"))?,
                bind.var(&format!("{b}.head{h}.b{m}"))?,
            )
        };
        let v = proj("v")?;
        let (out, w) = if config.mode == Mode::Lisa && layer == config.lisa_layer && h == 0 {
            (lisa_head(g, input.head_matrix, v, input.lisa_relation)?, input.head_matrix)
        } else if let Some((e_d, e_r)) = syntax {
            relaware_attention(g, proj("q")?, proj("k")?, v, e_d, e_r, config.dropout_attn, train, rng)?
        } else {
            scaled_dot_attention(g, proj("q")?, proj("k")?, v, config.dropout_attn, train, rng)?
        };
        heads.push(out);
        weights.push(w);
    }
    let cat = g.concat(&heads, 1)?;
    Ok((g.matmul(cat, bind.var(&format!("{b}.wo"))?)?, weights))
}

/// Sub-layer order inside a block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockOrder {
    /// FFN, then attention (the model's order).
    FfnFirst,
    /// Attention, then FFN (the original Transformer order).
    AttentionFirst,
}

/// `y = LN(x + drop(FFN(x)))`, `z = LN(y + drop(MultiHead(y)))`.
pub fn encoder_block<T: Scalar>(
    bind: &Binding<'_, T>,
    x: Var,
    input: &InputVars,
    config: &ModelConfig,
    layer: usize,
    train: bool,
    rng: &mut Rng,
) -> Result<(Var, Vec<Var>)> {
    encoder_block_ordered(bind, x, input, config, layer, train, rng, BlockOrder::FfnFirst)
}

#[allow(clippy::too_many_arguments)]
pub fn encoder_block_ordered<T: Scalar>(
    bind: &Binding<'_, T>,
    x: Var,
    input: &InputVars,
    config: &ModelConfig,
    layer: usize,
    train: bool,
    rng: &mut Rng,
    order: BlockOrder,
) -> Result<(Var, Vec<Var>)> {
    let g = bind.graph();
    let b = format!("block{layer}");
    let eps = T::from_f64(config.ln_eps);
    let norm = |x: Var, which: &str| -> Result<Var> {
        Ok(g.layer_norm(
            x,
            bind.var(&format!("{b}.{which}.gain"))?,
            bind.var(&format!("{b}.{which}.bias"))?,
            eps,
        )?)
    };
    let residual = |x: Var, sub: Var, which: &str, rng: &mut Rng| -> Result<Var> {
        let dropped = g.dropout(sub, config.dropout_res, train, rng)?;
        norm(g.add(x, dropped)?, which)
    };
    let ffn_sub = |x: Var, rng: &mut Rng| -> Result<Var> {
        ffn(
            g,
            x,
            bind.var(&format!("{b}.ffn.w1"))?,
            bind.var(&format!("{b}.ffn.b1"))?,
            bind.var(&format!("{b}.ffn.w2"))?,
            bind.var(&format!("{b}.ffn.b2"))?,
            config.dropout_ffn,
            train,
            rng,
        )
    };
    match order {
        BlockOrder::FfnFirst => {
            let f = ffn_sub(x, rng)?;
            let y = residual(x, f, "ln1", rng)?;
            let (a, w) = multi_head(bind, y, input, config, layer, train, rng)?;
            Ok((residual(y, a, "ln2", rng)?, w))
        }
        BlockOrder::AttentionFirst => {
            let (a, w) = multi_head(bind, x, input, config, layer, train, rng)?;
            let y = residual(x, a, "ln1", rng)?;
            let f = ffn_sub(y, rng)?;
            Ok((residual(y, f, "ln2", rng)?, w))
        }
    }
}

/// Graph-side view of an [`EncodedInput`].
pub struct InputVars {
    /// Concatenated embeddings plus positions, `n x d_model`.
    pub x: Var,
    /// Gathered syntax embeddings for every embedded representation.
    pub syntax: Vec<(crate::config::Repr, Var)>,
    /// One-hot head matrix (constant).
    pub head_matrix: Var,
    /// Relation embeddings concatenated onto the LISA head.
    pub lisa_relation: Option<Var>,
}

/// Embeds `input`: word ⊕ POS ⊕ predicate indicator (⊕ syntax in input
/// mode), plus sinusoidal positions.
pub fn build_input<T: Scalar>(bind: &Binding<'_, T>, input: &EncodedInput<T>, config: &ModelConfig) -> Result<InputVars> {
    let g = bind.graph();
    let mut syntax = Vec::new();
    for r in config.embedded_reprs() {
        let table = bind.var(&format!("emb.{r}"))?;
        syntax.push((r, g.embedding(table, input.ids(r))?));
    }
    let mut parts = vec![
        g.embedding(bind.var("emb.word")?, &input.word_ids)?,
        g.embedding(bind.var("emb.pos")?, &input.pos_ids)?,
        g.embedding(bind.var("emb.pred")?, &input.pred_ids)?,
    ];
    if config.mode == Mode::Input {
        parts.extend(syntax.iter().map(|(_, v)| *v));
    }
    let x = g.concat(&parts, 1)?;
    let x = g.add(x, g.constant(sinusoidal_positions(input.len(), config.d_model())?))?;
    let relation: Vec<Var> = syntax.iter().filter(|(r, _)| r.is_relation()).map(|(_, v)| *v).collect();
    let lisa_relation = match (config.mode, relation.len()) {
        (Mode::Lisa, 0) | (Mode::None | Mode::Input | Mode::RelAwe, _) => None,
        (Mode::Lisa, 1) => Some(relation[0]),
        (Mode::Lisa, _) => Some(g.concat(&relation, 1)?),
    };
    Ok(InputVars {
        x,
        syntax,
        head_matrix: g.constant(input.head_matrix.clone()),
        lisa_relation,
    })
}
