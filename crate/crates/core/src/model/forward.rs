use super::{Architecture, ModelConfig};
use crate::autodiff::{Graph, Tensor, Var};
use crate::corpus::{EncodedPair, LabelCategory};
use crate::error::{Error, Result};

/// Where each source position lands in the extended vocabulary that `P(w)`
/// ranges over. Ids below `v_out` are output-vocabulary words.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CopyMap {
    pub src_ext: Vec<usize>,
    pub ext_size: usize,
}

/// Encoder results recorded on a graph, plus per-source constants the
/// decoder reuses at every step.
#[derive(Clone, Debug)]
pub struct EncoderOutput {
    /// `[S, memory_width]` states attended over.
    pub memory: Var,
    /// Initial decoder hidden state.
    pub h0: Var,
    /// `[S, 6·struct_dim]` structural vectors, when the architecture has them.
    pub structural: Option<Var>,
    /// `[S, primitive_width]` rows `[s ‖ x]` for the two-way variants.
    pub primitive: Option<Var>,
    memory_proj: Var,
    keys_proj: Option<Var>,
    /// Parent and child incidence, restricted to earlier positions.
    relation: Option<(Var, Var)>,
    copy: CopyMap,
    len: usize,
}

impl EncoderOutput {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn copy_map(&self) -> &CopyMap {
        &self.copy
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DecoderState {
    pub h: Var,
    pub c: Var,
    /// Steps taken so far.
    pub step: usize,
    /// Sum of earlier semantic attention rows (relation variant only).
    alpha_hist: Option<Var>,
    /// Sum of earlier copy-attention rows, for the coverage term.
    weight_hist: Option<Var>,
}

#[derive(Clone, Debug)]
pub struct StepOutput {
    /// Distribution over the extended vocabulary.
    pub probs: Var,
    pub alpha: Var,
    pub beta: Option<Var>,
    pub gamma: Option<Var>,
    pub delta: Option<Var>,
    /// Attention used for the context vector and copying (`α` or `δ`).
    pub weights: Var,
    pub p_gen: Var,
    pub context: Var,
    /// `Σ_i min(history_i, weights_i)`; `None` at the first step.
    pub coverage: Option<Var>,
    pub state: DecoderState,
}

struct Lstm {
    wx: Var,
    wh: Var,
    b: Var,
    hidden: usize,
}

fn lstm(g: &mut Graph<'_>, prefix: &str, hidden: usize) -> Result<Lstm> {
    Ok(Lstm {
        wx: g.param_named(&format!("{prefix}.wx"))?,
        wh: g.param_named(&format!("{prefix}.wh"))?,
        b: g.param_named(&format!("{prefix}.b"))?,
        hidden,
    })
}

/// One LSTM step; `xw` already holds `x · W_x + b`. Gate order is
/// input, forget, candidate, output.
fn lstm_cell(g: &mut Graph<'_>, l: &Lstm, xw: Var, h: Var, c: Var) -> Result<(Var, Var)> {
    let n = l.hidden;
    let hw = g.matmul(h, l.wh)?;
    let z = g.add(xw, hw)?;
    let zi = g.slice(z, 0, n)?;
    let zf = g.slice(z, n, n)?;
    let zg = g.slice(z, 2 * n, n)?;
    let zo = g.slice(z, 3 * n, n)?;
    let i = g.sigmoid(zi);
    let f = g.sigmoid(zf);
    let cand = g.tanh(zg);
    let o = g.sigmoid(zo);
    let keep = g.mul(f, c)?;
    let write = g.mul(i, cand)?;
    let c2 = g.add(keep, write)?;
    let tc = g.tanh(c2);
    let h2 = g.mul(o, tc)?;
    Ok((h2, c2))
}

/// Runs one direction over the rows of `input`, returning a state per row
/// in input order.
fn lstm_pass(g: &mut Graph<'_>, l: &Lstm, input: Var, reverse: bool) -> Result<Vec<Var>> {
    let s = g.value(input).rows();
    let xw = g.matmul(input, l.wx)?;
    let xw = g.add_row(xw, l.b)?;
    let zero = Tensor::zeros(&[l.hidden]);
    let mut h = g.constant(zero.clone());
    let mut c = g.constant(zero);
    let mut out = vec![h; s];
    let order: Vec<usize> = if reverse {
        (0..s).rev().collect()
    } else {
        (0..s).collect()
    };
    for i in order {
        let x = g.row(xw, i)?;
        (h, c) = lstm_cell(g, l, x, h, c)?;
        out[i] = h;
    }
    Ok(out)
}

fn bilstm_layer(g: &mut Graph<'_>, layer: &str, input: Var, hidden: usize) -> Result<Var> {
    let fwd = lstm(g, &format!("enc.{layer}.fwd"), hidden)?;
    let bwd = lstm(g, &format!("enc.{layer}.bwd"), hidden)?;
    let hf = lstm_pass(g, &fwd, input, false)?;
    let hb = lstm_pass(g, &bwd, input, true)?;
    let rows = hf
        .into_iter()
        .zip(hb)
        .map(|(f, b)| g.concat(&[f, b]))
        .collect::<Result<Vec<_>>>()?;
    g.stack(&rows)
}

fn structural_vectors(g: &mut Graph<'_>, pair: &EncodedPair) -> Result<Var> {
    let ids = pair
        .src_struct_ids
        .as_ref()
        .ok_or_else(|| Error::Model("architecture needs structural labels".into()))?;
    let parts = LabelCategory::ALL
        .iter()
        .map(|cat| {
            let table = g.param_named(&format!("struct.{}", cat.name()))?;
            g.embedding(table, &ids[cat.index()])
        })
        .collect::<Result<Vec<_>>>()?;
    g.concat(&parts)
}

/// 0/1 matrices `(A_par, A_child)` over positions, keeping only edges to
/// earlier words: `A_par[i][j] = 1` when `j < i` is the head of `i`, and
/// `A_child[i][j] = 1` when `j < i` depends on `i`.
pub fn relation_matrices(parents: &[Option<usize>]) -> (Tensor, Tensor) {
    let s = parents.len();
    let mut par = Tensor::zeros(&[s, s]);
    let mut child = Tensor::zeros(&[s, s]);
    for (i, p) in parents.iter().enumerate() {
        if let Some(p) = *p {
            if p < i {
                par.data_mut()[i * s + p] = 1.0;
            } else if p > i {
                child.data_mut()[p * s + i] = 1.0;
            }
        }
    }
    (par, child)
}

fn parent_selector(parents: &[Option<usize>]) -> Tensor {
    let s = parents.len();
    let mut t = Tensor::zeros(&[s, s]);
    for (i, p) in parents.iter().enumerate() {
        if let Some(p) = *p {
            t.data_mut()[i * s + p] = 1.0;
        }
    }
    t
}

fn target_table(g: &mut Graph<'_>, cfg: &ModelConfig) -> Result<Var> {
    g.param_named(if cfg.share_embeddings {
        "embed.word"
    } else {
        "embed.target"
    })
}

/// Encodes one source sentence.
pub fn encode(
    g: &mut Graph<'_>,
    cfg: &ModelConfig,
    pair: &EncodedPair,
    copy: &CopyMap,
) -> Result<EncoderOutput> {
    let s = pair.src_len();
    if s == 0 {
        return Err(Error::Model("empty source".into()));
    }
    if copy.src_ext.len() != s {
        return Err(Error::Model(format!(
            "copy map covers {} positions, source has {s}",
            copy.src_ext.len()
        )));
    }
    if copy.ext_size < cfg.v_out || copy.src_ext.iter().any(|&e| e >= copy.ext_size) {
        return Err(Error::Model(format!(
            "copy map does not fit an extended vocabulary of {}",
            copy.ext_size
        )));
    }
    let arch = cfg.architecture;
    let table = g.param_named("embed.word")?;
    let x = g.embedding(table, &pair.src_ids)?;
    let structural = if arch.uses_structure() {
        Some(structural_vectors(g, pair)?)
    } else {
        None
    };

    let input = match (arch, structural) {
        (Architecture::StructInput, Some(sv)) => g.concat(&[x, sv])?,
        _ => x,
    };
    let l1 = bilstm_layer(g, "l1", input, cfg.hidden_dim)?;
    let l2 = bilstm_layer(g, "l2", l1, cfg.hidden_dim)?;
    let memory = match (arch, structural) {
        (Architecture::StructHidden, Some(sv)) => g.concat(&[l2, sv])?,
        _ => l2,
    };

    let mean = g.mean_rows(memory)?;
    let bw = g.param_named("bridge.w")?;
    let bb = g.param_named("bridge.b")?;
    let pre = g.matmul(mean, bw)?;
    let pre = g.add(pre, bb)?;
    let h0 = g.tanh(pre);

    let w_enc = g.param_named("attn.w_enc")?;
    let memory_proj = g.matmul(memory, w_enc)?;

    let (primitive, keys_proj, relation) = match (arch.is_two_way(), structural) {
        (true, Some(sv)) => {
            let prim = g.concat(&[sv, x])?;
            let (keys, relation) = if arch == Architecture::TwoWayRelation {
                let parents = pair
                    .parent_index
                    .as_ref()
                    .ok_or_else(|| Error::Model("architecture needs parent indices".into()))?;
                let sel = g.constant(parent_selector(parents));
                let parent_rows = g.matmul(sel, prim)?;
                let keys = g.concat(&[prim, parent_rows])?;
                let (par, child) = relation_matrices(parents);
                let par = g.constant(par);
                let child = g.constant(child);
                (keys, Some((par, child)))
            } else {
                (prim, None)
            };
            let w_g = g.param_named("sattn.w_g")?;
            (Some(prim), Some(g.matmul(keys, w_g)?), relation)
        }
        _ => (None, None, None),
    };

    Ok(EncoderOutput {
        memory,
        h0,
        structural,
        primitive,
        memory_proj,
        keys_proj,
        relation,
        copy: copy.clone(),
        len: s,
    })
}

pub fn initial_state(g: &mut Graph<'_>, cfg: &ModelConfig, enc: &EncoderOutput) -> DecoderState {
    DecoderState {
        h: enc.h0,
        c: g.constant(Tensor::zeros(&[cfg.hidden_dim])),
        step: 0,
        alpha_hist: None,
        weight_hist: None,
    }
}

/// `softmax_i( vᵀ tanh(proj_i + h·W_dec + b) )` with `proj = keys · W_key`
/// precomputed.
fn additive_attention(
    g: &mut Graph<'_>,
    proj: Var,
    h: Var,
    w_dec: &str,
    b: &str,
    v: &str,
) -> Result<Var> {
    let w = g.param_named(w_dec)?;
    let b = g.param_named(b)?;
    let v = g.param_named(v)?;
    let q = g.matmul(h, w)?;
    let q = g.add(q, b)?;
    let pre = g.add_row(proj, q)?;
    let act = g.tanh(pre);
    let scores = g.matmul(act, v)?;
    g.softmax(scores)
}

fn epsilon(g: &mut Graph<'_>, cfg: &ModelConfig) -> Result<Var> {
    Ok(match cfg.fixed_epsilon {
        Some(e) => g.constant(Tensor::scalar(e)),
        None => {
            let raw = g.param_named("eps.raw")?;
            g.softplus(raw)
        }
    })
}

/// Semantic attention `α_t` for decoder state `h`.
pub fn attention_semantic(g: &mut Graph<'_>, enc: &EncoderOutput, h: Var) -> Result<Var> {
    additive_attention(g, enc.memory_proj, h, "attn.w_dec", "attn.b", "attn.v")
}

/// Structural attention `β_t`; only the two-way variants have it.
pub fn attention_structural(
    g: &mut Graph<'_>,
    cfg: &ModelConfig,
    enc: &EncoderOutput,
    h: Var,
) -> Result<Var> {
    let proj = match (cfg.architecture.is_two_way(), enc.keys_proj) {
        (true, Some(p)) => p,
        _ => {
            return Err(Error::Model(format!(
                "{} has no structural attention",
                cfg.architecture
            )))
        }
    };
    additive_attention(g, proj, h, "sattn.w_dec", "sattn.b", "sattn.u")
}

/// One decoder step fed with input-vocabulary id `prev`.
pub fn decode_step(
    g: &mut Graph<'_>,
    cfg: &ModelConfig,
    enc: &EncoderOutput,
    state: &DecoderState,
    prev: usize,
) -> Result<StepOutput> {
    let table = target_table(g, cfg)?;
    let y = g.embedding_row(table, prev)?;
    let dec = lstm(g, "dec", cfg.hidden_dim)?;
    let yw = g.matmul(y, dec.wx)?;
    let yw = g.add(yw, dec.b)?;
    let (h, c) = lstm_cell(g, &dec, yw, state.h, state.c)?;

    let alpha = attention_semantic(g, enc, h)?;
    let (mut beta, mut gamma, mut delta) = (None, None, None);
    let mut alpha_hist = None;
    match cfg.architecture {
        Architecture::TwoWayWord => {
            let b = attention_structural(g, cfg, enc, h)?;
            let eps = epsilon(g, cfg)?;
            let eb = g.scale(b, eps)?;
            let mixed = g.add(alpha, eb)?;
            beta = Some(b);
            delta = Some(g.normalize(mixed)?);
        }
        Architecture::TwoWayRelation => {
            let b = attention_structural(g, cfg, enc, h)?;
            let (par, child) = enc.relation.expect("relation matrices built by encode");
            match state.alpha_hist {
                // Empty history: γ vanishes and δ is α itself.
                None => {
                    gamma = Some(g.constant(Tensor::zeros(&[enc.len])));
                    delta = Some(alpha);
                }
                Some(hist) => {
                    let from_heads = g.matmul(par, hist)?;
                    let t1 = g.mul(b, from_heads)?;
                    let hb = g.mul(hist, b)?;
                    let t2 = g.matmul(child, hb)?;
                    let gm = g.add(t1, t2)?;
                    let eps = epsilon(g, cfg)?;
                    let eg = g.scale(gm, eps)?;
                    let mixed = g.add(alpha, eg)?;
                    gamma = Some(gm);
                    delta = Some(g.normalize(mixed)?);
                }
            }
            beta = Some(b);
            alpha_hist = Some(match state.alpha_hist {
                None => alpha,
                Some(hist) => g.add(hist, alpha)?,
            });
        }
        _ => {}
    }
    let weights = delta.unwrap_or(alpha);

    let context = g.matmul(weights, enc.memory)?;
    let hc = g.concat(&[h, context])?;
    let w_h = g.param_named("out.w_h")?;
    let b_h = g.param_named("out.b_h")?;
    let pre = g.matmul(hc, w_h)?;
    let pre = g.add(pre, b_h)?;
    let h_tilde = g.tanh(pre);
    let w_y = g.param_named("out.w_y")?;
    let b_y = g.param_named("out.b_y")?;
    let logits = g.matmul(h_tilde, w_y)?;
    let logits = g.add(logits, b_y)?;
    let p_vocab = g.softmax(logits)?;

    let vocab_index: Vec<usize> = (0..cfg.v_out).collect();
    let ext = enc.copy.ext_size;
    let (p_gen, probs) = if cfg.copy {
        let w_z = g.param_named("switch.w")?;
        let b_z = g.param_named("switch.b")?;
        let feats = g.concat(&[h, context, y])?;
        let z = g.matmul(feats, w_z)?;
        let z = g.add(z, b_z)?;
        let p_gen = g.sigmoid(z);
        let gen = g.scale(p_vocab, p_gen)?;
        let gen = g.scatter_add(gen, &vocab_index, ext)?;
        let p_copy = g.affine(p_gen, -1.0, 1.0);
        let cp = g.scale(weights, p_copy)?;
        let cp = g.scatter_add(cp, &enc.copy.src_ext, ext)?;
        (p_gen, g.add(gen, cp)?)
    } else {
        let one = g.constant(Tensor::scalar(1.0));
        (one, g.scatter_add(p_vocab, &vocab_index, ext)?)
    };

    let (coverage, weight_hist) = coverage_step(g, state.weight_hist, weights)?;

    Ok(StepOutput {
        probs,
        alpha,
        beta,
        gamma,
        delta,
        weights,
        p_gen,
        context,
        coverage,
        state: DecoderState {
            h,
            c,
            step: state.step + 1,
            alpha_hist,
            weight_hist: Some(weight_hist),
        },
    })
}

/// Coverage contribution `Σ_i min(hist_i, attn_i)` of one step and the
/// updated history. The first step has no history and contributes nothing.
pub fn coverage_step(
    g: &mut Graph<'_>,
    hist: Option<Var>,
    attn: Var,
) -> Result<(Option<Var>, Var)> {
    match hist {
        None => Ok((None, attn)),
        Some(h) => {
            let m = g.min(h, attn)?;
            Ok((Some(g.sum(m)), g.add(h, attn)?))
        }
    }
}

/// `δ = (α + εβ) / Σ(α + εβ)` on plain vectors.
pub fn combine_two_way_word(alpha: &[f64], beta: &[f64], eps: f64) -> Result<Vec<f64>> {
    if alpha.len() != beta.len() {
        return Err(Error::Shape {
            op: "combine_two_way_word",
            lhs: vec![alpha.len()],
            rhs: vec![beta.len()],
        });
    }
    let mixed: Vec<f64> = alpha.iter().zip(beta).map(|(a, b)| a + eps * b).collect();
    normalize(mixed, "combine_two_way_word")
}

fn normalize(v: Vec<f64>, op: &'static str) -> Result<Vec<f64>> {
    let z: f64 = v.iter().sum();
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::invalid(
            op,
            format!("denominator must be positive, got {z}"),
        ));
    }
    Ok(v.into_iter().map(|x| x / z).collect())
}

/// Relation-propagated salience `γ` and the mixed attention `δ` on plain
/// vectors. `alpha_history` holds the semantic attention rows of all
/// earlier steps.
pub fn combine_two_way_relation(
    alpha_history: &[Vec<f64>],
    alpha: &[f64],
    beta: &[f64],
    parents: &[Option<usize>],
    eps: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let s = alpha.len();
    if beta.len() != s || parents.len() != s || alpha_history.iter().any(|r| r.len() != s) {
        return Err(Error::invalid(
            "combine_two_way_relation",
            "length mismatch",
        ));
    }
    if alpha_history.is_empty() {
        return Ok((vec![0.0; s], alpha.to_vec()));
    }
    let tilde: Vec<f64> = (0..s)
        .map(|j| alpha_history.iter().map(|r| r[j]).sum())
        .collect();
    let mut gamma = vec![0.0; s];
    for (i, p) in parents.iter().enumerate() {
        if let Some(p) = *p {
            if p < i {
                // head p precedes dependent i: salience of i's edge
                gamma[i] += tilde[p] * beta[i];
            } else if p > i {
                // dependent i precedes its head p
                gamma[p] += tilde[i] * beta[i];
            }
        }
    }
    let mixed = alpha.iter().zip(&gamma).map(|(a, g)| a + eps * g).collect();
    Ok((gamma, normalize(mixed, "combine_two_way_relation")?))
}

/// `P(w) = p_gen·P_vocab(w) + (1 − p_gen)·Σ_{i: w_i = w} attn_i` on plain
/// vectors, over an extended vocabulary of `ext_size` entries.
pub fn mix_copy_distribution(
    p_vocab: &[f64],
    attn: &[f64],
    src_ext: &[usize],
    p_gen: f64,
    ext_size: usize,
) -> Vec<f64> {
    let mut p = vec![0.0; ext_size];
    for (w, pv) in p_vocab.iter().enumerate() {
        p[w] += p_gen * pv;
    }
    for (&w, a) in src_ext.iter().zip(attn) {
        p[w] += (1.0 - p_gen) * a;
    }
    p
}
