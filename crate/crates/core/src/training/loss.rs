use crate::autodiff::{Graph, Tensor, Var};
use crate::corpus::{EncodedPair, Vocabulary, BOS_ID};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{decode_step, encode, initial_state, CopyMap, Model, ModelConfig};

use super::BatchVocabulary;

/// Graph nodes for one teacher-forced instance.
pub struct InstanceGraph {
    /// Sum over steps of `-log P(gold)`.
    pub nll: Var,
    /// `Σ_t Σ_i min(history, attention)`, or `None` for single-step targets.
    pub coverage: Option<Var>,
    /// Copy-attention row per step.
    pub attention: Vec<Var>,
    pub steps: usize,
    pub src_len: usize,
}

/// Builds the teacher-forced forward pass. `gold` holds batch-vocabulary
/// ids (end marker included); the decoder is fed `<s>` and then the summary
/// words by their input-vocabulary ids.
pub fn instance_graph(
    g: &mut Graph<'_>,
    cfg: &ModelConfig,
    pair: &EncodedPair,
    copy: &CopyMap,
    gold: &[usize],
) -> Result<InstanceGraph> {
    if gold.len() != pair.tgt_len() + 1 {
        return Err(Error::Training(format!(
            "expected {} gold ids, got {}",
            pair.tgt_len() + 1,
            gold.len()
        )));
    }
    let enc = encode(g, cfg, pair, copy)?;
    let mut state = initial_state(g, cfg, &enc);
    let inputs = std::iter::once(BOS_ID).chain(pair.tgt_ids.iter().copied());
    let mut nll_terms = Vec::with_capacity(gold.len());
    let mut cov_terms = Vec::new();
    let mut attention = Vec::with_capacity(gold.len());
    for (prev, &target) in inputs.zip(gold) {
        let out = decode_step(g, cfg, &enc, &state, prev)?;
        let p = g.slice(out.probs, target, 1)?;
        let lp = g.log(p);
        nll_terms.push(lp);
        if let Some(c) = out.coverage {
            cov_terms.push(c);
        }
        attention.push(out.weights);
        state = out.state;
    }
    let lp = g.concat(&nll_terms)?;
    let total = g.sum(lp);
    let nll = g.affine(total, -1.0, 0.0);
    let coverage = if cov_terms.is_empty() {
        None
    } else {
        let c = g.concat(&cov_terms)?;
        Some(g.sum(c))
    };
    Ok(InstanceGraph {
        nll,
        coverage,
        attention,
        steps: gold.len(),
        src_len: pair.src_len(),
    })
}

/// Loss and coverage for one batch.
#[derive(Clone, Debug, PartialEq)]
pub struct StepLoss {
    /// Mean `-log P(gold)` over all target tokens of the batch.
    pub loss: f64,
    /// `λ Σ_m 1/(T_m S_m) Σ_t Σ_i min(α̃, α)`.
    pub omega: f64,
    pub tokens: usize,
    /// Per instance, the copy-attention rows `[T][S]`.
    pub attention: Vec<Vec<Vec<f64>>>,
}

struct InstanceResult {
    nll: f64,
    coverage: f64,
    attention: Vec<Vec<f64>>,
    grads: Option<Vec<Tensor>>,
}

fn run_instance(
    model: &Model,
    vocab: &Vocabulary,
    bv: &BatchVocabulary,
    pair: &EncodedPair,
    weights: Option<(f64, f64)>,
) -> Result<InstanceResult> {
    let cfg = model.config();
    let mut g = Graph::new(model.params());
    let copy = bv.copy_map(vocab, pair);
    let gold = bv.gold_ids(vocab, pair, cfg.copy);
    let ig = instance_graph(&mut g, cfg, pair, &copy, &gold)?;
    let norm = (ig.steps * ig.src_len) as f64;
    let nll = g.value(ig.nll).item();
    let coverage = ig.coverage.map_or(0.0, |c| g.value(c).item()) / norm;
    let attention = ig
        .attention
        .iter()
        .map(|&a| g.value(a).data().to_vec())
        .collect();
    let grads = match weights {
        None => None,
        Some((nll_w, cov_w)) => {
            let mut obj = g.affine(ig.nll, nll_w, 0.0);
            if let (Some(c), true) = (ig.coverage, cov_w > 0.0) {
                let c = g.affine(c, cov_w / norm, 0.0);
                obj = g.add(obj, c)?;
            }
            g.backward(obj)?;
            Some(g.param_grads())
        }
    };
    Ok(InstanceResult {
        nll,
        coverage,
        attention,
        grads,
    })
}

fn run_batch(
    model: &Model,
    vocab: &Vocabulary,
    pairs: &[&EncodedPair],
    lambda: f64,
    grad_coverage: Option<bool>,
    exec: Execution,
) -> Result<(StepLoss, Option<Vec<Tensor>>)> {
    if pairs.is_empty() {
        return Err(Error::Training("empty batch".into()));
    }
    let bv = BatchVocabulary::new(vocab, pairs.iter().copied());
    let tokens: usize = pairs.iter().map(|p| p.tgt_len() + 1).sum();
    let weights = grad_coverage.map(|cov| (1.0 / tokens as f64, if cov { lambda } else { 0.0 }));
    let results = exec.try_map(pairs, |p| run_instance(model, vocab, &bv, p, weights))?;

    let loss = results.iter().map(|r| r.nll).sum::<f64>() / tokens as f64;
    let omega = lambda * results.iter().map(|r| r.coverage).sum::<f64>();
    let grads = grad_coverage.map(|_| {
        let mut total = model.params().zeros_like();
        for r in &results {
            for (t, g) in total.iter_mut().zip(r.grads.as_ref().unwrap()) {
                t.add_assign(g.data());
            }
        }
        total
    });
    let attention = results.into_iter().map(|r| r.attention).collect();
    Ok((
        StepLoss {
            loss,
            omega,
            tokens,
            attention,
        },
        grads,
    ))
}

/// Forward pass only.
pub fn step_loss(
    model: &Model,
    vocab: &Vocabulary,
    pairs: &[&EncodedPair],
    lambda: f64,
    exec: Execution,
) -> Result<StepLoss> {
    Ok(run_batch(model, vocab, pairs, lambda, None, exec)?.0)
}

/// Loss plus the gradient of `L` (or `L + Ω` with `coverage`) for every
/// parameter, in parameter order.
pub fn step_gradients(
    model: &Model,
    vocab: &Vocabulary,
    pairs: &[&EncodedPair],
    lambda: f64,
    coverage: bool,
    exec: Execution,
) -> Result<(StepLoss, Vec<Tensor>)> {
    let (loss, grads) = run_batch(model, vocab, pairs, lambda, Some(coverage), exec)?;
    Ok((loss, grads.expect("gradients requested")))
}

/// `Σ_t Σ_i min(α̃_{t,i}, α_{t,i})` for attention rows `[T][S]`, with the
/// history of step `t` summing rows `0..t`.
pub fn coverage_sum(rows: &[Vec<f64>]) -> f64 {
    let Some(first) = rows.first() else {
        return 0.0;
    };
    let mut hist = vec![0.0f64; first.len()];
    let mut total = 0.0;
    for row in rows {
        total += hist.iter().zip(row).map(|(&h, &a)| h.min(a)).sum::<f64>();
        hist.iter_mut().zip(row).for_each(|(h, a)| *h += a);
    }
    total
}
