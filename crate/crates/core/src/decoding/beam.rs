use std::cmp::Ordering;
use std::collections::HashMap;
use std::hash::Hash;

use crate::corpus::{BOS_ID, EOS_ID, PAD_ID};
use crate::error::{Error, Result};

/// A decoder seen as a function from (state, previous token) to a
/// distribution over the next token.
pub trait StepModel {
    type State: Clone;

    fn start(&mut self) -> Result<Self::State>;

    /// Probabilities over the extended vocabulary after feeding `prev`
    /// (`<s>` on the first step) and the successor state.
    fn step(&mut self, state: &Self::State, prev: usize) -> Result<(Vec<f64>, Self::State)>;
}

/// Number of candidate bigrams found in the source bigram multiset, each
/// source bigram credited at most as often as it occurs there.
pub fn bigram_overlap<T: Eq + Hash>(candidate: &[T], source: &[T]) -> usize {
    let mut avail: HashMap<(&T, &T), usize> = HashMap::new();
    for w in source.windows(2) {
        *avail.entry((&w[0], &w[1])).or_default() += 1;
    }
    let mut hits = 0;
    for w in candidate.windows(2) {
        if let Some(c) = avail.get_mut(&(&w[0], &w[1])) {
            if *c > 0 {
                *c -= 1;
                hits += 1;
            }
        }
    }
    hits
}

fn is_candidate(w: usize, p: f64) -> bool {
    w != PAD_ID && w != BOS_ID && p > 0.0
}

/// Argmax decoding; stops after `<eos>` (not emitted) or `max_len` steps.
pub fn greedy<M: StepModel>(model: &mut M, max_len: usize) -> Result<Vec<usize>> {
    let mut state = model.start()?;
    let mut prev = BOS_ID;
    let mut out = Vec::new();
    for _ in 0..max_len {
        let (probs, next) = model.step(&state, prev)?;
        let best = probs
            .iter()
            .enumerate()
            .filter(|&(w, &p)| is_candidate(w, p))
            .fold(None, |best: Option<(usize, f64)>, (w, &p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((w, p)),
            })
            .ok_or_else(|| Error::Model("step distribution has no admissible token".into()))?
            .0;
        if best == EOS_ID {
            break;
        }
        out.push(best);
        prev = best;
        state = next;
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct BeamConfig {
    pub beam_size: usize,
    /// Weight η of the source-bigram reward.
    pub eta: f64,
    pub max_len: usize,
}

/// A partial or finished beam entry.
#[derive(Clone, Debug)]
pub struct Hypothesis<S> {
    /// Emitted ids, `<eos>` included when finished.
    pub tokens: Vec<usize>,
    /// Sum of per-step `log P(w)`.
    pub log_prob: f64,
    /// Bigrams shared with the source.
    pub overlap: usize,
    pub finished: bool,
    pub state: S,
}

impl<S> Hypothesis<S> {
    /// `log_prob + η·B/S`: the per-word scores summed over the sequence.
    pub fn score(&self, eta: f64, src_len: usize) -> f64 {
        self.log_prob + eta * self.overlap as f64 / src_len as f64
    }

    /// Tokens without the trailing end marker.
    pub fn words(&self) -> &[usize] {
        match self.tokens.last() {
            Some(&EOS_ID) => &self.tokens[..self.tokens.len() - 1],
            _ => &self.tokens,
        }
    }
}

/// Ids whose addition after `tokens` forms one more clipped source bigram.
fn rewarded_next(tokens: &[usize], source: &[usize]) -> Vec<usize> {
    let Some(&last) = tokens.last() else {
        return Vec::new();
    };
    let mut out: Vec<usize> = Vec::new();
    for w in source.windows(2) {
        if w[0] != last || out.contains(&w[1]) {
            continue;
        }
        let avail = source
            .windows(2)
            .filter(|b| b[0] == last && b[1] == w[1])
            .count();
        let used = tokens
            .windows(2)
            .filter(|b| b[0] == last && b[1] == w[1])
            .count();
        if used < avail {
            out.push(w[1]);
        }
    }
    out
}

/// Total order used for the final pick: higher score, then fewer tokens,
/// then lexicographically smaller ids.
fn final_order<S>(a: &Hypothesis<S>, b: &Hypothesis<S>, eta: f64, s: usize) -> Ordering {
    b.score(eta, s)
        .partial_cmp(&a.score(eta, s))
        .unwrap_or(Ordering::Equal)
        .then(a.tokens.len().cmp(&b.tokens.len()))
        .then_with(|| a.tokens.cmp(&b.tokens))
}

/// Beam search scoring each extension by `log P(w) + η·ΔB/S`, where `source`
/// holds the extended ids of the source words. Finished hypotheses are
/// frozen; search ends once `beam_size` of them exist or after `max_len`
/// steps, and the best finished-or-live hypothesis is returned.
pub fn beam<M: StepModel>(
    model: &mut M,
    source: &[usize],
    cfg: &BeamConfig,
) -> Result<Hypothesis<M::State>> {
    if cfg.beam_size == 0 {
        return Err(Error::Model("beam size must be at least 1".into()));
    }
    if cfg.eta.is_nan() || cfg.eta < 0.0 {
        return Err(Error::Model(format!("eta must be >= 0, got {}", cfg.eta)));
    }
    let s = source.len().max(1);
    let mut live = vec![Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
        overlap: 0,
        finished: false,
        state: model.start()?,
    }];
    let mut done: Vec<Hypothesis<M::State>> = Vec::new();

    for _ in 0..cfg.max_len {
        if live.is_empty() || done.len() >= cfg.beam_size {
            break;
        }
        // (score, parent, token, log_prob, overlap)
        let mut cands: Vec<(f64, usize, usize, f64, usize)> = Vec::new();
        let mut next_states = Vec::with_capacity(live.len());
        for (pi, h) in live.iter().enumerate() {
            let prev = h.tokens.last().copied().unwrap_or(BOS_ID);
            let (probs, next) = model.step(&h.state, prev)?;
            next_states.push(next);
            let bonus = rewarded_next(&h.tokens, source);
            for (w, &p) in probs.iter().enumerate() {
                if !is_candidate(w, p) {
                    continue;
                }
                let lp = h.log_prob + p.ln();
                let ov = h.overlap + usize::from(bonus.contains(&w));
                cands.push((lp + cfg.eta * ov as f64 / s as f64, pi, w, lp, ov));
            }
        }
        cands.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(Ordering::Equal)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        let mut new_live = Vec::new();
        for &(_, pi, w, lp, ov) in cands.iter().take(cfg.beam_size) {
            let mut tokens = live[pi].tokens.clone();
            tokens.push(w);
            let h = Hypothesis {
                tokens,
                log_prob: lp,
                overlap: ov,
                finished: w == EOS_ID,
                state: next_states[pi].clone(),
            };
            if h.finished {
                done.push(h);
            } else {
                new_live.push(h);
            }
        }
        live = new_live;
    }
    done.extend(live);
    done.into_iter()
        .min_by(|a, b| final_order(a, b, cfg.eta, s))
        .ok_or_else(|| Error::Model("beam search produced no hypothesis".into()))
}
