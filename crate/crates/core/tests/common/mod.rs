#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use structsum::corpus::toy::ToyPair;
use structsum::corpus::{
    build_vocabularies, encode_pair, extract_structural_labels, EncodeLimits, EncodedPair,
    StructConfig, VocabSource, Vocabulary,
};
use structsum::decoding::StepModel;
use structsum::model::{Architecture, ModelConfig};
use structsum::Result;

pub struct Dataset {
    pub vocab: Vocabulary,
    pub pairs: Vec<EncodedPair>,
}

/// Builds vocabularies over `toy` and encodes every pair with its parse.
pub fn encode_toy(toy: &[ToyPair], v_in: usize, v_out: usize, limits: EncodeLimits) -> Dataset {
    let labels: Vec<_> = toy
        .iter()
        .map(|p| extract_structural_labels(&p.parse, &StructConfig::default()))
        .collect();
    let sources: Vec<VocabSource> = toy
        .iter()
        .zip(&labels)
        .map(|(p, l)| VocabSource {
            source: p.source(),
            summary: &p.summary,
            labels: Some(l),
        })
        .collect();
    let vocab = build_vocabularies(&sources, v_in, v_out).unwrap();
    let pairs = encode_with(toy, &vocab, limits);
    Dataset { vocab, pairs }
}

pub fn encode_with(toy: &[ToyPair], vocab: &Vocabulary, limits: EncodeLimits) -> Vec<EncodedPair> {
    toy.iter()
        .map(|p| {
            let l = extract_structural_labels(&p.parse, &StructConfig::default());
            encode_pair(p.source(), &p.summary, Some((&p.parse, &l)), vocab, limits)
        })
        .collect()
}

pub fn config(
    arch: Architecture,
    vocab: &Vocabulary,
    word: usize,
    structure: usize,
    hidden: usize,
) -> ModelConfig {
    ModelConfig {
        architecture: arch,
        word_dim: word,
        struct_dim: structure,
        hidden_dim: hidden,
        v_in: vocab.v_in(),
        v_out: vocab.v_out(),
        label_sizes: vocab.label_sizes(),
        ..ModelConfig::default()
    }
}

pub fn tiny_limits() -> EncodeLimits {
    EncodeLimits {
        max_src_len: 5,
        max_tgt_len: 3,
    }
}

/// A decoder whose next-token distribution is a fixed function of the
/// prefix, drawn once per prefix from a seeded generator.
pub struct Scripted {
    pub vocab: usize,
    pub seed: u64,
    /// Probability mass forced onto the end marker at every step.
    pub eos_mass: f64,
}

impl Scripted {
    pub fn dist(&self, prefix: &[usize]) -> Vec<f64> {
        let mut h = self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        for &t in prefix {
            h = (h ^ t as u64)
                .wrapping_mul(0x1000_0000_01B3)
                .rotate_left(17);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(h);
        let mut p: Vec<f64> = (0..self.vocab).map(|_| rng.gen_range(0.05..1.0)).collect();
        // <pad> and <s> never appear in a real step distribution.
        p[0] = 0.0;
        p[2] = 0.0;
        let z: f64 = p.iter().sum();
        let rest = 1.0 - self.eos_mass;
        for x in &mut p {
            *x *= rest / z;
        }
        p[3] += self.eos_mass;
        p
    }
}

impl StepModel for Scripted {
    type State = Vec<usize>;

    fn start(&mut self) -> Result<Vec<usize>> {
        Ok(Vec::new())
    }

    fn step(&mut self, state: &Vec<usize>, prev: usize) -> Result<(Vec<f64>, Vec<usize>)> {
        let mut next = state.clone();
        if !state.is_empty() || prev != 2 {
            next.push(prev);
        }
        Ok((self.dist(&next), next))
    }
}

/// A decoder that replays a table of distributions keyed by prefix, falling
/// back to `default` for prefixes it does not list.
pub struct Table {
    pub entries: Vec<(Vec<usize>, Vec<f64>)>,
    pub default: Vec<f64>,
}

impl StepModel for Table {
    type State = Vec<usize>;

    fn start(&mut self) -> Result<Vec<usize>> {
        Ok(Vec::new())
    }

    fn step(&mut self, state: &Vec<usize>, prev: usize) -> Result<(Vec<f64>, Vec<usize>)> {
        let mut next = state.clone();
        if !state.is_empty() || prev != 2 {
            next.push(prev);
        }
        let p = self
            .entries
            .iter()
            .find(|(k, _)| *k == next)
            .map_or_else(|| self.default.clone(), |(_, p)| p.clone());
        Ok((p, next))
    }
}

/// Best sequence by brute force: every token string that ends in `<eos>`
/// within `max_len` steps or reaches `max_len` without it, ranked by summed
/// log-probability plus `η·B/S`, ties to shorter then smaller ids.
pub fn exhaustive<M: StepModel>(
    model: &mut M,
    source: &[usize],
    eta: f64,
    max_len: usize,
) -> (Vec<usize>, f64) {
    let s = source.len().max(1) as f64;
    let mut best: Option<(Vec<usize>, f64)> = None;
    let start = model.start().unwrap();
    let mut stack = vec![(Vec::<usize>::new(), 0.0f64, start)];
    while let Some((tokens, lp, state)) = stack.pop() {
        let finished = tokens.last() == Some(&3);
        if finished || tokens.len() == max_len {
            let score = lp + eta * structsum::decoding::bigram_overlap(&tokens, source) as f64 / s;
            let better = match &best {
                None => true,
                Some((bt, bs)) => {
                    score > *bs
                        || (score == *bs
                            && (tokens.len() < bt.len()
                                || (tokens.len() == bt.len() && tokens < *bt)))
                }
            };
            if better {
                best = Some((tokens, score));
            }
            continue;
        }
        let prev = tokens.last().copied().unwrap_or(2);
        let (probs, next) = model.step(&state, prev).unwrap();
        for (w, &p) in probs.iter().enumerate() {
            if w == 0 || w == 2 || p <= 0.0 {
                continue;
            }
            let mut t = tokens.clone();
            t.push(w);
            stack.push((t, lp + p.ln(), next.clone()));
        }
    }
    best.unwrap()
}

/// `Σ_m nll_m / N + λ Σ_m cov_m / (T_m S_m)` for `pairs`, built directly from
/// per-instance graphs.
pub fn batch_objective(
    g: &mut structsum::autodiff::Graph<'_>,
    cfg: &ModelConfig,
    vocab: &Vocabulary,
    pairs: &[&EncodedPair],
    lambda: f64,
) -> Result<structsum::autodiff::Var> {
    let bv = structsum::training::BatchVocabulary::new(vocab, pairs.iter().copied());
    let tokens: usize = pairs.iter().map(|p| p.tgt_len() + 1).sum();
    let mut total = None;
    for p in pairs {
        let copy = bv.copy_map(vocab, p);
        let gold = bv.gold_ids(vocab, p, cfg.copy);
        let ig = structsum::training::instance_graph(g, cfg, p, &copy, &gold)?;
        let mut term = g.affine(ig.nll, 1.0 / tokens as f64, 0.0);
        if let Some(c) = ig.coverage {
            let c = g.affine(c, lambda / (ig.steps * ig.src_len) as f64, 0.0);
            term = g.add(term, c)?;
        }
        total = Some(match total {
            None => term,
            Some(t) => g.add(t, term)?,
        });
    }
    Ok(total.expect("non-empty batch"))
}

pub fn all_archs() -> [Architecture; 5] {
    Architecture::ALL
}
