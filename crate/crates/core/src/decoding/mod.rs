//! Greedy and reference-rewarded beam decoding.

mod beam;

pub use beam::{beam, bigram_overlap, greedy, BeamConfig, Hypothesis, StepModel};

use std::str::FromStr;

use crate::autodiff::Graph;
use crate::corpus::{EncodedPair, Vocabulary};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{
    decode_step, encode, initial_state, DecoderState, EncoderOutput, Model, ModelConfig,
};
use crate::training::BatchVocabulary;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecodeMode {
    Greedy,
    Beam,
}

impl FromStr for DecodeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(DecodeMode::Greedy),
            "beam" => Ok(DecodeMode::Beam),
            _ => Err(Error::Model(format!("unknown decode mode `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeConfig {
    pub mode: DecodeMode,
    pub beam_size: usize,
    pub eta: f64,
    pub max_len: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            mode: DecodeMode::Greedy,
            beam_size: 5,
            eta: 13.5,
            max_len: 50,
        }
    }
}

/// Runs a trained model one step at a time over a single source sentence.
pub struct ModelStepper<'m> {
    cfg: &'m ModelConfig,
    vocab: &'m Vocabulary,
    graph: Graph<'m>,
    enc: EncoderOutput,
    batch_vocab: BatchVocabulary,
}

impl<'m> ModelStepper<'m> {
    pub fn new(model: &'m Model, vocab: &'m Vocabulary, pair: &EncodedPair) -> Result<Self> {
        let batch_vocab = BatchVocabulary::new(vocab, [pair]);
        let copy = batch_vocab.copy_map(vocab, pair);
        let mut graph = Graph::new(model.params());
        let enc = encode(&mut graph, model.config(), pair, &copy)?;
        Ok(ModelStepper {
            cfg: model.config(),
            vocab,
            graph,
            enc,
            batch_vocab,
        })
    }

    pub fn batch_vocabulary(&self) -> &BatchVocabulary {
        &self.batch_vocab
    }

    /// Extended ids of the source words.
    pub fn source_ids(&self) -> &[usize] {
        &self.enc.copy_map().src_ext
    }

    pub fn render(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.batch_vocab.surface(self.vocab, i).to_string())
            .collect()
    }
}

impl StepModel for ModelStepper<'_> {
    type State = DecoderState;

    fn start(&mut self) -> Result<DecoderState> {
        Ok(initial_state(&mut self.graph, self.cfg, &self.enc))
    }

    fn step(&mut self, state: &DecoderState, prev: usize) -> Result<(Vec<f64>, DecoderState)> {
        let input = self.batch_vocab.input_id(self.vocab, prev);
        let out = decode_step(&mut self.graph, self.cfg, &self.enc, state, input)?;
        Ok((self.graph.value(out.probs).data().to_vec(), out.state))
    }
}

/// A decoded summary.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    /// Extended ids, end marker excluded.
    pub ids: Vec<usize>,
    /// Surface forms; copied words keep their source spelling.
    pub tokens: Vec<String>,
}

pub fn greedy_decode(
    model: &Model,
    vocab: &Vocabulary,
    pair: &EncodedPair,
    max_len: usize,
) -> Result<Summary> {
    if pair.src_len() == 0 {
        return Ok(Summary {
            ids: vec![],
            tokens: vec![],
        });
    }
    let mut m = ModelStepper::new(model, vocab, pair)?;
    let ids = greedy(&mut m, max_len)?;
    Ok(Summary {
        tokens: m.render(&ids),
        ids,
    })
}

pub fn beam_search(
    model: &Model,
    vocab: &Vocabulary,
    pair: &EncodedPair,
    cfg: &DecodeConfig,
) -> Result<Summary> {
    if pair.src_len() == 0 {
        return Ok(Summary {
            ids: vec![],
            tokens: vec![],
        });
    }
    let mut m = ModelStepper::new(model, vocab, pair)?;
    let source = m.source_ids().to_vec();
    let beam_cfg = BeamConfig {
        beam_size: cfg.beam_size,
        eta: cfg.eta,
        max_len: cfg.max_len,
    };
    let h = beam(&mut m, &source, &beam_cfg)?;
    let ids = h.words().to_vec();
    Ok(Summary {
        tokens: m.render(&ids),
        ids,
    })
}

pub fn summarize(
    model: &Model,
    vocab: &Vocabulary,
    pair: &EncodedPair,
    cfg: &DecodeConfig,
) -> Result<Summary> {
    match cfg.mode {
        DecodeMode::Greedy => greedy_decode(model, vocab, pair, cfg.max_len),
        DecodeMode::Beam => beam_search(model, vocab, pair, cfg),
    }
}

/// Decodes every pair; output order matches input order.
pub fn summarize_all(
    model: &Model,
    vocab: &Vocabulary,
    pairs: &[EncodedPair],
    cfg: &DecodeConfig,
    exec: Execution,
) -> Result<Vec<Summary>> {
    exec.try_map(pairs, |p| summarize(model, vocab, p, cfg))
}
