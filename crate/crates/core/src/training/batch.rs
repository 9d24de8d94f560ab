use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{EncodedPair, Vocabulary, EOS_ID, PAD_ID, UNK_ID};
use crate::model::CopyMap;

/// Output vocabulary followed by the batch's other source words, in order of
/// first occurrence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchVocabulary {
    v_out: usize,
    extra: Vec<String>,
    index: HashMap<String, usize>,
}

impl BatchVocabulary {
    pub fn new<'a>(vocab: &Vocabulary, pairs: impl IntoIterator<Item = &'a EncodedPair>) -> Self {
        let v_out = vocab.v_out();
        let mut extra = Vec::new();
        let mut index = HashMap::new();
        for pair in pairs {
            for w in &pair.src_surface {
                if vocab.output_id(w).is_none() && !index.contains_key(w) {
                    index.insert(w.clone(), v_out + extra.len());
                    extra.push(w.clone());
                }
            }
        }
        BatchVocabulary {
            v_out,
            extra,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.v_out + self.extra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Batch-local id of a surface form.
    pub fn id(&self, vocab: &Vocabulary, word: &str) -> Option<usize> {
        vocab
            .output_id(word)
            .or_else(|| self.index.get(word).copied())
    }

    pub fn surface<'a>(&'a self, vocab: &'a Vocabulary, id: usize) -> &'a str {
        if id < self.v_out {
            vocab.output_word(id)
        } else {
            &self.extra[id - self.v_out]
        }
    }

    /// Input-vocabulary id to feed back into the decoder after emitting `id`.
    pub fn input_id(&self, vocab: &Vocabulary, id: usize) -> usize {
        if id < self.v_out {
            id
        } else {
            vocab.word_id(&self.extra[id - self.v_out])
        }
    }

    pub fn copy_map(&self, vocab: &Vocabulary, pair: &EncodedPair) -> CopyMap {
        CopyMap {
            src_ext: pair
                .src_surface
                .iter()
                .map(|w| {
                    self.id(vocab, w)
                        .expect("source word registered in batch vocabulary")
                })
                .collect(),
            ext_size: self.len(),
        }
    }

    /// Gold ids for the loss, end marker appended. A word outside the output
    /// vocabulary counts only if this instance's source can supply it.
    pub fn gold_ids(&self, vocab: &Vocabulary, pair: &EncodedPair, copy: bool) -> Vec<usize> {
        pair.tgt_surface
            .iter()
            .enumerate()
            .map(|(t, w)| match vocab.output_id(w) {
                Some(id) => id,
                None if copy && !pair.tgt_copy_positions[t].is_empty() => self.index[w],
                None => UNK_ID,
            })
            .chain(std::iter::once(EOS_ID))
            .collect()
    }
}

/// A group of corpus indices with padded source ids and a validity mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub src_padded: Vec<Vec<usize>>,
    pub mask: Vec<Vec<bool>>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn max_src_len(&self) -> usize {
        self.src_padded.first().map_or(0, Vec::len)
    }
}

/// Sorts by source length (stable), chunks into batches of `m` and shuffles
/// the batch order with a generator keyed on `(seed, epoch)`.
pub fn make_batches(corpus: &[EncodedPair], m: usize, seed: u64, epoch: usize) -> Vec<Batch> {
    assert!(m > 0, "batch size must be positive");
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.sort_by_key(|&i| corpus[i].src_len());
    let mut batches: Vec<Batch> = order
        .chunks(m)
        .map(|idx| {
            let width = idx.iter().map(|&i| corpus[i].src_len()).max().unwrap_or(0);
            let (src_padded, mask) = idx
                .iter()
                .map(|&i| {
                    let ids = &corpus[i].src_ids;
                    let mut padded = ids.clone();
                    padded.resize(width, PAD_ID);
                    let mask = (0..width).map(|k| k < ids.len()).collect();
                    (padded, mask)
                })
                .unzip();
            Batch {
                indices: idx.to_vec(),
                src_padded,
                mask,
            }
        })
        .collect();
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    batches.shuffle(&mut rng);
    batches
}
