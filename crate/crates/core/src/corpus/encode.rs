use serde::{Deserialize, Serialize};

use super::{LabelCategory, ParsedSentence, StructuralLabels, Vocabulary, NUM_CATEGORIES};

/// Truncation limits applied while encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodeLimits {
    pub max_src_len: usize,
    pub max_tgt_len: usize,
}

impl Default for EncodeLimits {
    fn default() -> Self {
        EncodeLimits {
            max_src_len: 100,
            max_tgt_len: 50,
        }
    }
}

/// An index-encoded (source, summary) instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedPair {
    /// Input-vocabulary ids of the source tokens.
    pub src_ids: Vec<usize>,
    /// Label ids per category, each parallel to `src_ids`.
    pub src_struct_ids: Option<[Vec<usize>; NUM_CATEGORIES]>,
    pub src_surface: Vec<String>,
    /// 0-based parent position per source token; `None` for the root or a
    /// parent cut off by truncation.
    pub parent_index: Option<Vec<Option<usize>>>,
    /// Input-vocabulary ids of the summary tokens (no end marker).
    pub tgt_ids: Vec<usize>,
    pub tgt_surface: Vec<String>,
    /// For each summary token, every source position with the same surface form.
    pub tgt_copy_positions: Vec<Vec<usize>>,
}

impl EncodedPair {
    pub fn src_len(&self) -> usize {
        self.src_ids.len()
    }

    pub fn tgt_len(&self) -> usize {
        self.tgt_ids.len()
    }

    pub fn has_structure(&self) -> bool {
        self.src_struct_ids.is_some() && self.parent_index.is_some()
    }

    /// Source tokens as the model sees them: unknown words become `<unk>`.
    pub fn decode_source(&self, vocab: &Vocabulary) -> Vec<String> {
        self.src_ids
            .iter()
            .map(|&i| vocab.words().token(i).to_string())
            .collect()
    }
}

/// Encodes one pair. `parse` must describe exactly the tokens in `source`.
pub fn encode_pair(
    source: &[String],
    summary: &[String],
    parse: Option<(&ParsedSentence, &StructuralLabels)>,
    vocab: &Vocabulary,
    limits: EncodeLimits,
) -> EncodedPair {
    let s_len = source.len().min(limits.max_src_len);
    let t_len = summary.len().min(limits.max_tgt_len);
    let src_surface: Vec<String> = source[..s_len].to_vec();
    let tgt_surface: Vec<String> = summary[..t_len].to_vec();

    let (src_struct_ids, parent_index) = match parse {
        Some((tree, labels)) => {
            let ids = LabelCategory::ALL.map(|cat| {
                let map = vocab.labels(cat);
                labels.tokens[..s_len]
                    .iter()
                    .map(|t| map.id(&t.label(cat)))
                    .collect::<Vec<_>>()
            });
            let parents = (0..s_len)
                .map(|i| tree.parent(i).filter(|&p| p < s_len))
                .collect();
            (Some(ids), Some(parents))
        }
        None => (None, None),
    };

    let tgt_copy_positions = tgt_surface
        .iter()
        .map(|w| {
            src_surface
                .iter()
                .enumerate()
                .filter(|(_, s)| *s == w)
                .map(|(i, _)| i)
                .collect()
        })
        .collect();

    EncodedPair {
        src_ids: src_surface.iter().map(|w| vocab.word_id(w)).collect(),
        src_struct_ids,
        src_surface,
        parent_index,
        tgt_ids: tgt_surface.iter().map(|w| vocab.word_id(w)).collect(),
        tgt_surface,
        tgt_copy_positions,
    }
}

/// Encodes a source sentence with an empty summary, for decoding.
pub fn encode_source(
    source: &[String],
    parse: Option<(&ParsedSentence, &StructuralLabels)>,
    vocab: &Vocabulary,
    limits: EncodeLimits,
) -> EncodedPair {
    encode_pair(source, &[], parse, vocab, limits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{
        build_vocabularies, extract_structural_labels, StructConfig, VocabSource, UNK_ID,
    };

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn chain(tokens: &[String], rel: &str) -> ParsedSentence {
        let n = tokens.len();
        ParsedSentence {
            tokens: tokens.to_vec(),
            pos: vec!["NN".into(); n],
            head: (0..n).collect(),
            deprel: (0..n)
                .map(|i| {
                    if i == 0 {
                        "root".into()
                    } else {
                        rel.to_string()
                    }
                })
                .collect(),
        }
    }

    #[test]
    fn copy_positions_and_unknown_labels() {
        let train_src = toks("a b a c");
        let train_tgt = toks("a c");
        let tree = chain(&train_src, "dep");
        let labels = extract_structural_labels(&tree, &StructConfig::default());
        let vocab = build_vocabularies(
            &[VocabSource {
                source: &train_src,
                summary: &train_tgt,
                labels: Some(&labels),
            }],
            100,
            100,
        )
        .unwrap();

        let src = toks("a x a");
        let tree = chain(&src, "nsubj"); // relation never seen in training
        let labels = extract_structural_labels(&tree, &StructConfig::default());
        let p = encode_pair(
            &src,
            &toks("a x z"),
            Some((&tree, &labels)),
            &vocab,
            EncodeLimits::default(),
        );
        assert_eq!(p.tgt_copy_positions, vec![vec![0, 2], vec![1], vec![]]);
        assert_eq!(p.src_ids[1], UNK_ID);
        let in_labels = &p.src_struct_ids.as_ref().unwrap()[LabelCategory::InLabel.index()];
        assert_eq!(
            in_labels[0],
            vocab.labels(LabelCategory::InLabel).id("root")
        );
        assert_eq!(in_labels[1], UNK_ID);
        assert_eq!(
            p.parent_index.as_ref().unwrap(),
            &vec![None, Some(0), Some(1)]
        );
        assert_eq!(p.decode_source(&vocab), toks("a <unk> a"));
    }

    #[test]
    fn truncation_drops_dangling_parents() {
        let src = toks("a b c d");
        let tree = ParsedSentence {
            tokens: src.clone(),
            pos: vec!["X".into(); 4],
            head: vec![4, 1, 1, 0],
            deprel: vec!["dep".into(), "dep".into(), "dep".into(), "root".into()],
        };
        let labels = extract_structural_labels(&tree, &StructConfig::default());
        let vocab = build_vocabularies(
            &[VocabSource {
                source: &src,
                summary: &src,
                labels: Some(&labels),
            }],
            20,
            10,
        )
        .unwrap();
        let limits = EncodeLimits {
            max_src_len: 3,
            max_tgt_len: 2,
        };
        let p = encode_pair(&src, &src, Some((&tree, &labels)), &vocab, limits);
        assert_eq!(p.src_len(), 3);
        assert_eq!(p.tgt_len(), 2);
        assert_eq!(p.parent_index.unwrap(), vec![None, Some(0), Some(0)]);
    }
}
