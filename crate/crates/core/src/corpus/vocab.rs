use std::collections::HashMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{LabelCategory, StructuralLabels, NUM_CATEGORIES};
use crate::error::{Error, Result};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const BOS_ID: usize = 2;
pub const EOS_ID: usize = 3;

const WORD_RESERVED: [&str; 4] = [PAD, UNK, BOS, EOS];
const LABEL_RESERVED: [&str; 2] = [PAD, UNK];

/// Dense string <-> index map whose first entries are reserved symbols.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenMap {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl TokenMap {
    fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Vocab(format!("duplicate entry `{t}`")));
            }
        }
        Ok(TokenMap { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Index of `token`, or the unknown slot.
    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// One token per line in rank order.
    pub fn to_text(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }
}

/// Frequency ranking, ties broken by first occurrence.
fn rank<'a>(items: impl IntoIterator<Item = &'a str>, skip: &[&str]) -> Vec<String> {
    let mut counts: HashMap<&'a str, (usize, usize)> = HashMap::new();
    for (pos, w) in items.into_iter().enumerate() {
        if skip.contains(&w) {
            continue;
        }
        counts.entry(w).or_insert((0, pos)).0 += 1;
    }
    let mut ranked: Vec<(&str, usize, usize)> = counts
        .into_iter()
        .map(|(w, (c, first))| (w, c, first))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    ranked.into_iter().map(|(w, ..)| w.to_string()).collect()
}

/// Input words, the output-word prefix, and one map per label category.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    words: TokenMap,
    v_out: usize,
    labels: Vec<TokenMap>,
}

/// One training instance as seen by [`build_vocabularies`].
pub struct VocabSource<'a> {
    pub source: &'a [String],
    pub summary: &'a [String],
    pub labels: Option<&'a StructuralLabels>,
}

/// Builds frequency-ranked vocabularies over source and summary text.
///
/// `v_in` and `v_out` count the four reserved word symbols; the output
/// vocabulary is the `v_out`-entry prefix of the input vocabulary. Label maps
/// keep every label seen in training plus padding and unknown slots.
pub fn build_vocabularies(
    corpus: &[VocabSource<'_>],
    v_in: usize,
    v_out: usize,
) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::Vocab("empty corpus".into()));
    }
    if v_out > v_in {
        return Err(Error::Vocab(format!(
            "v_out ({v_out}) exceeds v_in ({v_in})"
        )));
    }
    if v_out <= WORD_RESERVED.len() {
        return Err(Error::Vocab(format!(
            "v_out ({v_out}) must exceed the {} reserved symbols",
            WORD_RESERVED.len()
        )));
    }
    let words = rank(
        corpus
            .iter()
            .flat_map(|p| p.source.iter().chain(p.summary.iter()))
            .map(String::as_str),
        &WORD_RESERVED,
    );
    let mut word_list: Vec<String> = WORD_RESERVED.iter().map(|s| s.to_string()).collect();
    word_list.extend(words.into_iter().take(v_in - WORD_RESERVED.len()));
    let words = TokenMap::from_tokens(word_list)?;
    let v_out = v_out.min(words.len());

    let labels = LabelCategory::ALL
        .iter()
        .map(|&cat| {
            let observed: Vec<String> = corpus
                .iter()
                .filter_map(|p| p.labels)
                .flat_map(|l| l.category(cat))
                .collect();
            let mut list: Vec<String> = LABEL_RESERVED.iter().map(|s| s.to_string()).collect();
            list.extend(rank(observed.iter().map(String::as_str), &LABEL_RESERVED));
            TokenMap::from_tokens(list)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Vocabulary {
        words,
        v_out,
        labels,
    })
}

impl Vocabulary {
    pub fn words(&self) -> &TokenMap {
        &self.words
    }

    pub fn labels(&self, cat: LabelCategory) -> &TokenMap {
        &self.labels[cat.index()]
    }

    pub fn label_sizes(&self) -> [usize; NUM_CATEGORIES] {
        let mut out = [0; NUM_CATEGORIES];
        for (o, m) in out.iter_mut().zip(&self.labels) {
            *o = m.len();
        }
        out
    }

    pub fn v_in(&self) -> usize {
        self.words.len()
    }

    pub fn v_out(&self) -> usize {
        self.v_out
    }

    /// Input-vocabulary index of `word` (unknown slot if absent).
    pub fn word_id(&self, word: &str) -> usize {
        self.words.id(word)
    }

    /// Output-vocabulary index of `word`, if it has one.
    pub fn output_id(&self, word: &str) -> Option<usize> {
        self.words.get(word).filter(|&i| i < self.v_out)
    }

    pub fn output_word(&self, id: usize) -> &str {
        debug_assert!(id < self.v_out);
        self.words.token(id)
    }

    fn files(&self) -> Vec<(String, String)> {
        let mut files = vec![
            ("words.vocab".to_string(), self.words.to_text()),
            ("output.vocab".to_string(), {
                let mut s = self.words.tokens()[..self.v_out].join("\n");
                s.push('\n');
                s
            }),
        ];
        for cat in LabelCategory::ALL {
            files.push((
                format!("label.{}.vocab", cat.name()),
                self.labels[cat.index()].to_text(),
            ));
        }
        files
    }

    /// SHA-256 over the serialized vocabulary files, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (name, body) in self.files() {
            h.update(name.as_bytes());
            h.update([0u8]);
            h.update(body.as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, body) in self.files() {
            fs::write(dir.join(name), body)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| -> Result<Vec<String>> {
            let text = fs::read_to_string(dir.join(name))
                .map_err(|e| Error::Vocab(format!("{}: {e}", dir.join(name).display())))?;
            Ok(text.lines().map(str::to_string).collect())
        };
        let words = TokenMap::from_tokens(read("words.vocab")?)?;
        let output = read("output.vocab")?;
        if output.len() > words.len() || output[..] != words.tokens()[..output.len()] {
            return Err(Error::Vocab(
                "output.vocab is not a prefix of words.vocab".into(),
            ));
        }
        for (i, r) in WORD_RESERVED.iter().enumerate() {
            if words.tokens().get(i).map(String::as_str) != Some(*r) {
                return Err(Error::Vocab(format!("missing reserved symbol `{r}`")));
            }
        }
        let labels = LabelCategory::ALL
            .iter()
            .map(|c| TokenMap::from_tokens(read(&format!("label.{}.vocab", c.name()))?))
            .collect::<Result<Vec<_>>>()?;
        Ok(Vocabulary {
            v_out: output.len(),
            words,
            labels,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn frequency_order() {
        let (src, tgt) = (toks("a a b"), toks("a"));
        let v = build_vocabularies(
            &[VocabSource {
                source: &src,
                summary: &tgt,
                labels: None,
            }],
            6,
            6,
        )
        .unwrap();
        assert_eq!(v.word_id("a"), 4);
        assert_eq!(v.word_id("b"), 5);
        assert_eq!(v.word_id("zzz"), UNK_ID);
    }

    #[test]
    fn ties_broken_by_first_occurrence() {
        let (src, tgt) = (toks("q p r"), toks("r p q"));
        let v = build_vocabularies(
            &[VocabSource {
                source: &src,
                summary: &tgt,
                labels: None,
            }],
            10,
            5,
        )
        .unwrap();
        assert_eq!(&v.words().tokens()[4..], &["q", "p", "r"]);
        assert_eq!(v.v_out(), 5);
        assert_eq!(v.output_id("q"), Some(4));
        assert_eq!(v.output_id("p"), None);
    }

    #[test]
    fn empty_corpus_and_bad_sizes() {
        assert!(build_vocabularies(&[], 10, 5).is_err());
        let s = toks("a");
        let one = [VocabSource {
            source: &s,
            summary: &s,
            labels: None,
        }];
        assert!(build_vocabularies(&one, 5, 6).is_err());
        assert!(build_vocabularies(&one, 10, 4).is_err());
    }

    #[test]
    fn save_load_and_fingerprint() {
        let (src, tgt) = (toks("x y z x"), toks("x z"));
        let v = build_vocabularies(
            &[VocabSource {
                source: &src,
                summary: &tgt,
                labels: None,
            }],
            7,
            5,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        v.save(dir.path()).unwrap();
        let back = Vocabulary::load(dir.path()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.fingerprint(), v.fingerprint());
        assert_eq!(
            fs::read_to_string(dir.path().join("words.vocab")).unwrap(),
            "<pad>\n<unk>\n<s>\n</s>\nx\nz\ny\n"
        );
    }
}
