//! Deterministic synthetic corpora with gold dependency parses.
//!
//! [`toy_corpus`] fills a few news-headline templates; [`copy_task`] builds
//! pairs whose summary is a three-token source span starting at a word that
//! never makes it into the vocabulary.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ParsedSentence;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToyPair {
    pub parse: ParsedSentence,
    pub summary: Vec<String>,
}

impl ToyPair {
    pub fn source(&self) -> &[String] {
        &self.parse.tokens
    }
}

const SUBJECTS: &[&str] = &[
    "government",
    "council",
    "company",
    "police",
    "court",
    "union",
    "ministry",
    "bank",
    "army",
    "senate",
    "board",
    "party",
];
// (past, third person present, base)
const VERBS: &[(&str, &str, &str)] = &[
    ("filed", "files", "file"),
    ("approved", "approves", "approve"),
    ("rejected", "rejects", "reject"),
    ("announced", "announces", "announce"),
    ("signed", "signs", "sign"),
    ("released", "releases", "release"),
    ("launched", "launches", "launch"),
    ("delayed", "delays", "delay"),
    ("blocked", "blocks", "block"),
    ("unveiled", "unveils", "unveil"),
];
const OBJECTS: &[&str] = &[
    "charges", "plan", "budget", "deal", "report", "law", "proposal", "strike", "reform", "probe",
];
const ADJECTIVES: &[&str] = &[
    "new",
    "local",
    "federal",
    "national",
    "second",
    "major",
    "controversial",
    "joint",
];
const PLACES: &[&str] = &[
    "beijing", "london", "paris", "moscow", "tokyo", "cairo", "berlin", "madrid", "seoul", "delhi",
];
const DAYS: &[&str] = &[
    "monday",
    "tuesday",
    "wednesday",
    "thursday",
    "friday",
    "saturday",
    "sunday",
];

struct Builder {
    s: ParsedSentence,
}

impl Builder {
    fn new() -> Self {
        Builder {
            s: ParsedSentence::default(),
        }
    }

    fn tok(mut self, word: &str, pos: &str, head: usize, rel: &str) -> Self {
        self.s.tokens.push(word.to_string());
        self.s.pos.push(pos.to_string());
        self.s.head.push(head);
        self.s.deprel.push(rel.to_string());
        self
    }
}

fn words(ws: &[&str]) -> Vec<String> {
    ws.iter().map(|w| w.to_string()).collect()
}

fn headline<R: Rng>(rng: &mut R) -> ToyPair {
    let subj = *SUBJECTS.choose(rng).unwrap();
    let (past, pres, base) = *VERBS.choose(rng).unwrap();
    let obj = *OBJECTS.choose(rng).unwrap();
    let adj = *ADJECTIVES.choose(rng).unwrap();
    let place = *PLACES.choose(rng).unwrap();
    let day = *DAYS.choose(rng).unwrap();
    match rng.gen_range(0..4) {
        0 => ToyPair {
            parse: Builder::new()
                .tok("the", "DT", 3, "det")
                .tok(adj, "JJ", 3, "amod")
                .tok(subj, "NN", 4, "nsubj")
                .tok(past, "VBD", 0, "root")
                .tok("the", "DT", 6, "det")
                .tok(obj, "NN", 4, "dobj")
                .tok("in", "IN", 8, "case")
                .tok(place, "NNP", 4, "nmod")
                .tok("on", "IN", 10, "case")
                .tok(day, "NNP", 4, "nmod:tmod")
                .s,
            summary: words(&[subj, pres, obj]),
        },
        1 => ToyPair {
            parse: Builder::new()
                .tok(place, "NNP", 3, "nmod:poss")
                .tok("'s", "POS", 1, "case")
                .tok(subj, "NN", 4, "nsubj")
                .tok("said", "VBD", 0, "root")
                .tok("on", "IN", 6, "case")
                .tok(day, "NNP", 4, "nmod")
                .tok("that", "IN", 9, "mark")
                .tok("it", "PRP", 9, "nsubj")
                .tok(past, "VBD", 4, "ccomp")
                .tok("a", "DT", 12, "det")
                .tok(adj, "JJ", 12, "amod")
                .tok(obj, "NN", 9, "dobj")
                .s,
            summary: words(&[subj, pres, adj, obj]),
        },
        2 => {
            let mut other = *SUBJECTS.choose(rng).unwrap();
            while other == subj {
                other = *SUBJECTS.choose(rng).unwrap();
            }
            ToyPair {
                parse: Builder::new()
                    .tok(subj, "NN", 4, "nsubj")
                    .tok("and", "CC", 3, "cc")
                    .tok(other, "NN", 1, "conj")
                    .tok(past, "VBD", 0, "root")
                    .tok("the", "DT", 6, "det")
                    .tok(obj, "NN", 4, "dobj")
                    .tok("after", "IN", 8, "case")
                    .tok("talks", "NNS", 4, "nmod")
                    .tok("in", "IN", 10, "case")
                    .tok(place, "NNP", 8, "nmod")
                    .s,
                summary: words(&[subj, ",", other, base, obj]),
            }
        }
        _ => ToyPair {
            parse: Builder::new()
                .tok("a", "DT", 3, "det")
                .tok(adj, "JJ", 3, "amod")
                .tok(obj, "NN", 5, "nsubjpass")
                .tok("was", "VBD", 5, "auxpass")
                .tok(past, "VBN", 0, "root")
                .tok("by", "IN", 8, "case")
                .tok("the", "DT", 8, "det")
                .tok(subj, "NN", 5, "nmod")
                .tok(day, "NNP", 5, "nmod:tmod")
                .s,
            summary: words(&[subj, pres, adj, obj]),
        },
    }
}

/// `n` headline-style pairs, identical for identical `(n, seed)`.
pub fn toy_corpus(n: usize, seed: u64) -> Vec<ToyPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| headline(&mut rng)).collect()
}

/// Ordinary words of the copy task; a vocabulary holding exactly these plus
/// the reserved symbols leaves every marker token out of vocabulary.
pub const COPY_TASK_WORDS: &[&str] = &[
    "river", "stone", "cloud", "green", "north", "light", "paper", "glass", "metal", "sugar",
    "horse", "table", "music", "winter", "forest", "signal",
];

/// Pairs whose summary is the three-token span starting at a unique rare
/// token `"{tag}{k}"`. Sources are 6 to 8 tokens with a left-branching chain
/// parse.
pub fn copy_task(n: usize, seed: u64, tag: &str) -> Vec<ToyPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|k| {
            let len = rng.gen_range(6..=8);
            let start = rng.gen_range(0..=len - 3);
            let tokens: Vec<String> = (0..len)
                .map(|i| {
                    if i == start {
                        format!("{tag}{k}")
                    } else {
                        COPY_TASK_WORDS.choose(&mut rng).unwrap().to_string()
                    }
                })
                .collect();
            let summary = tokens[start..start + 3].to_vec();
            let parse = ParsedSentence {
                pos: vec!["NN".into(); len],
                head: (0..len).collect(),
                deprel: (0..len)
                    .map(|i| if i == 0 { "root" } else { "dep" }.to_string())
                    .collect(),
                tokens,
            };
            ToyPair { parse, summary }
        })
        .collect()
}
