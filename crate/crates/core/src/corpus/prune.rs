use std::collections::HashSet;

use serde::{Deserialize, Serialize};

/// Filters for spurious training/validation pairs. Test data is never pruned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneConfig {
    pub enabled: bool,
    pub min_src_len: usize,
    pub max_src_len: usize,
    pub min_tgt_len: usize,
    pub max_tgt_len: usize,
    /// Minimum number of distinct non-stopword summary tokens found in the source.
    pub min_overlap: usize,
    pub stopwords: Vec<String>,
}

const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "an", "the", "of", "in", "on", "at", "to", "for", "from", "by", "with", "and", "or",
    "but", "is", "are", "was", "were", "be", "been", "it", "its", "as", "that", "this", "'s", ",",
    ".", "``", "''", "-lrb-", "-rrb-", "--", ":", ";",
];

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig {
            enabled: true,
            min_src_len: 5,
            max_src_len: 100,
            min_tgt_len: 2,
            max_tgt_len: 50,
            min_overlap: 1,
            stopwords: DEFAULT_STOPWORDS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PruneReason {
    Repetitive,
    SourceLength,
    SummaryLength,
    LowOverlap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PruneDecision {
    Keep,
    Drop(PruneReason),
}

impl PruneDecision {
    pub fn keep(self) -> bool {
        self == PruneDecision::Keep
    }
}

pub fn prune_pair(src: &[String], tgt: &[String], rules: &PruneConfig) -> PruneDecision {
    if !rules.enabled {
        return PruneDecision::Keep;
    }
    let lower = |t: &[String]| t.iter().map(|w| w.to_lowercase()).collect::<Vec<_>>();
    let (src_l, tgt_l) = (lower(src), lower(tgt));
    if src_l == tgt_l {
        return PruneDecision::Drop(PruneReason::Repetitive);
    }
    if !(rules.min_src_len..=rules.max_src_len).contains(&src.len()) {
        return PruneDecision::Drop(PruneReason::SourceLength);
    }
    if !(rules.min_tgt_len..=rules.max_tgt_len).contains(&tgt.len()) {
        return PruneDecision::Drop(PruneReason::SummaryLength);
    }
    let stop: HashSet<&str> = rules.stopwords.iter().map(String::as_str).collect();
    let src_set: HashSet<&str> = src_l.iter().map(String::as_str).collect();
    let overlap = tgt_l
        .iter()
        .map(String::as_str)
        .filter(|w| !stop.contains(w) && src_set.contains(w))
        .collect::<HashSet<_>>()
        .len();
    if overlap < rules.min_overlap {
        return PruneDecision::Drop(PruneReason::LowOverlap);
    }
    PruneDecision::Keep
}
