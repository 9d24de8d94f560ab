use serde::{Deserialize, Serialize};

use super::ParsedSentence;

/// The six per-token structural label categories.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LabelCategory {
    /// Edge count from the root (root = 0).
    Depth,
    /// Relation of the incoming dependency edge.
    InLabel,
    /// Number of dependents.
    OutDegree,
    Pos,
    /// 1-based token position.
    AbsPos,
    /// Position / length, bucketed into tenths.
    RelPos,
}

pub const NUM_CATEGORIES: usize = 6;

impl LabelCategory {
    pub const ALL: [LabelCategory; NUM_CATEGORIES] = [
        LabelCategory::Depth,
        LabelCategory::InLabel,
        LabelCategory::OutDegree,
        LabelCategory::Pos,
        LabelCategory::AbsPos,
        LabelCategory::RelPos,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LabelCategory::Depth => "depth",
            LabelCategory::InLabel => "label",
            LabelCategory::OutDegree => "degree",
            LabelCategory::Pos => "pos",
            LabelCategory::AbsPos => "abs",
            LabelCategory::RelPos => "rel",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructConfig {
    pub max_depth: usize,
    pub max_abs_pos: usize,
}

impl Default for StructConfig {
    fn default() -> Self {
        StructConfig {
            max_depth: 20,
            max_abs_pos: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLabels {
    pub depth: usize,
    pub in_label: String,
    pub out_degree: usize,
    pub pos_tag: String,
    pub abs_pos: usize,
    /// In `1..=10`; bucket `b` covers `((b-1)/10, b/10]`.
    pub rel_pos_bucket: usize,
}

impl TokenLabels {
    pub fn label(&self, cat: LabelCategory) -> String {
        match cat {
            LabelCategory::Depth => self.depth.to_string(),
            LabelCategory::InLabel => self.in_label.clone(),
            LabelCategory::OutDegree => self.out_degree.to_string(),
            LabelCategory::Pos => self.pos_tag.clone(),
            LabelCategory::AbsPos => self.abs_pos.to_string(),
            LabelCategory::RelPos => self.rel_pos_bucket.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralLabels {
    pub tokens: Vec<TokenLabels>,
}

impl StructuralLabels {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn category(&self, cat: LabelCategory) -> Vec<String> {
        self.tokens.iter().map(|t| t.label(cat)).collect()
    }
}

/// Bucket of `position / length` with right-closed tenths, so `5/10` lands in
/// bucket 5 and `1/1` in bucket 10. Integer arithmetic keeps the boundaries
/// exact.
pub fn relative_position_bucket(position: usize, length: usize) -> usize {
    debug_assert!(position >= 1 && position <= length);
    let b = (10 * position).div_ceil(length);
    b.clamp(1, 10)
}

/// Derives the six label categories for every token of a valid tree.
pub fn extract_structural_labels(s: &ParsedSentence, cfg: &StructConfig) -> StructuralLabels {
    let n = s.len();
    let mut depth: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let mut path = Vec::new();
        let mut cur = i;
        let base = loop {
            if let Some(d) = depth[cur] {
                break d;
            }
            match s.parent(cur) {
                None => {
                    depth[cur] = Some(0);
                    break 0;
                }
                Some(p) => {
                    path.push(cur);
                    cur = p;
                }
            }
        };
        for (k, &node) in path.iter().rev().enumerate() {
            depth[node] = Some(base + k + 1);
        }
    }

    let mut out_degree = vec![0usize; n];
    for i in 0..n {
        if let Some(p) = s.parent(i) {
            out_degree[p] += 1;
        }
    }

    let tokens = (0..n)
        .map(|i| TokenLabels {
            depth: depth[i].unwrap_or(0).min(cfg.max_depth),
            in_label: if s.head[i] == 0 {
                "root".to_string()
            } else {
                s.deprel[i].clone()
            },
            out_degree: out_degree[i],
            pos_tag: s.pos[i].clone(),
            abs_pos: (i + 1).min(cfg.max_abs_pos),
            rel_pos_bucket: relative_position_bucket(i + 1, n),
        })
        .collect();
    StructuralLabels { tokens }
}
