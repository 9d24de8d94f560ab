use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::NUM_CATEGORIES;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    /// Pointer-generator without structural features.
    Baseline,
    /// Structural embeddings appended to the encoder input.
    StructInput,
    /// Structural embeddings appended to the encoder hidden states.
    StructHidden,
    /// Separate structural attention over words, mixed into the copy weights.
    TwoWayWord,
    /// Structural attention over dependency edges, propagated along the tree.
    TwoWayRelation,
}

impl Architecture {
    pub const ALL: [Architecture; 5] = [
        Architecture::Baseline,
        Architecture::StructInput,
        Architecture::StructHidden,
        Architecture::TwoWayWord,
        Architecture::TwoWayRelation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Baseline => "baseline",
            Architecture::StructInput => "struct-input",
            Architecture::StructHidden => "struct-hidden",
            Architecture::TwoWayWord => "2way-word",
            Architecture::TwoWayRelation => "2way-relation",
        }
    }

    pub fn uses_structure(self) -> bool {
        self != Architecture::Baseline
    }

    pub fn is_two_way(self) -> bool {
        matches!(
            self,
            Architecture::TwoWayWord | Architecture::TwoWayRelation
        )
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace(['_', '+'], "-");
        Architecture::ALL
            .into_iter()
            .find(|a| a.name() == key)
            .or(match key.as_str() {
                "struct-2way-word" | "twowayword" | "two-way-word" => {
                    Some(Architecture::TwoWayWord)
                }
                "struct-2way-relation" | "twowayrelation" | "two-way-relation" => {
                    Some(Architecture::TwoWayRelation)
                }
                "structinput" => Some(Architecture::StructInput),
                "structhidden" => Some(Architecture::StructHidden),
                _ => None,
            })
            .ok_or_else(|| Error::Model(format!("unknown architecture `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub word_dim: usize,
    /// Width of each of the six per-category structural embeddings.
    pub struct_dim: usize,
    pub hidden_dim: usize,
    pub v_in: usize,
    pub v_out: usize,
    /// Rows of each structural embedding table, in `LabelCategory` order.
    pub label_sizes: [usize; NUM_CATEGORIES],
    pub max_src_len: usize,
    pub max_tgt_len: usize,
    /// One word table for encoder and decoder inputs.
    pub share_embeddings: bool,
    /// With `false` the switch is pinned to generation (`p_gen = 1`).
    pub copy: bool,
    /// Replaces the trainable mixing coefficient with a constant.
    pub fixed_epsilon: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            architecture: Architecture::Baseline,
            word_dim: 100,
            struct_dim: 16,
            hidden_dim: 256,
            v_in: 70_000,
            v_out: 5_000,
            label_sizes: [2; NUM_CATEGORIES],
            max_src_len: 100,
            max_tgt_len: 50,
            share_embeddings: true,
            copy: true,
            fixed_epsilon: None,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("word_dim", self.word_dim),
            ("hidden_dim", self.hidden_dim),
            ("v_in", self.v_in),
            ("v_out", self.v_out),
            ("max_src_len", self.max_src_len),
            ("max_tgt_len", self.max_tgt_len),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Model(format!("{name} must be positive")));
        }
        if self.v_out > self.v_in {
            return Err(Error::Model(format!(
                "v_out ({}) exceeds v_in ({})",
                self.v_out, self.v_in
            )));
        }
        if self.architecture.uses_structure() {
            if self.struct_dim == 0 {
                return Err(Error::Model("struct_dim must be positive".into()));
            }
            if self.label_sizes.contains(&0) {
                return Err(Error::Model("empty structural label table".into()));
            }
        }
        if let Some(e) = self.fixed_epsilon {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(Error::Model(format!("fixed_epsilon must be >= 0, got {e}")));
            }
        }
        Ok(())
    }

    /// Width of the concatenated structural vector.
    pub fn struct_width(&self) -> usize {
        NUM_CATEGORIES * self.struct_dim
    }

    pub fn encoder_input_width(&self) -> usize {
        match self.architecture {
            Architecture::StructInput => self.word_dim + self.struct_width(),
            _ => self.word_dim,
        }
    }

    /// Width of one encoder state as seen by attention and the context vector.
    pub fn memory_width(&self) -> usize {
        match self.architecture {
            Architecture::StructHidden => 2 * self.hidden_dim + self.struct_width(),
            _ => 2 * self.hidden_dim,
        }
    }

    /// Width of the primitive representation `[s ‖ x]`.
    pub fn primitive_width(&self) -> usize {
        self.struct_width() + self.word_dim
    }

    /// Width of the vectors scored by structural attention.
    pub fn structural_key_width(&self) -> usize {
        match self.architecture {
            Architecture::TwoWayRelation => 2 * self.primitive_width(),
            _ => self.primitive_width(),
        }
    }
}
