//! Dependency parses, structural labels, vocabularies, pruning and encoding.

mod conllu;
mod encode;
mod prune;
mod structure;
pub mod toy;
mod vocab;

pub use conllu::{parse_conllu, ParsedSentence, PosColumn};
pub use encode::{encode_pair, encode_source, EncodeLimits, EncodedPair};
pub use prune::{prune_pair, PruneConfig, PruneDecision, PruneReason};
pub use structure::{
    extract_structural_labels, relative_position_bucket, LabelCategory, StructConfig,
    StructuralLabels, TokenLabels, NUM_CATEGORIES,
};
pub use vocab::{
    build_vocabularies, TokenMap, VocabSource, Vocabulary, BOS, BOS_ID, EOS, EOS_ID, PAD, PAD_ID,
    UNK, UNK_ID,
};
