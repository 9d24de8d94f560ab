//! ROUGE scoring and dependency-relation preservation.

mod relations;
mod rouge;

pub use relations::{
    preservation_table, relation_preservation, RelationCount, RelationPreservationReport,
    REPORTED_RELATIONS,
};
pub use rouge::{
    rouge_l, rouge_n, rouge_report, score_pair, Prf, RougeOptions, RougeReport, RougeScores,
};
