use std::collections::{BTreeMap, HashSet};

use crate::corpus::ParsedSentence;

/// Relation types reported by default, in display order.
pub const REPORTED_RELATIONS: [&str; 10] = [
    "nsubj",
    "dobj",
    "amod",
    "nmod",
    "nmod:poss",
    "mark",
    "case",
    "conj",
    "cc",
    "det",
];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RelationCount {
    pub total: usize,
    pub preserved: usize,
}

impl RelationCount {
    pub fn percentage(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * self.preserved as f64 / self.total as f64
        }
    }
}

/// Source edges per relation type and how many survive in the summaries.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RelationPreservationReport {
    pub counts: BTreeMap<String, RelationCount>,
}

/// Counts every non-root edge of `source` once; an edge is preserved when
/// both its words occur (lowercased) anywhere in `summary`.
pub fn relation_preservation<T: AsRef<str>>(
    source: &ParsedSentence,
    summary: &[T],
) -> RelationPreservationReport {
    let words: HashSet<String> = summary.iter().map(|w| w.as_ref().to_lowercase()).collect();
    let mut report = RelationPreservationReport::default();
    for (i, rel) in source.deprel.iter().enumerate() {
        let Some(p) = source.parent(i) else {
            continue;
        };
        let entry = report.counts.entry(rel.clone()).or_default();
        entry.total += 1;
        if words.contains(&source.tokens[i].to_lowercase())
            && words.contains(&source.tokens[p].to_lowercase())
        {
            entry.preserved += 1;
        }
    }
    report
}

impl RelationPreservationReport {
    pub fn merge(&mut self, other: &RelationPreservationReport) {
        for (rel, c) in &other.counts {
            let e = self.counts.entry(rel.clone()).or_default();
            e.total += c.total;
            e.preserved += c.preserved;
        }
    }

    pub fn get(&self, relation: &str) -> RelationCount {
        self.counts.get(relation).copied().unwrap_or_default()
    }

    /// `relation, total, preserved, percent` for every observed type.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("relation\ttotal\tpreserved\tpercent\n");
        for (rel, c) in &self.counts {
            out.push_str(&format!(
                "{rel}\t{}\t{}\t{:.2}\n",
                c.total,
                c.preserved,
                c.percentage()
            ));
        }
        out
    }
}

/// One row per system with the percentage preserved for each relation in
/// `relations`, mirroring the layout of a per-system comparison table.
pub fn preservation_table(
    systems: &[(&str, &RelationPreservationReport)],
    relations: &[&str],
) -> String {
    let mut out = String::from("system");
    for r in relations {
        out.push('\t');
        out.push_str(r);
    }
    out.push('\n');
    for (name, report) in systems {
        out.push_str(name);
        for r in relations {
            out.push_str(&format!("\t{:.2}", report.get(r).percentage()));
        }
        out.push('\n');
    }
    out
}
