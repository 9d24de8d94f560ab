use std::collections::HashMap;

use crate::error::{Error, Result};

/// Precision, recall and F1 in `[0, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    fn from_counts(hits: usize, sys: usize, refr: usize) -> Self {
        let precision = if sys == 0 {
            0.0
        } else {
            hits as f64 / sys as f64
        };
        let recall = if refr == 0 {
            0.0
        } else {
            hits as f64 / refr as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            precision,
            recall,
            f1,
        }
    }
}

fn ngrams<T: AsRef<str>>(tokens: &[T], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut out = HashMap::new();
    if n == 0 || tokens.len() < n {
        return out;
    }
    for w in tokens.windows(n) {
        *out.entry(w.iter().map(AsRef::as_ref).collect())
            .or_insert(0) += 1;
    }
    out
}

/// ROUGE-N with clipped n-gram counts.
pub fn rouge_n<T: AsRef<str>>(system: &[T], reference: &[T], n: usize) -> Prf {
    let sys = ngrams(system, n);
    let refr = ngrams(reference, n);
    let hits = sys
        .iter()
        .map(|(g, &c)| c.min(refr.get(g).copied().unwrap_or(0)))
        .sum();
    Prf::from_counts(hits, sys.values().sum(), refr.values().sum())
}

fn lcs_len<T: AsRef<str>>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L from the plain longest common subsequence.
pub fn rouge_l<T: AsRef<str>>(system: &[T], reference: &[T]) -> Prf {
    Prf::from_counts(lcs_len(system, reference), system.len(), reference.len())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RougeOptions {
    pub lowercase: bool,
    /// Porter-stem both sides before matching.
    pub stem: bool,
}

impl Default for RougeOptions {
    fn default() -> Self {
        RougeOptions {
            lowercase: true,
            stem: true,
        }
    }
}

impl RougeOptions {
    pub fn normalize<T: AsRef<str>>(&self, tokens: &[T]) -> Vec<String> {
        tokens
            .iter()
            .map(|t| {
                let t = if self.lowercase {
                    t.as_ref().to_lowercase()
                } else {
                    t.as_ref().to_string()
                };
                if self.stem {
                    porter_stemmer::stem(&t)
                } else {
                    t
                }
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RougeScores {
    pub rouge1: Prf,
    pub rouge2: Prf,
    pub rouge_l: Prf,
    /// Set when the reference was empty; all scores are then zero.
    pub empty_reference: bool,
}

pub fn score_pair<T: AsRef<str>>(
    system: &[T],
    reference: &[T],
    opts: &RougeOptions,
) -> RougeScores {
    let (s, r) = (opts.normalize(system), opts.normalize(reference));
    if r.is_empty() {
        return RougeScores {
            empty_reference: true,
            ..RougeScores::default()
        };
    }
    RougeScores {
        rouge1: rouge_n(&s, &r, 1),
        rouge2: rouge_n(&s, &r, 2),
        rouge_l: rouge_l(&s, &r),
        empty_reference: false,
    }
}

/// Per-instance scores and their averages.
#[derive(Clone, Debug, PartialEq)]
pub struct RougeReport {
    pub instances: Vec<RougeScores>,
    pub mean: RougeScores,
    pub options: RougeOptions,
}

fn mean_prf(xs: impl Iterator<Item = Prf>) -> Prf {
    let mut n = 0.0;
    let mut acc = Prf::default();
    for x in xs {
        acc.precision += x.precision;
        acc.recall += x.recall;
        acc.f1 += x.f1;
        n += 1.0;
    }
    if n > 0.0 {
        acc.precision /= n;
        acc.recall /= n;
        acc.f1 /= n;
    }
    acc
}

pub fn rouge_report<T: AsRef<str>>(
    systems: &[Vec<T>],
    references: &[Vec<T>],
    opts: &RougeOptions,
) -> Result<RougeReport> {
    if systems.len() != references.len() {
        return Err(Error::invalid(
            "rouge",
            format!(
                "{} system summaries but {} references",
                systems.len(),
                references.len()
            ),
        ));
    }
    let instances: Vec<RougeScores> = systems
        .iter()
        .zip(references)
        .map(|(s, r)| score_pair(s, r, opts))
        .collect();
    let mean = RougeScores {
        rouge1: mean_prf(instances.iter().map(|s| s.rouge1)),
        rouge2: mean_prf(instances.iter().map(|s| s.rouge2)),
        rouge_l: mean_prf(instances.iter().map(|s| s.rouge_l)),
        empty_reference: instances.iter().any(|s| s.empty_reference),
    };
    Ok(RougeReport {
        instances,
        mean,
        options: *opts,
    })
}

impl RougeReport {
    pub fn empty_references(&self) -> usize {
        self.instances.iter().filter(|s| s.empty_reference).count()
    }

    /// Tab-separated `metric, P, R, F1` rows under a comment header.
    pub fn to_tsv(&self) -> String {
        let mut out = format!(
            "# instances={} stemming={} empty_references={}\n\
             # ROUGE-L uses the plain LCS (no weighted LCS)\n\
             metric\tP\tR\tF1\n",
            self.instances.len(),
            if self.options.stem { "porter" } else { "off" },
            self.empty_references()
        );
        for (name, p) in [
            ("ROUGE-1", self.mean.rouge1),
            ("ROUGE-2", self.mean.rouge2),
            ("ROUGE-L", self.mean.rouge_l),
        ] {
            out.push_str(&format!(
                "{name}\t{:.4}\t{:.4}\t{:.4}\n",
                p.precision, p.recall, p.f1
            ));
        }
        out
    }
}
