use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which CoNLL-U column supplies part-of-speech tags.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum PosColumn {
    Upos,
    /// Language-specific tags (Penn Treebank for English).
    #[default]
    Xpos,
}

/// A dependency-parsed sentence.
///
/// `head[i]` is the 1-based index of token `i`'s parent, or 0 for the root.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedSentence {
    pub tokens: Vec<String>,
    pub pos: Vec<String>,
    pub head: Vec<usize>,
    pub deprel: Vec<String>,
}

impl ParsedSentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// 0-based parent position of token `i`, `None` for the root.
    pub fn parent(&self, i: usize) -> Option<usize> {
        self.head[i].checked_sub(1)
    }

    pub fn root(&self) -> Option<usize> {
        self.head.iter().position(|&h| h == 0)
    }

    /// Checks that the columns line up and `head` forms a single-rooted tree.
    pub fn validate(&self) -> Result<()> {
        let n = self.tokens.len();
        if n == 0 {
            return Err(Error::Tree("empty sentence".into()));
        }
        if self.pos.len() != n || self.head.len() != n || self.deprel.len() != n {
            return Err(Error::Tree(format!(
                "column lengths differ: tokens {n}, pos {}, head {}, deprel {}",
                self.pos.len(),
                self.head.len(),
                self.deprel.len()
            )));
        }
        if let Some(i) = self.head.iter().position(|&h| h > n) {
            return Err(Error::Tree(format!(
                "token {} has head {} beyond sentence length {n}",
                i + 1,
                self.head[i]
            )));
        }
        let roots = self.head.iter().filter(|&&h| h == 0).count();
        if roots != 1 {
            return Err(Error::Tree(format!(
                "expected exactly one root, found {roots}"
            )));
        }
        for start in 0..n {
            let mut cur = start;
            let mut steps = 0;
            while let Some(p) = self.parent(cur) {
                cur = p;
                steps += 1;
                if steps > n {
                    return Err(Error::Tree(format!("cycle through token {}", start + 1)));
                }
            }
        }
        Ok(())
    }

    /// Serializes to CoNLL-U; columns not modelled here are written as `_`.
    pub fn to_conllu(&self) -> String {
        let mut out = String::new();
        for i in 0..self.len() {
            let _ = writeln!(
                out,
                "{}\t{}\t_\t_\t{}\t_\t{}\t{}\t_\t_",
                i + 1,
                self.tokens[i],
                self.pos[i],
                self.head[i],
                self.deprel[i]
            );
        }
        out.push('\n');
        out
    }
}

/// Reads CoNLL-U text: ten tab-separated columns per token line, blank lines
/// between sentences, `#` comments. Multiword-token ranges (`3-4`) and empty
/// nodes (`5.1`) are skipped. If the selected POS column holds `_`, the other
/// one is used.
pub fn parse_conllu(text: &str, pos_column: PosColumn) -> Result<Vec<ParsedSentence>> {
    let mut sentences = Vec::new();
    let mut cur = Builder::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            cur.finish(&mut sentences)?;
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 10 tab-separated columns, found {}", cols.len()),
            });
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let id: usize = cols[0].parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("non-integer ID `{}`", cols[0]),
        })?;
        if id != cur.sentence.tokens.len() + 1 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!(
                    "token ID {id} out of sequence (expected {})",
                    cur.sentence.tokens.len() + 1
                ),
            });
        }
        let head: usize = cols[6].parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("non-integer HEAD `{}`", cols[6]),
        })?;
        let (upos, xpos) = (cols[3], cols[4]);
        let pos = match pos_column {
            PosColumn::Xpos if xpos != "_" => xpos,
            PosColumn::Upos if upos == "_" => xpos,
            PosColumn::Xpos => upos,
            PosColumn::Upos => upos,
        };
        if cur.sentence.tokens.is_empty() {
            cur.start_line = line_no;
        }
        cur.sentence.tokens.push(cols[1].to_string());
        cur.sentence.pos.push(pos.to_string());
        cur.sentence.head.push(head);
        cur.sentence.deprel.push(cols[7].to_string());
    }
    cur.finish(&mut sentences)?;
    Ok(sentences)
}

#[derive(Default)]
struct Builder {
    sentence: ParsedSentence,
    start_line: usize,
}

impl Builder {
    fn finish(&mut self, out: &mut Vec<ParsedSentence>) -> Result<()> {
        if self.sentence.tokens.is_empty() {
            return Ok(());
        }
        let s = std::mem::take(&mut self.sentence);
        s.validate().map_err(|e| Error::Parse {
            line: self.start_line,
            msg: e.to_string(),
        })?;
        out.push(s);
        Ok(())
    }
}
