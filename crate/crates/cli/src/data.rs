//! Aligned text/parse files and encoded shards on disk.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};

use structsum::corpus::{parse_conllu, EncodedPair, ParsedSentence, PosColumn};

use crate::config::Split;

/// Whitespace-tokenized lines; an empty line is an empty token list.
pub fn read_token_lines(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .collect())
}

pub fn read_parses(path: &Path, pos: PosColumn) -> Result<Vec<ParsedSentence>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_conllu(&text, pos).with_context(|| format!("parsing {}", path.display()))
}

/// Sources with optional summaries and parses, all checked for alignment.
pub struct Loaded {
    pub sources: Vec<Vec<String>>,
    pub summaries: Option<Vec<Vec<String>>>,
    pub parses: Option<Vec<ParsedSentence>>,
}

pub fn check_parse_alignment(
    sources: &[Vec<String>],
    parses: &[ParsedSentence],
    src_path: &Path,
    parse_path: &Path,
) -> Result<()> {
    if parses.len() != sources.len() {
        bail!(
            "line-count mismatch: {} has {} lines but {} has {} sentences",
            src_path.display(),
            sources.len(),
            parse_path.display(),
            parses.len()
        );
    }
    for (i, (s, p)) in sources.iter().zip(parses).enumerate() {
        if *s != p.tokens {
            bail!(
                "{} line {} does not match sentence {} of {}",
                src_path.display(),
                i + 1,
                i + 1,
                parse_path.display()
            );
        }
    }
    Ok(())
}

pub fn load_split(split: &Split, name: &str, need_summary: bool, pos: PosColumn) -> Result<Loaded> {
    let src_path = split
        .source
        .as_ref()
        .with_context(|| format!("paths.{name}_source is not set"))?;
    let sources = read_token_lines(src_path)?;
    let summaries = match (&split.summary, need_summary) {
        (Some(p), _) => {
            let s = read_token_lines(p)?;
            if s.len() != sources.len() {
                bail!(
                    "line-count mismatch: {} has {} lines but {} has {} lines",
                    src_path.display(),
                    sources.len(),
                    p.display(),
                    s.len()
                );
            }
            Some(s)
        }
        (None, true) => bail!("paths.{name}_summary is not set"),
        (None, false) => None,
    };
    let parses = match &split.parse {
        Some(p) => {
            let parses = read_parses(p, pos)?;
            check_parse_alignment(&sources, &parses, src_path, p)?;
            Some(parses)
        }
        None => None,
    };
    Ok(Loaded {
        sources,
        summaries,
        parses,
    })
}

pub fn write_shard(path: &Path, pairs: &[EncodedPair]) -> Result<()> {
    let mut w = BufWriter::new(
        fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    for p in pairs {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_shard(path: &Path) -> Result<Vec<EncodedPair>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {} (run `preprocess` first)", path.display()))?;
    text.lines()
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1))
        })
        .collect()
}

pub fn write_lines(path: &Path, lines: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    for l in lines {
        out.push_str(&l.join(" "));
        out.push('\n');
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}
