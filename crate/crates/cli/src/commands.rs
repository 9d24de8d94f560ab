use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde_json::json;

use structsum::corpus::toy::toy_corpus;
use structsum::corpus::{
    build_vocabularies, encode_pair, encode_source, extract_structural_labels, prune_pair,
    EncodedPair, ParsedSentence, PruneDecision, StructuralLabels, VocabSource, Vocabulary,
};
use structsum::decoding::summarize_all;
use structsum::evaluation::{
    preservation_table, relation_preservation, rouge_report, RelationPreservationReport,
    RougeOptions, REPORTED_RELATIONS,
};
use structsum::model::{load_checkpoint, save_checkpoint, Model, ModelConfig};
use structsum::training::{train, Stage, TrainEvent};

use crate::config::RunConfig;
use crate::data::{
    check_parse_alignment, load_split, read_parses, read_shard, read_token_lines, write_lines,
    write_shard, Loaded,
};

fn labels_for(
    parses: Option<&Vec<ParsedSentence>>,
    cfg: &RunConfig,
) -> Option<Vec<StructuralLabels>> {
    parses.map(|ps| {
        ps.iter()
            .map(|p| extract_structural_labels(p, &cfg.structure))
            .collect()
    })
}

struct Prepared {
    kept: Vec<usize>,
    dropped: BTreeMap<String, usize>,
}

fn prune_split(data: &Loaded, cfg: &RunConfig, prune: bool) -> Prepared {
    let summaries = data.summaries.as_ref().expect("summaries loaded");
    let mut kept = Vec::new();
    let mut dropped = BTreeMap::new();
    for (i, (s, t)) in data.sources.iter().zip(summaries).enumerate() {
        let decision = if prune {
            prune_pair(s, t, &cfg.prune)
        } else {
            PruneDecision::Keep
        };
        match decision {
            PruneDecision::Keep if !s.is_empty() => kept.push(i),
            PruneDecision::Keep => *dropped.entry("EmptySource".to_string()).or_insert(0) += 1,
            PruneDecision::Drop(r) => *dropped.entry(format!("{r:?}")).or_insert(0) += 1,
        }
    }
    Prepared { kept, dropped }
}

fn encode_split(
    data: &Loaded,
    labels: Option<&Vec<StructuralLabels>>,
    indices: &[usize],
    vocab: &Vocabulary,
    cfg: &RunConfig,
) -> Vec<EncodedPair> {
    let summaries = data.summaries.as_ref().expect("summaries loaded");
    indices
        .iter()
        .map(|&i| {
            let parse = data
                .parses
                .as_ref()
                .zip(labels)
                .map(|(p, l)| (&p[i], &l[i]));
            encode_pair(&data.sources[i], &summaries[i], parse, vocab, cfg.limits())
        })
        .collect()
}

pub fn preprocess(cfg: &RunConfig) -> Result<()> {
    let pos = cfg.pos_column;
    let train_data = load_split(&cfg.paths.train, "train", true, pos)?;
    let valid_data = load_split(&cfg.paths.valid, "valid", true, pos)?;
    let test_data = match cfg.paths.test.source {
        Some(_) => {
            let mut test = load_split(&cfg.paths.test, "test", false, pos)?;
            test.summaries
                .get_or_insert_with(|| vec![Vec::new(); test.sources.len()]);
            Some(test)
        }
        None => None,
    };
    if train_data.parses.is_some() != valid_data.parses.is_some() {
        bail!("parse files must be given for both train and valid or for neither");
    }

    let train_labels = labels_for(train_data.parses.as_ref(), cfg);
    let valid_labels = labels_for(valid_data.parses.as_ref(), cfg);
    let train_kept = prune_split(&train_data, cfg, cfg.prune.enabled);
    let valid_kept = prune_split(&valid_data, cfg, cfg.prune.enabled);
    ensure!(
        !train_kept.kept.is_empty(),
        "no training pairs left after pruning"
    );
    ensure!(
        !valid_kept.kept.is_empty(),
        "no validation pairs left after pruning"
    );

    let summaries = train_data.summaries.as_ref().expect("summaries loaded");
    let sources: Vec<VocabSource> = train_kept
        .kept
        .iter()
        .map(|&i| VocabSource {
            source: &train_data.sources[i],
            summary: &summaries[i],
            labels: train_labels.as_ref().map(|l| &l[i]),
        })
        .collect();
    let vocab = build_vocabularies(&sources, cfg.model.v_in, cfg.model.v_out)?;

    let dir = cfg.data_dir();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    vocab.save(&dir)?;
    let mut stats = String::from("split\tinput\tkept\tdropped\n");
    let mut write = |name: &str,
                     data: &Loaded,
                     labels: Option<&Vec<StructuralLabels>>,
                     p: &Prepared|
     -> Result<()> {
        let pairs = encode_split(data, labels, &p.kept, &vocab, cfg);
        write_shard(&dir.join(format!("{name}.jsonl")), &pairs)?;
        let reasons: Vec<String> = p.dropped.iter().map(|(k, v)| format!("{k}={v}")).collect();
        stats.push_str(&format!(
            "{name}\t{}\t{}\t{}\n",
            data.sources.len(),
            p.kept.len(),
            if reasons.is_empty() {
                "-".to_string()
            } else {
                reasons.join(",")
            }
        ));
        Ok(())
    };
    write("train", &train_data, train_labels.as_ref(), &train_kept)?;
    write("valid", &valid_data, valid_labels.as_ref(), &valid_kept)?;
    if let Some(test) = &test_data {
        // Test data is never pruned.
        let labels = labels_for(test.parses.as_ref(), cfg);
        let all = prune_split(test, cfg, false);
        write("test", test, labels.as_ref(), &all)?;
    }
    fs::write(dir.join("stats.tsv"), &stats)?;
    eprint!("{stats}");
    eprintln!(
        "vocabulary: {} input, {} output words",
        vocab.v_in(),
        vocab.v_out()
    );
    Ok(())
}

fn model_config(cfg: &RunConfig, vocab: &Vocabulary) -> ModelConfig {
    ModelConfig {
        v_in: vocab.v_in(),
        v_out: vocab.v_out(),
        label_sizes: vocab.label_sizes(),
        ..cfg.model.clone()
    }
}

fn load_embeddings(model: &mut Model, vocab: &Vocabulary, path: &Path) -> Result<usize> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let dim = model.config().word_dim;
    let mut vectors = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let Some(word) = parts.next() else { continue };
        let Some(id) = vocab.words().get(word) else {
            continue;
        };
        let values: Vec<f64> = parts
            .map(str::parse)
            .collect::<Result<_, _>>()
            .with_context(|| format!("{}:{}: bad vector for `{word}`", path.display(), n + 1))?;
        if values.len() != dim {
            bail!(
                "{}:{}: vector for `{word}` has {} values, model.word_dim is {dim}",
                path.display(),
                n + 1,
                values.len()
            );
        }
        vectors.push((id, values));
    }
    // The target table exists only when embeddings are not shared.
    for name in ["embed.word", "embed.target"] {
        if let Some(table) = model.params_mut().by_name_mut(name) {
            for (id, v) in &vectors {
                table.data_mut()[id * dim..(id + 1) * dim].copy_from_slice(v);
            }
        }
    }
    Ok(vectors.len())
}

pub fn train_cmd(cfg: &RunConfig) -> Result<()> {
    let data = cfg.data_dir();
    let vocab = Vocabulary::load(&data)?;
    let train_set = read_shard(&data.join("train.jsonl"))?;
    let valid = read_shard(&data.join("valid.jsonl"))?;
    let mcfg = model_config(cfg, &vocab);
    let arch = mcfg.architecture;
    if arch.uses_structure()
        && !train_set
            .iter()
            .chain(&valid)
            .all(EncodedPair::has_structure)
    {
        bail!("architecture {arch} needs parse files; set paths.train_parse and paths.valid_parse and rerun preprocess");
    }
    let mut model = Model::new(mcfg, cfg.seed)?;
    if let Some(p) = &cfg.paths.embeddings {
        let n = load_embeddings(&mut model, &vocab, p)?;
        eprintln!("loaded {n} pretrained word vectors");
    }

    let dir = cfg.model_dir();
    fs::create_dir_all(&dir)?;
    let mut log = fs::File::create(dir.join("train.log"))?;
    writeln!(log, "epoch\tstep\tloss\tomega\tseconds")?;
    let mut io_err = None;
    let tc = cfg.train_config();
    let report = train(&mut model, &vocab, &train_set, &valid, &tc, &mut |e| {
        if let Some(line) = e.log_line() {
            if let Err(err) = writeln!(log, "{line}") {
                io_err.get_or_insert(err);
            }
        }
        if let TrainEvent::Epoch {
            epoch,
            stage,
            train_loss,
            valid,
            improved,
        } = e
        {
            eprintln!(
                "epoch {epoch} ({stage:?}): train {train_loss:.4}, valid loss {:.4}, omega {:.4}{}",
                valid.loss,
                valid.omega,
                if *improved { " *" } else { "" }
            );
        }
    })?;
    if let Some(e) = io_err {
        return Err(e).context("writing train.log");
    }

    let fp = vocab.fingerprint();
    save_checkpoint(&model, &fp, &dir.join("best.ckpt"))?;
    if let Some(plain) = &report.plain_model {
        save_checkpoint(plain, &fp, &dir.join("plain.ckpt"))?;
    }
    let epochs: Vec<_> = report
        .epochs
        .iter()
        .map(|r| {
            json!({
                "epoch": r.epoch,
                "stage": match r.stage { Stage::Plain => "plain", Stage::Coverage => "coverage" },
                "train_loss": r.train_loss,
                "valid_loss": r.valid.loss,
                "valid_omega": r.valid.omega,
            })
        })
        .collect();
    let manifest = json!({
        "best_checkpoint": "best.ckpt",
        "plain_checkpoint": report.plain_model.as_ref().map(|_| "plain.ckpt"),
        "best_plain_epoch": report.best_plain_epoch,
        "best_coverage_epoch": report.best_coverage_epoch,
        "stopped_early": report.stopped_early,
        "architecture": arch.name(),
        "vocab_fingerprint": fp,
        "epochs": epochs,
    });
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    eprintln!("best checkpoint: {}", dir.join("best.ckpt").display());
    Ok(())
}

fn manifest_checkpoint(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.model_dir();
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).with_context(|| {
        format!(
            "reading {} (run `train` first or pass --checkpoint)",
            path.display()
        )
    })?;
    let m: serde_json::Value = serde_json::from_str(&text)?;
    let name = m["best_checkpoint"]
        .as_str()
        .with_context(|| format!("{} has no best_checkpoint", path.display()))?;
    Ok(dir.join(name))
}

pub struct SummarizeArgs {
    pub checkpoint: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub parse: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

pub fn summarize(cfg: &RunConfig, args: &SummarizeArgs) -> Result<PathBuf> {
    let ckpt = match &args.checkpoint {
        Some(p) => p.clone(),
        None => manifest_checkpoint(cfg)?,
    };
    let (model, fp) = load_checkpoint(&ckpt)?;
    let vocab = Vocabulary::load(&cfg.data_dir())?;
    if fp != vocab.fingerprint() {
        bail!(
            "vocabulary hash mismatch: checkpoint {} was trained with {fp}, {} holds {}",
            ckpt.display(),
            cfg.data_dir().display(),
            vocab.fingerprint()
        );
    }
    let arch = model.config().architecture;
    if arch != cfg.model.architecture {
        bail!(
            "checkpoint architecture {arch} does not match model.architecture = {}",
            cfg.model.architecture
        );
    }
    let input = args
        .input
        .clone()
        .or_else(|| cfg.paths.test.source.clone())
        .context("no --input given and paths.test_source is not set")?;
    let parse_path = match &args.input {
        Some(_) => args.parse.clone(),
        None => args.parse.clone().or_else(|| cfg.paths.test.parse.clone()),
    };
    let sources = read_token_lines(&input)?;
    let parses = match &parse_path {
        Some(p) => {
            let parses = read_parses(p, cfg.pos_column)?;
            check_parse_alignment(&sources, &parses, &input, p)?;
            Some(parses)
        }
        None if arch.uses_structure() => {
            bail!(
                "architecture {arch} needs a parse file for {}",
                input.display()
            )
        }
        None => None,
    };
    let labels = labels_for(parses.as_ref(), cfg);
    let pairs: Vec<EncodedPair> = sources
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let parse = parses
                .as_ref()
                .zip(labels.as_ref())
                .map(|(p, l)| (&p[i], &l[i]));
            encode_source(s, parse, &vocab, cfg.limits())
        })
        .collect();
    let out = summarize_all(&model, &vocab, &pairs, &cfg.decode, cfg.train.execution)?;
    let output = args
        .output
        .clone()
        .unwrap_or_else(|| cfg.paths.output_dir.join("summaries.txt"));
    let lines: Vec<Vec<String>> = out.into_iter().map(|s| s.tokens).collect();
    write_lines(&output, &lines)?;
    eprintln!("wrote {} summaries to {}", lines.len(), output.display());
    Ok(output)
}

type Lines = Vec<Vec<String>>;

fn aligned(system: &Path, reference: &Path) -> Result<(Lines, Lines)> {
    let sys = read_token_lines(system)?;
    let refs = read_token_lines(reference)?;
    if sys.len() != refs.len() {
        bail!(
            "line-count mismatch: {} has {} lines but {} has {} lines",
            system.display(),
            sys.len(),
            reference.display(),
            refs.len()
        );
    }
    Ok((sys, refs))
}

fn relation_report(
    parses: &[ParsedSentence],
    summaries: &[Vec<String>],
) -> RelationPreservationReport {
    let mut total = RelationPreservationReport::default();
    for (p, s) in parses.iter().zip(summaries) {
        total.merge(&relation_preservation(p, s));
    }
    total
}

pub struct EvaluateArgs {
    pub system: PathBuf,
    pub reference: PathBuf,
    pub parse: Option<PathBuf>,
    pub no_stem: bool,
    pub output_dir: Option<PathBuf>,
}

pub fn evaluate(cfg: &RunConfig, args: &EvaluateArgs) -> Result<()> {
    let (sys, refs) = aligned(&args.system, &args.reference)?;
    let opts = RougeOptions {
        stem: !args.no_stem,
        ..RougeOptions::default()
    };
    let report = rouge_report(&sys, &refs, &opts)?;
    let rouge = report.to_tsv();
    print!("{rouge}");
    let relations = match &args.parse {
        Some(p) => {
            let parses = read_parses(p, cfg.pos_column)?;
            if parses.len() != sys.len() {
                bail!(
                    "line-count mismatch: {} has {} lines but {} has {} sentences",
                    args.system.display(),
                    sys.len(),
                    p.display(),
                    parses.len()
                );
            }
            let tsv = relation_report(&parses, &sys).to_tsv();
            print!("\n{tsv}");
            Some(tsv)
        }
        None => None,
    };
    if let Some(dir) = &args.output_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("rouge.tsv"), rouge)?;
        if let Some(tsv) = relations {
            fs::write(dir.join("relations.tsv"), tsv)?;
        }
    }
    Ok(())
}

pub fn analyze_relations(
    cfg: &RunConfig,
    parse: &Path,
    systems: &[(String, PathBuf)],
    output: Option<&Path>,
) -> Result<()> {
    ensure!(!systems.is_empty(), "give at least one --system NAME=FILE");
    let parses = read_parses(parse, cfg.pos_column)?;
    let mut reports = Vec::new();
    for (name, path) in systems {
        let lines = read_token_lines(path)?;
        if lines.len() != parses.len() {
            bail!(
                "line-count mismatch: {} has {} lines but {} has {} sentences",
                path.display(),
                lines.len(),
                parse.display(),
                parses.len()
            );
        }
        reports.push((name.as_str(), relation_report(&parses, &lines)));
    }
    let refs: Vec<(&str, &RelationPreservationReport)> =
        reports.iter().map(|(n, r)| (*n, r)).collect();
    let table = preservation_table(&refs, &REPORTED_RELATIONS);
    match output {
        Some(p) => fs::write(p, &table).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{table}"),
    }
    Ok(())
}

/// Writes a deterministic toy corpus split 80/10/10 plus a config that
/// trains a small model on it.
pub fn make_toy(dir: &Path, pairs: usize, seed: u64) -> Result<()> {
    ensure!(pairs >= 10, "need at least 10 pairs");
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let corpus = toy_corpus(pairs, seed);
    let n_train = pairs * 8 / 10;
    let n_valid = pairs / 10;
    let splits = [
        ("train", &corpus[..n_train]),
        ("valid", &corpus[n_train..n_train + n_valid]),
        ("test", &corpus[n_train + n_valid..]),
    ];
    for (name, part) in splits {
        let src: Vec<Vec<String>> = part.iter().map(|p| p.source().to_vec()).collect();
        let tgt: Vec<Vec<String>> = part.iter().map(|p| p.summary.clone()).collect();
        write_lines(&dir.join(format!("{name}.src")), &src)?;
        write_lines(&dir.join(format!("{name}.tgt")), &tgt)?;
        let conllu: String = part.iter().map(|p| p.parse.to_conllu()).collect();
        fs::write(dir.join(format!("{name}.conllu")), conllu)?;
    }
    fs::write(dir.join("toy.cfg"), TOY_CONFIG)?;
    Ok(())
}

const TOY_CONFIG: &str = "\
# Small model on the bundled toy corpus.
seed = 0
paths.train_source = train.src
paths.train_summary = train.tgt
paths.train_parse = train.conllu
paths.valid_source = valid.src
paths.valid_summary = valid.tgt
paths.valid_parse = valid.conllu
paths.test_source = test.src
paths.test_summary = test.tgt
paths.test_parse = test.conllu
paths.output_dir = run

model.architecture = 2way-relation
model.word_dim = 16
model.struct_dim = 4
model.hidden_dim = 32
model.v_in = 200
model.v_out = 150

train.learning_rate = 0.01
train.batch_size = 16
train.max_epochs = 30
train.coverage_epochs = 2

decode.mode = beam
decode.beam_size = 5
decode.eta = 13.5
decode.max_len = 20

prune.min_src_len = 3
";
