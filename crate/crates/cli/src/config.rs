//! Flat `section.key = value` run configuration.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

use structsum::corpus::{EncodeLimits, PosColumn, PruneConfig, StructConfig};
use structsum::decoding::DecodeConfig;
use structsum::model::ModelConfig;
use structsum::training::TrainConfig;
use structsum::Execution;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Split {
    pub source: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub parse: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Paths {
    pub train: Split,
    pub valid: Split,
    pub test: Split,
    /// Optional pretrained word vectors, one `word v1 .. vd` per line.
    pub embeddings: Option<PathBuf>,
    pub output_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub paths: Paths,
    /// `v_in` and `v_out` here are vocabulary budgets for preprocessing.
    pub model: ModelConfig,
    pub structure: StructConfig,
    pub pos_column: PosColumn,
    pub train: TrainConfig,
    pub decode: DecodeConfig,
    pub prune: PruneConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            paths: Paths {
                train: Split::default(),
                valid: Split::default(),
                test: Split::default(),
                embeddings: None,
                output_dir: PathBuf::from("run"),
            },
            model: ModelConfig::default(),
            structure: StructConfig::default(),
            pos_column: PosColumn::Xpos,
            train: TrainConfig::default(),
            decode: DecodeConfig::default(),
            prune: PruneConfig::default(),
            seed: 0,
        }
    }
}

fn parse<T>(key: &str, value: &str) -> Result<T>
where
    T: FromStr,
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("`{key}`: cannot parse `{value}`: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => bail!("`{key}`: expected a boolean, got `{value}`"),
    }
}

impl RunConfig {
    /// Reads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg = RunConfig::default();
        cfg.paths.output_dir = base.join("run");
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{}:{}: expected `key = value`", path.display(), n + 1))?;
            cfg.set(k.trim(), v.trim(), base)
                .with_context(|| format!("{}:{}", path.display(), n + 1))?;
        }
        Ok(cfg)
    }

    /// Applies `key=value` overrides; relative paths resolve against the
    /// working directory.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| anyhow!("override `{o}` is not `key=value`"))?;
            self.set(k.trim(), v.trim(), Path::new("."))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let path = || Some(base.join(value));
        let m = &mut self.model;
        let t = &mut self.train;
        let d = &mut self.decode;
        let p = &mut self.prune;
        match key {
            "seed" => self.seed = parse(key, value)?,
            "paths.train_source" => self.paths.train.source = path(),
            "paths.train_summary" => self.paths.train.summary = path(),
            "paths.train_parse" => self.paths.train.parse = path(),
            "paths.valid_source" => self.paths.valid.source = path(),
            "paths.valid_summary" => self.paths.valid.summary = path(),
            "paths.valid_parse" => self.paths.valid.parse = path(),
            "paths.test_source" => self.paths.test.source = path(),
            "paths.test_summary" => self.paths.test.summary = path(),
            "paths.test_parse" => self.paths.test.parse = path(),
            "paths.embeddings" => self.paths.embeddings = path(),
            "paths.output_dir" => self.paths.output_dir = base.join(value),

            "model.architecture" => m.architecture = parse(key, value)?,
            "model.word_dim" => m.word_dim = parse(key, value)?,
            "model.struct_dim" => m.struct_dim = parse(key, value)?,
            "model.hidden_dim" => m.hidden_dim = parse(key, value)?,
            "model.v_in" => m.v_in = parse(key, value)?,
            "model.v_out" => m.v_out = parse(key, value)?,
            "model.max_src_len" => m.max_src_len = parse(key, value)?,
            "model.max_tgt_len" => m.max_tgt_len = parse(key, value)?,
            "model.share_embeddings" => m.share_embeddings = parse_bool(key, value)?,
            "model.copy" => m.copy = parse_bool(key, value)?,
            "model.fixed_epsilon" => {
                m.fixed_epsilon = match value {
                    "none" | "" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "model.max_depth" => self.structure.max_depth = parse(key, value)?,
            "model.max_abs_pos" => self.structure.max_abs_pos = parse(key, value)?,
            "model.pos_column" => {
                self.pos_column = match value {
                    "xpos" => PosColumn::Xpos,
                    "upos" => PosColumn::Upos,
                    _ => bail!("`{key}`: expected xpos or upos, got `{value}`"),
                }
            }

            "train.learning_rate" => t.learning_rate = parse(key, value)?,
            "train.lambda" => t.lambda = parse(key, value)?,
            "train.clip" => t.clip = parse(key, value)?,
            "train.batch_size" => t.batch_size = parse(key, value)?,
            "train.max_epochs" => t.max_epochs = parse(key, value)?,
            "train.coverage_epochs" => t.coverage_epochs = parse(key, value)?,
            "train.patience" => t.patience = parse(key, value)?,
            "train.execution" => {
                t.execution = match value {
                    "parallel" => Execution::Parallel,
                    "sequential" => Execution::Sequential,
                    _ => bail!("`{key}`: expected parallel or sequential, got `{value}`"),
                }
            }

            "decode.mode" => d.mode = parse(key, value)?,
            "decode.beam_size" => d.beam_size = parse(key, value)?,
            "decode.eta" => d.eta = parse(key, value)?,
            "decode.max_len" => d.max_len = parse(key, value)?,

            "prune.enabled" => p.enabled = parse_bool(key, value)?,
            "prune.min_src_len" => p.min_src_len = parse(key, value)?,
            "prune.max_src_len" => p.max_src_len = parse(key, value)?,
            "prune.min_tgt_len" => p.min_tgt_len = parse(key, value)?,
            "prune.max_tgt_len" => p.max_tgt_len = parse(key, value)?,
            "prune.min_overlap" => p.min_overlap = parse(key, value)?,
            _ => bail!("unknown config key `{key}`"),
        }
        Ok(())
    }

    pub fn limits(&self) -> EncodeLimits {
        EncodeLimits {
            max_src_len: self.model.max_src_len,
            max_tgt_len: self.model.max_tgt_len,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn data_dir(&self) -> PathBuf {
        self.paths.output_dir.join("data")
    }

    pub fn model_dir(&self) -> PathBuf {
        self.paths.output_dir.join("model")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use structsum::decoding::DecodeMode;
    use structsum::model::Architecture;

    #[test]
    fn defaults_follow_the_library() {
        let c = RunConfig::default();
        assert_eq!(c.train, TrainConfig::default());
        assert_eq!(c.model.hidden_dim, 256);
        assert_eq!(c.decode.eta, 13.5);
    }

    #[test]
    fn file_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(
            &path,
            "# comment\nmodel.architecture = 2way-relation\npaths.train_source = data/a.src\ntrain.batch_size = 8\n",
        )
        .unwrap();
        let mut c = RunConfig::load(&path).unwrap();
        assert_eq!(c.model.architecture, Architecture::TwoWayRelation);
        assert_eq!(c.paths.train.source, Some(dir.path().join("data/a.src")));
        assert_eq!(c.paths.output_dir, dir.path().join("run"));
        c.apply_overrides(&["train.batch_size=4".into(), "decode.mode = beam".into()])
            .unwrap();
        assert_eq!(c.train.batch_size, 4);
        assert_eq!(c.decode.mode, DecodeMode::Beam);
    }

    #[test]
    fn errors_name_the_key_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.cfg");
        std::fs::write(&path, "seed = 1\ntrain.bogus = 3\n").unwrap();
        let err = format!("{:#}", RunConfig::load(&path).unwrap_err());
        assert!(
            err.contains("bad.cfg:2") && err.contains("train.bogus"),
            "{err}"
        );
        let mut c = RunConfig::default();
        assert!(c.apply_overrides(&["model.copy=maybe".into()]).is_err());
        assert!(c.apply_overrides(&["noequals".into()]).is_err());
    }
}
