use std::time::Instant;

use crate::corpus::{EncodedPair, Vocabulary};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::Model;

use super::{make_batches, step_gradients, step_loss, Adam};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Coverage coefficient λ.
    pub lambda: f64,
    /// Elementwise gradient clip bound.
    pub clip: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Extra epochs trained with the coverage term; 0 skips the stage.
    pub coverage_epochs: usize,
    /// Validations without improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            lambda: 1.0,
            clip: 5.0,
            batch_size: 64,
            max_epochs: 20,
            coverage_epochs: 5,
            patience: 2,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate.is_nan()
            || self.learning_rate <= 0.0
            || self.clip.is_nan()
            || self.clip <= 0.0
            || self.lambda < 0.0
        {
            return Err(Error::Training(
                "learning rate and clip must be positive, lambda non-negative".into(),
            ));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Training(
                "batch size and max epochs must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Plain,
    Coverage,
}

/// Validation statistics over a whole dataset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalStats {
    /// Mean `-log P(gold)` per target token.
    pub loss: f64,
    /// λ times the mean per-instance normalised coverage.
    pub omega: f64,
}

impl EvalStats {
    pub fn objective(&self) -> f64 {
        self.loss + self.omega
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TrainEvent {
    Step {
        epoch: usize,
        step: usize,
        loss: f64,
        omega: f64,
        seconds: f64,
    },
    Epoch {
        epoch: usize,
        stage: Stage,
        train_loss: f64,
        valid: EvalStats,
        improved: bool,
    },
}

impl TrainEvent {
    /// Tab-separated `epoch, step, L, Ω, seconds` for step events.
    pub fn log_line(&self) -> Option<String> {
        match self {
            TrainEvent::Step {
                epoch,
                step,
                loss,
                omega,
                seconds,
            } => Some(format!(
                "{epoch}\t{step}\t{loss:.6}\t{omega:.6}\t{seconds:.3}"
            )),
            TrainEvent::Epoch { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub stage: Stage,
    pub train_loss: f64,
    pub valid: EvalStats,
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters ended stage 1.
    pub best_plain_epoch: usize,
    /// Epoch selected in the coverage stage, if it ran.
    pub best_coverage_epoch: Option<usize>,
    pub stopped_early: bool,
    /// The stage-1 model, kept when the coverage stage replaced it.
    pub plain_model: Option<Model>,
}

/// Token-level loss and mean coverage over `pairs`, in batches.
pub fn evaluate(
    model: &Model,
    vocab: &Vocabulary,
    pairs: &[EncodedPair],
    cfg: &TrainConfig,
) -> Result<EvalStats> {
    let mut nll = 0.0;
    let mut tokens = 0;
    let mut omega = 0.0;
    for chunk in pairs.chunks(cfg.batch_size) {
        let refs: Vec<&EncodedPair> = chunk.iter().collect();
        let s = step_loss(model, vocab, &refs, cfg.lambda, cfg.execution)?;
        nll += s.loss * s.tokens as f64;
        tokens += s.tokens;
        omega += s.omega;
    }
    if tokens == 0 {
        return Err(Error::Training("empty evaluation set".into()));
    }
    Ok(EvalStats {
        loss: nll / tokens as f64,
        omega: omega / pairs.len() as f64,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_epoch(
    model: &mut Model,
    opt: &mut Adam,
    vocab: &Vocabulary,
    train: &[EncodedPair],
    cfg: &TrainConfig,
    epoch: usize,
    coverage: bool,
    observer: &mut dyn FnMut(&TrainEvent),
) -> Result<f64> {
    let mut total = 0.0;
    let mut tokens = 0;
    for (step, batch) in make_batches(train, cfg.batch_size, cfg.seed, epoch)
        .iter()
        .enumerate()
    {
        let start = Instant::now();
        let pairs: Vec<&EncodedPair> = batch.indices.iter().map(|&i| &train[i]).collect();
        let (s, grads) = step_gradients(model, vocab, &pairs, cfg.lambda, coverage, cfg.execution)?;
        opt.step(model.params_mut(), &grads)?;
        total += s.loss * s.tokens as f64;
        tokens += s.tokens;
        observer(&TrainEvent::Step {
            epoch,
            step: step + 1,
            loss: s.loss,
            omega: s.omega,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(total / tokens as f64)
}

fn check_finite(stats: &EvalStats, epoch: usize) -> Result<()> {
    if stats.loss.is_finite() && stats.omega.is_finite() {
        Ok(())
    } else {
        Err(Error::Training(format!(
            "validation diverged at epoch {epoch}: loss {}, omega {}",
            stats.loss, stats.omega
        )))
    }
}

/// Stage 1 trains on `L` with early stopping on validation loss; stage 2, if
/// configured, continues with `L + Ω` and keeps the epoch with the lowest
/// validation `L + Ω`. `model` ends holding the selected parameters.
pub fn train(
    model: &mut Model,
    vocab: &Vocabulary,
    train: &[EncodedPair],
    valid: &[EncodedPair],
    cfg: &TrainConfig,
    observer: &mut dyn FnMut(&TrainEvent),
) -> Result<TrainReport> {
    cfg.validate()?;
    if train.is_empty() || valid.is_empty() {
        return Err(Error::Training(
            "training and validation sets must be non-empty".into(),
        ));
    }
    let mut opt = Adam::new(model.params(), cfg.learning_rate, cfg.clip);
    let mut epochs = Vec::new();

    let mut best = (f64::INFINITY, 0, model.params().clone());
    let mut bad = 0;
    let mut stopped_early = false;
    for epoch in 1..=cfg.max_epochs {
        let train_loss = run_epoch(model, &mut opt, vocab, train, cfg, epoch, false, observer)?;
        let valid_stats = evaluate(model, vocab, valid, cfg)?;
        check_finite(&valid_stats, epoch)?;
        let improved = valid_stats.loss < best.0;
        if improved {
            best = (valid_stats.loss, epoch, model.params().clone());
            bad = 0;
        } else {
            bad += 1;
        }
        observer(&TrainEvent::Epoch {
            epoch,
            stage: Stage::Plain,
            train_loss,
            valid: valid_stats,
            improved,
        });
        epochs.push(EpochRecord {
            epoch,
            stage: Stage::Plain,
            train_loss,
            valid: valid_stats,
        });
        if bad >= cfg.patience.max(1) {
            stopped_early = epoch < cfg.max_epochs;
            break;
        }
    }
    let best_plain_epoch = best.1;
    *model.params_mut() = best.2;

    if cfg.coverage_epochs == 0 {
        return Ok(TrainReport {
            epochs,
            best_plain_epoch,
            best_coverage_epoch: None,
            stopped_early,
            plain_model: None,
        });
    }

    let plain_model = model.clone();
    let mut best: Option<(f64, usize, _)> = None;
    let first = epochs.last().map_or(0, |r| r.epoch) + 1;
    for epoch in first..first + cfg.coverage_epochs {
        let train_loss = run_epoch(model, &mut opt, vocab, train, cfg, epoch, true, observer)?;
        let valid_stats = evaluate(model, vocab, valid, cfg)?;
        check_finite(&valid_stats, epoch)?;
        let improved = best.as_ref().is_none_or(|b| valid_stats.objective() < b.0);
        if improved {
            best = Some((valid_stats.objective(), epoch, model.params().clone()));
        }
        observer(&TrainEvent::Epoch {
            epoch,
            stage: Stage::Coverage,
            train_loss,
            valid: valid_stats,
            improved,
        });
        epochs.push(EpochRecord {
            epoch,
            stage: Stage::Coverage,
            train_loss,
            valid: valid_stats,
        });
    }
    let (_, best_epoch, params) = best.expect("at least one coverage epoch");
    *model.params_mut() = params;
    Ok(TrainReport {
        epochs,
        best_plain_epoch,
        best_coverage_epoch: Some(best_epoch),
        stopped_early,
        plain_model: Some(plain_model),
    })
}
