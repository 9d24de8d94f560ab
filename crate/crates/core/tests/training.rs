mod common;

use common::*;
use structsum::corpus::toy::{copy_task, toy_corpus};
use structsum::corpus::{EncodeLimits, EncodedPair};
use structsum::model::{Architecture, Model};
use structsum::training::{
    evaluate, step_gradients, step_loss, train, Stage, TrainConfig, TrainEvent,
};
use structsum::Execution;

fn quick_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-2,
        batch_size: 8,
        max_epochs: 3,
        coverage_epochs: 0,
        ..TrainConfig::default()
    }
}

#[test]
fn shared_batch_vocabulary_matches_per_instance_vocabularies() {
    // Copy-task markers are unique per pair, so every pair adds its own
    // extended entry to a shared batch vocabulary.
    let ds = encode_toy(&copy_task(12, 3, "zq"), 20, 20, EncodeLimits::default());
    let refs: Vec<&EncodedPair> = ds.pairs.iter().collect();
    for arch in [Architecture::Baseline, Architecture::TwoWayRelation] {
        let model = Model::new(config(arch, &ds.vocab, 6, 3, 8), 1).unwrap();
        let joint = step_loss(&model, &ds.vocab, &refs, 1.0, Execution::Sequential).unwrap();
        let mut nll = 0.0;
        let mut omega = 0.0;
        for p in &refs {
            let s = step_loss(&model, &ds.vocab, &[*p], 1.0, Execution::Sequential).unwrap();
            nll += s.loss * s.tokens as f64;
            omega += s.omega;
        }
        assert!((joint.loss - nll / joint.tokens as f64).abs() < 1e-9);
        assert!((joint.omega - omega).abs() < 1e-9);
    }
}

#[test]
fn sequential_and_parallel_gradients_are_identical() {
    let ds = encode_toy(&toy_corpus(24, 2), 60, 40, EncodeLimits::default());
    let refs: Vec<&EncodedPair> = ds.pairs.iter().collect();
    let model = Model::new(config(Architecture::TwoWayWord, &ds.vocab, 8, 3, 12), 2).unwrap();
    let (ls, gs) =
        step_gradients(&model, &ds.vocab, &refs, 1.0, true, Execution::Sequential).unwrap();
    let (lp, gp) =
        step_gradients(&model, &ds.vocab, &refs, 1.0, true, Execution::Parallel).unwrap();
    assert_eq!(ls, lp);
    assert_eq!(gs, gp);
}

#[test]
fn coverage_gradient_only_when_requested() {
    let ds = encode_toy(&toy_corpus(6, 3), 60, 40, EncodeLimits::default());
    let refs: Vec<&EncodedPair> = ds.pairs.iter().collect();
    let model = Model::new(config(Architecture::Baseline, &ds.vocab, 6, 3, 8), 3).unwrap();
    let (_, plain) =
        step_gradients(&model, &ds.vocab, &refs, 1.0, false, Execution::Sequential).unwrap();
    let (_, zero_lambda) =
        step_gradients(&model, &ds.vocab, &refs, 0.0, true, Execution::Sequential).unwrap();
    let (_, with_cov) =
        step_gradients(&model, &ds.vocab, &refs, 1.0, true, Execution::Sequential).unwrap();
    assert_eq!(plain, zero_lambda);
    assert_ne!(plain, with_cov);
}

#[test]
fn training_is_deterministic() {
    let ds = encode_toy(&toy_corpus(20, 5), 60, 40, EncodeLimits::default());
    let cfg = config(Architecture::StructHidden, &ds.vocab, 6, 3, 8);
    let run = |exec| {
        let mut model = Model::new(cfg.clone(), 4).unwrap();
        let tc = TrainConfig {
            execution: exec,
            coverage_epochs: 1,
            ..quick_config()
        };
        let mut log = Vec::new();
        train(
            &mut model,
            &ds.vocab,
            &ds.pairs,
            &ds.pairs[..5],
            &tc,
            &mut |e| {
                if let TrainEvent::Step { loss, omega, .. } = e {
                    log.push((*loss, *omega));
                }
            },
        )
        .unwrap();
        (model, log)
    };
    let (a, la) = run(Execution::Sequential);
    let (b, lb) = run(Execution::Parallel);
    assert_eq!(la, lb);
    for ((_, x), (_, y)) in a.params().iter().zip(b.params().iter()) {
        assert_eq!(x, y);
    }
}

#[test]
fn early_stopping_restores_best_epoch() {
    // Ten training pairs and a disjoint validation set: validation loss
    // turns upward once the model memorises the training pairs.
    let toy = toy_corpus(40, 6);
    let ds = encode_toy(&toy, 200, 200, EncodeLimits::default());
    let (train_set, valid) = ds.pairs.split_at(10);
    let mut model = Model::new(config(Architecture::Baseline, &ds.vocab, 8, 3, 16), 5).unwrap();
    let tc = TrainConfig {
        learning_rate: 3e-2,
        batch_size: 5,
        max_epochs: 60,
        coverage_epochs: 0,
        patience: 2,
        ..TrainConfig::default()
    };
    let report = train(&mut model, &ds.vocab, train_set, valid, &tc, &mut |_| {}).unwrap();
    assert!(report.stopped_early, "{:?}", report.epochs);
    let best = report
        .epochs
        .iter()
        .min_by(|a, b| a.valid.loss.partial_cmp(&b.valid.loss).unwrap())
        .unwrap();
    assert_eq!(best.epoch, report.best_plain_epoch);
    let last = report.epochs.last().unwrap().epoch;
    assert_eq!(last, report.best_plain_epoch + tc.patience);
    let now = evaluate(&model, &ds.vocab, valid, &tc).unwrap();
    assert!((now.loss - best.valid.loss).abs() < 1e-12);
}

#[test]
fn coverage_stage_selects_by_loss_plus_omega() {
    let ds = encode_toy(&toy_corpus(30, 7), 200, 200, EncodeLimits::default());
    let (train_set, valid) = ds.pairs.split_at(24);
    let mut model = Model::new(config(Architecture::TwoWayWord, &ds.vocab, 8, 3, 12), 6).unwrap();
    let tc = TrainConfig {
        max_epochs: 2,
        coverage_epochs: 3,
        ..quick_config()
    };
    let report = train(&mut model, &ds.vocab, train_set, valid, &tc, &mut |_| {}).unwrap();
    let cov: Vec<_> = report
        .epochs
        .iter()
        .filter(|r| r.stage == Stage::Coverage)
        .collect();
    assert_eq!(cov.len(), 3);
    let best = cov
        .iter()
        .min_by(|a, b| {
            a.valid
                .objective()
                .partial_cmp(&b.valid.objective())
                .unwrap()
        })
        .unwrap();
    assert_eq!(Some(best.epoch), report.best_coverage_epoch);
    assert!(report.plain_model.is_some());
    let now = evaluate(&model, &ds.vocab, valid, &tc).unwrap();
    assert!((now.objective() - best.valid.objective()).abs() < 1e-12);
}

#[test]
fn step_log_lines_are_tab_separated() {
    let e = TrainEvent::Step {
        epoch: 2,
        step: 7,
        loss: 1.5,
        omega: 0.25,
        seconds: 0.125,
    };
    assert_eq!(e.log_line().unwrap(), "2\t7\t1.500000\t0.250000\t0.125");
}

#[test]
fn invalid_configurations_are_rejected() {
    let ds = encode_toy(&toy_corpus(4, 8), 60, 40, EncodeLimits::default());
    let mut model = Model::new(config(Architecture::Baseline, &ds.vocab, 4, 3, 4), 7).unwrap();
    let bad = TrainConfig {
        batch_size: 0,
        ..TrainConfig::default()
    };
    assert!(train(
        &mut model,
        &ds.vocab,
        &ds.pairs,
        &ds.pairs,
        &bad,
        &mut |_| {}
    )
    .is_err());
    assert!(train(
        &mut model,
        &ds.vocab,
        &ds.pairs,
        &[],
        &TrainConfig::default(),
        &mut |_| {}
    )
    .is_err());
}
