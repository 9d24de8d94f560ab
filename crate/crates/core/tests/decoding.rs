mod common;

use common::*;
use structsum::corpus::toy::toy_corpus;
use structsum::corpus::{encode_source, EncodeLimits, EOS_ID};
use structsum::decoding::{
    beam, beam_search, greedy_decode, summarize_all, BeamConfig, DecodeConfig, DecodeMode,
    ModelStepper, StepModel,
};
use structsum::model::{Architecture, Model};
use structsum::Execution;

fn dataset() -> Dataset {
    encode_toy(&toy_corpus(40, 3), 60, 30, EncodeLimits::default())
}

#[test]
fn beam_of_one_without_reward_is_greedy_on_real_models() {
    let ds = dataset();
    let mut cases = 0;
    for (k, arch) in Architecture::ALL.iter().enumerate() {
        let model = Model::new(config(*arch, &ds.vocab, 6, 3, 10), k as u64).unwrap();
        for pair in ds.pairs.iter().take(20) {
            let g = greedy_decode(&model, &ds.vocab, pair, 12).unwrap();
            let cfg = DecodeConfig {
                mode: DecodeMode::Beam,
                beam_size: 1,
                eta: 0.0,
                max_len: 12,
            };
            let b = beam_search(&model, &ds.vocab, pair, &cfg).unwrap();
            assert_eq!(g, b, "{arch}");
            cases += 1;
        }
    }
    assert_eq!(cases, 100);
}

#[test]
fn beam_score_matches_replayed_probabilities() {
    let ds = dataset();
    let model = Model::new(config(Architecture::TwoWayRelation, &ds.vocab, 6, 3, 10), 3).unwrap();
    for pair in ds.pairs.iter().take(6) {
        let mut m = ModelStepper::new(&model, &ds.vocab, pair).unwrap();
        let source = m.source_ids().to_vec();
        let cfg = BeamConfig {
            beam_size: 4,
            eta: 13.5,
            max_len: 6,
        };
        let h = beam(&mut m, &source, &cfg).unwrap();
        let mut state = m.start().unwrap();
        let mut prev = structsum::corpus::BOS_ID;
        let mut lp = 0.0;
        for &w in &h.tokens {
            let (p, next) = m.step(&state, prev).unwrap();
            lp += p[w].ln();
            state = next;
            prev = w;
        }
        assert!((lp - h.log_prob).abs() < 1e-12);
        let overlap = structsum::decoding::bigram_overlap(&h.tokens, &source);
        assert_eq!(overlap, h.overlap);
        let want = lp + 13.5 * overlap as f64 / source.len() as f64;
        assert!((h.score(13.5, source.len()) - want).abs() < 1e-12);
    }
}

#[test]
fn random_scripted_full_beam_is_exhaustive() {
    let source = [4usize, 5, 4, 6];
    for case in 0..40 {
        for eta in [0.0, 1.0, 6.0] {
            let mut m = Scripted {
                vocab: 7,
                seed: case,
                eos_mass: 0.15,
            };
            let cfg = BeamConfig {
                beam_size: 200,
                eta,
                max_len: 3,
            };
            let h = beam(&mut m, &source, &cfg).unwrap();
            let (want, score) = exhaustive(&mut m, &source, eta, 3);
            assert_eq!(h.tokens, want);
            assert_eq!(h.score(eta, source.len()), score);
        }
    }
}

#[test]
fn reward_can_only_raise_overlap() {
    // With a reward the chosen hypothesis never shares fewer bigrams than
    // the one chosen without it, among full-width searches.
    let source = [4usize, 5, 6, 7];
    for case in 0..40 {
        let mut m = Scripted {
            vocab: 8,
            seed: 500 + case,
            eos_mass: 0.1,
        };
        let run = |m: &mut Scripted, eta| {
            let cfg = BeamConfig {
                beam_size: 500,
                eta,
                max_len: 3,
            };
            beam(m, &source, &cfg).unwrap()
        };
        let plain = run(&mut m, 0.0);
        let rewarded = run(&mut m, 10.0);
        assert!(rewarded.overlap >= plain.overlap);
    }
}

#[test]
fn finished_hypotheses_end_with_eos() {
    let mut m = Scripted {
        vocab: 9,
        seed: 3,
        eos_mass: 0.6,
    };
    let h = beam(
        &mut m,
        &[4, 5],
        &BeamConfig {
            beam_size: 3,
            eta: 0.0,
            max_len: 10,
        },
    )
    .unwrap();
    assert!(h.finished);
    assert_eq!(h.tokens.last(), Some(&EOS_ID));
    assert_eq!(h.words().len() + 1, h.tokens.len());
}

#[test]
fn invalid_beam_settings_are_errors() {
    let mut m = Scripted {
        vocab: 6,
        seed: 0,
        eos_mass: 0.1,
    };
    let bad = |k, eta| BeamConfig {
        beam_size: k,
        eta,
        max_len: 3,
    };
    assert!(beam(&mut m, &[4], &bad(0, 1.0)).is_err());
    assert!(beam(&mut m, &[4], &bad(2, -1.0)).is_err());
    assert!(beam(&mut m, &[4], &bad(2, f64::NAN)).is_err());
}

#[test]
fn parallel_decoding_keeps_order() {
    let ds = dataset();
    let model = Model::new(config(Architecture::TwoWayWord, &ds.vocab, 6, 3, 10), 5).unwrap();
    let cfg = DecodeConfig {
        mode: DecodeMode::Beam,
        beam_size: 3,
        max_len: 8,
        ..DecodeConfig::default()
    };
    let seq = summarize_all(&model, &ds.vocab, &ds.pairs, &cfg, Execution::Sequential).unwrap();
    let par = summarize_all(&model, &ds.vocab, &ds.pairs, &cfg, Execution::Parallel).unwrap();
    assert_eq!(seq, par);
}

#[test]
fn empty_source_gives_empty_summary() {
    let ds = dataset();
    let model = Model::new(config(Architecture::Baseline, &ds.vocab, 6, 3, 10), 6).unwrap();
    let empty = encode_source(&[], None, &ds.vocab, EncodeLimits::default());
    let s = greedy_decode(&model, &ds.vocab, &empty, 10).unwrap();
    assert!(s.ids.is_empty() && s.tokens.is_empty());
}

#[test]
fn out_of_vocabulary_words_render_with_source_spelling() {
    let ds = dataset();
    let model = Model::new(config(Architecture::Baseline, &ds.vocab, 6, 3, 10), 7).unwrap();
    let src: Vec<String> = ["Zyzzyva", "police", "arrest"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let pair = encode_source(&src, None, &ds.vocab, EncodeLimits::default());
    let m = ModelStepper::new(&model, &ds.vocab, &pair).unwrap();
    let ext = m.source_ids()[0];
    assert!(ext >= ds.vocab.v_out());
    assert_eq!(m.render(&[ext]), vec!["Zyzzyva".to_string()]);
}
