mod common;

use common::*;
use structsum::autodiff::{grad_check, GradCheckConfig, Graph, Tensor};
use structsum::corpus::toy::toy_corpus;
use structsum::corpus::{EncodeLimits, BOS_ID};
use structsum::model::{
    attention_semantic, attention_structural, combine_two_way_word, decode_step, encode,
    initial_state, load_checkpoint, mix_copy_distribution, save_checkpoint, Architecture, Model,
};
use structsum::training::BatchVocabulary;

fn dataset() -> Dataset {
    encode_toy(&toy_corpus(30, 4), 40, 20, EncodeLimits::default())
}

fn plain_matvec(x: &[f64], w: &Tensor) -> Vec<f64> {
    (0..w.cols())
        .map(|j| x.iter().enumerate().map(|(i, xi)| xi * w.get(i, j)).sum())
        .collect()
}

fn plain_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `softmax_i(v · tanh(key_i W_key + h W_dec + b))` computed row by row.
fn plain_attention(
    keys: &Tensor,
    h: &[f64],
    w_key: &Tensor,
    w_dec: &Tensor,
    b: &[f64],
    v: &[f64],
) -> Vec<f64> {
    let q = plain_matvec(h, w_dec);
    let scores: Vec<f64> = (0..keys.rows())
        .map(|i| {
            let k = plain_matvec(keys.row(i), w_key);
            k.iter()
                .zip(&q)
                .zip(b)
                .zip(v)
                .map(|(((ki, qi), bi), vi)| vi * (ki + qi + bi).tanh())
                .sum()
        })
        .collect();
    plain_softmax(&scores)
}

#[test]
fn semantic_attention_matches_plain_oracle() {
    let ds = dataset();
    for arch in Architecture::ALL {
        let cfg = config(arch, &ds.vocab, 6, 3, 10);
        let model = Model::new(cfg.clone(), 8).unwrap();
        let p = |n: &str| model.params().by_name(n).unwrap().clone();
        for pair in ds.pairs.iter().take(5) {
            let bv = BatchVocabulary::new(&ds.vocab, [pair]);
            let mut g = Graph::new(model.params());
            let enc = encode(&mut g, &cfg, pair, &bv.copy_map(&ds.vocab, pair)).unwrap();
            let alpha = attention_semantic(&mut g, &enc, enc.h0).unwrap();
            let want = plain_attention(
                g.value(enc.memory),
                g.value(enc.h0).data(),
                &p("attn.w_enc"),
                &p("attn.w_dec"),
                p("attn.b").data(),
                p("attn.v").data(),
            );
            for (a, b) in g.value(alpha).data().iter().zip(&want) {
                assert!((a - b).abs() < 1e-12, "{arch}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn structural_attention_matches_plain_oracle_for_word_variant() {
    let ds = dataset();
    let cfg = config(Architecture::TwoWayWord, &ds.vocab, 6, 3, 10);
    let model = Model::new(cfg.clone(), 9).unwrap();
    let p = |n: &str| model.params().by_name(n).unwrap().clone();
    let pair = &ds.pairs[0];
    let bv = BatchVocabulary::new(&ds.vocab, [pair]);
    let mut g = Graph::new(model.params());
    let enc = encode(&mut g, &cfg, pair, &bv.copy_map(&ds.vocab, pair)).unwrap();
    let beta = attention_structural(&mut g, &cfg, &enc, enc.h0).unwrap();
    let want = plain_attention(
        g.value(enc.primitive.unwrap()),
        g.value(enc.h0).data(),
        &p("sattn.w_g"),
        &p("sattn.w_dec"),
        p("sattn.b").data(),
        p("sattn.u").data(),
    );
    for (a, b) in g.value(beta).data().iter().zip(&want) {
        assert!((a - b).abs() < 1e-12);
    }
    // Architectures without a structural channel refuse.
    let base_cfg = config(Architecture::Baseline, &ds.vocab, 6, 3, 10);
    let base = Model::new(base_cfg.clone(), 9).unwrap();
    let mut g = Graph::new(base.params());
    let enc = encode(&mut g, &base_cfg, pair, &bv.copy_map(&ds.vocab, pair)).unwrap();
    assert!(attention_structural(&mut g, &base_cfg, &enc, enc.h0).is_err());
}

#[test]
fn mixing_and_copy_match_plain_oracles() {
    let ds = dataset();
    let cfg = config(Architecture::TwoWayWord, &ds.vocab, 6, 3, 10);
    let model = Model::new(cfg.clone(), 10).unwrap();
    let eps = model.epsilon().unwrap();
    for pair in ds.pairs.iter().take(8) {
        let bv = BatchVocabulary::new(&ds.vocab, [pair]);
        let copy = bv.copy_map(&ds.vocab, pair);
        let mut g = Graph::new(model.params());
        let enc = encode(&mut g, &cfg, pair, &copy).unwrap();
        let state = initial_state(&mut g, &cfg, &enc);
        let out = decode_step(&mut g, &cfg, &enc, &state, BOS_ID).unwrap();
        let alpha = g.value(out.alpha).data().to_vec();
        let beta = g.value(out.beta.unwrap()).data().to_vec();
        let delta = combine_two_way_word(&alpha, &beta, eps).unwrap();
        for (a, b) in g.value(out.delta.unwrap()).data().iter().zip(&delta) {
            assert!((a - b).abs() < 1e-14);
        }
        // Recover P_vocab from the mixture, then rebuild the mixture.
        let p_gen = g.value(out.p_gen).item();
        let probs = g.value(out.probs).data().to_vec();
        let mut copied = vec![0.0; copy.ext_size];
        for (&w, a) in copy.src_ext.iter().zip(&delta) {
            copied[w] += (1.0 - p_gen) * a;
        }
        let p_vocab: Vec<f64> = (0..cfg.v_out)
            .map(|w| (probs[w] - copied[w]) / p_gen)
            .collect();
        assert!((p_vocab.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p_vocab.iter().all(|&p| p > -1e-15));
        let rebuilt = mix_copy_distribution(&p_vocab, &delta, &copy.src_ext, p_gen, copy.ext_size);
        for (a, b) in probs.iter().zip(&rebuilt) {
            assert!((a - b).abs() < 1e-14);
        }
        // Extended entries that are not source words get nothing.
        for (w, p) in probs.iter().enumerate().skip(cfg.v_out) {
            assert_eq!(*p > 0.0, copy.src_ext.contains(&w));
        }
    }
}

#[test]
fn output_bias_shift_leaves_distribution_unchanged() {
    let ds = dataset();
    for arch in Architecture::ALL {
        let cfg = config(arch, &ds.vocab, 6, 3, 10);
        let model = Model::new(cfg.clone(), 11).unwrap();
        let mut shifted = model.clone();
        for x in shifted
            .params_mut()
            .by_name_mut("out.b_y")
            .unwrap()
            .data_mut()
        {
            *x += 3.25;
        }
        let pair = &ds.pairs[3];
        let bv = BatchVocabulary::new(&ds.vocab, [pair]);
        let copy = bv.copy_map(&ds.vocab, pair);
        let run = |m: &Model| {
            let mut g = Graph::new(m.params());
            let enc = encode(&mut g, &cfg, pair, &copy).unwrap();
            let st = initial_state(&mut g, &cfg, &enc);
            let out = decode_step(&mut g, &cfg, &enc, &st, BOS_ID).unwrap();
            g.value(out.probs).clone()
        };
        let (a, b) = (run(&model), run(&shifted));
        assert_eq!(a.argmax(), b.argmax());
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn end_to_end_gradients_for_config_variants() {
    let ds = encode_toy(&toy_corpus(20, 6), 16, 12, tiny_limits());
    for arch in Architecture::ALL {
        for (copy, share, fixed) in [(false, true, None), (true, false, Some(0.3))] {
            let mut cfg = config(arch, &ds.vocab, 4, 3, 6);
            cfg.copy = copy;
            cfg.share_embeddings = share;
            cfg.fixed_epsilon = fixed;
            let model = Model::new(cfg.clone(), 12).unwrap();
            let batch = [&ds.pairs[0], &ds.pairs[1]];
            let report = grad_check(
                model.params(),
                |g| batch_objective(g, &cfg, &ds.vocab, &batch, 0.5),
                &GradCheckConfig {
                    max_entries: Some(4),
                    ..GradCheckConfig::default()
                },
            )
            .unwrap();
            assert!(
                report.passed(),
                "{arch} copy={copy} share={share}: {:?}",
                report.failures().collect::<Vec<_>>()
            );
            assert_eq!(model.params().id("switch.w").is_some(), copy);
            assert_eq!(model.params().id("embed.target").is_none(), share);
        }
    }
}

#[test]
fn checkpoint_file_round_trip_preserves_outputs() {
    let ds = dataset();
    let cfg = config(Architecture::TwoWayRelation, &ds.vocab, 6, 3, 10);
    let model = Model::new(cfg.clone(), 13).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&model, &ds.vocab.fingerprint(), &path).unwrap();
    let (loaded, fp) = load_checkpoint(&path).unwrap();
    assert_eq!(fp, ds.vocab.fingerprint());
    assert_eq!(loaded.config(), model.config());
    for ((n1, t1), (n2, t2)) in model.params().iter().zip(loaded.params().iter()) {
        assert_eq!(n1, n2);
        assert_eq!(t1, t2);
    }
    std::fs::write(&path, b"not a checkpoint").unwrap();
    assert!(load_checkpoint(&path).is_err());
}
