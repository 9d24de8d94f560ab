mod common;

use common::*;
use structsum::corpus::toy::toy_corpus;
use structsum::corpus::{
    extract_structural_labels, parse_conllu, EncodeLimits, PosColumn, StructConfig, Vocabulary,
    UNK_ID,
};

fn fixture() -> String {
    std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/data/alaska.conllu"
    ))
    .unwrap()
}

#[test]
fn fixture_labels_for_every_token() {
    let s = &parse_conllu(&fixture(), PosColumn::Xpos).unwrap()[0];
    assert_eq!(s.len(), 15);
    let l = extract_structural_labels(s, &StructConfig::default());
    let depth: Vec<usize> = l.tokens.iter().map(|t| t.depth).collect();
    assert_eq!(depth, [2, 1, 3, 3, 3, 2, 4, 3, 0, 2, 2, 1, 1, 3, 2]);
    let degree: Vec<usize> = l.tokens.iter().map(|t| t.out_degree).collect();
    assert_eq!(degree, [0, 2, 0, 0, 0, 4, 0, 1, 3, 0, 0, 2, 1, 0, 1]);
    let buckets: Vec<usize> = l.tokens.iter().map(|t| t.rel_pos_bucket).collect();
    assert_eq!(buckets, [1, 2, 2, 3, 4, 4, 5, 6, 6, 7, 8, 8, 9, 10, 10]);
    // UPOS column on request.
    let u = &parse_conllu(&fixture(), PosColumn::Upos).unwrap()[0];
    assert_eq!(u.pos[8], "VERB");
}

#[test]
fn conllu_round_trip() {
    let s = parse_conllu(&fixture(), PosColumn::Xpos).unwrap();
    let again = parse_conllu(&s[0].to_conllu(), PosColumn::Xpos).unwrap();
    assert_eq!(s, again);
    for p in toy_corpus(30, 2) {
        let back = parse_conllu(&p.parse.to_conllu(), PosColumn::Xpos).unwrap();
        assert_eq!(back, vec![p.parse]);
    }
}

#[test]
fn vocabulary_save_load_keeps_fingerprint() {
    let ds = encode_toy(&toy_corpus(50, 1), 40, 25, EncodeLimits::default());
    let dir = tempfile::tempdir().unwrap();
    ds.vocab.save(dir.path()).unwrap();
    let back = Vocabulary::load(dir.path()).unwrap();
    assert_eq!(back, ds.vocab);
    assert_eq!(back.fingerprint(), ds.vocab.fingerprint());
    assert_eq!((back.v_in(), back.v_out()), (40, 25));
}

#[test]
fn truncation_drops_parents_outside_the_window() {
    let toy = toy_corpus(20, 3);
    let limits = EncodeLimits {
        max_src_len: 4,
        max_tgt_len: 2,
    };
    let ds = encode_toy(&toy, 60, 30, limits);
    for (p, e) in toy.iter().zip(&ds.pairs) {
        assert_eq!(e.src_len(), 4);
        assert_eq!(e.tgt_len(), 2);
        let parents = e.parent_index.as_ref().unwrap();
        for (i, par) in parents.iter().enumerate() {
            match p.parse.parent(i) {
                Some(q) if q < 4 => assert_eq!(*par, Some(q)),
                _ => assert_eq!(*par, None),
            }
        }
    }
}

#[test]
fn rare_words_map_to_unknown_but_keep_surface() {
    let ds = encode_toy(&toy_corpus(50, 4), 12, 8, EncodeLimits::default());
    let pair = ds
        .pairs
        .iter()
        .find(|p| p.src_ids.contains(&UNK_ID))
        .unwrap();
    let i = pair.src_ids.iter().position(|&x| x == UNK_ID).unwrap();
    assert!(ds.vocab.words().get(&pair.src_surface[i]).is_none());
    assert_eq!(pair.decode_source(&ds.vocab)[i], "<unk>");
}
