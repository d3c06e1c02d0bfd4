#![allow(dead_code)]
pub mod oracles;
pub mod reference_tables;

use chrono::NaiveDate;
use pacte::corpus::{Corpus, Document, Side, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn doc(id: &str, side: Side, tokens: &[&str]) -> Document {
    Document {
        id: id.into(),
        source: side.as_str().into(),
        side,
        date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
        raw_text: String::new(),
        tokens: tokens.iter().map(|t| t.to_string()).collect(),
    }
}

pub const FILLER: usize = 40;

/// Side is decided by a single marker token hidden among random filler.
pub fn marker_corpus(n: usize, len: usize, seed: u64, prefix: &str) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let docs = (0..n)
        .map(|i| {
            let side = if i % 2 == 0 {
                Side::Liberal
            } else {
                Side::Conservative
            };
            let mut tokens: Vec<String> = (0..len)
                .map(|_| format!("f{:02}", rng.random_range(0..FILLER)))
                .collect();
            let at = rng.random_range(0..len);
            tokens[at] = match side {
                Side::Liberal => "marker_l".into(),
                Side::Conservative => "marker_r".into(),
            };
            Document {
                id: format!("{prefix}{i:04}"),
                source: side.as_str().into(),
                side,
                date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
                raw_text: String::new(),
                tokens,
            }
        })
        .collect();
    Corpus::new(docs).unwrap()
}

pub fn marker_vocabulary() -> Vocabulary {
    let mut words: Vec<String> = (0..FILLER).map(|i| format!("f{i:02}")).collect();
    words.push("marker_l".into());
    words.push("marker_r".into());
    words.sort();
    Vocabulary::from_tokens(words)
}

/// The planted-topic corpus used for recovery checks.
pub fn recovery_spec(seed: u64) -> pacte::topics::SyntheticSpec {
    pacte::topics::SyntheticSpec {
        k: 3,
        v: 30,
        d: 300,
        doc_len: 50,
        alpha: 0.1,
        beta: 1.0,
        seed,
    }
}

/// Greedy one-to-one matching of planted to learned topics by top-`m`
/// keyword overlap; returns each planted topic's overlap fraction.
pub fn matched_overlap(
    planted: &pacte::topics::SyntheticCorpus,
    model: &pacte::topics::LdaModel,
    vocab: &Vocabulary,
    m: usize,
) -> Vec<f64> {
    let k = planted.true_phi.nrows();
    let truth: Vec<Vec<String>> = (0..k)
        .map(|t| {
            planted
                .true_top_words(t, m)
                .into_iter()
                .map(|j| planted.words[j].clone())
                .collect()
        })
        .collect();
    let learned: Vec<Vec<String>> = (0..model.k)
        .map(|t| {
            pacte::topics::top_keywords(model, vocab, t, m)
                .unwrap()
                .tokens()
                .map(String::from)
                .collect()
        })
        .collect();
    let mut pairs = Vec::new();
    for (a, tw) in truth.iter().enumerate() {
        for (b, lw) in learned.iter().enumerate() {
            pairs.push((tw.iter().filter(|w| lw.contains(w)).count(), a, b));
        }
    }
    pairs.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used = vec![false; model.k];
    let mut out = vec![0.0; k];
    let mut done = vec![false; k];
    for (o, a, b) in pairs {
        if !done[a] && !used[b] {
            done[a] = true;
            used[b] = true;
            out[a] = o as f64 / m as f64;
        }
    }
    out
}
