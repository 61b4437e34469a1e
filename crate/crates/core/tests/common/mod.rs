//! Shared fixtures and brute-force oracles for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use aoa_simplify::constrained::{BigramTable, TokenConstraint, TokenModel};
use aoa_simplify::dataset::DatasetExample;
use aoa_simplify::lexicon::{load_lexicon, AoaLexicon, LexiconFormat};
use aoa_simplify::rewriter::MockBackend;
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn sample_lexicon() -> AoaLexicon {
    load_lexicon(fixture("aoa_sample.csv"), LexiconFormat::Csv).expect("fixture lexicon")
}

pub mod success_example {
    pub const SOURCE: &str = "この用語は、アルバム上の特定の曲を数字で表すためによく使用されます。";
    pub const INITIAL: &str = "This term is often used to denote certain songs on the album by numbers.";
    pub const MUSS: &str = "This term is often used to show how many songs are on the album.";
    pub const CONSTRAINED: &str = "The term is often used to describe a specific song on an album in numbers.";
    pub const APE: &str = "The term is often used to describe certain songs on the album by numbers.";
    pub const DIRECT: &str = "This word is often used to represent a specific song on an album with numbers.";
    pub const MULTI: &str = "The term is often used to describe certain songs on an album by numbers.";
    pub const ITER1: &str = "The term is often used to represent a particular song on a given album by numbers.";
    pub const ITER2: &str = "The term is often used to describe certain songs on a given album by numbers.";
    pub const REFERENCE: &str = "The term is often used to mean a specific song on the album by number.";

    /// (sentence, highest word, AoA) as printed.
    pub const ROWS: [(&str, &str, f64); 9] = [
        (INITIAL, "denote", 11.24),
        (MUSS, "term", 8.28),
        (CONSTRAINED, "specific", 9.28),
        (APE, "term", 8.28),
        (DIRECT, "represent", 10.33),
        (MULTI, "term", 8.28),
        (ITER1, "represent", 10.33),
        (ITER2, "term", 8.28),
        (REFERENCE, "specific", 9.28),
    ];
}

pub mod cap_example {
    pub const SOURCE: &str = "しかし、その起源は、453年後の1951年に外国人によって最初に調査されました。";
    pub const INITIAL: &str = "But its origin was first investigated by foreigners in 1951, 453 years later.";
    pub const MUSS: &str = "But foreigners first looked at its origin in 1951, 453 years later.";
    pub const CONSTRAINED: &str =
        "However, its roots were first investigated by a foreign citizen in 1951, 453 years later.";
    pub const APE: &str = "However, its origin was first investigated by foreign people in 1951, 453 years later.";
    pub const DIRECT: &str = "But, its origin was first investigated by foreigners in 1951, 453 years later.";
    pub const MULTI: &str = "Its roots, however, were first explored by outsiders in 1951, 453 years later.";
    pub const ITER: [&str; 5] = [
        "But its origin was first explored by foreigners in 1951 after 453 years.",
        "However, its origins were first investigated by foreign people in 1951 after 453 years.",
        "However, its origins were first explored in 1951 by foreigners 453 years later.",
        "But its origins were first examined in 1951 by foreign people 453 years later.",
        "Its origins, however, were first looked at in 1951 by foreign researchers, after 453 years.",
    ];
    pub const REFERENCE: &str =
        "Its source, however, was first explored by non-native people in 1951, 453 years later.";

    pub const ROWS: [(&str, &str, f64); 12] = [
        (INITIAL, "foreigners", 10.39),
        (MUSS, "foreigners", 10.39),
        (CONSTRAINED, "investigated", 9.0),
        (APE, "investigated", 9.0),
        (DIRECT, "foreigners", 10.39),
        (MULTI, "outsiders", 9.75),
        (ITER[0], "foreigners", 10.39),
        (ITER[1], "origins", 10.25),
        (ITER[2], "foreigners", 10.39),
        (ITER[3], "origins", 10.25),
        (ITER[4], "origins", 10.25),
        (REFERENCE, "native", 9.20),
    ];
}

/// Mock that replays the successful worked example.
pub fn success_mock() -> MockBackend {
    MockBackend::identity().with_sentences([
        (success_example::INITIAL, success_example::ITER1),
        (success_example::ITER1, success_example::ITER2),
    ])
}

/// Mock that replays the capped worked example, one row per call.
pub fn cap_mock() -> MockBackend {
    let mut pairs = vec![(cap_example::INITIAL, cap_example::ITER[0])];
    pairs.extend(cap_example::ITER.windows(2).map(|w| (w[0], w[1])));
    MockBackend::identity().with_sentences(pairs)
}

pub fn worked_examples(lex: &AoaLexicon) -> Vec<DatasetExample> {
    vec![
        DatasetExample::new(
            0,
            success_example::REFERENCE,
            success_example::SOURCE,
            success_example::INITIAL,
            lex,
        ),
        DatasetExample::new(
            1,
            cap_example::REFERENCE,
            cap_example::SOURCE,
            cap_example::INITIAL,
            lex,
        ),
    ]
}

// ---------------------------------------------------------------------------
// Synthetic controller corpus

pub struct SyntheticSet {
    pub lexicon: AoaLexicon,
    pub sentences: Vec<String>,
    pub substitutions: HashMap<String, String>,
    /// Hard words planted per sentence.
    pub hard_counts: Vec<usize>,
}

fn pseudo_word(i: usize, prefix: &str) -> String {
    const SYL: [&str; 8] = ["ba", "ko", "ri", "mu", "te", "lo", "sa", "ne"];
    let mut w = prefix.to_owned();
    let mut n = i + 8;
    while n > 0 {
        w.push_str(SYL[n % 8]);
        n /= 8;
    }
    w
}

/// `n` sentences, each with 4..12 easy words and one hard word (every
/// twentieth sentence gets two). Every hard word maps to an easy one.
pub fn synthetic_set(n: usize, seed: u64) -> SyntheticSet {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let easy: Vec<String> = (0..40).map(|i| pseudo_word(i, "e")).collect();
    let hard: Vec<String> = (0..30).map(|i| pseudo_word(i, "h")).collect();
    let mut pairs: Vec<(String, f64)> = Vec::new();
    for w in &easy {
        pairs.push((w.clone(), rng.gen_range(2.0..9.9)));
    }
    for w in &hard {
        pairs.push((w.clone(), rng.gen_range(10.0..16.0)));
    }
    let substitutions: HashMap<String, String> = hard
        .iter()
        .map(|h| (h.clone(), easy[rng.gen_range(0..easy.len())].clone()))
        .collect();
    let mut sentences = Vec::with_capacity(n);
    let mut hard_counts = Vec::with_capacity(n);
    for i in 0..n {
        let len = rng.gen_range(4..12);
        let mut words: Vec<String> = (0..len).map(|_| easy[rng.gen_range(0..easy.len())].clone()).collect();
        let k = if i % 20 == 19 { 2 } else { 1 };
        for _ in 0..k {
            let pos = rng.gen_range(0..=words.len());
            words.insert(pos, hard[rng.gen_range(0..hard.len())].clone());
        }
        let mut s = words.join(" ");
        s.push('.');
        sentences.push(s);
        hard_counts.push(k);
    }
    SyntheticSet {
        lexicon: AoaLexicon::from_pairs("synthetic", pairs),
        sentences,
        substitutions,
        hard_counts,
    }
}

// ---------------------------------------------------------------------------
// Random corpora for metric oracles. Words are lowercase letters only, joined
// by single spaces, so whitespace splitting is the reference tokenizer.

/// Words with hand-checked syllable counts.
pub const SYLLABLE_VOCAB: [(&str, u64); 18] = [
    ("cat", 1),
    ("the", 1),
    ("table", 2),
    ("apple", 2),
    ("banana", 3),
    ("make", 1),
    ("often", 2),
    ("songs", 1),
    ("album", 2),
    ("numbers", 2),
    ("elephant", 3),
    ("beautiful", 3),
    ("simple", 2),
    ("water", 2),
    ("family", 3),
    ("day", 1),
    ("computer", 3),
    ("a", 1),
];

pub const FAMILIAR_SUBSET: [&str; 6] = ["cat", "the", "make", "day", "a", "water"];

pub fn random_sentence<R: Rng>(rng: &mut R, vocab_size: usize, max_len: usize) -> String {
    let len = rng.gen_range(1..=max_len);
    (0..len)
        .map(|_| SYLLABLE_VOCAB[rng.gen_range(0..vocab_size.min(SYLLABLE_VOCAB.len()))].0)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Random (source, hypothesis, reference) corpus with overlapping words.
pub fn random_corpus<R: Rng>(rng: &mut R, max_sents: usize, max_len: usize) -> Vec<(String, String, String)> {
    let n = rng.gen_range(1..=max_sents);
    (0..n)
        .map(|_| {
            let v = rng.gen_range(3..=8);
            let src = random_sentence(rng, v, max_len);
            let hyp = if rng.gen_bool(0.15) {
                src.clone()
            } else {
                random_sentence(rng, v, max_len)
            };
            let rf = if rng.gen_bool(0.1) {
                hyp.clone()
            } else {
                random_sentence(rng, v, max_len)
            };
            (src, hyp, rf)
        })
        .collect()
}

fn words(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

/// Every n-gram occurrence, as owned lists, in order.
fn ngrams<'a>(toks: &[&'a str], n: usize) -> Vec<Vec<&'a str>> {
    if toks.len() < n {
        return Vec::new();
    }
    (0..=toks.len() - n).map(|i| toks[i..i + n].to_vec()).collect()
}

fn occurrences(list: &[Vec<&str>], g: &[&str]) -> u64 {
    list.iter().filter(|x| x.as_slice() == g).count() as u64
}

fn unique<'a>(list: &[Vec<&'a str>]) -> Vec<Vec<&'a str>> {
    let mut out: Vec<Vec<&str>> = Vec::new();
    for g in list {
        if !out.contains(g) {
            out.push(g.clone());
        }
    }
    out
}

/// Textbook corpus BLEU-4: clipped counts summed over the corpus, geometric
/// mean over the orders that have candidate n-grams, brevity penalty.
pub fn oracle_bleu(pairs: &[(String, String)]) -> f64 {
    let mut matches = [0u64; 4];
    let mut totals = [0u64; 4];
    let (mut c, mut r) = (0u64, 0u64);
    for (h, rf) in pairs {
        let ht = words(h);
        let rt = words(rf);
        c += ht.len() as u64;
        r += rt.len() as u64;
        for n in 1..=4 {
            let hg = ngrams(&ht, n);
            let rg = ngrams(&rt, n);
            totals[n - 1] += hg.len() as u64;
            for g in unique(&hg) {
                matches[n - 1] += occurrences(&hg, &g).min(occurrences(&rg, &g));
            }
        }
    }
    if c == 0 {
        return 0.0;
    }
    let mut logs = Vec::new();
    for n in 0..4 {
        if totals[n] == 0 {
            continue;
        }
        if matches[n] == 0 {
            return 0.0;
        }
        logs.push((matches[n] as f64 / totals[n] as f64).ln());
    }
    if logs.is_empty() {
        return 0.0;
    }
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    100.0 * bp * (logs.iter().sum::<f64>() / logs.len() as f64).exp()
}

#[derive(Default, Clone, Copy)]
struct Op {
    correct: u64,
    sys: u64,
    reference: u64,
}

fn div(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn f1(o: Op) -> f64 {
    let p = div(o.correct, o.sys);
    let r = div(o.correct, o.reference);
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Corpus SARI with counts pooled over sentences. Additions compare n-gram
/// types; keeps and deletions compare occurrence counts with source and
/// system counts scaled by the number of references.
pub fn oracle_sari(triples: &[(String, String, Vec<String>)]) -> f64 {
    let mut add = [Op::default(); 4];
    let mut keep = [Op::default(); 4];
    let mut del = [Op::default(); 4];
    for (s, y, refs) in triples {
        let st = words(s);
        let yt = words(y);
        let rts: Vec<Vec<&str>> = refs.iter().map(|r| words(r)).collect();
        let k = rts.len() as u64;
        for n in 1..=4 {
            let sg = ngrams(&st, n);
            let yg = ngrams(&yt, n);
            let rg: Vec<Vec<Vec<&str>>> = rts.iter().map(|r| ngrams(r, n)).collect();
            let in_refs = |g: &[&str]| rg.iter().map(|l| occurrences(l, g)).sum::<u64>();

            let mut all_ref_types: Vec<Vec<&str>> = Vec::new();
            for l in &rg {
                for g in unique(l) {
                    if !all_ref_types.contains(&g) {
                        all_ref_types.push(g);
                    }
                }
            }
            for g in unique(&yg) {
                if occurrences(&sg, &g) == 0 {
                    add[n - 1].sys += 1;
                    if in_refs(&g) > 0 {
                        add[n - 1].correct += 1;
                    }
                }
            }
            add[n - 1].reference += all_ref_types.iter().filter(|g| occurrences(&sg, g) == 0).count() as u64;

            for g in unique(&sg) {
                let cs = occurrences(&sg, &g) * k;
                let cy = occurrences(&yg, &g) * k;
                let cr = in_refs(&g);
                let kept_sys = cs.min(cy);
                let kept_ref = cs.min(cr);
                keep[n - 1].sys += kept_sys;
                keep[n - 1].reference += kept_ref;
                keep[n - 1].correct += kept_sys.min(kept_ref);
                let del_sys = cs.saturating_sub(cy);
                let del_ref = cs.saturating_sub(cr);
                del[n - 1].sys += del_sys;
                del[n - 1].reference += del_ref;
                del[n - 1].correct += del_sys.min(del_ref);
            }
        }
    }
    let add_score: f64 = add.iter().map(|o| f1(*o)).sum::<f64>() / 4.0;
    let keep_score: f64 = keep.iter().map(|o| f1(*o)).sum::<f64>() / 4.0;
    let del_score: f64 = del.iter().map(|o| div(o.correct, o.sys)).sum::<f64>() / 4.0;
    100.0 * (add_score + keep_score + del_score) / 3.0
}

fn syllables_of(w: &str) -> u64 {
    SYLLABLE_VOCAB
        .iter()
        .find(|(x, _)| *x == w)
        .map(|(_, s)| *s)
        .unwrap_or_else(|| panic!("{w} is not in the syllable table"))
}

/// FKGL from the hand-labelled syllable table, one sentence per text.
pub fn oracle_fkgl(texts: &[String]) -> f64 {
    let sentences = texts.len() as f64;
    let ws: Vec<&str> = texts.iter().flat_map(|t| words(t)).collect();
    let syl: u64 = ws.iter().map(|w| syllables_of(w)).sum();
    0.39 * (ws.len() as f64 / sentences) + 11.8 * (syl as f64 / ws.len() as f64) - 15.59
}

/// Dale-Chall against [`FAMILIAR_SUBSET`].
pub fn oracle_dale_chall(texts: &[String]) -> f64 {
    let sentences = texts.len() as f64;
    let ws: Vec<&str> = texts.iter().flat_map(|t| words(t)).collect();
    let difficult = ws.iter().filter(|w| !FAMILIAR_SUBSET.contains(w)).count() as f64;
    let pdw = 100.0 * difficult / ws.len() as f64;
    let score = 0.1579 * pdw + 0.0496 * (ws.len() as f64 / sentences);
    if pdw > 5.0 {
        score + 3.6365
    } else {
        score
    }
}

// ---------------------------------------------------------------------------
// Constrained decoding

/// Random bigram model over `v` tokens named `t0..`. About a fifth of the
/// transitions are impossible.
pub fn random_bigram<R: Rng>(rng: &mut R, v: usize) -> BigramTable {
    let vocab: Vec<String> = (0..v).map(|i| format!("t{i}")).collect();
    let rows = (0..=v)
        .map(|_| {
            let mut w: Vec<f64> = (0..=v)
                .map(|_| {
                    if rng.gen_bool(0.2) {
                        0.0
                    } else {
                        rng.gen_range(0.05..1.0)
                    }
                })
                .collect();
            if w.iter().all(|&x| x == 0.0) {
                w[rng.gen_range(0..=v)] = 1.0;
            }
            let sum: f64 = w.iter().sum();
            w.iter()
                .map(|&x| if x == 0.0 { f64::NEG_INFINITY } else { (x / sum).ln() })
                .collect()
        })
        .collect();
    BigramTable::new(vocab, rows)
}

/// Best legal sequence of at most `max_len` tokens by enumeration. Ties go
/// to the lexicographically smaller token list.
pub fn exhaustive_best(
    model: &dyn TokenModel,
    constraint: &dyn TokenConstraint,
    max_len: usize,
) -> Option<(Vec<String>, f64)> {
    let vocab = model.vocabulary().to_vec();
    let eos = vocab.len();
    let mut best: Option<(Vec<String>, f64)> = None;
    let mut stack: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 0.0)];
    while let Some((prefix, score)) = stack.pop() {
        let lps = model.log_probs(&prefix);
        if lps[eos] > f64::NEG_INFINITY {
            let total = score + lps[eos];
            let toks: Vec<String> = prefix.iter().map(|&i| vocab[i].clone()).collect();
            let better = match &best {
                None => true,
                Some((bt, bs)) => total > *bs || (total == *bs && toks < *bt),
            };
            if better {
                best = Some((toks, total));
            }
        }
        if prefix.len() == max_len {
            continue;
        }
        for (t, &lp) in lps[..eos].iter().enumerate() {
            if lp == f64::NEG_INFINITY || constraint.violates(&vocab[t]) {
                continue;
            }
            let mut next = prefix.clone();
            next.push(t);
            stack.push((next, score + lp));
        }
    }
    best
}

/// Number of sequences of length 0..=max_len over `v` tokens.
pub fn sequence_count(v: usize, max_len: usize) -> usize {
    (0..=max_len).map(|l| v.pow(l as u32)).sum()
}

pub fn sorted<K: Ord + Clone, V: Clone>(m: &HashMap<K, V>) -> BTreeMap<K, V> {
    m.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
}
