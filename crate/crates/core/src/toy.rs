//! Synthetic corpora for smoke runs and distillation experiments.

use rand::Rng;

use crate::data_io::Corpus;
use crate::seeding;

/// `n_sentences` distinct sentences over tokens `w0..w{vocab_size-1}`, each
/// `min_len..=max_len` tokens long, drawn uniformly from `(seed)`.
pub fn synthetic_corpus(
    seed: u64,
    vocab_size: usize,
    n_sentences: usize,
    min_len: usize,
    max_len: usize,
) -> Corpus {
    assert!(vocab_size > 0 && min_len > 0 && min_len <= max_len);
    let mut rng = seeding::rng_from(&[seed, 0x54_4F59]);
    let mut seen = std::collections::HashSet::new();
    let mut sentences = Vec::with_capacity(n_sentences);
    while sentences.len() < n_sentences {
        let len = rng.random_range(min_len..=max_len);
        let s = (0..len)
            .map(|_| format!("w{}", rng.random_range(0..vocab_size)))
            .collect::<Vec<_>>()
            .join(" ");
        if seen.insert(s.clone()) {
            sentences.push(s);
        }
    }
    Corpus {
        sentences,
        deduplicated: true,
    }
}
