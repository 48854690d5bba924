//! Independent reference implementations used as test oracles.
//!
//! Everything here is written the slow, obvious way (pair counting, direct
//! sums, central differences) so it shares no code path with the library.

#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// `n x n` matrix with entries drawn uniformly from `[-0.95, 0.95]`.
pub fn random_square(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| uniform_vec(rng, n, -0.95, 0.95)).collect()
}

/// Average rank of each entry by counting smaller and equal values.
pub fn count_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&xi| {
            let less = x.iter().filter(|&&xj| xj < xi).count() as f64;
            let equal = x.iter().filter(|&&xj| xj == xi).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn spearman_oracle(x: &[f64], y: &[f64]) -> f64 {
    pearson(&count_ranks(x), &count_ranks(y))
}

/// Tau-b by enumerating all `n(n-1)/2` pairs.
pub fn kendall_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut conc, mut disc, mut tie_x, mut tie_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 {
                tie_x += 1;
            }
            if dy == 0.0 {
                tie_y += 1;
            }
            if dx != 0.0 && dy != 0.0 {
                if (dx > 0.0) == (dy > 0.0) {
                    conc += 1;
                } else {
                    disc += 1;
                }
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    (conc - disc) as f64 / (((n0 - tie_x) * (n0 - tie_y)) as f64).sqrt()
}

/// Repeatedly picks the largest remaining value, lowest index first.
pub fn selection_order(x: &[f64]) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..x.len()).collect();
    let mut out = Vec::new();
    while !remaining.is_empty() {
        let mut best = 0;
        for k in 1..remaining.len() {
            if x[remaining[k]] > x[remaining[best]] {
                best = k;
            }
        }
        out.push(remaining.remove(best));
    }
    out
}

pub fn ndcg_oracle(pred: &[f64], gold: &[f64]) -> f64 {
    let dcg = |order: &[usize]| -> f64 {
        order
            .iter()
            .enumerate()
            .map(|(pos, &i)| (2f64.powf(gold[i]) - 1.0) / ((pos + 2) as f64).log2())
            .sum()
    };
    let ideal = dcg(&selection_order(gold));
    if ideal == 0.0 {
        1.0
    } else {
        dcg(&selection_order(pred)) / ideal
    }
}

/// Central-difference gradient of `f` at `x`.
pub fn numeric_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            probe[k] = x[k] + h;
            let up = f(&probe);
            probe[k] = x[k] - h;
            let down = f(&probe);
            probe[k] = x[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|, floor)` in the Euclidean norm.
pub fn relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    let l2 = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = l2(&mut analytic.iter().zip(numeric).map(|(a, b)| a - b));
    let scale = l2(&mut analytic.iter().copied())
        .max(l2(&mut numeric.iter().copied()))
        .max(floor);
    diff / scale
}

pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

use listdistill::data_io::{build_vocab, tokenize, Corpus};
use listdistill::encoder::{backward_to_params, encode_batch, EncoderParams};
use listdistill::losses::{combined_loss, LossWeights, RankMethod, Temperatures};
use listdistill::teacher::{build_synthetic_teacher, teacher_similarity_matrix, TeacherEnsemble};
use listdistill::vectors::similarity_matrix;

/// Four-sentence, `d = 8` model with dropout; compares the analytic table
/// gradient of the combined loss against central differences on `entries`
/// table coordinates drawn from rows that appear in the batch. Returns the
/// worst per-coordinate relative error (denominator floored at `1e-6`).
pub fn end_to_end_table_check(method: RankMethod, entries: usize, h: f64, seed: u64) -> f64 {
    let corpus = Corpus::new(
        [
            "red cat sat",
            "blue dog ran far",
            "red dog sat down",
            "a blue cat ran",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect(),
    );
    let vocab = build_vocab(&corpus, 1);
    let tokens: Vec<Vec<usize>> = corpus
        .sentences
        .iter()
        .map(|s| tokenize(&vocab, s).unwrap())
        .collect();
    let params = EncoderParams::random(vocab.len(), 8, 0.1, 0.5, seed).unwrap();
    let ensemble = TeacherEnsemble::single(build_synthetic_teacher(seed, &corpus.sentences, 6));
    let keys: Vec<&str> = corpus.sentences.iter().map(String::as_str).collect();
    let teacher = teacher_similarity_matrix(&ensemble, &keys).unwrap();
    let temps = Temperatures::default();
    let weights = LossWeights::default();

    let loss_at = |p: &EncoderParams| -> f64 {
        let views = encode_batch(p, &tokens, seed, 7).unwrap();
        let ab = similarity_matrix(&views.view_a, &views.view_b).unwrap();
        let ba = similarity_matrix(&views.view_b, &views.view_a).unwrap();
        combined_loss(&ab, &ba, &teacher, &temps, &weights, method)
            .unwrap()
            .0
            .total
    };
    let views = encode_batch(&params, &tokens, seed, 7).unwrap();
    let ab = similarity_matrix(&views.view_a, &views.view_b).unwrap();
    let ba = similarity_matrix(&views.view_b, &views.view_a).unwrap();
    let (_, g_ab, g_ba) = combined_loss(&ab, &ba, &teacher, &temps, &weights, method).unwrap();
    let grad = backward_to_params(&params, &views, &g_ab, &g_ba).unwrap();

    let used: Vec<usize> = {
        let mut ids: Vec<usize> = tokens.iter().flatten().copied().collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    };
    let mut pick = rng(seed ^ 0xFD);
    let mut worst: f64 = 0.0;
    for _ in 0..entries {
        let row = used[pick.random_range(0..used.len())];
        let k = row * params.dim + pick.random_range(0..params.dim);
        let mut probe = params.clone();
        probe.table[k] += h;
        let up = loss_at(&probe);
        probe.table[k] -= 2.0 * h;
        let down = loss_at(&probe);
        let numeric = (up - down) / (2.0 * h);
        let analytic = grad.values[k];
        let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(err);
    }
    worst
}
