//! Evaluation metrics: rank correlations, NDCG, and representation geometry.
//!
//! | Metric | Range | Notes |
//! |--------|-------|-------|
//! | [`spearman`] | [-1, 1] | Pearson on average ranks |
//! | [`kendall_tau`] | [-1, 1] | tau-b, `O(n log n)` |
//! | [`ndcg`] | [0, 1] | gain `2^rel - 1`, `log2` discount |
//! | [`alignment`] | [0, 4] | mean squared distance of normalized positives |
//! | [`uniformity`] | [-8, 0] | log mean Gaussian potential over distinct pairs |

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::rankprob::{argsort_desc, log_sum_exp};
use crate::vectors::{cosine_similarity, normalize, EmbeddingVector};

/// One labeled sentence pair with a gold similarity in `[0, 5]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StsExample {
    pub sentence1: String,
    pub sentence2: String,
    pub gold: f64,
}

/// A query sentence and its labeled partners.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingGroup {
    pub query: String,
    pub targets: Vec<(String, f64)>,
}

/// Minimum group size for a ranking task (strictly more than three).
pub const MIN_GROUP_SIZE: usize = 4;

#[derive(Debug, Clone, Default)]
pub struct EvalPairSet {
    pub positive_pairs: Vec<(EmbeddingVector, EmbeddingVector)>,
    pub pool: Vec<EmbeddingVector>,
}

/// Anything that maps a sentence to an embedding for evaluation.
pub trait SentenceEncoder {
    fn embed(&self, sentence: &str) -> Result<EmbeddingVector>;
}

fn check_lengths(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    Ok(())
}

/// 1-based ranks, ascending by value; tied values share their mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let mean = (start + 1 + end) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = mean;
        }
        start = end;
    }
    ranks
}

/// 1-based position of each item when sorted by descending score.
pub fn rank_positions(scores: &[f64]) -> Vec<usize> {
    let mut pos = vec![0; scores.len()];
    if let Ok(perm) = argsort_desc(scores) {
        for (rank, &i) in perm.order().iter().enumerate() {
            pos[i] = rank + 1;
        }
    }
    pos
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateInput("constant list"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y)?;
    if x.len() < 2 {
        return Err(Error::DegenerateInput("need at least two observations"));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Counts inversions of `v` by merge sort; equal elements are not inversions.
fn count_inversions(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = count_inversions(&mut v[..mid], buf) + count_inversions(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[i] <= v[j] {
            buf.push(v[i]);
            i += 1;
        } else {
            buf.push(v[j]);
            swaps += (mid - i) as u64;
            j += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Sum of `t (t - 1) / 2` over runs of equal adjacent values.
fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Kendall's tau-b.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y)?;
    let n = x.len();
    if n < 2 {
        return Err(Error::DegenerateInput("need at least two observations"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));

    let total = (n * (n - 1) / 2) as u64;
    let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let xy: Vec<(f64, f64)> = idx.iter().map(|&i| (x[i], y[i])).collect();
    let ties_x = tied_pairs(&xs);
    let ties_xy = tied_pairs(&xy);

    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let swaps = count_inversions(&mut ys, &mut Vec::with_capacity(n));
    let ties_y = tied_pairs(&ys);

    let denom_x = total - ties_x;
    let denom_y = total - ties_y;
    if denom_x == 0 || denom_y == 0 {
        return Err(Error::DegenerateInput("constant list"));
    }
    let numer = total as f64 - ties_x as f64 - ties_y as f64 + ties_xy as f64 - 2.0 * swaps as f64;
    Ok((numer / ((denom_x as f64) * (denom_y as f64)).sqrt()).clamp(-1.0, 1.0))
}

fn dcg(order: &[usize], gold: &[f64], k: usize) -> f64 {
    order
        .iter()
        .take(k)
        .enumerate()
        .map(|(pos, &i)| (gold[i].exp2() - 1.0) / ((pos + 2) as f64).log2())
        .sum()
}

/// NDCG@k of the ordering induced by `pred`. An all-zero gold list scores 1.
pub fn ndcg(pred: &[f64], gold: &[f64], k: Option<usize>) -> Result<f64> {
    check_lengths(pred, gold)?;
    if let Some(&g) = gold.iter().find(|g| g.is_nan() || **g < 0.0) {
        return Err(Error::NegativeGold(g));
    }
    let n = pred.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let k = k.unwrap_or(n);
    if k == 0 || k > n {
        return Err(Error::IndexOutOfRange { index: k, len: n });
    }
    let ideal = dcg(argsort_desc(gold)?.order(), gold, k);
    if ideal == 0.0 {
        return Ok(1.0);
    }
    Ok((dcg(argsort_desc(pred)?.order(), gold, k) / ideal).clamp(0.0, 1.0))
}

fn squared_distance_normalized(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            actual: v.dim(),
        });
    }
    let (u, v) = (normalize(u)?, normalize(v)?);
    Ok(u.as_slice()
        .iter()
        .zip(v.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// Mean squared distance between normalized positive pairs.
pub fn alignment(pairs: &EvalPairSet) -> Result<f64> {
    if pairs.positive_pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut total = 0.0;
    for (u, v) in &pairs.positive_pairs {
        total += squared_distance_normalized(u, v)?;
    }
    Ok(total / pairs.positive_pairs.len() as f64)
}

/// `log mean exp(-2 |u - v|^2)` over all unordered pairs `i < j` of the pool.
pub fn uniformity(pool: &EvalPairSet) -> Result<f64> {
    let n = pool.pool.len();
    if n < 2 {
        return Err(Error::PoolTooSmall { size: n });
    }
    let mut exponents = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            exponents.push(-2.0 * squared_distance_normalized(&pool.pool[i], &pool.pool[j])?);
        }
    }
    Ok(log_sum_exp(&exponents) - (exponents.len() as f64).ln())
}

/// Groups pairs by sentence (on either side) and keeps queries with more
/// than three partners. Groups appear in order of the query's first
/// occurrence; targets keep input order.
pub fn build_ranking_groups(dataset: &[StsExample]) -> Vec<RankingGroup> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<RankingGroup> = Vec::new();
    for ex in dataset {
        let mut sides = vec![(ex.sentence1.as_str(), ex.sentence2.as_str())];
        if ex.sentence1 != ex.sentence2 {
            sides.push((ex.sentence2.as_str(), ex.sentence1.as_str()));
        }
        for (query, target) in sides {
            let slot = *index.entry(query).or_insert_with(|| {
                groups.push(RankingGroup {
                    query: query.to_owned(),
                    targets: Vec::new(),
                });
                groups.len() - 1
            });
            groups[slot].targets.push((target.to_owned(), ex.gold));
        }
    }
    groups
        .into_iter()
        .filter(|g| g.targets.len() >= MIN_GROUP_SIZE)
        .collect()
}

/// Cosine prediction for each pair, in dataset order.
pub fn predict_sts<E: SentenceEncoder + ?Sized>(
    encoder: &E,
    dataset: &[StsExample],
) -> Result<Vec<f64>> {
    dataset
        .iter()
        .map(|ex| {
            cosine_similarity(
                &encoder.embed(&ex.sentence1)?,
                &encoder.embed(&ex.sentence2)?,
            )
        })
        .collect()
}

/// Spearman correlation between cosine predictions and gold scores.
pub fn evaluate_sts<E: SentenceEncoder + ?Sized>(
    encoder: &E,
    dataset: &[StsExample],
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput);
    }
    let preds = predict_sts(encoder, dataset)?;
    let golds: Vec<f64> = dataset.iter().map(|e| e.gold).collect();
    spearman(&preds, &golds)
}

/// Per-group KCC and NDCG of one ranking group given predicted scores.
///
/// KCC is `None` when the gold labels are all equal (no ordering to recover);
/// constant predictions against informative golds score 0.
pub fn score_group(scores: &[f64], golds: &[f64]) -> Result<(Option<f64>, f64)> {
    let kcc = match kendall_tau(scores, golds) {
        Ok(v) => Some(v),
        Err(Error::DegenerateInput(_)) if golds.windows(2).all(|w| w[0] == w[1]) => None,
        Err(Error::DegenerateInput(_)) => Some(0.0),
        Err(e) => return Err(e),
    };
    Ok((kcc, ndcg(scores, golds, None)?))
}

/// Unweighted mean KCC and NDCG over ranking groups.
pub fn evaluate_ranking<E: SentenceEncoder + ?Sized>(
    encoder: &E,
    groups: &[RankingGroup],
) -> Result<(f64, f64)> {
    if groups.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (mut kcc_sum, mut kcc_count, mut ndcg_sum) = (0.0, 0usize, 0.0);
    for group in groups {
        let query = encoder.embed(&group.query)?;
        let mut scores = Vec::with_capacity(group.targets.len());
        for (target, _) in &group.targets {
            scores.push(cosine_similarity(&query, &encoder.embed(target)?)?);
        }
        let golds: Vec<f64> = group.targets.iter().map(|t| t.1).collect();
        let (kcc, n) = score_group(&scores, &golds)?;
        if let Some(k) = kcc {
            kcc_sum += k;
            kcc_count += 1;
        }
        ndcg_sum += n;
    }
    let kcc = if kcc_count == 0 {
        0.0
    } else {
        kcc_sum / kcc_count as f64
    };
    Ok((kcc, ndcg_sum / groups.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    const LABELS: [f64; 5] = [4.80, 3.60, 1.60, 1.40, 1.00];
    const BASELINE: [f64; 5] = [0.93, 0.94, 0.45, 0.47, 0.46];

    fn ev(v: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn spearman_examples() {
        let x = [0.3, 1.2, -0.5, 2.0];
        assert!((spearman(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        let rev: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((spearman(&x, &rev).unwrap() + 1.0).abs() < 1e-15);
        assert!((spearman(&LABELS, &BASELINE).unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn spearman_errors() {
        assert!(matches!(
            spearman(&[1.0, 2.0], &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            spearman(&[1.0, 1.0], &[1.0, 2.0]),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn kendall_examples() {
        assert!((kendall_tau(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((kendall_tau(&LABELS, &BASELINE).unwrap() - 0.4).abs() < 1e-12);
        assert!(matches!(
            kendall_tau(&[2.0, 2.0], &[1.0, 3.0]),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn kendall_with_ties_hand_count() {
        // x = 1,2,3,4 ; y = 1,2,2,3. Pairs: 5 concordant, 0 discordant, 1 tied in y.
        let t = kendall_tau(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 2.0, 3.0]).unwrap();
        assert!((t - 5.0 / (6.0f64 * 5.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn table_rank_positions() {
        assert_eq!(rank_positions(&LABELS), vec![1, 2, 3, 4, 5]);
        assert_eq!(rank_positions(&BASELINE), vec![2, 1, 5, 3, 4]);
    }

    #[test]
    fn average_ranks_ties() {
        assert_eq!(
            average_ranks(&[3.0, 1.0, 3.0, 2.0]),
            vec![3.5, 1.0, 3.5, 2.0]
        );
    }

    #[test]
    fn ndcg_examples() {
        assert_eq!(ndcg(&[0.9, 0.5, 0.1], &[3.0, 2.0, 0.0], None).unwrap(), 1.0);
        let v = ndcg(&[0.0, 1.0], &[3.0, 1.0], None).unwrap();
        let dcg = 1.0 + 7.0 / 3f64.log2();
        let idcg = 7.0 + 1.0 / 3f64.log2();
        assert!((v - dcg / idcg).abs() < 1e-15);
        assert!((v - 0.709_81).abs() < 1e-5);
        assert_eq!(ndcg(&[0.3, 0.9, 0.1], &[2.0, 2.0, 2.0], None).unwrap(), 1.0);
        assert_eq!(ndcg(&[0.3, 0.9], &[0.0, 0.0], None).unwrap(), 1.0);
    }

    #[test]
    fn ndcg_cutoff_and_errors() {
        // Top-1 only: the best item is ranked second by pred.
        let v = ndcg(&[0.9, 0.1], &[0.0, 2.0], Some(1)).unwrap();
        assert_eq!(v, 0.0);
        assert!(matches!(
            ndcg(&[0.1], &[-1.0], None),
            Err(Error::NegativeGold(_))
        ));
        assert!(ndcg(&[0.1, 0.2], &[1.0, 0.0], Some(3)).is_err());
        assert!(matches!(
            ndcg(&[0.1], &[1.0, 0.0], None),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn alignment_examples() {
        let u = ev(&[1.0, 0.0]);
        let set = |pairs: Vec<(EmbeddingVector, EmbeddingVector)>| EvalPairSet {
            positive_pairs: pairs,
            pool: vec![],
        };
        assert_eq!(alignment(&set(vec![(u.clone(), u.clone())])).unwrap(), 0.0);
        let anti = alignment(&set(vec![(u.clone(), ev(&[-3.0, 0.0]))])).unwrap();
        assert!((anti - 4.0).abs() < 1e-15);
        let orth = alignment(&set(vec![(u.clone(), ev(&[0.0, 2.0]))])).unwrap();
        assert!((orth - 2.0).abs() < 1e-15);
        assert!(matches!(alignment(&set(vec![])), Err(Error::EmptyInput)));
    }

    #[test]
    fn uniformity_examples() {
        let pool = |p: Vec<EmbeddingVector>| EvalPairSet {
            positive_pairs: vec![],
            pool: p,
        };
        let u = uniformity(&pool(vec![ev(&[1.0, 0.0]), ev(&[-1.0, 0.0])])).unwrap();
        assert!((u + 8.0).abs() < 1e-12);
        let u = uniformity(&pool(vec![ev(&[1.0, 1.0]); 4])).unwrap();
        assert!(u.abs() < 1e-12);
        let u = uniformity(&pool(vec![ev(&[1.0, 0.0]), ev(&[0.0, 1.0])])).unwrap();
        assert!((u + 4.0).abs() < 1e-12);
        assert!(matches!(
            uniformity(&pool(vec![ev(&[1.0])])),
            Err(Error::PoolTooSmall { size: 1 })
        ));
    }

    fn ex(a: &str, b: &str, gold: f64) -> StsExample {
        StsExample {
            sentence1: a.into(),
            sentence2: b.into(),
            gold,
        }
    }

    #[test]
    fn ranking_groups() {
        let five: Vec<_> = (0..5)
            .map(|i| ex("q", &format!("t{i}"), i as f64))
            .collect();
        let groups = build_ranking_groups(&five);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].query, "q");
        assert_eq!(groups[0].targets.len(), 5);
        assert_eq!(groups[0].targets[3], ("t3".to_string(), 3.0));

        let distinct: Vec<_> = (0..6)
            .map(|i| ex(&format!("a{i}"), &format!("b{i}"), 1.0))
            .collect();
        assert!(build_ranking_groups(&distinct).is_empty());

        // Four partners, the query sometimes on the right.
        let four = vec![
            ex("q", "a", 1.0),
            ex("b", "q", 2.0),
            ex("q", "c", 3.0),
            ex("d", "q", 4.0),
        ];
        let groups = build_ranking_groups(&four);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].targets.len(), 4);
        assert_eq!(groups[0].targets[1], ("b".to_string(), 2.0));

        let three = &four[..3];
        assert!(build_ranking_groups(three).is_empty());
    }

    #[test]
    fn score_group_degenerate_cases() {
        let (kcc, n) = score_group(&[0.1, 0.2, 0.3, 0.4], &[2.0; 4]).unwrap();
        assert_eq!((kcc, n), (None, 1.0));
        let (kcc, _) = score_group(&[0.5; 4], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(kcc, Some(0.0));
    }
}
