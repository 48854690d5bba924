//! Top-one and permutation probabilities of a score list under a softmax
//! temperature, plus ordering utilities.
//!
//! The top-one probability of item `i` is `exp(s_i / t) / sum_j exp(s_j / t)`.
//! The permutation probability of an ordering `pi` is the Plackett-Luce
//! product over positions `i` of
//! `exp(s_pi(i) / t) / sum_{j >= i} exp(s_pi(j) / t)`.
//!
//! Temperatures as small as 0.0125 turn unit-range cosine scores into logits
//! near 80, so everything goes through max-subtracted log-sum-exp.

use crate::error::{Error, Result};

/// Largest list the factorial enumeration oracle accepts.
pub const BRUTE_FORCE_CAP: usize = 8;

/// A probability simplex over list items.
#[derive(Debug, Clone, PartialEq)]
pub struct TopOneDistribution {
    pub probs: Vec<f64>,
    pub temperature: f64,
}

/// A total ordering: `order[i]` is the index of the item ranked `i`-th.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &idx in &order {
            if idx >= n {
                return Err(Error::InvalidPermutation(format!(
                    "index {idx} out of range for length {n}"
                )));
            }
            if std::mem::replace(&mut seen[idx], true) {
                return Err(Error::InvalidPermutation(format!("index {idx} repeated")));
            }
        }
        Ok(Self(order))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn order(&self) -> &[usize] {
        &self.0
    }

    /// Every permutation of `0..n` in lexicographic order.
    pub fn all(n: usize) -> Vec<Permutation> {
        let mut out = Vec::new();
        let mut current = Vec::with_capacity(n);
        let mut used = vec![false; n];
        fn rec(n: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Permutation>) {
            if cur.len() == n {
                out.push(Permutation(cur.clone()));
                return;
            }
            for i in 0..n {
                if !used[i] {
                    used[i] = true;
                    cur.push(i);
                    rec(n, cur, used, out);
                    cur.pop();
                    used[i] = false;
                }
            }
        }
        rec(n, &mut current, &mut used, &mut out);
        out
    }
}

pub(crate) fn check_temperature(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveTemperature(t))
    }
}

/// `log sum exp(x_i)` with the maximum subtracted first.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Log-softmax of `scores / temperature`.
pub(crate) fn log_softmax(scores: &[f64], temperature: f64) -> Vec<f64> {
    let logits: Vec<f64> = scores.iter().map(|s| s / temperature).collect();
    let lse = log_sum_exp(&logits);
    logits.into_iter().map(|l| l - lse).collect()
}

pub(crate) fn softmax(scores: &[f64], temperature: f64) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores
        .iter()
        .map(|s| ((s - max) / temperature).exp())
        .collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Softmax of `scores / temperature`.
pub fn top_one_distribution(scores: &[f64], temperature: f64) -> Result<TopOneDistribution> {
    if scores.is_empty() {
        return Err(Error::EmptyList);
    }
    check_temperature(temperature)?;
    Ok(TopOneDistribution {
        probs: softmax(scores, temperature),
        temperature,
    })
}

fn check_perm(scores: &[f64], perm: &Permutation) -> Result<()> {
    if perm.len() != scores.len() {
        return Err(Error::InvalidPermutation(format!(
            "permutation of length {} over {} scores",
            perm.len(),
            scores.len()
        )));
    }
    Ok(())
}

/// `log P(perm | scores, temperature)`, one suffix log-sum-exp per position.
pub fn log_permutation_probability(
    scores: &[f64],
    perm: &Permutation,
    temperature: f64,
) -> Result<f64> {
    check_perm(scores, perm)?;
    check_temperature(temperature)?;
    let logits: Vec<f64> = perm
        .order()
        .iter()
        .map(|&i| scores[i] / temperature)
        .collect();
    let mut total = 0.0;
    for i in 0..logits.len() {
        total += logits[i] - log_sum_exp(&logits[i..]);
    }
    Ok(total)
}

pub fn permutation_probability(
    scores: &[f64],
    perm: &Permutation,
    temperature: f64,
) -> Result<f64> {
    log_permutation_probability(scores, perm, temperature).map(f64::exp)
}

/// Indices ordered by descending score; equal scores keep ascending index.
pub fn argsort_desc(scores: &[f64]) -> Result<Permutation> {
    if scores.is_empty() {
        return Err(Error::EmptyList);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    // sort_by is stable, so ties stay in index order.
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    Ok(Permutation(idx))
}

/// Top-one distribution recovered by summing permutation probabilities over
/// all orderings that start with each item. Factorial cost; test oracle only.
pub fn brute_force_top_one(scores: &[f64], temperature: f64) -> Result<TopOneDistribution> {
    let n = scores.len();
    if n == 0 {
        return Err(Error::EmptyList);
    }
    if n > BRUTE_FORCE_CAP {
        return Err(Error::ListTooLarge {
            len: n,
            cap: BRUTE_FORCE_CAP,
        });
    }
    check_temperature(temperature)?;
    let mut probs = vec![0.0; n];
    for perm in Permutation::all(n) {
        probs[perm.order()[0]] += permutation_probability(scores, &perm, temperature)?;
    }
    Ok(TopOneDistribution { probs, temperature })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_one_examples() {
        let d = top_one_distribution(&[1.0, 1.0], 1.0).unwrap();
        assert_eq!(d.probs, vec![0.5, 0.5]);
        let d = top_one_distribution(&[0.05, 0.0], 0.05).unwrap();
        assert!((d.probs[0] - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert!((d.probs[1] - 0.268_941_421_369_995_1).abs() < 1e-12);
        assert_eq!(top_one_distribution(&[3.7], 0.01).unwrap().probs, vec![1.0]);
    }

    #[test]
    fn top_one_errors() {
        assert!(matches!(
            top_one_distribution(&[], 1.0),
            Err(Error::EmptyList)
        ));
        assert!(matches!(
            top_one_distribution(&[1.0], 0.0),
            Err(Error::NonPositiveTemperature(_))
        ));
        assert!(matches!(
            top_one_distribution(&[1.0], -1.0),
            Err(Error::NonPositiveTemperature(_))
        ));
    }

    #[test]
    fn top_one_survives_tiny_temperature() {
        let d = top_one_distribution(&[1.0, -1.0, 0.99], 0.0125).unwrap();
        assert!(d.probs.iter().all(|p| p.is_finite()));
        assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn permutation_probability_examples() {
        let p = permutation_probability(&[0.3], &Permutation::identity(1), 0.5).unwrap();
        assert_eq!(p, 1.0);
        let s = [2f64.ln(), 0.0];
        let fwd = Permutation::new(vec![0, 1]).unwrap();
        let rev = Permutation::new(vec![1, 0]).unwrap();
        assert!((permutation_probability(&s, &fwd, 1.0).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((permutation_probability(&s, &rev, 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn log_permutation_probability_examples() {
        let lp = log_permutation_probability(&[5.0], &Permutation::identity(1), 1.0).unwrap();
        assert_eq!(lp, 0.0);
        let s = [2f64.ln(), 0.0];
        let lp = log_permutation_probability(&s, &Permutation::identity(2), 1.0).unwrap();
        assert!((lp - (2.0f64 / 3.0).ln()).abs() < 1e-12);
        assert!((lp + 0.405_465_108_108_164_4).abs() < 1e-12);
    }

    #[test]
    fn log_permutation_probability_stays_finite() {
        let s = [1.0, -1.0, 0.5, -0.7];
        let worst = Permutation::new(vec![1, 3, 2, 0]).unwrap();
        let lp = log_permutation_probability(&s, &worst, 0.0125).unwrap();
        assert!(lp.is_finite());
        assert!(lp < -100.0);
    }

    #[test]
    fn permutation_validation() {
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![0, 2]).is_err());
        assert!(matches!(
            permutation_probability(&[1.0, 2.0], &Permutation::identity(3), 1.0),
            Err(Error::InvalidPermutation(_))
        ));
    }

    #[test]
    fn argsort_examples() {
        assert_eq!(argsort_desc(&[0.1, 0.9, 0.5]).unwrap().order(), &[1, 2, 0]);
        assert_eq!(argsort_desc(&[0.5, 0.5]).unwrap().order(), &[0, 1]);
        assert_eq!(
            argsort_desc(&[4.0, 3.0, 2.0, 1.0]).unwrap(),
            Permutation::identity(4)
        );
        assert!(matches!(argsort_desc(&[]), Err(Error::EmptyList)));
    }

    #[test]
    fn brute_force_small_cases() {
        assert_eq!(brute_force_top_one(&[0.2], 1.0).unwrap().probs, vec![1.0]);
        let d = brute_force_top_one(&[1.0, 1.0], 1.0).unwrap();
        assert!((d.probs[0] - 0.5).abs() < 1e-15 && (d.probs[1] - 0.5).abs() < 1e-15);
        assert!(matches!(
            brute_force_top_one(&[0.0; 9], 1.0),
            Err(Error::ListTooLarge { len: 9, cap: 8 })
        ));
    }

    #[test]
    fn all_permutations_count() {
        assert_eq!(Permutation::all(4).len(), 24);
        assert_eq!(Permutation::all(0).len(), 1);
    }
}
