mod common;

use listdistill::rankprob::{
    argsort_desc, brute_force_top_one, log_permutation_probability, permutation_probability,
    top_one_distribution, Permutation,
};
use proptest::prelude::*;

fn scores(lo: usize, hi: usize) -> impl Strategy<Value = Vec<f64>> {
    (lo..=hi).prop_flat_map(|n| prop::collection::vec(-1.0..1.0f64, n))
}

fn temperature() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0125), Just(0.05), Just(1.0)]
}

fn tie_free(s: &[f64]) -> bool {
    let mut v = s.to_vec();
    v.sort_by(f64::total_cmp);
    v.windows(2).all(|w| w[1] - w[0] > 1e-6)
}

proptest! {
    #[test]
    fn permutation_probabilities_sum_to_one(s in scores(1, 6), t in temperature()) {
        let total: f64 = Permutation::all(s.len())
            .iter()
            .map(|p| permutation_probability(&s, p, t).unwrap())
            .sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn brute_force_matches_softmax(s in scores(1, 6), t in prop_oneof![Just(0.05), Just(1.0)]) {
        let fast = top_one_distribution(&s, t).unwrap();
        let slow = brute_force_top_one(&s, t).unwrap();
        for (a, b) in fast.probs.iter().zip(&slow.probs) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn top_one_is_shift_invariant(s in scores(1, 12), t in temperature(), c in -5.0..5.0f64) {
        let base = top_one_distribution(&s, t).unwrap();
        let shifted: Vec<f64> = s.iter().map(|x| x + c).collect();
        let moved = top_one_distribution(&shifted, t).unwrap();
        for (a, b) in base.probs.iter().zip(&moved.probs) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn argsort_is_the_most_likely_ordering(s in scores(1, 5), t in temperature()) {
        prop_assume!(tie_free(&s));
        let best = log_permutation_probability(&s, &argsort_desc(&s).unwrap(), t).unwrap();
        for p in Permutation::all(s.len()) {
            prop_assert!(log_permutation_probability(&s, &p, t).unwrap() <= best + 1e-12);
        }
    }

    #[test]
    fn argsort_orders_descending(s in scores(1, 20)) {
        let p = argsort_desc(&s).unwrap();
        for w in p.order().windows(2) {
            prop_assert!(s[w[0]] > s[w[1]] || (s[w[0]] == s[w[1]] && w[0] < w[1]));
        }
    }
}
