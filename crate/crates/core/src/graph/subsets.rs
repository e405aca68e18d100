use std::collections::HashSet;

use rand::{seq::index, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::GraphError;

/// Exhaustive enumeration is used up to this many subsets by default.
pub const DEFAULT_MAX_SUBSETS: u64 = 10_000_000;

/// Cap on how many n-subsets are tested, and the seed used when sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubsetBudget {
    max_subsets: Option<u64>,
    pub rng_seed: u64,
}

impl Default for SubsetBudget {
    fn default() -> Self {
        SubsetBudget {
            max_subsets: Some(DEFAULT_MAX_SUBSETS),
            rng_seed: 0,
        }
    }
}

impl SubsetBudget {
    pub fn unlimited() -> Self {
        SubsetBudget {
            max_subsets: None,
            rng_seed: 0,
        }
    }

    pub fn bounded(max_subsets: u64, rng_seed: u64) -> Result<Self, GraphError> {
        if max_subsets == 0 {
            return Err(GraphError::EmptyBudget);
        }
        Ok(SubsetBudget {
            max_subsets: Some(max_subsets),
            rng_seed,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn max_subsets(&self) -> Option<u64> {
        self.max_subsets
    }
}

/// C(n, k), saturating at `u64::MAX`.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Which subsets the graph build will test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubsetPlan {
    /// Every C(N, n) subset.
    Exhaustive,
    /// The listed lexicographic ranks, sorted ascending.
    Sampled(Vec<u64>),
}

impl SubsetPlan {
    pub fn new(n_total: usize, arity: usize, budget: &SubsetBudget) -> Self {
        let total = binomial(n_total as u64, arity as u64);
        match budget.max_subsets {
            Some(m) if m < total => {
                SubsetPlan::Sampled(sample_ranks(n_total, arity, total, m, budget.rng_seed))
            }
            _ => SubsetPlan::Exhaustive,
        }
    }

    pub fn is_sampled(&self) -> bool {
        matches!(self, SubsetPlan::Sampled(_))
    }
}

/// Lexicographic rank of a sorted combination of `0..n_total`.
pub(crate) fn rank_combination(n_total: usize, combo: &[usize]) -> u64 {
    let k = combo.len() as u64;
    let n = n_total as u64;
    let colex: u64 = combo
        .iter()
        .enumerate()
        .map(|(i, &c)| binomial(n - 1 - c as u64, k - i as u64))
        .sum();
    binomial(n, k) - 1 - colex
}

/// Inverse of [`rank_combination`].
pub(crate) fn unrank_combination(n_total: usize, arity: usize, rank: u64, out: &mut [usize]) {
    let n = n_total as u64;
    let k = arity as u64;
    let mut x = binomial(n, k) - 1 - rank;
    // the mirrored values d_i = n − 1 − c_i decrease strictly
    let mut upper = n - 1;
    for (i, slot) in out.iter_mut().enumerate().take(arity) {
        let m = k - i as u64;
        // largest d ≤ upper with C(d, m) ≤ x
        let (mut lo, mut hi) = (m - 1, upper);
        while lo < hi {
            let mid = lo + (hi - lo).div_ceil(2);
            if binomial(mid, m) <= x {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        x -= binomial(lo, m);
        *slot = (n - 1 - lo) as usize;
        upper = lo.saturating_sub(1);
    }
}

fn random_rank(rng: &mut ChaCha8Rng, n_total: usize, arity: usize, buf: &mut Vec<usize>) -> u64 {
    buf.clear();
    buf.extend(index::sample(rng, n_total, arity).iter());
    buf.sort_unstable();
    rank_combination(n_total, buf)
}

/// `m` distinct ranks drawn uniformly from `0..total`, sorted.
fn sample_ranks(n_total: usize, arity: usize, total: u64, m: u64, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = Vec::with_capacity(arity);
    if m <= total / 2 {
        let mut seen = HashSet::with_capacity(m as usize);
        let mut ranks = Vec::with_capacity(m as usize);
        while (ranks.len() as u64) < m {
            let r = random_rank(&mut rng, n_total, arity, &mut buf);
            if seen.insert(r) {
                ranks.push(r);
            }
        }
        ranks.sort_unstable();
        ranks
    } else {
        // draw the excluded subsets instead
        let excluded_count = total - m;
        let mut excluded = HashSet::with_capacity(excluded_count as usize);
        while (excluded.len() as u64) < excluded_count {
            excluded.insert(random_rank(&mut rng, n_total, arity, &mut buf));
        }
        (0..total).filter(|r| !excluded.contains(r)).collect()
    }
}

/// Advances `combo` to the next combination of `0..n_total` in lexicographic
/// order; returns false when it was the last one.
pub(crate) fn next_combination(combo: &mut [usize], n_total: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n_total - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Stream of sorted index subsets of size `arity` drawn from `0..n_total`.
///
/// Exhaustive enumeration yields lexicographic order. A budget smaller than
/// C(n_total, arity) yields exactly that many distinct subsets, sampled
/// uniformly with the budget's seed and also listed in lexicographic order.
pub fn enumerate_subsets(n_total: usize, arity: usize, budget: &SubsetBudget) -> SubsetIter {
    assert!(
        arity <= n_total,
        "arity must not exceed the number of items"
    );
    let plan = SubsetPlan::new(n_total, arity, budget);
    SubsetIter::new(n_total, arity, plan)
}

pub struct SubsetIter {
    n_total: usize,
    arity: usize,
    state: IterState,
}

enum IterState {
    Exhaustive {
        current: Vec<usize>,
        started: bool,
        done: bool,
    },
    Sampled {
        ranks: std::vec::IntoIter<u64>,
    },
}

impl SubsetIter {
    pub(crate) fn new(n_total: usize, arity: usize, plan: SubsetPlan) -> Self {
        let state = match plan {
            SubsetPlan::Exhaustive => IterState::Exhaustive {
                current: (0..arity).collect(),
                started: false,
                done: arity > n_total,
            },
            SubsetPlan::Sampled(ranks) => IterState::Sampled {
                ranks: ranks.into_iter(),
            },
        };
        SubsetIter {
            n_total,
            arity,
            state,
        }
    }
}

impl Iterator for SubsetIter {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        match &mut self.state {
            IterState::Exhaustive {
                current,
                started,
                done,
            } => {
                if *done {
                    return None;
                }
                if *started && !next_combination(current, self.n_total) {
                    *done = true;
                    return None;
                }
                *started = true;
                Some(current.clone())
            }
            IterState::Sampled { ranks } => {
                let r = ranks.next()?;
                let mut out = vec![0; self.arity];
                unrank_combination(self.n_total, self.arity, r, &mut out);
                Some(out)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 4), 5);
        assert_eq!(binomial(100, 4), 3_921_225);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(binomial(10, 0), 1);
        assert_eq!(binomial(10_000, 9_000), u64::MAX);
    }

    #[test]
    fn pairs_of_four_in_lex_order() {
        let all: Vec<_> = enumerate_subsets(4, 2, &SubsetBudget::unlimited()).collect();
        assert_eq!(
            all,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
    }

    #[test]
    fn four_of_five() {
        let all: Vec<_> = enumerate_subsets(5, 4, &SubsetBudget::unlimited()).collect();
        assert_eq!(all.len(), 5);
        assert_eq!(all[0], vec![0, 1, 2, 3]);
        assert_eq!(all[4], vec![1, 2, 3, 4]);
    }

    #[test]
    fn rank_roundtrip_matches_enumeration_order() {
        for (n, k) in [(7, 3), (9, 4), (6, 1), (5, 5)] {
            let mut out = vec![0; k];
            for (r, combo) in enumerate_subsets(n, k, &SubsetBudget::unlimited()).enumerate() {
                assert_eq!(rank_combination(n, &combo), r as u64);
                unrank_combination(n, k, r as u64, &mut out);
                assert_eq!(out, combo);
            }
        }
    }

    #[test]
    fn sampled_subsets_are_distinct_and_deterministic() {
        let budget = SubsetBudget::bounded(100_000, 7).unwrap();
        let a: Vec<_> = enumerate_subsets(100, 4, &budget).collect();
        let b: Vec<_> = enumerate_subsets(100, 4, &budget).collect();
        assert_eq!(a.len(), 100_000);
        assert_eq!(a, b);
        let distinct: HashSet<_> = a.iter().cloned().collect();
        assert_eq!(distinct.len(), 100_000);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(a
            .iter()
            .all(|s| s.windows(2).all(|w| w[0] < w[1]) && s[3] < 100));
    }

    #[test]
    fn dense_sampling_uses_complement() {
        // 9 of C(6,2) = 15
        let budget = SubsetBudget::bounded(9, 3).unwrap();
        let a: Vec<_> = enumerate_subsets(6, 2, &budget).collect();
        assert_eq!(a.len(), 9);
        let distinct: HashSet<_> = a.iter().cloned().collect();
        assert_eq!(distinct.len(), 9);
    }

    #[test]
    fn budget_at_or_above_total_is_exhaustive() {
        let budget = SubsetBudget::bounded(15, 1).unwrap();
        assert_eq!(SubsetPlan::new(6, 2, &budget), SubsetPlan::Exhaustive);
        assert!(SubsetBudget::bounded(0, 1).is_err());
    }
}
