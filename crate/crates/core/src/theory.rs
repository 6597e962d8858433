//! Optimal-questioning laws and an exhaustive optimal-set search.
//!
//! With ideally balanced questions, each question halves every group of
//! still-indistinguishable models. For `2^n` models the probability that a
//! random distinct pair is told apart within `k` questions is
//! `1 − (2^(n−k) − 1) / (2^n − 1)`, which tends to `1 − 2^−k` as `n` grows.
//! Laws are computed as exact rationals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiment::{distinguished_pairs, pairs_in, refine};
use crate::heuristics::{evenness, OrderedQuestionList};
use crate::matrix::{numbered_ids, ResponseMatrix};
use crate::BitVector;

/// Default cap on subsets examined by [`brute_force_best_set`].
pub const DEFAULT_BRUTE_FORCE_BUDGET: u64 = 10_000_000;

fn choose2(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Pairs split by a question answering 1 for `k` of `L` models:
/// `C(L,2) − C(k,2) − C(L−k,2)`.
pub fn split_pair_count(num_models: u64, k: u64) -> Result<u64> {
    if num_models < 2 {
        return Err(Error::Precondition(format!(
            "need at least 2 models, got {num_models}"
        )));
    }
    if k > num_models {
        return Err(Error::Precondition(format!(
            "group size {k} exceeds {num_models} models"
        )));
    }
    Ok(choose2(num_models) - choose2(k) - choose2(num_models - k))
}

fn pow2(e: u32) -> BigInt {
    BigInt::one() << e
}

/// `P(X ≤ k)` for `2^n` models, `1 ≤ k ≤ n`.
pub fn optimal_cdf_finite(n: u32, k: u32) -> Result<BigRational> {
    if k < 1 || k > n {
        return Err(Error::Precondition(format!("k = {k} outside 1..={n}")));
    }
    let num = pow2(n - k) - 1;
    let den = pow2(n) - 1;
    Ok(BigRational::one() - BigRational::new(num, den))
}

/// `P(X ≤ k) = 1 − 2^−k` for an infinite model set, `k ≥ 1`.
pub fn optimal_cdf_infinite(k: u32) -> Result<BigRational> {
    if k < 1 {
        return Err(Error::Precondition("k must be at least 1".into()));
    }
    Ok(BigRational::one() - BigRational::new(BigInt::one(), pow2(k)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LawKind {
    /// `2^n` models.
    Finite(u32),
    Infinite,
}

/// Tabulated law: `values[k − 1] = P(X ≤ k)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OptimalLaw {
    pub kind: LawKind,
    pub values: Vec<BigRational>,
}

impl OptimalLaw {
    /// `k = 1..=k_max`, with `k_max ≤ n`.
    pub fn finite(n: u32, k_max: u32) -> Result<Self> {
        let values = (1..=k_max)
            .map(|k| optimal_cdf_finite(n, k))
            .collect::<Result<_>>()?;
        Ok(Self {
            kind: LawKind::Finite(n),
            values,
        })
    }

    pub fn infinite(k_max: u32) -> Result<Self> {
        let values = (1..=k_max)
            .map(optimal_cdf_infinite)
            .collect::<Result<_>>()?;
        Ok(Self {
            kind: LawKind::Infinite,
            values,
        })
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| v.to_f64().unwrap_or(f64::NAN))
            .collect()
    }
}

/// All size-`k` question sets distinguishing the most pairs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BruteForceResult {
    pub k: usize,
    /// Maximizing sets, each ascending, in lexicographic order.
    pub best_sets: Vec<Vec<usize>>,
    pub best_pairs: u64,
    pub total_pairs: u64,
    pub best_fraction: f64,
    pub sets_examined: u64,
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact at every step: acc · (n − i) is divisible by (i + 1)
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Exhaustively scores every size-`k` question set, refusing when there are
/// more than `budget` of them.
pub fn brute_force_best_set(
    matrix: &ResponseMatrix,
    k: usize,
    budget: u64,
) -> Result<BruteForceResult> {
    let n = matrix.num_questions();
    if k == 0 || k > n {
        return Err(Error::Precondition(format!("set size {k} outside 1..={n}")));
    }
    let required = binomial(n as u64, k as u64);
    if required > budget as u128 {
        return Err(Error::BudgetExceeded { required, budget });
    }

    let mut combo: Vec<usize> = (0..k).collect();
    let mut best_pairs = 0u64;
    let mut best_sets = Vec::new();
    let mut examined = 0u64;
    loop {
        examined += 1;
        let pairs = distinguished_pairs(matrix, &combo);
        if pairs > best_pairs || best_sets.is_empty() {
            best_pairs = pairs;
            best_sets.clear();
        }
        if pairs == best_pairs {
            best_sets.push(combo.clone());
        }
        if !next_combination(&mut combo, n) {
            break;
        }
    }
    let total_pairs = pairs_in(matrix.num_models());
    Ok(BruteForceResult {
        k,
        best_sets,
        best_pairs,
        total_pairs,
        best_fraction: best_pairs as f64 / total_pairs as f64,
        sets_examined: examined,
    })
}

/// Advances to the next k-combination of `0..n` in lexicographic order.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Whether the questions splitting the most pairs (counted pair by pair) are
/// exactly the questions with the most even split.
pub fn splitting_matches_evenness(matrix: &ResponseMatrix) -> bool {
    let l = matrix.num_models();
    let split_counts: Vec<usize> = (0..matrix.num_questions())
        .map(|q| {
            let mut n = 0;
            for a in 0..l {
                for b in a + 1..l {
                    if matrix.bit(a, q) != matrix.bit(b, q) {
                        n += 1;
                    }
                }
            }
            n
        })
        .collect();
    let even: Vec<usize> = (0..matrix.num_questions())
        .map(|q| evenness(matrix.column_sum(q), l))
        .collect();
    argmax_set(&split_counts) == argmax_set(&even)
}

fn argmax_set(values: &[usize]) -> Vec<usize> {
    let best = values.iter().copied().max().unwrap_or(0);
    (0..values.len()).filter(|&i| values[i] == best).collect()
}

/// Every bit pattern over `n` questions, one model each: `2^n` models.
/// Model `i` answers question `j` with bit `n − 1 − j` of `i`.
pub fn complete_model_set(n: u32) -> Result<ResponseMatrix> {
    if !(1..=20).contains(&n) {
        return Err(Error::Precondition(format!(
            "complete model sets are built for 1 ≤ n ≤ 20, got {n}"
        )));
    }
    let l = 1usize << n;
    let columns = (0..n as usize)
        .map(|j| BitVector::from_bools((0..l).map(|i| i >> (n as usize - 1 - j) & 1 == 1)))
        .collect();
    ResponseMatrix::from_columns(numbered_ids("m", l), numbered_ids("q", n as usize), columns)
}

/// Greedy balanced ordering: repeatedly asks the question that splits the most
/// still-indistinguishable pairs (smallest index on ties), then appends the
/// remaining questions in index order. On complete model sets every step
/// halves every group, which is the optimal questioning.
pub fn balanced_ordering(matrix: &ResponseMatrix) -> OrderedQuestionList {
    let k = matrix.num_questions();
    let mut chosen = Vec::with_capacity(k);
    let mut used = vec![false; k];
    loop {
        let (_, never) = refine(matrix, chosen.iter().copied());
        if never == 0 {
            break;
        }
        let mut best: Option<(u64, usize)> = None;
        for q in (0..k).filter(|&q| !used[q]) {
            let mut trial = chosen.clone();
            trial.push(q);
            let gained = distinguished_pairs(matrix, &trial);
            if best.is_none_or(|(g, _)| gained > g) {
                best = Some((gained, q));
            }
        }
        let Some((gained, q)) = best else { break };
        if gained == pairs_in(matrix.num_models()) - never {
            break;
        }
        used[q] = true;
        chosen.push(q);
    }
    chosen.extend((0..k).filter(|&q| !used[q]));
    OrderedQuestionList::from_permutation(chosen).expect("chosen questions form a permutation")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{monte_carlo_true_negative, run_pairwise};
    use crate::heuristics::seeded_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_matrix(l: usize, k: usize, seed: u64) -> ResponseMatrix {
        let mut rng = seeded_rng(seed);
        let rows: Vec<Vec<bool>> = (0..l)
            .map(|_| (0..k).map(|_| rng.random()).collect())
            .collect();
        ResponseMatrix::from_rows(numbered_ids("m", l), numbered_ids("q", k), &rows).unwrap()
    }

    #[test]
    fn split_pair_examples() {
        assert_eq!(split_pair_count(4, 2).unwrap(), 4);
        assert_eq!(split_pair_count(4, 0).unwrap(), 0);
        let values: Vec<u64> = (0..=5).map(|k| split_pair_count(5, k).unwrap()).collect();
        assert_eq!(values, vec![0, 4, 6, 6, 4, 0]);
        assert!(split_pair_count(4, 5).is_err());
        assert!(split_pair_count(1, 0).is_err());
    }

    #[test]
    fn split_pair_count_is_product() {
        for l in 2..=64u64 {
            for k in 1..l {
                assert_eq!(split_pair_count(l, k).unwrap(), k * (l - k));
            }
        }
    }

    #[test]
    fn finite_law_examples() {
        let r = |n, d| BigRational::new(BigInt::from(n), BigInt::from(d));
        assert_eq!(optimal_cdf_finite(2, 1).unwrap(), r(2, 3));
        for n in 1..10 {
            assert_eq!(optimal_cdf_finite(n, n).unwrap(), r(1, 1));
        }
        // eight models halved into 4 + 4
        let split = split_pair_count(8, 4).unwrap();
        assert_eq!(optimal_cdf_finite(3, 1).unwrap(), r(4, 7));
        assert_eq!(r(split as i64, 28), r(4, 7));
        assert!(optimal_cdf_finite(3, 0).is_err());
        assert!(optimal_cdf_finite(3, 4).is_err());
    }

    #[test]
    fn finite_law_monotonicity() {
        for n in 1..16u32 {
            for k in 1..n {
                assert!(optimal_cdf_finite(n, k).unwrap() < optimal_cdf_finite(n, k + 1).unwrap());
                assert!(optimal_cdf_finite(n + 1, k).unwrap() < optimal_cdf_finite(n, k).unwrap());
            }
        }
    }

    #[test]
    fn infinite_law_examples() {
        assert_eq!(optimal_cdf_infinite(1).unwrap().to_f64(), Some(0.5));
        assert_eq!(optimal_cdf_infinite(2).unwrap().to_f64(), Some(0.75));
        assert!(optimal_cdf_infinite(0).is_err());
        for k in 1..=10 {
            let fin = optimal_cdf_finite(20, k).unwrap().to_f64().unwrap();
            let inf = optimal_cdf_infinite(k).unwrap().to_f64().unwrap();
            assert!((fin - inf).abs() < 1e-5);
        }
    }

    #[test]
    fn law_tables() {
        let law = OptimalLaw::finite(4, 4).unwrap();
        assert_eq!(law.values.last(), Some(&BigRational::one()));
        assert!(OptimalLaw::finite(4, 5).is_err());
        let inf = OptimalLaw::infinite(3).unwrap().to_f64();
        assert_eq!(inf, vec![0.5, 0.75, 0.875]);
    }

    #[test]
    fn binomial_coefficients() {
        assert_eq!(binomial(10, 3), 120);
        assert_eq!(binomial(5, 7), 0);
        assert_eq!(binomial(64, 32), 1_832_624_140_942_590_534);
        assert_eq!(binomial(1000, 500), u128::MAX);
    }

    #[test]
    fn combinations_enumerate_everything() {
        let mut combo = vec![0, 1, 2];
        let mut n = 1;
        while next_combination(&mut combo, 6) {
            n += 1;
        }
        assert_eq!(n, 20);
        assert_eq!(combo, vec![3, 4, 5]);
    }

    #[test]
    fn brute_force_full_set() {
        let m = random_matrix(6, 5, 3);
        let r = brute_force_best_set(&m, 5, 10).unwrap();
        assert_eq!(r.best_sets, vec![vec![0, 1, 2, 3, 4]]);
        let all: Vec<usize> = (0..5).collect();
        assert_eq!(
            r.best_fraction,
            monte_carlo_true_negative(&m, &all).unwrap()
        );
        assert_eq!(r.sets_examined, 1);
    }

    #[test]
    fn brute_force_complete_code() {
        let m = complete_model_set(3).unwrap();
        let r = brute_force_best_set(&m, 3, 10).unwrap();
        assert_eq!(r.best_fraction, 1.0);
    }

    #[test]
    fn brute_force_budget() {
        let m = random_matrix(6, 10, 1);
        match brute_force_best_set(&m, 5, 100) {
            Err(Error::BudgetExceeded { required, budget }) => {
                assert_eq!((required, budget), (252, 100))
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(brute_force_best_set(&m, 0, 100).is_err());
        assert!(brute_force_best_set(&m, 11, 100).is_err());
    }

    /// Independent recount: for each set, loop over pairs and questions.
    fn pair_loop_best(m: &ResponseMatrix, k: usize) -> (u64, Vec<Vec<usize>>) {
        let n = m.num_questions();
        let mut best = (0u64, Vec::new());
        for mask in 0u32..1 << n {
            if mask.count_ones() as usize != k {
                continue;
            }
            let set: Vec<usize> = (0..n).filter(|q| mask >> q & 1 == 1).collect();
            let mut count = 0;
            for a in 0..m.num_models() {
                for b in a + 1..m.num_models() {
                    if set.iter().any(|&q| m.bit(a, q) != m.bit(b, q)) {
                        count += 1;
                    }
                }
            }
            if count > best.0 {
                best = (count, vec![set]);
            } else if count == best.0 {
                best.1.push(set);
            }
        }
        best.1.sort();
        best
    }

    #[test]
    fn brute_force_matches_pair_loop() {
        for seed in 0..5 {
            let m = random_matrix(6, 10, seed);
            let r = brute_force_best_set(&m, 2, DEFAULT_BRUTE_FORCE_BUDGET).unwrap();
            let (pairs, sets) = pair_loop_best(&m, 2);
            assert_eq!(r.best_pairs, pairs);
            assert_eq!(r.best_sets, sets);
            assert_eq!(r.sets_examined, 45);
        }
    }

    #[test]
    fn splitting_matches_evenness_examples() {
        // q0 even split, q1 one-vs-rest
        let m = ResponseMatrix::from_bit_strings(&["11", "10", "00", "00"]).unwrap();
        assert!(splitting_matches_evenness(&m));
        let same = ResponseMatrix::from_bit_strings(&["111", "000", "111"]).unwrap();
        assert!(splitting_matches_evenness(&same));
        for seed in 0..200 {
            assert!(splitting_matches_evenness(&random_matrix(6, 12, seed)));
        }
    }

    #[test]
    fn complete_set_and_balanced_ordering() {
        for n in 2..=4u32 {
            let m = complete_model_set(n).unwrap();
            assert_eq!(m.num_models(), 1 << n);
            let d = m.hamming_distance_matrix();
            assert!((0..m.num_models())
                .all(|i| (0..m.num_models()).all(|j| (d[i][j] == 0) == (i == j))));
            let ordered = balanced_ordering(&m);
            let cdf = run_pairwise(&m, &ordered).unwrap();
            for k in 1..=n {
                let law = optimal_cdf_finite(n, k).unwrap();
                let got = BigRational::new(
                    BigInt::from(cdf.cum_pairs(k as usize)),
                    BigInt::from(cdf.total_pairs()),
                );
                assert_eq!(got, law);
            }
        }
    }

    #[test]
    fn balanced_ordering_puts_useless_questions_last() {
        // q0 constant, q1 and q2 informative
        let m = ResponseMatrix::from_bit_strings(&["001", "011", "000", "010"]).unwrap();
        assert_eq!(balanced_ordering(&m).as_slice(), &[1, 2, 0]);
    }

    proptest! {
        #[test]
        fn brute_force_non_decreasing(seed in any::<u64>()) {
            let m = random_matrix(7, 8, seed);
            let mut prev = 0.0;
            for k in 1..=8 {
                let r = brute_force_best_set(&m, k, DEFAULT_BRUTE_FORCE_BUDGET).unwrap();
                prop_assert!(r.best_fraction >= prev);
                prop_assert!(r.best_sets.iter().all(|s| s.len() == k));
                prev = r.best_fraction;
            }
        }
    }
}
