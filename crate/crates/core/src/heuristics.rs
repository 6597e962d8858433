//! Discriminating scores for questions.
//!
//! Every heuristic maps a reference matrix to a score in `[0, 1]` per question;
//! higher scores are asked first.
//!
//! - [`Heuristic::Random`]: i.i.d. uniform scores, the baseline.
//! - [`Heuristic::Separability`]: uniform scores for the questions whose split
//!   of the models is as even as possible, 0 for the rest.
//! - [`Heuristic::RecursiveSimilarity`]: among the maximally even questions,
//!   greedily chains questions whose partitions overlap least with the ones
//!   already picked.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Partition, ResponseMatrix};

/// Default iteration limit for the recursive-similarity heuristic.
pub const DEFAULT_MAX_ITER: usize = 20;

/// RNG used for every seeded draw in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `2·min(|X|, |X̄|)`, the unnormalized separability.
#[inline]
pub fn evenness(size: usize, universe: usize) -> usize {
    2 * size.min(universe - size)
}

/// Separability of a partition: how evenly it splits the models.
///
/// `L − ||X| − |X̄||` normalized by its maximum `2·⌊L/2⌋`, so the most even
/// achievable split scores exactly 1 for odd and even `L`.
pub fn separability(p: &Partition) -> Result<f64> {
    let l = p.universe_size();
    if l < 2 {
        return Err(Error::Precondition(format!(
            "separability needs at least 2 models, got {l}"
        )));
    }
    Ok(evenness(p.size(), l) as f64 / (2 * (l / 2)) as f64)
}

/// Largest of the four blocks `|X∩Y|, |X̄∩Y|, |X∩Ȳ|, |X̄∩Ȳ|`.
pub fn similarity_block_max(x: &Partition, y: &Partition) -> Result<usize> {
    let l = x.universe_size();
    if y.universe_size() != l {
        return Err(Error::Precondition(format!(
            "partitions over different universes ({l} vs {})",
            y.universe_size()
        )));
    }
    let (sx, sy) = (x.size(), y.size());
    let both = x.bits().and_count(y.bits());
    let only_y = sy - both;
    let only_x = sx - both;
    let neither = l + both - sx - sy;
    Ok(both.max(only_x).max(only_y).max(neither))
}

/// Similarity of two partitions with the same separability.
///
/// The block maximum is normalized affinely from its pigeonhole minimum
/// `⌈L/4⌉` to its maximum `L − s`, `s = min(|X|, |X̄|)`. Identical or
/// complementary partitions score 1.
pub fn similarity(x: &Partition, y: &Partition) -> Result<f64> {
    let raw = similarity_block_max(x, y)?;
    let l = x.universe_size();
    let s = x.size().min(x.complement_size());
    if s != y.size().min(y.complement_size()) {
        return Err(Error::Precondition(
            "similarity is only defined for partitions of equal separability".into(),
        ));
    }
    Ok(normalize_similarity(raw, l, s))
}

fn normalize_similarity(raw: usize, l: usize, s: usize) -> f64 {
    let lo = l.div_ceil(4);
    let hi = l - s;
    if hi <= lo {
        return 1.0;
    }
    (raw.saturating_sub(lo)) as f64 / (hi - lo) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Heuristic {
    Random,
    Separability,
    RecursiveSimilarity { max_iter: usize },
}

impl Heuristic {
    pub fn short_name(&self) -> &'static str {
        match self {
            Heuristic::Random => "rand",
            Heuristic::Separability => "sep",
            Heuristic::RecursiveSimilarity { .. } => "sim",
        }
    }

    pub fn score(&self, matrix: &ResponseMatrix, seed: u64) -> Result<ScoreVector> {
        match *self {
            Heuristic::Random => Ok(score_random(matrix, seed)),
            Heuristic::Separability => Ok(score_separability(matrix, seed)),
            Heuristic::RecursiveSimilarity { max_iter } => {
                score_recursive_similarity(matrix, max_iter, seed)
            }
        }
    }

    /// Scores and sorts in one step.
    pub fn ordering(&self, matrix: &ResponseMatrix, seed: u64) -> Result<OrderedQuestionList> {
        Ok(order_questions(&self.score(matrix, seed)?))
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Heuristic {
    type Err = Error;

    /// Parses `rand`, `sep` or `sim` (the latter with [`DEFAULT_MAX_ITER`]).
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rand" | "random" => Ok(Heuristic::Random),
            "sep" | "separability" => Ok(Heuristic::Separability),
            "sim" | "similarity" => Ok(Heuristic::RecursiveSimilarity {
                max_iter: DEFAULT_MAX_ITER,
            }),
            other => Err(Error::Precondition(format!(
                "unknown heuristic {other:?} (expected rand, sep or sim)"
            ))),
        }
    }
}

/// One score per question, in question-index order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreVector {
    scores: Vec<f64>,
    seed: u64,
    heuristic: Heuristic,
}

impl ScoreVector {
    pub fn new(scores: Vec<f64>, seed: u64, heuristic: Heuristic) -> Result<Self> {
        if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::Precondition(format!("score {bad} outside [0, 1]")));
        }
        Ok(Self {
            scores,
            seed,
            heuristic,
        })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn get(&self, question: usize) -> f64 {
        self.scores[question]
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn heuristic(&self) -> Heuristic {
        self.heuristic
    }
}

/// Uniform `[0, 1)` score for every question.
pub fn score_random(matrix: &ResponseMatrix, seed: u64) -> ScoreVector {
    let mut rng = seeded_rng(seed);
    let scores = (0..matrix.num_questions())
        .map(|_| rng.random::<f64>())
        .collect();
    ScoreVector {
        scores,
        seed,
        heuristic: Heuristic::Random,
    }
}

/// Questions attaining the maximum separability, ascending.
pub fn max_separability_questions(matrix: &ResponseMatrix) -> Vec<usize> {
    let l = matrix.num_models();
    let even: Vec<usize> = (0..matrix.num_questions())
        .map(|q| evenness(matrix.column_sum(q), l))
        .collect();
    let best = even.iter().copied().max().unwrap_or(0);
    (0..even.len()).filter(|&q| even[q] == best).collect()
}

/// Maximally separable questions get a uniform score in `(0, 1]`, all other
/// questions get exactly 0.
pub fn score_separability(matrix: &ResponseMatrix, seed: u64) -> ScoreVector {
    let mut rng = seeded_rng(seed);
    let mut scores = vec![0.0; matrix.num_questions()];
    for q in max_separability_questions(matrix) {
        scores[q] = 1.0 - rng.random::<f64>();
    }
    ScoreVector {
        scores,
        seed,
        heuristic: Heuristic::Separability,
    }
}

/// Selection order of the recursive-similarity heuristic.
///
/// Works inside the maximally separable questions: starts from the least
/// similar pair, then repeatedly appends the question whose summed similarity
/// to the selection is smallest, while the selection holds at most `max_iter`
/// questions. Ties go to the smallest index (smallest pair for the seed pair).
///
/// Within that set all partitions share the same `s`, so the normalization is
/// one increasing affine map and raw block maxima give the same order.
pub fn recursive_similarity_selection(
    matrix: &ResponseMatrix,
    max_iter: usize,
) -> Result<Vec<usize>> {
    if matrix.num_questions() < 2 {
        return Err(Error::Precondition(
            "recursive similarity needs at least 2 questions".into(),
        ));
    }
    if max_iter == 0 {
        return Err(Error::Precondition("max_iter must be positive".into()));
    }
    let candidates = max_separability_questions(matrix);
    if candidates.len() == 1 {
        return Ok(candidates);
    }
    let parts: Vec<Partition> = candidates
        .iter()
        .map(|&q| matrix.partition_of(q))
        .collect::<Result<_>>()?;

    let mut seed_pair = (0, 1);
    let mut seed_value = usize::MAX;
    for i in 0..parts.len() {
        for j in i + 1..parts.len() {
            let v = similarity_block_max(&parts[i], &parts[j])?;
            if v < seed_value {
                seed_value = v;
                seed_pair = (i, j);
            }
        }
    }

    let mut picked = vec![false; parts.len()];
    let mut order = vec![seed_pair.0, seed_pair.1];
    picked[seed_pair.0] = true;
    picked[seed_pair.1] = true;
    // running Σ over the selection, per candidate
    let mut sums = vec![0usize; parts.len()];
    for &s in &order {
        accumulate(&parts, &picked, &mut sums, s)?;
    }

    while order.len() <= max_iter {
        let next = (0..parts.len())
            .filter(|&i| !picked[i])
            .min_by_key(|&i| (sums[i], i));
        let Some(next) = next else { break };
        picked[next] = true;
        order.push(next);
        accumulate(&parts, &picked, &mut sums, next)?;
    }
    Ok(order.into_iter().map(|i| candidates[i]).collect())
}

fn accumulate(
    parts: &[Partition],
    picked: &[bool],
    sums: &mut [usize],
    added: usize,
) -> Result<()> {
    for i in 0..parts.len() {
        if !picked[i] {
            sums[i] += similarity_block_max(&parts[i], &parts[added])?;
        }
    }
    Ok(())
}

/// Scores `1 − rank/max_iter` for selected questions (rank 0-based in
/// selection order) and 0 for the others. The seed only labels the vector:
/// every tie is broken by index.
pub fn score_recursive_similarity(
    matrix: &ResponseMatrix,
    max_iter: usize,
    seed: u64,
) -> Result<ScoreVector> {
    let order = recursive_similarity_selection(matrix, max_iter)?;
    let mut scores = vec![0.0; matrix.num_questions()];
    for (rank, q) in order.into_iter().enumerate() {
        scores[q] = 1.0 - rank as f64 / max_iter as f64;
    }
    ScoreVector::new(scores, seed, Heuristic::RecursiveSimilarity { max_iter })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Equal scores keep ascending question index.
    AscendingIndex,
    /// The order was given explicitly, not derived from scores.
    Explicit,
}

/// A permutation of all question indices, best question first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OrderedQuestionList {
    order: Vec<usize>,
    tie_break: TieBreak,
}

impl OrderedQuestionList {
    pub fn identity(num_questions: usize) -> Self {
        Self {
            order: (0..num_questions).collect(),
            tie_break: TieBreak::AscendingIndex,
        }
    }

    /// Wraps an explicit permutation of `0..order.len()`.
    pub fn from_permutation(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &q in &order {
            if q >= order.len() || std::mem::replace(&mut seen[q], true) {
                return Err(Error::Precondition(format!(
                    "{order:?} is not a permutation of 0..{}",
                    order.len()
                )));
            }
        }
        Ok(Self {
            order,
            tie_break: TieBreak::Explicit,
        })
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn tie_break(&self) -> TieBreak {
        self.tie_break
    }

    /// Question ids in this order.
    pub fn question_ids(&self, matrix: &ResponseMatrix) -> Vec<String> {
        self.order
            .iter()
            .map(|&q| matrix.question_ids()[q].clone())
            .collect()
    }
}

/// Sorts questions by decreasing score, ascending index on ties.
pub fn order_questions(sv: &ScoreVector) -> OrderedQuestionList {
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv.scores[b].total_cmp(&sv.scores[a]).then(a.cmp(&b)));
    OrderedQuestionList {
        order,
        tie_break: TieBreak::AscendingIndex,
    }
}
