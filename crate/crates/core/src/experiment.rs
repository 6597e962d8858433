//! The distinguishing experiment.
//!
//! For an ordering of the questions, every unordered pair of models is queried
//! along the ordering until the two answer differently. The histogram of those
//! first-difference indices is a [`DistinguishCdf`]; combined with the prior
//! probability that the two models are the same it yields an
//! [`AccuracyCurve`]. Repeated seeded runs are summarised by [`RunSummary`].

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Binomial, Discrete};

use crate::error::{Error, Result};
use crate::heuristics::{Heuristic, OrderedQuestionList};
use crate::matrix::ResponseMatrix;

/// Default prior probability that the two models are the same.
pub const DEFAULT_PRIOR_H0: f64 = 0.5;
/// Default number of questions on accuracy curves.
pub const DEFAULT_K_MAX: usize = 20;

/// 1-based position of the first question in `ordered` where the two models
/// answer differently, or `None` if they agree on every question.
pub fn first_discriminating_index(
    ordered: &OrderedQuestionList,
    matrix: &ResponseMatrix,
    m: usize,
    m2: usize,
) -> Result<Option<usize>> {
    matrix.check_model(m)?;
    matrix.check_model(m2)?;
    if m == m2 {
        return Err(Error::Precondition(
            "a model is never compared with itself".into(),
        ));
    }
    check_ordering(ordered, matrix)?;
    Ok(ordered
        .as_slice()
        .iter()
        .position(|&q| matrix.bit(m, q) != matrix.bit(m2, q))
        .map(|j| j + 1))
}

fn check_ordering(ordered: &OrderedQuestionList, matrix: &ResponseMatrix) -> Result<()> {
    if ordered.len() != matrix.num_questions() {
        return Err(Error::Precondition(format!(
            "ordering covers {} questions, matrix has {}",
            ordered.len(),
            matrix.num_questions()
        )));
    }
    Ok(())
}

/// Refines the model set question by question; returns, for each step, how
/// many pairs were first split there, plus the pairs never split.
pub(crate) fn refine<I>(matrix: &ResponseMatrix, questions: I) -> (Vec<u64>, u64)
where
    I: IntoIterator<Item = usize>,
{
    let mut groups: Vec<Vec<usize>> = vec![(0..matrix.num_models()).collect()];
    let mut split_at = Vec::new();
    let mut next = Vec::new();
    for q in questions {
        if groups.is_empty() {
            break;
        }
        let column = matrix.column(q);
        let mut split = 0u64;
        for group in groups.drain(..) {
            let (ones, zeros): (Vec<usize>, Vec<usize>) =
                group.into_iter().partition(|&m| column.get(m));
            split += (ones.len() * zeros.len()) as u64;
            for g in [ones, zeros] {
                if g.len() > 1 {
                    next.push(g);
                }
            }
        }
        std::mem::swap(&mut groups, &mut next);
        split_at.push(split);
    }
    let never = groups.iter().map(|g| pairs_in(g.len())).sum();
    (split_at, never)
}

#[inline]
pub(crate) fn pairs_in(n: usize) -> u64 {
    (n as u64) * (n as u64).saturating_sub(1) / 2
}

/// Number of unordered distinct pairs that differ on at least one question of `set`.
pub(crate) fn distinguished_pairs(matrix: &ResponseMatrix, set: &[usize]) -> u64 {
    let (_, never) = refine(matrix, set.iter().copied());
    pairs_in(matrix.num_models()) - never
}

/// How many pairs are first told apart at each number of questions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DistinguishCdf {
    counts: BTreeMap<usize, u64>,
    undistinguished: u64,
    total_pairs: u64,
}

impl DistinguishCdf {
    pub fn new(counts: BTreeMap<usize, u64>, undistinguished: u64) -> Result<Self> {
        if counts.contains_key(&0) {
            return Err(Error::Precondition("question counts start at 1".into()));
        }
        let total_pairs = counts.values().sum::<u64>() + undistinguished;
        Ok(Self {
            counts,
            undistinguished,
            total_pairs,
        })
    }

    /// Pairs first distinguished after exactly `k` questions.
    pub fn counts(&self) -> &BTreeMap<usize, u64> {
        &self.counts
    }

    pub fn pairs_at(&self, k: usize) -> u64 {
        self.counts.get(&k).copied().unwrap_or(0)
    }

    /// Pairs identical on every ordered question.
    pub fn undistinguished(&self) -> u64 {
        self.undistinguished
    }

    pub fn total_pairs(&self) -> u64 {
        self.total_pairs
    }

    /// Pairs distinguished within `k` questions.
    pub fn cum_pairs(&self, k: usize) -> u64 {
        self.counts.range(..=k).map(|(_, &c)| c).sum()
    }

    pub fn cum_fraction(&self, k: usize) -> f64 {
        if self.total_pairs == 0 {
            return 0.0;
        }
        self.cum_pairs(k) as f64 / self.total_pairs as f64
    }

    /// Largest `k` at which some pair is first distinguished.
    pub fn max_k(&self) -> Option<usize> {
        self.counts.keys().next_back().copied()
    }

    /// Smallest `k` whose cumulative distinguished fraction reaches `target`.
    pub fn questions_for(&self, target: f64) -> Option<usize> {
        let mut cum = 0u64;
        for (&k, &c) in &self.counts {
            cum += c;
            if cum as f64 >= target * self.total_pairs as f64 {
                return Some(k);
            }
        }
        None
    }
}

/// Runs the experiment for one ordering over every unordered pair of models.
pub fn run_pairwise(
    matrix: &ResponseMatrix,
    ordered: &OrderedQuestionList,
) -> Result<DistinguishCdf> {
    check_ordering(ordered, matrix)?;
    let (split_at, undistinguished) = refine(matrix, ordered.as_slice().iter().copied());
    let counts = split_at
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c > 0)
        .map(|(j, c)| (j + 1, c))
        .collect();
    DistinguishCdf::new(counts, undistinguished)
}

/// Accuracy of the equality test as a function of the question budget.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AccuracyCurve {
    pub prior_h0: f64,
    /// `points[k - 1]` is the accuracy with `k` questions.
    pub points: Vec<f64>,
    pub auc: f64,
}

impl AccuracyCurve {
    pub fn k_max(&self) -> usize {
        self.points.len()
    }

    pub fn accuracy(&self, k: usize) -> f64 {
        self.points[k - 1]
    }

    /// Smallest `k ≤ k_max` reaching `target` accuracy.
    pub fn questions_to_accuracy(&self, target: f64) -> Option<usize> {
        self.points.iter().position(|&a| a >= target).map(|i| i + 1)
    }
}

/// `acc(k) = P(H0) + (1 − P(H0)) · P(t ≤ k)`, for `k = 1..=k_max`. Same-model
/// pairs are always accepted, so they count fully towards accuracy.
pub fn cdf_to_accuracy(cdf: &DistinguishCdf, prior_h0: f64, k_max: usize) -> Result<AccuracyCurve> {
    if !(0.0..=1.0).contains(&prior_h0) {
        return Err(Error::Precondition(format!(
            "prior {prior_h0} is not a probability"
        )));
    }
    if k_max == 0 {
        return Err(Error::Precondition("k_max must be positive".into()));
    }
    let points: Vec<f64> = (1..=k_max)
        .map(|k| prior_h0 + (1.0 - prior_h0) * cdf.cum_fraction(k))
        .collect();
    let auc = points.iter().sum::<f64>() / k_max as f64;
    Ok(AccuracyCurve {
        prior_h0,
        points,
        auc,
    })
}

/// Fraction of unordered distinct pairs that differ on at least one question of `set`.
pub fn monte_carlo_true_negative(matrix: &ResponseMatrix, set: &[usize]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::Precondition("question set is empty".into()));
    }
    for &q in set {
        matrix.check_question(q)?;
    }
    Ok(distinguished_pairs(matrix, set) as f64 / pairs_in(matrix.num_models()) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunPick {
    /// Position in the input list.
    pub index: usize,
    pub auc: f64,
    pub points: Vec<f64>,
}

/// Pointwise statistics over repeated runs, with the best and worst runs by AUC.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub runs: usize,
    pub mean: Vec<f64>,
    /// Population standard deviation.
    pub std: Vec<f64>,
    pub mean_auc: f64,
    pub best: RunPick,
    pub worst: RunPick,
}

/// Ties in AUC go to the earliest run.
pub fn aggregate_runs(runs: &[AccuracyCurve]) -> Result<RunSummary> {
    let first = runs
        .first()
        .ok_or_else(|| Error::Precondition("no runs to aggregate".into()))?;
    let k = first.k_max();
    if runs.iter().any(|r| r.k_max() != k) {
        return Err(Error::Precondition("runs cover different k ranges".into()));
    }
    let n = runs.len() as f64;
    let mean: Vec<f64> = (0..k)
        .map(|i| runs.iter().map(|r| r.points[i]).sum::<f64>() / n)
        .collect();
    let std = (0..k)
        .map(|i| {
            let var = runs
                .iter()
                .map(|r| (r.points[i] - mean[i]).powi(2))
                .sum::<f64>()
                / n;
            var.sqrt()
        })
        .collect();
    let mean_auc = runs.iter().map(|r| r.auc).sum::<f64>() / n;

    let mut best = 0;
    let mut worst = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.auc > runs[best].auc {
            best = i;
        }
        if r.auc < runs[worst].auc {
            worst = i;
        }
    }
    let pick = |i: usize| RunPick {
        index: i,
        auc: runs[i].auc,
        points: runs[i].points.clone(),
    };
    Ok(RunSummary {
        runs: runs.len(),
        mean,
        std,
        mean_auc,
        best: pick(best),
        worst: pick(worst),
    })
}

/// Parameters of a multi-run experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub heuristic: Heuristic,
    /// Run `i` uses seed `base_seed + i` (wrapping).
    pub base_seed: u64,
    pub runs: usize,
    pub k_max: usize,
    pub prior_h0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub seed: u64,
    pub cdf: DistinguishCdf,
    pub curve: AccuracyCurve,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub runs: Vec<RunRecord>,
    pub summary: RunSummary,
}

pub fn run_seed(base_seed: u64, run: usize) -> u64 {
    base_seed.wrapping_add(run as u64)
}

/// Runs the heuristic `config.runs` times with derived seeds. Runs execute on
/// the current rayon pool; the result does not depend on the pool size.
pub fn run_experiment(
    matrix: &ResponseMatrix,
    config: &ExperimentConfig,
) -> Result<ExperimentResult> {
    if config.runs == 0 {
        return Err(Error::Precondition("at least one run is required".into()));
    }
    let runs = (0..config.runs)
        .into_par_iter()
        .map(|i| {
            let seed = run_seed(config.base_seed, i);
            let ordered = config.heuristic.ordering(matrix, seed)?;
            let cdf = run_pairwise(matrix, &ordered)?;
            let curve = cdf_to_accuracy(&cdf, config.prior_h0, config.k_max)?;
            Ok(RunRecord { seed, cdf, curve })
        })
        .collect::<Result<Vec<_>>>()?;
    let curves: Vec<AccuracyCurve> = runs.iter().map(|r| r.curve.clone()).collect();
    let summary = aggregate_runs(&curves)?;
    Ok(ExperimentResult { runs, summary })
}

/// Histogram compared with the binomial law of independent models.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BinomialReference {
    /// Average correct rate `Σ (c/L)·hist(c)`.
    pub p_bar: f64,
    /// `Binomial(L, p_bar)` pmf over `c = 0..=L`.
    pub pmf: Vec<f64>,
    /// Total variation distance between the histogram and `pmf`.
    pub tv: f64,
}

/// Reference binomial with the same mean as the correct-count histogram
/// `hist` (fractions over `c = 0..=L`), and its total variation distance.
pub fn binomial_reference(hist: &[f64], num_models: usize) -> Result<BinomialReference> {
    if hist.len() != num_models + 1 {
        return Err(Error::Precondition(format!(
            "histogram has {} bins, expected {}",
            hist.len(),
            num_models + 1
        )));
    }
    let l = num_models as f64;
    let p_bar = hist
        .iter()
        .enumerate()
        .map(|(c, &f)| c as f64 / l * f)
        .sum::<f64>()
        .clamp(0.0, 1.0);
    let binom = Binomial::new(p_bar, num_models as u64)
        .map_err(|e| Error::Precondition(format!("binomial reference: {e}")))?;
    let pmf: Vec<f64> = (0..=num_models as u64).map(|c| binom.pmf(c)).collect();
    let tv = 0.5
        * hist
            .iter()
            .zip(&pmf)
            .map(|(h, p)| (h - p).abs())
            .sum::<f64>();
    Ok(BinomialReference { p_bar, pmf, tv })
}

/// Questions needed at one population size.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SweepPoint {
    pub num_models: usize,
    /// `None` when even the full ordering falls short of the target.
    pub k_needed: Option<usize>,
}

/// For each population, the shortest prefix of the heuristic's ordering that
/// distinguishes at least `target` of the pairs.
pub fn scalability_sweep(
    populations: &[ResponseMatrix],
    heuristic: Heuristic,
    seed: u64,
    target: f64,
) -> Result<Vec<SweepPoint>> {
    scalability_sweep_with(populations, target, |m| heuristic.ordering(m, seed))
}

/// [`scalability_sweep`] with an arbitrary ordering rule.
pub fn scalability_sweep_with<F>(
    populations: &[ResponseMatrix],
    target: f64,
    ordering: F,
) -> Result<Vec<SweepPoint>>
where
    F: Fn(&ResponseMatrix) -> Result<OrderedQuestionList>,
{
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::Precondition(format!(
            "target {target} must lie in (0, 1]"
        )));
    }
    populations
        .iter()
        .map(|m| {
            let cdf = run_pairwise(m, &ordering(m)?)?;
            Ok(SweepPoint {
                num_models: m.num_models(),
                k_needed: cdf.questions_for(target),
            })
        })
        .collect()
}
