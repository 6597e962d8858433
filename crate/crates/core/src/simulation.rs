//! Synthetic model populations.
//!
//! These stand in for the unknown distribution of real models:
//! - `Uniform`: every answer an independent fair coin;
//! - `Irt`: a logistic skill-minus-difficulty model, so easy and hard questions
//!   are shared across models;
//! - `Clones`: a few base models plus noisy copies of them.
//!
//! Every generator is a pure function of its [`PopulationSpec`]: bits are drawn
//! row-major from a single seeded stream.

use std::collections::HashSet;

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heuristics::seeded_rng;
use crate::matrix::{numbered_ids, ResponseMatrix};

/// Bumped whenever a generator's output for a given spec changes.
pub const GENERATOR_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PopulationKind {
    Uniform {
        /// Resample rows that duplicate an earlier row.
        #[serde(default)]
        distinct: bool,
    },
    Irt {
        skill_sd: f64,
        difficulty_sd: f64,
    },
    Clones {
        families: usize,
        flip_rate: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    #[serde(flatten)]
    pub kind: PopulationKind,
    pub models: usize,
    pub questions: usize,
    pub seed: u64,
}

impl PopulationSpec {
    pub fn uniform(models: usize, questions: usize, seed: u64) -> Self {
        Self {
            kind: PopulationKind::Uniform { distinct: false },
            models,
            questions,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.models < 2 {
            return Err(Error::Precondition(format!(
                "need at least 2 models, got {}",
                self.models
            )));
        }
        if self.questions < 1 {
            return Err(Error::Precondition("need at least 1 question".into()));
        }
        match self.kind {
            PopulationKind::Uniform { distinct: true } => {
                if self.questions < 64 && (1u64 << self.questions) < self.models as u64 {
                    return Err(Error::Precondition(format!(
                        "{} distinct rows do not fit in {} questions",
                        self.models, self.questions
                    )));
                }
            }
            PopulationKind::Uniform { distinct: false } => {}
            PopulationKind::Irt {
                skill_sd,
                difficulty_sd,
            } => {
                if !(skill_sd >= 0.0 && difficulty_sd >= 0.0)
                    || !skill_sd.is_finite()
                    || !difficulty_sd.is_finite()
                {
                    return Err(Error::Precondition(
                        "spreads must be finite and non-negative".into(),
                    ));
                }
            }
            PopulationKind::Clones {
                families,
                flip_rate,
            } => {
                if families == 0 || families > self.models {
                    return Err(Error::Precondition(format!(
                        "family count {families} must lie in 1..={}",
                        self.models
                    )));
                }
                if !(0.0..=1.0).contains(&flip_rate) {
                    return Err(Error::Precondition(format!(
                        "flip rate {flip_rate} outside [0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<ResponseMatrix> {
        match self.kind {
            PopulationKind::Uniform { .. } => gen_uniform(self),
            PopulationKind::Irt { .. } => gen_irt(self),
            PopulationKind::Clones { .. } => gen_clones(self),
        }
    }
}

fn build(spec: &PopulationSpec, rows: &[Vec<bool>]) -> Result<ResponseMatrix> {
    ResponseMatrix::from_rows(
        numbered_ids("m", spec.models),
        numbered_ids("q", spec.questions),
        rows,
    )
}

pub fn gen_uniform(spec: &PopulationSpec) -> Result<ResponseMatrix> {
    let PopulationKind::Uniform { distinct } = spec.kind else {
        return Err(Error::Precondition(
            "spec is not a uniform population".into(),
        ));
    };
    spec.validate()?;
    let mut rng = seeded_rng(spec.seed);
    let mut seen = HashSet::new();
    let mut rows = Vec::with_capacity(spec.models);
    while rows.len() < spec.models {
        let row: Vec<bool> = (0..spec.questions).map(|_| rng.random()).collect();
        if distinct && !seen.insert(row.clone()) {
            continue;
        }
        rows.push(row);
    }
    build(spec, &rows)
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Skills first (one per model), then difficulties (one per question), then
/// the bits row by row with `P(1) = logistic(skill − difficulty)`.
pub fn gen_irt(spec: &PopulationSpec) -> Result<ResponseMatrix> {
    let PopulationKind::Irt {
        skill_sd,
        difficulty_sd,
    } = spec.kind
    else {
        return Err(Error::Precondition("spec is not an IRT population".into()));
    };
    spec.validate()?;
    let mut rng = seeded_rng(spec.seed);
    let normal = |sd: f64| Normal::new(0.0, sd).expect("validated spread");
    let skills: Vec<f64> = normal(skill_sd)
        .sample_iter(&mut rng)
        .take(spec.models)
        .collect();
    let difficulties: Vec<f64> = normal(difficulty_sd)
        .sample_iter(&mut rng)
        .take(spec.questions)
        .collect();
    let rows: Vec<Vec<bool>> = skills
        .iter()
        .map(|s| {
            difficulties
                .iter()
                .map(|d| rng.random::<f64>() < logistic(s - d))
                .collect()
        })
        .collect();
    build(spec, &rows)
}

/// `families` uniform base rows, then copies assigned round-robin with each bit
/// flipped independently at `flip_rate`.
pub fn gen_clones(spec: &PopulationSpec) -> Result<ResponseMatrix> {
    let PopulationKind::Clones {
        families,
        flip_rate,
    } = spec.kind
    else {
        return Err(Error::Precondition(
            "spec is not a clones population".into(),
        ));
    };
    spec.validate()?;
    let mut rng = seeded_rng(spec.seed);
    let flip = Bernoulli::new(flip_rate).expect("validated flip rate");
    let mut rows: Vec<Vec<bool>> = (0..families)
        .map(|_| (0..spec.questions).map(|_| rng.random()).collect())
        .collect();
    for i in families..spec.models {
        let base = &rows[family_of(i, families)];
        let row: Vec<bool> = base.iter().map(|&b| b ^ flip.sample(&mut rng)).collect();
        rows.push(row);
    }
    build(spec, &rows)
}

/// Family of model `i` in a clones population (base rows are their own family).
pub fn family_of(model: usize, families: usize) -> usize {
    if model < families {
        model
    } else {
        (model - families) % families
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_distance(m: &ResponseMatrix, pairs: impl Iterator<Item = (usize, usize)>) -> f64 {
        let d = m.hamming_distance_matrix();
        let (mut sum, mut n) = (0usize, 0usize);
        for (a, b) in pairs {
            sum += d[a][b];
            n += 1;
        }
        sum as f64 / n as f64
    }

    fn all_pairs(l: usize) -> impl Iterator<Item = (usize, usize)> {
        (0..l).flat_map(move |a| (a + 1..l).map(move |b| (a, b)))
    }

    #[test]
    fn uniform_is_reproducible() {
        let spec = PopulationSpec::uniform(10, 30, 42);
        assert_eq!(spec.generate().unwrap(), spec.generate().unwrap());
        let other = PopulationSpec { seed: 43, ..spec };
        assert_ne!(spec.generate().unwrap(), other.generate().unwrap());
    }

    #[test]
    fn uniform_columns_concentrate() {
        let m = PopulationSpec::uniform(1000, 100, 7).generate().unwrap();
        let balanced = (0..100)
            .filter(|&q| (0.45..=0.55).contains(&(m.column_sum(q) as f64 / 1000.0)))
            .count();
        assert!(balanced >= 95, "{balanced}");
        let small = PopulationSpec::uniform(40, 100, 8).generate().unwrap();
        let mean = mean_distance(&small, all_pairs(40));
        assert!((45.0..=55.0).contains(&mean), "{mean}");
    }

    #[test]
    fn uniform_distinct_rows() {
        let spec = PopulationSpec {
            kind: PopulationKind::Uniform { distinct: true },
            models: 16,
            questions: 4,
            seed: 1,
        };
        let m = spec.generate().unwrap();
        let rows: HashSet<String> = m.rows().iter().map(|r| r.to_string()).collect();
        assert_eq!(rows.len(), 16);
        let too_many = PopulationSpec { models: 17, ..spec };
        assert!(too_many.generate().is_err());
    }

    #[test]
    fn irt_zero_spread_is_fair_coin() {
        let spec = PopulationSpec {
            kind: PopulationKind::Irt {
                skill_sd: 0.0,
                difficulty_sd: 0.0,
            },
            models: 22,
            questions: 5000,
            seed: 3,
        };
        let m = spec.generate().unwrap();
        let rate = m.total_ones() as f64 / (22.0 * 5000.0);
        assert!((rate - 0.5).abs() < 0.01, "{rate}");
    }

    #[test]
    fn irt_symmetric_mean_rate() {
        let spec = PopulationSpec {
            kind: PopulationKind::Irt {
                skill_sd: 1.0,
                difficulty_sd: 1.5,
            },
            models: 1000,
            questions: 5000,
            seed: 5,
        };
        let m = spec.generate().unwrap();
        let rate = m.total_ones() as f64 / (1000.0 * 5000.0);
        assert!((rate - 0.5).abs() < 0.02, "{rate}");
    }

    #[test]
    fn irt_difficulty_spread_departs_from_binomial() {
        use crate::experiment::binomial_reference;
        let tv = |kind| {
            let m = PopulationSpec {
                kind,
                models: 22,
                questions: 5000,
                seed: 9,
            }
            .generate()
            .unwrap();
            binomial_reference(&m.correct_count_histogram().fractions(), 22)
                .unwrap()
                .tv
        };
        let hard = tv(PopulationKind::Irt {
            skill_sd: 0.5,
            difficulty_sd: 4.0,
        });
        let flat = tv(PopulationKind::Uniform { distinct: false });
        assert!(hard > flat, "{hard} vs {flat}");

        let m = PopulationSpec {
            kind: PopulationKind::Irt {
                skill_sd: 0.5,
                difficulty_sd: 4.0,
            },
            models: 22,
            questions: 5000,
            seed: 9,
        }
        .generate()
        .unwrap();
        let h = m.correct_count_histogram().fractions();
        let tails: f64 = h[..3].iter().chain(&h[20..]).sum();
        let middle: f64 = h[9..14].iter().sum();
        assert!(tails > middle, "tails {tails} middle {middle}");
    }

    fn clones(flip_rate: f64, questions: usize) -> PopulationSpec {
        PopulationSpec {
            kind: PopulationKind::Clones {
                families: 4,
                flip_rate,
            },
            models: 22,
            questions,
            seed: 11,
        }
    }

    fn within_between(m: &ResponseMatrix) -> (f64, f64) {
        let l = m.num_models();
        let within = mean_distance(
            m,
            all_pairs(l).filter(|&(a, b)| family_of(a, 4) == family_of(b, 4)),
        );
        let between = mean_distance(
            m,
            all_pairs(l).filter(|&(a, b)| family_of(a, 4) != family_of(b, 4)),
        );
        (within, between)
    }

    #[test]
    fn exact_clones() {
        let m = clones(0.0, 200).generate().unwrap();
        let (within, _) = within_between(&m);
        assert_eq!(within, 0.0);
        let distinct: HashSet<String> = m.rows().iter().map(|r| r.to_string()).collect();
        assert_eq!(distinct.len(), 4);
    }

    #[test]
    fn fully_flipped_clones_are_independent() {
        let m = clones(0.5, 1000).generate().unwrap();
        let (within, between) = within_between(&m);
        assert!(
            (within / between - 1.0).abs() < 0.1,
            "{within} vs {between}"
        );
    }

    #[test]
    fn light_clones_stay_close() {
        // expected within-family distance: base vs clone εK = 10,
        // clone vs clone 2ε(1−ε)K ≈ 19.8; between families K/2
        let m = clones(0.01, 1000).generate().unwrap();
        let l = m.num_models();
        let d = m.hamming_distance_matrix();
        let clone_pairs: Vec<usize> = all_pairs(l)
            .filter(|&(a, b)| a >= 4 && family_of(a, 4) == family_of(b, 4))
            .map(|(a, b)| d[a][b])
            .collect();
        let mean = clone_pairs.iter().sum::<usize>() as f64 / clone_pairs.len() as f64;
        assert!((15.0..=25.0).contains(&mean), "{mean}");
        let (_, between) = within_between(&m);
        assert!((450.0..=550.0).contains(&between), "{between}");
    }

    #[test]
    fn invalid_specs() {
        assert!(clones(1.5, 10).generate().is_err());
        let mut s = clones(0.1, 10);
        s.kind = PopulationKind::Clones {
            families: 23,
            flip_rate: 0.1,
        };
        assert!(s.generate().is_err());
        assert!(PopulationSpec::uniform(1, 10, 0).generate().is_err());
        assert!(gen_irt(&PopulationSpec::uniform(3, 3, 0)).is_err());
    }
}
