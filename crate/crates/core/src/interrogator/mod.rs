//! Live equality test between two model oracles.
//!
//! Both oracles are asked the ordered questions one at a time. The first
//! disagreement rejects "same model"; agreeing on every question within the
//! budget accepts it. A failing oracle aborts the test, which is reported as
//! its own outcome and never as an acceptance.

mod remote;

use std::collections::HashMap;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, OracleError, Result};
use crate::matrix::ResponseMatrix;
use crate::BitVector;

pub use remote::{serve_connection, RemoteConfig, RemoteOracle, Request, Response};

/// Default question budget of a live test.
pub const DEFAULT_BUDGET: usize = 20;

/// A deterministic source of binary answers.
pub trait ModelOracle: Send {
    fn answer(&mut self, question_id: &str) -> Result<bool, OracleError>;

    /// Whether queries should overlap with the other oracle's (e.g. network
    /// round trips).
    fn concurrent(&self) -> bool {
        false
    }
}

impl<O: ModelOracle + ?Sized> ModelOracle for Box<O> {
    fn answer(&mut self, question_id: &str) -> Result<bool, OracleError> {
        (**self).answer(question_id)
    }

    fn concurrent(&self) -> bool {
        (**self).concurrent()
    }
}

/// Answers from one stored row of a response matrix.
#[derive(Clone, Debug)]
pub struct MatrixOracle {
    row: BitVector,
    index: Arc<HashMap<String, usize>>,
}

impl MatrixOracle {
    pub fn new(matrix: &ResponseMatrix, model: usize) -> Result<Self> {
        matrix.check_model(model)?;
        let index = matrix
            .question_ids()
            .iter()
            .enumerate()
            .map(|(i, q)| (q.clone(), i))
            .collect();
        Ok(Self {
            row: matrix.row(model),
            index: Arc::new(index),
        })
    }

    /// Oracles for several models sharing one question index.
    pub fn for_models(matrix: &ResponseMatrix, models: &[usize]) -> Result<Vec<Self>> {
        let Some(&first) = models.first() else {
            return Ok(Vec::new());
        };
        let proto = Self::new(matrix, first)?;
        models
            .iter()
            .map(|&m| {
                matrix.check_model(m)?;
                Ok(Self {
                    row: matrix.row(m),
                    index: Arc::clone(&proto.index),
                })
            })
            .collect()
    }
}

pub fn matrix_oracle(matrix: &ResponseMatrix, model: usize) -> Result<MatrixOracle> {
    MatrixOracle::new(matrix, model)
}

impl ModelOracle for MatrixOracle {
    fn answer(&mut self, question_id: &str) -> Result<bool, OracleError> {
        self.index
            .get(question_id)
            .map(|&q| self.row.get(q))
            .ok_or_else(|| OracleError::UnknownQuestion(question_id.to_owned()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    AcceptH0,
    RejectH0,
    Aborted,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TranscriptEntry {
    pub question_id: String,
    pub answer_a: bool,
    pub answer_b: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub decision: Decision,
    pub queries_used: usize,
    pub first_disagreement: Option<String>,
    /// Only questions both oracles answered.
    pub transcript: Vec<TranscriptEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abort_reason: Option<String>,
}

impl Verdict {
    /// `1 − 2^−k` for an acceptance after `k` agreements: the rejection
    /// probability an ideally halving question sequence would have had against
    /// a random different model. Advisory only; real orderings do worse.
    pub fn advisory_confidence(&self) -> Option<f64> {
        match self.decision {
            Decision::AcceptH0 => Some(1.0 - 0.5f64.powi(self.queries_used as i32)),
            _ => None,
        }
    }
}

fn ask_both<A, B>(
    a: &mut A,
    b: &mut B,
    question_id: &str,
) -> (Result<bool, OracleError>, Result<bool, OracleError>)
where
    A: ModelOracle + ?Sized,
    B: ModelOracle + ?Sized,
{
    if a.concurrent() && b.concurrent() {
        std::thread::scope(|s| {
            let ha = s.spawn(|| a.answer(question_id));
            let rb = b.answer(question_id);
            let ra = ha
                .join()
                .unwrap_or_else(|_| Err(OracleError::Transport("oracle thread panicked".into())));
            (ra, rb)
        })
    } else {
        (a.answer(question_id), b.answer(question_id))
    }
}

/// Asks `questions` in order until the oracles disagree or `budget` questions
/// have been asked.
pub fn sequential_test<A, B>(
    a: &mut A,
    b: &mut B,
    questions: &[String],
    budget: usize,
) -> Result<Verdict>
where
    A: ModelOracle + ?Sized,
    B: ModelOracle + ?Sized,
{
    if budget == 0 {
        return Err(Error::Precondition("budget must be at least 1".into()));
    }
    if questions.is_empty() {
        return Err(Error::Precondition("no questions to ask".into()));
    }
    let mut transcript = Vec::new();
    for question_id in questions.iter().take(budget) {
        let (ra, rb) = ask_both(a, b, question_id);
        let (answer_a, answer_b) = match (ra, rb) {
            (Ok(x), Ok(y)) => (x, y),
            (Err(e), _) | (_, Err(e)) => {
                return Ok(Verdict {
                    decision: Decision::Aborted,
                    queries_used: transcript.len(),
                    first_disagreement: None,
                    transcript,
                    abort_reason: Some(format!("{question_id}: {e}")),
                });
            }
        };
        transcript.push(TranscriptEntry {
            question_id: question_id.clone(),
            answer_a,
            answer_b,
        });
        if answer_a != answer_b {
            return Ok(Verdict {
                decision: Decision::RejectH0,
                queries_used: transcript.len(),
                first_disagreement: Some(question_id.clone()),
                transcript,
                abort_reason: None,
            });
        }
    }
    Ok(Verdict {
        decision: Decision::AcceptH0,
        queries_used: transcript.len(),
        first_disagreement: None,
        transcript,
        abort_reason: None,
    })
}
