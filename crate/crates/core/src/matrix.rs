//! Binary response matrices.
//!
//! A [`ResponseMatrix`] stores, for `L` models and `K` questions, whether each
//! model answered each question correctly. Columns are packed bit vectors since
//! per-question partitions are what every heuristic works on; rows are derived
//! on demand.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::bits::BitVector;
use crate::error::{Error, Result};

/// Models × binary questions. Immutable once built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResponseMatrix {
    model_ids: Vec<String>,
    question_ids: Vec<String>,
    columns: Vec<BitVector>,
}

impl ResponseMatrix {
    /// Builds a matrix from per-question columns, each of length `model_ids.len()`.
    pub fn from_columns(
        model_ids: Vec<String>,
        question_ids: Vec<String>,
        columns: Vec<BitVector>,
    ) -> Result<Self> {
        if model_ids.is_empty() {
            return Err(Error::NoModels);
        }
        if model_ids.len() < 2 {
            return Err(Error::InvalidMatrix(format!(
                "need at least 2 models, got {}",
                model_ids.len()
            )));
        }
        if question_ids.is_empty() {
            return Err(Error::InvalidMatrix("no questions".into()));
        }
        if columns.len() != question_ids.len() {
            return Err(Error::InvalidMatrix(format!(
                "{} question ids but {} columns",
                question_ids.len(),
                columns.len()
            )));
        }
        if let Some(c) = columns.iter().find(|c| c.len() != model_ids.len()) {
            return Err(Error::InvalidMatrix(format!(
                "column of length {} for {} models",
                c.len(),
                model_ids.len()
            )));
        }
        check_unique("model", &model_ids)?;
        check_unique("question", &question_ids)?;
        Ok(Self {
            model_ids,
            question_ids,
            columns,
        })
    }

    /// Builds a matrix from row-major bits.
    pub fn from_rows(
        model_ids: Vec<String>,
        question_ids: Vec<String>,
        rows: &[Vec<bool>],
    ) -> Result<Self> {
        if rows.len() != model_ids.len() {
            return Err(Error::InvalidMatrix(format!(
                "{} model ids but {} rows",
                model_ids.len(),
                rows.len()
            )));
        }
        let k = question_ids.len();
        if let Some(r) = rows.iter().find(|r| r.len() != k) {
            return Err(Error::InvalidMatrix(format!(
                "row of length {} for {k} questions",
                r.len()
            )));
        }
        let columns = (0..k)
            .map(|q| BitVector::from_bools(rows.iter().map(|r| r[q])))
            .collect();
        Self::from_columns(model_ids, question_ids, columns)
    }

    /// Builds a matrix from rows written as `"0101"` strings, naming models
    /// `m0, m1, ...` and questions `q0, q1, ...`. Handy for small fixtures.
    pub fn from_bit_strings(rows: &[&str]) -> Result<Self> {
        let mut parsed = Vec::with_capacity(rows.len());
        for (m, row) in rows.iter().enumerate() {
            let bits = row
                .chars()
                .enumerate()
                .map(|(q, ch)| match ch {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    other => Err(Error::Parse {
                        line: m as u64 + 1,
                        column: q + 1,
                        message: format!("expected 0 or 1, found {other:?}"),
                    }),
                })
                .collect::<Result<Vec<_>>>()?;
            parsed.push(bits);
        }
        let k = parsed.first().map_or(0, Vec::len);
        Self::from_rows(
            numbered_ids("m", parsed.len()),
            numbered_ids("q", k),
            &parsed,
        )
    }

    #[inline]
    pub fn num_models(&self) -> usize {
        self.model_ids.len()
    }

    #[inline]
    pub fn num_questions(&self) -> usize {
        self.question_ids.len()
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn question_ids(&self) -> &[String] {
        &self.question_ids
    }

    pub fn model_index(&self, id: &str) -> Option<usize> {
        self.model_ids.iter().position(|m| m == id)
    }

    pub fn question_index(&self, id: &str) -> Option<usize> {
        self.question_ids.iter().position(|q| q == id)
    }

    #[inline]
    pub fn bit(&self, model: usize, question: usize) -> bool {
        self.columns[question].get(model)
    }

    pub fn column(&self, question: usize) -> &BitVector {
        &self.columns[question]
    }

    pub fn columns(&self) -> &[BitVector] {
        &self.columns
    }

    /// Row view of one model's answers, in question order.
    pub fn row(&self, model: usize) -> BitVector {
        BitVector::from_bools(self.columns.iter().map(|c| c.get(model)))
    }

    pub fn rows(&self) -> Vec<BitVector> {
        (0..self.num_models()).map(|m| self.row(m)).collect()
    }

    pub fn column_sum(&self, question: usize) -> usize {
        self.columns[question].count_ones()
    }

    /// Total number of correct answers in the matrix.
    pub fn total_ones(&self) -> usize {
        self.columns.iter().map(BitVector::count_ones).sum()
    }

    pub fn check_model(&self, model: usize) -> Result<()> {
        if model >= self.num_models() {
            return Err(Error::IndexOutOfRange {
                what: "model",
                index: model,
                size: self.num_models(),
            });
        }
        Ok(())
    }

    pub fn check_question(&self, question: usize) -> Result<()> {
        if question >= self.num_questions() {
            return Err(Error::IndexOutOfRange {
                what: "question",
                index: question,
                size: self.num_questions(),
            });
        }
        Ok(())
    }

    /// The set of models answering 1 to `question`.
    pub fn partition_of(&self, question: usize) -> Result<Partition> {
        self.check_question(question)?;
        Ok(Partition {
            members: self.columns[question].clone(),
        })
    }

    /// Keeps only the given models, in the given order.
    pub fn select_models(&self, models: &[usize]) -> Result<Self> {
        for &m in models {
            self.check_model(m)?;
        }
        let ids = models.iter().map(|&m| self.model_ids[m].clone()).collect();
        let columns = self
            .columns
            .iter()
            .map(|c| BitVector::from_bools(models.iter().map(|&m| c.get(m))))
            .collect();
        Self::from_columns(ids, self.question_ids.clone(), columns)
    }

    /// Keeps only the given questions, in the given order.
    pub fn select_questions(&self, questions: &[usize]) -> Result<Self> {
        for &q in questions {
            self.check_question(q)?;
        }
        let ids = questions
            .iter()
            .map(|&q| self.question_ids[q].clone())
            .collect();
        let columns = questions.iter().map(|&q| self.columns[q].clone()).collect();
        Self::from_columns(self.model_ids.clone(), ids, columns)
    }

    /// Pairwise Hamming distances between response vectors.
    pub fn hamming_distance_matrix(&self) -> Vec<Vec<usize>> {
        let rows = self.rows();
        let n = rows.len();
        let mut d = vec![vec![0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let h = rows[i].xor_count(&rows[j]);
                d[i][j] = h;
                d[j][i] = h;
            }
        }
        d
    }

    /// For each `c` in `0..=L`, how many questions exactly `c` models got right.
    pub fn correct_count_histogram(&self) -> CorrectCountHistogram {
        let mut counts = vec![0usize; self.num_models() + 1];
        for c in &self.columns {
            counts[c.count_ones()] += 1;
        }
        CorrectCountHistogram { counts }
    }
}

fn check_unique(what: &str, ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::InvalidMatrix(format!("duplicate {what} id {id:?}")));
        }
    }
    Ok(())
}

/// `prefix0, prefix1, ...` zero-padded to a common width.
pub fn numbered_ids(prefix: &str, n: usize) -> Vec<String> {
    let width = n.saturating_sub(1).to_string().len();
    (0..n).map(|i| format!("{prefix}{i:0width$}")).collect()
}

/// The subset of models answering 1 to a question. The complement is implicit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    members: BitVector,
}

impl Partition {
    pub fn new(members: BitVector) -> Self {
        Self { members }
    }

    pub fn from_members(universe_size: usize, members: &[usize]) -> Result<Self> {
        let mut bits = BitVector::zeros(universe_size);
        for &m in members {
            if m >= universe_size {
                return Err(Error::IndexOutOfRange {
                    what: "model",
                    index: m,
                    size: universe_size,
                });
            }
            bits.set(m, true);
        }
        Ok(Self { members: bits })
    }

    pub fn universe_size(&self) -> usize {
        self.members.len()
    }

    /// `|X|`
    pub fn size(&self) -> usize {
        self.members.count_ones()
    }

    /// `|X̄|`
    pub fn complement_size(&self) -> usize {
        self.universe_size() - self.size()
    }

    pub fn contains(&self, model: usize) -> bool {
        self.members.get(model)
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter_ones()
    }

    pub fn bits(&self) -> &BitVector {
        &self.members
    }

    pub fn complement(&self) -> Self {
        Self {
            members: self.members.complement(),
        }
    }
}

/// Questions bucketed by how many models answered them correctly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorrectCountHistogram {
    counts: Vec<usize>,
}

impl CorrectCountHistogram {
    pub fn num_models(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn num_questions(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Number of questions with column sum `c`.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn fraction(&self, c: usize) -> f64 {
        self.counts[c] as f64 / self.num_questions() as f64
    }

    pub fn fractions(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|c| self.fraction(c)).collect()
    }

    /// Mean of `c / L` weighted by the histogram, as an exact ratio
    /// `(numerator, denominator)`.
    pub fn mean_rate_exact(&self) -> (u64, u64) {
        let num: u64 = self
            .counts
            .iter()
            .enumerate()
            .map(|(c, &n)| (c * n) as u64)
            .sum();
        (num, (self.num_models() * self.num_questions()) as u64)
    }
}

/// Reads a matrix CSV: header `model_id,<q1>,...,<qK>`, one `0`/`1` row per model.
pub fn read_matrix<R: Read>(reader: R) -> Result<ResponseMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        None => return Err(Error::NoModels),
        Some(r) => r.map_err(csv_error)?,
    };
    if header.get(0).map(str::trim) != Some("model_id") {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "header must start with model_id".into(),
        });
    }
    let question_ids: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let k = question_ids.len();

    let mut model_ids = Vec::new();
    let mut rows = Vec::new();
    for record in records {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != k + 1 {
            return Err(Error::Parse {
                line,
                column: record.len().min(k + 1),
                message: format!("expected {} fields, found {}", k + 1, record.len()),
            });
        }
        model_ids.push(record[0].to_owned());
        let mut row = Vec::with_capacity(k);
        for (col, cell) in record.iter().enumerate().skip(1) {
            row.push(match cell {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Parse {
                        line,
                        column: col + 1,
                        message: format!("cell must be 0 or 1, found {other:?}"),
                    })
                }
            });
        }
        rows.push(row);
    }
    if model_ids.is_empty() {
        return Err(Error::NoModels);
    }
    ResponseMatrix::from_rows(model_ids, question_ids, &rows)
}

pub fn write_matrix<W: Write>(matrix: &ResponseMatrix, writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    wtr.write_record(
        std::iter::once("model_id").chain(matrix.question_ids.iter().map(String::as_str)),
    )
    .map_err(csv_error)?;
    for m in 0..matrix.num_models() {
        wtr.write_record(
            std::iter::once(matrix.model_ids[m].as_str()).chain(matrix.columns.iter().map(|c| {
                if c.get(m) {
                    "1"
                } else {
                    "0"
                }
            })),
        )
        .map_err(csv_error)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<ResponseMatrix> {
    read_matrix(BufReader::new(File::open(path)?))
}

pub fn save_matrix(matrix: &ResponseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_matrix(matrix, &mut w)?;
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            column: 0,
            message: format!("{other:?}"),
        },
    }
}

/// A model's raw multiple-choice answer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Answer {
    Label(String),
    /// Refusals and answers that could not be parsed.
    Unparseable,
}

impl Answer {
    /// Marker used for unparseable answers in raw-answer CSV files.
    pub const UNPARSEABLE_MARKER: &'static str = "?";

    fn parse(cell: &str) -> Self {
        if cell == Self::UNPARSEABLE_MARKER {
            Answer::Unparseable
        } else {
            Answer::Label(cell.to_owned())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuestionKey {
    pub gold: String,
    pub options: BTreeSet<String>,
}

impl QuestionKey {
    pub fn option_count(&self) -> usize {
        self.options.len()
    }
}

/// Unbinarized multiple-choice answers of every model to every question.
#[derive(Clone, Debug)]
pub struct RawAnswerSet {
    model_ids: Vec<String>,
    question_ids: Vec<String>,
    keys: Vec<QuestionKey>,
    /// `answers[m][q]`
    answers: Vec<Vec<Answer>>,
}

impl RawAnswerSet {
    pub fn new(
        model_ids: Vec<String>,
        question_ids: Vec<String>,
        keys: Vec<QuestionKey>,
        answers: Vec<Vec<Answer>>,
    ) -> Result<Self> {
        if model_ids.is_empty() {
            return Err(Error::NoModels);
        }
        check_unique("model", &model_ids)?;
        check_unique("question", &question_ids)?;
        if keys.len() != question_ids.len() {
            return Err(Error::InvalidMatrix("one answer key per question".into()));
        }
        for (q, key) in keys.iter().enumerate() {
            if !key.options.contains(&key.gold) {
                return Err(Error::InvalidMatrix(format!(
                    "gold label {:?} of question {:?} is not among its options",
                    key.gold, question_ids[q]
                )));
            }
        }
        if answers.len() != model_ids.len() || answers.iter().any(|r| r.len() != question_ids.len())
        {
            return Err(Error::InvalidMatrix(
                "every model must answer every question".into(),
            ));
        }
        Ok(Self {
            model_ids,
            question_ids,
            keys,
            answers,
        })
    }

    pub fn keys(&self) -> &[QuestionKey] {
        &self.keys
    }

    pub fn answer(&self, model: usize, question: usize) -> &Answer {
        &self.answers[model][question]
    }
}

/// Reads a raw-answer CSV: header `model_id,question_id,chosen,gold`, one row
/// per (model, question). Models and questions keep first-appearance order;
/// a question's options are the gold label plus every parseable chosen label.
pub fn read_raw_answers<R: Read>(reader: R) -> Result<RawAnswerSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    let expected = ["model_id", "question_id", "chosen", "gold"];
    if header.len() != 4 || header.iter().zip(expected).any(|(h, e)| h.trim() != e) {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "header must be model_id,question_id,chosen,gold".into(),
        });
    }

    let mut model_pos: HashMap<String, usize> = HashMap::new();
    let mut question_pos: HashMap<String, usize> = HashMap::new();
    let mut model_ids = Vec::new();
    let mut question_ids = Vec::new();
    let mut keys: Vec<QuestionKey> = Vec::new();
    let mut cells: HashMap<(usize, usize), Answer> = HashMap::new();

    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 4 {
            return Err(Error::Parse {
                line,
                column: record.len(),
                message: format!("expected 4 fields, found {}", record.len()),
            });
        }
        let m = *model_pos.entry(record[0].to_owned()).or_insert_with(|| {
            model_ids.push(record[0].to_owned());
            model_ids.len() - 1
        });
        let gold = record[3].to_owned();
        let q = match question_pos.get(&record[1]) {
            Some(&q) => {
                if keys[q].gold != gold {
                    return Err(Error::Parse {
                        line,
                        column: 4,
                        message: format!(
                            "gold label {gold:?} conflicts with earlier {:?} for question {:?}",
                            keys[q].gold, &record[1]
                        ),
                    });
                }
                q
            }
            None => {
                question_ids.push(record[1].to_owned());
                keys.push(QuestionKey {
                    options: BTreeSet::from([gold.clone()]),
                    gold,
                });
                question_pos.insert(record[1].to_owned(), keys.len() - 1);
                keys.len() - 1
            }
        };
        let answer = Answer::parse(&record[2]);
        if let Answer::Label(label) = &answer {
            keys[q].options.insert(label.clone());
        }
        if cells.insert((m, q), answer).is_some() {
            return Err(Error::Parse {
                line,
                column: 1,
                message: format!("duplicate answer of {:?} to {:?}", &record[0], &record[1]),
            });
        }
    }

    let mut answers = Vec::with_capacity(model_ids.len());
    for (m, model) in model_ids.iter().enumerate() {
        let mut row = Vec::with_capacity(question_ids.len());
        for (q, question) in question_ids.iter().enumerate() {
            row.push(cells.remove(&(m, q)).ok_or_else(|| {
                Error::InvalidMatrix(format!(
                    "model {model:?} has no answer to question {question:?}"
                ))
            })?);
        }
        answers.push(row);
    }
    RawAnswerSet::new(model_ids, question_ids, keys, answers)
}

pub fn load_raw_answers(path: impl AsRef<Path>) -> Result<RawAnswerSet> {
    read_raw_answers(BufReader::new(File::open(path)?))
}

/// Output of [`binarize`].
#[derive(Clone, Debug)]
pub struct Binarized {
    pub matrix: ResponseMatrix,
    /// Number of unparseable answers, each mapped to 0.
    pub unparseable: usize,
}

/// Maps each answer to 1 iff it equals the gold label. Unparseable answers
/// become 0 and are tallied.
pub fn binarize(raw: &RawAnswerSet) -> Result<Binarized> {
    let mut unparseable = 0;
    let rows: Vec<Vec<bool>> = raw
        .answers
        .iter()
        .map(|row| {
            row.iter()
                .zip(&raw.keys)
                .map(|(answer, key)| match answer {
                    Answer::Label(label) => *label == key.gold,
                    Answer::Unparseable => {
                        unparseable += 1;
                        false
                    }
                })
                .collect()
        })
        .collect();
    let matrix = ResponseMatrix::from_rows(raw.model_ids.clone(), raw.question_ids.clone(), &rows)?;
    Ok(Binarized {
        matrix,
        unparseable,
    })
}
