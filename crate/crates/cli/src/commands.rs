use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use distinguish_core::experiment::{
    binomial_reference, run_experiment, scalability_sweep_with, ExperimentConfig, DEFAULT_K_MAX,
    DEFAULT_PRIOR_H0,
};
use distinguish_core::heuristics::{order_questions, Heuristic, DEFAULT_MAX_ITER};
use distinguish_core::interrogator::{
    sequential_test, MatrixOracle, ModelOracle, RemoteConfig, RemoteOracle, DEFAULT_BUDGET,
};
use distinguish_core::matrix::{load_matrix, write_matrix, ResponseMatrix};
use distinguish_core::simulation::{PopulationKind, PopulationSpec, GENERATOR_VERSION};
use distinguish_core::theory::{
    balanced_ordering, brute_force_best_set, complete_model_set, OptimalLaw,
    DEFAULT_BRUTE_FORCE_BUDGET,
};

use crate::config::{manifest_config, Common, HasCommon};
use crate::output::{manifest, OutputDir};

macro_rules! has_common {
    ($($t:ty),*) => {
        $(impl HasCommon for $t {
            fn common(&self) -> &Common {
                &self.common
            }
        })*
    };
}

has_common!(
    SimulateArgs,
    ScoreArgs,
    ExperimentArgs,
    TheoryArgs,
    AnalyzeArgs,
    ScalabilityArgs,
    InterrogateArgs
);

fn required<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.with_context(|| format!("missing --{flag}"))
}

fn parse_heuristic(name: &str, max_iter: Option<usize>) -> Result<Heuristic> {
    let h: Heuristic = name.parse().map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(match h {
        Heuristic::RecursiveSimilarity { .. } => Heuristic::RecursiveSimilarity {
            max_iter: max_iter.unwrap_or(DEFAULT_MAX_ITER),
        },
        other => other,
    })
}

fn load(path: &Path) -> Result<ResponseMatrix> {
    load_matrix(path).with_context(|| format!("loading matrix {}", path.display()))
}

fn matrix_csv(m: &ResponseMatrix) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_matrix(m, &mut buf)?;
    Ok(buf)
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// uniform, irt or clones.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub models: Option<usize>,
    #[arg(long)]
    pub questions: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Resample duplicate rows (uniform only).
    #[arg(long)]
    #[serde(default)]
    pub distinct: bool,
    /// Skill standard deviation (irt, default 1).
    #[arg(long)]
    pub skill_sd: Option<f64>,
    /// Difficulty standard deviation (irt, default 1.5).
    #[arg(long)]
    pub difficulty_sd: Option<f64>,
    /// Number of base rows (clones).
    #[arg(long)]
    pub families: Option<usize>,
    /// Per-bit flip probability (clones).
    #[arg(long)]
    pub flip: Option<f64>,
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let kind = match required(a.kind.as_deref(), "kind")? {
        "uniform" => PopulationKind::Uniform {
            distinct: a.distinct,
        },
        "irt" => PopulationKind::Irt {
            skill_sd: a.skill_sd.unwrap_or(1.0),
            difficulty_sd: a.difficulty_sd.unwrap_or(1.5),
        },
        "clones" => PopulationKind::Clones {
            families: required(a.families, "families")?,
            flip_rate: required(a.flip, "flip")?,
        },
        other => bail!("unknown population kind {other:?} (expected uniform, irt or clones)"),
    };
    let spec = PopulationSpec {
        kind,
        models: required(a.models, "models")?,
        questions: required(a.questions, "questions")?,
        seed: required(a.seed, "seed")?,
    };
    let matrix = spec.generate()?;

    let out = OutputDir::prepare(&a.common, &["matrix.csv", "manifest.json"])?;
    out.write("matrix.csv", &matrix_csv(&matrix)?)?;
    let details = json!({ "population": spec, "generator_version": GENERATOR_VERSION });
    out.write_json(
        "manifest.json",
        &manifest("simulate", manifest_config(&a)?, &[], details)?,
    )
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ScoreArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// rand, sep or sim.
    #[arg(long)]
    pub heuristic: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Selection length of sim.
    #[arg(long)]
    pub max_iter: Option<usize>,
}

pub fn score(a: ScoreArgs) -> Result<()> {
    let path = required(a.matrix.as_deref(), "matrix")?;
    let heuristic = parse_heuristic(required(a.heuristic.as_deref(), "heuristic")?, a.max_iter)?;
    let seed = required(a.seed, "seed")?;
    let matrix = load(path)?;
    let scores = heuristic.score(&matrix, seed)?;
    let order = order_questions(&scores);

    let out = OutputDir::prepare(&a.common, &["scores.csv", "manifest.json"])?;
    let ids = matrix.question_ids();
    out.write_csv(
        "scores.csv",
        &["question_id", "score"],
        order
            .as_slice()
            .iter()
            .map(|&q| [ids[q].clone(), scores.get(q).to_string()]),
    )?;
    let details = json!({ "heuristic": heuristic });
    out.write_json(
        "manifest.json",
        &manifest("score", manifest_config(&a)?, &[path], details)?,
    )
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ExperimentArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// rand, sep or sim.
    #[arg(long)]
    pub heuristic: Option<String>,
    /// Run `i` uses `seed + i`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of runs (default 2000).
    #[arg(long)]
    pub runs: Option<usize>,
    /// Largest question budget evaluated (default 20).
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Prior probability that the two models are the same (default 0.5).
    #[arg(long)]
    pub prior: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Accuracy whose question count is reported (default 0.95).
    #[arg(long)]
    pub target: Option<f64>,
}

pub fn experiment(a: ExperimentArgs) -> Result<()> {
    let path = required(a.matrix.as_deref(), "matrix")?;
    let config = ExperimentConfig {
        heuristic: parse_heuristic(required(a.heuristic.as_deref(), "heuristic")?, a.max_iter)?,
        base_seed: required(a.seed, "seed")?,
        runs: a.runs.unwrap_or(2000),
        k_max: a.k_max.unwrap_or(DEFAULT_K_MAX),
        prior_h0: a.prior.unwrap_or(DEFAULT_PRIOR_H0),
    };
    let target = a.target.unwrap_or(0.95);
    let matrix = load(path)?;
    let result = run_experiment(&matrix, &config)?;
    let s = &result.summary;

    let out = OutputDir::prepare(
        &a.common,
        &["cdf.csv", "curves.csv", "summary.json", "manifest.json"],
    )?;
    let first = &result.runs[0];
    out.write_csv(
        "cdf.csv",
        &["k", "pairs_at_k", "cum_pairs", "cum_fraction", "accuracy"],
        (1..=config.k_max).map(|k| {
            [
                k.to_string(),
                first.cdf.pairs_at(k).to_string(),
                first.cdf.cum_pairs(k).to_string(),
                first.cdf.cum_fraction(k).to_string(),
                first.curve.accuracy(k).to_string(),
            ]
        }),
    )?;
    out.write_csv(
        "curves.csv",
        &["k", "mean", "std", "best", "worst"],
        (0..config.k_max).map(|i| {
            [
                (i + 1).to_string(),
                s.mean[i].to_string(),
                s.std[i].to_string(),
                s.best.points[i].to_string(),
                s.worst.points[i].to_string(),
            ]
        }),
    )?;
    let pick = |p: &distinguish_core::experiment::RunPick| json!({ "run": p.index, "seed": result.runs[p.index].seed, "auc": p.auc });
    let reached: Vec<usize> = result
        .runs
        .iter()
        .filter_map(|r| r.curve.questions_to_accuracy(target))
        .collect();
    let summary = json!({
        "heuristic": config.heuristic,
        "seed_policy": "run i uses seed + i",
        "base_seed": config.base_seed,
        "runs": config.runs,
        "k_max": config.k_max,
        "prior_h0": config.prior_h0,
        "total_pairs": first.cdf.total_pairs(),
        "mean": s.mean,
        "std": s.std,
        "mean_auc": s.mean_auc,
        "best": pick(&s.best),
        "worst": pick(&s.worst),
        "target": target,
        "runs_reaching_target": reached.len(),
        "mean_questions_to_target": (!reached.is_empty())
            .then(|| reached.iter().sum::<usize>() as f64 / reached.len() as f64),
    });
    out.write_json("summary.json", &summary)?;
    out.write_json(
        "manifest.json",
        &manifest("experiment", manifest_config(&a)?, &[path], json!({}))?,
    )
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct TheoryArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// finite or infinite.
    #[arg(long)]
    pub law: Option<String>,
    /// log2 of the population size (finite law).
    #[arg(long)]
    pub n: Option<u32>,
    /// Largest k tabulated.
    #[arg(long)]
    pub kmax: Option<u32>,
    /// Search every size-k question set of --matrix instead.
    #[arg(long)]
    #[serde(default)]
    pub brute_force: bool,
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Most sets the search may examine (default 10^7).
    #[arg(long)]
    pub budget: Option<u64>,
}

pub fn theory(a: TheoryArgs) -> Result<()> {
    if a.brute_force {
        if a.law.is_some() {
            bail!("--law and --brute-force are exclusive");
        }
        let path = required(a.matrix.as_deref(), "matrix")?;
        let k = required(a.k, "k")?;
        let matrix = load(path)?;
        let r = brute_force_best_set(&matrix, k, a.budget.unwrap_or(DEFAULT_BRUTE_FORCE_BUDGET))?;
        let out = OutputDir::prepare(&a.common, &["brute_force.json", "manifest.json"])?;
        let ids = matrix.question_ids();
        let sets: Vec<Vec<&str>> = r
            .best_sets
            .iter()
            .map(|s| s.iter().map(|&q| ids[q].as_str()).collect())
            .collect();
        out.write_json(
            "brute_force.json",
            &json!({
                "k": r.k,
                "best_fraction": r.best_fraction,
                "best_pairs": r.best_pairs,
                "total_pairs": r.total_pairs,
                "best_sets": sets,
                "sets_examined": r.sets_examined,
            }),
        )?;
        return out.write_json(
            "manifest.json",
            &manifest("theory", manifest_config(&a)?, &[path], json!({}))?,
        );
    }

    let kmax = required(a.kmax, "kmax")?;
    let law = match required(a.law.as_deref(), "law")? {
        "finite" => OptimalLaw::finite(required(a.n, "n")?, kmax)?,
        "infinite" => OptimalLaw::infinite(kmax)?,
        other => bail!("unknown law {other:?} (expected finite or infinite)"),
    };
    let out = OutputDir::prepare(&a.common, &["law.csv", "manifest.json"])?;
    out.write_csv(
        "law.csv",
        &["k", "p", "exact"],
        law.to_f64()
            .iter()
            .zip(&law.values)
            .enumerate()
            .map(|(i, (p, exact))| [(i + 1).to_string(), p.to_string(), exact.to_string()]),
    )?;
    out.write_json(
        "manifest.json",
        &manifest("theory", manifest_config(&a)?, &[], json!({}))?,
    )
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct AnalyzeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Also write the model-by-model Hamming distances.
    #[arg(long)]
    #[serde(default)]
    pub distances: bool,
}

pub fn analyze(a: AnalyzeArgs) -> Result<()> {
    let path = required(a.matrix.as_deref(), "matrix")?;
    let matrix = load(path)?;
    let hist = matrix.correct_count_histogram();
    let fractions = hist.fractions();
    let reference = binomial_reference(&fractions, matrix.num_models())?;

    let mut files = vec![
        "histogram.csv",
        "binomial.csv",
        "analysis.json",
        "manifest.json",
    ];
    if a.distances {
        files.push("distances.csv");
    }
    let out = OutputDir::prepare(&a.common, &files)?;
    out.write_csv(
        "histogram.csv",
        &["c", "questions", "fraction"],
        hist.counts()
            .iter()
            .zip(&fractions)
            .enumerate()
            .map(|(c, (n, f))| [c.to_string(), n.to_string(), f.to_string()]),
    )?;
    out.write_csv(
        "binomial.csv",
        &["c", "empirical", "binomial"],
        fractions
            .iter()
            .zip(&reference.pmf)
            .enumerate()
            .map(|(c, (f, p))| [c.to_string(), f.to_string(), p.to_string()]),
    )?;
    let l = matrix.num_models() as f64;
    let mean = |xs: &[f64]| {
        xs.iter()
            .enumerate()
            .map(|(c, x)| c as f64 * x)
            .sum::<f64>()
    };
    out.write_json(
        "analysis.json",
        &json!({
            "models": matrix.num_models(),
            "questions": matrix.num_questions(),
            "p_bar": reference.p_bar,
            "tv": reference.tv,
            "mean_correct_empirical": mean(&fractions),
            "mean_correct_binomial": mean(&reference.pmf),
            "expected_mean": l * reference.p_bar,
        }),
    )?;
    if a.distances {
        let d = matrix.hamming_distance_matrix();
        let mut header = vec!["model_id"];
        header.extend(matrix.model_ids().iter().map(String::as_str));
        out.write_csv(
            "distances.csv",
            &header,
            matrix.model_ids().iter().zip(&d).map(|(id, row)| {
                std::iter::once(id.clone())
                    .chain(row.iter().map(usize::to_string))
                    .collect::<Vec<_>>()
            }),
        )?;
    }
    out.write_json(
        "manifest.json",
        &manifest("analyze", manifest_config(&a)?, &[path], json!({}))?,
    )
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ScalabilityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Population matrices, comma separated.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub matrices: Vec<PathBuf>,
    /// Complete model sets of 2^n models to add, comma separated n values.
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub complete: Vec<u32>,
    /// rand, sep, sim or greedy (balanced refinement).
    #[arg(long)]
    pub heuristic: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fraction of pairs to distinguish (default 0.99).
    #[arg(long)]
    pub target: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

pub fn scalability(a: ScalabilityArgs) -> Result<()> {
    if a.matrices.is_empty() && a.complete.is_empty() {
        bail!("give --matrices and/or --complete");
    }
    let name = required(a.heuristic.as_deref(), "heuristic")?;
    let target = a.target.unwrap_or(0.99);
    let mut populations = a
        .matrices
        .iter()
        .map(|p| load(p))
        .collect::<Result<Vec<_>>>()?;
    for &n in &a.complete {
        populations.push(complete_model_set(n)?);
    }
    let points = if name == "greedy" {
        scalability_sweep_with(&populations, target, |m| Ok(balanced_ordering(m)))?
    } else {
        let h = parse_heuristic(name, a.max_iter)?;
        let seed = required(a.seed, "seed")?;
        scalability_sweep_with(&populations, target, |m| h.ordering(m, seed))?
    };

    let out = OutputDir::prepare(&a.common, &["sweep.csv", "manifest.json"])?;
    out.write_csv(
        "sweep.csv",
        &["L", "k_needed", "target"],
        points.iter().map(|p| {
            [
                p.num_models.to_string(),
                p.k_needed
                    .map_or_else(|| "unreachable".into(), |k| k.to_string()),
                target.to_string(),
            ]
        }),
    )?;
    let inputs: Vec<&Path> = a.matrices.iter().map(PathBuf::as_path).collect();
    out.write_json(
        "manifest.json",
        &manifest("scalability", manifest_config(&a)?, &inputs, json!({}))?,
    )
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct InterrogateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// First model: `matrix:<model_id>` or `tcp://host:port`.
    #[arg(long)]
    pub a: Option<String>,
    /// Second model, same forms as --a.
    #[arg(long)]
    pub b: Option<String>,
    /// Reference matrix for `matrix:` models and heuristic orderings.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Question order from a `score` output (first column).
    #[arg(long)]
    pub order: Option<PathBuf>,
    /// Heuristic ordering the --matrix questions when --order is absent.
    #[arg(long)]
    pub heuristic: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Most questions asked (default 20).
    #[arg(long)]
    pub budget: Option<usize>,
    /// Per-request timeout of remote models (default 30).
    #[arg(long)]
    pub timeout_secs: Option<f64>,
    /// Resend a failed remote request once.
    #[arg(long)]
    #[serde(default)]
    pub retry: bool,
    /// `question_id,text` CSV sent to remote models.
    #[arg(long)]
    pub texts: Option<PathBuf>,
}

fn first_column(path: &Path) -> Result<Vec<String>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(rec.get(0).unwrap_or_default().to_owned())
        })
        .collect()
}

fn read_texts(path: &Path) -> Result<HashMap<String, String>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            match (rec.get(0), rec.get(1)) {
                (Some(id), Some(text)) => Ok((id.to_owned(), text.to_owned())),
                _ => bail!("{}: expected question_id,text rows", path.display()),
            }
        })
        .collect()
}

fn build_oracle(
    spec: &str,
    matrix: Option<&ResponseMatrix>,
    a: &InterrogateArgs,
    texts: &HashMap<String, String>,
) -> Result<Box<dyn ModelOracle>> {
    if let Some(id) = spec.strip_prefix("matrix:") {
        let m = matrix.context("matrix: models need --matrix")?;
        let idx = m
            .model_index(id)
            .with_context(|| format!("model {id:?} is not in the matrix"))?;
        Ok(Box::new(MatrixOracle::new(m, idx)?))
    } else if let Some(addr) = spec.strip_prefix("tcp://") {
        let timeout = a.timeout_secs.unwrap_or(30.0);
        if !(timeout > 0.0 && timeout.is_finite()) {
            bail!("--timeout-secs must be positive");
        }
        let config = RemoteConfig {
            addr: addr.to_owned(),
            timeout: Duration::from_secs_f64(timeout),
            retry: a.retry,
        };
        Ok(Box::new(
            RemoteOracle::new(config).with_texts(texts.clone()),
        ))
    } else {
        bail!("model {spec:?} must be matrix:<model_id> or tcp://host:port")
    }
}

pub fn interrogate(a: InterrogateArgs) -> Result<()> {
    let spec_a = required(a.a.as_deref(), "a")?;
    let spec_b = required(a.b.as_deref(), "b")?;
    let budget = a.budget.unwrap_or(DEFAULT_BUDGET);
    let matrix = a.matrix.as_deref().map(load).transpose()?;

    let questions = match (&a.order, &matrix) {
        (Some(order), _) => first_column(order)?,
        (None, Some(m)) => {
            let h = parse_heuristic(required(a.heuristic.as_deref(), "heuristic")?, a.max_iter)?;
            h.ordering(m, required(a.seed, "seed")?)?.question_ids(m)
        }
        (None, None) => bail!("give --order, or --matrix with --heuristic and --seed"),
    };
    let texts = a
        .texts
        .as_deref()
        .map(read_texts)
        .transpose()?
        .unwrap_or_default();

    let mut oa = build_oracle(spec_a, matrix.as_ref(), &a, &texts)?;
    let mut ob = build_oracle(spec_b, matrix.as_ref(), &a, &texts)?;
    let verdict = sequential_test(&mut oa, &mut ob, &questions, budget)?;

    let out = OutputDir::prepare(&a.common, &["verdict.json", "manifest.json"])?;
    let mut body = serde_json::to_value(&verdict)?;
    body["budget"] = json!(budget);
    body["advisory_confidence"] = json!(verdict.advisory_confidence());
    out.write_json("verdict.json", &body)?;
    let inputs: Vec<&Path> = [&a.matrix, &a.order, &a.texts]
        .into_iter()
        .filter_map(|p| p.as_deref())
        .collect();
    out.write_json(
        "manifest.json",
        &manifest("interrogate", manifest_config(&a)?, &inputs, json!({}))?,
    )
}
