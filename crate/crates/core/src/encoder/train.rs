//! Training loop and the diagnostics it selects checkpoints by.

use std::fmt;
use std::str::FromStr;

use super::optim::{optimizer_step, OptimizerConfig, OptimizerState};
use super::{
    backward_to_params, check_dropout, encode_batch, encode_clean, EncoderParams, Student,
};
use crate::data_io::{batch_iterator, build_vocab, tokenize, Corpus};
use crate::error::{Error, Result};
use crate::losses::{
    combined_loss, exclude_positive, js_rows, LossBreakdown, LossWeights, RankMethod, Temperatures,
};
use crate::metrics::{evaluate_sts, kendall_tau, StsExample};
use crate::seeding;
use crate::teacher::{teacher_similarity_matrix, TeacherEnsemble};
use crate::vectors::{similarity_matrix, EmbeddingVector};

/// How the retained checkpoint is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectMetric {
    /// Spearman correlation on the held-out labeled pairs.
    Spearman,
    /// Mean Kendall tau between student and teacher similarity rows.
    TeacherKcc,
    /// Keep the parameters after the final step.
    Last,
}

impl FromStr for SelectMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spearman" => Ok(Self::Spearman),
            "teacher_kcc" => Ok(Self::TeacherKcc),
            "last" => Ok(Self::Last),
            other => Err(Error::Config(format!(
                "unknown select_metric {other:?} (expected spearman, teacher_kcc or last)"
            ))),
        }
    }
}

impl fmt::Display for SelectMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Spearman => "spearman",
            Self::TeacherKcc => "teacher_kcc",
            Self::Last => "last",
        })
    }
}

/// Learning-rate multiplier over the run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LrSchedule {
    Constant,
    /// Linear ramp over the first `warmup` fraction of steps, then linear
    /// decay that reaches 0 just after the final step.
    Linear {
        warmup: f64,
    },
}

impl LrSchedule {
    /// Multiplier applied to the base rate for the update at 0-based `step`.
    pub fn multiplier(&self, step: u64, total: u64) -> f64 {
        match *self {
            Self::Constant => 1.0,
            Self::Linear { warmup } => {
                let total = total.max(1) as f64;
                let t = step as f64 + 1.0;
                let warm = (warmup * total).max(1.0);
                if t <= warm {
                    t / warm
                } else {
                    ((total - t + 1.0) / (total - warm + 1.0)).max(0.0)
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::Linear { warmup } if !(0.0..1.0).contains(&warmup) => Err(Error::Config(
                format!("warmup fraction must lie in [0, 1), got {warmup}"),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub dropout_p: f64,
    pub batch_size: usize,
    pub steps: u64,
    pub seed: u64,
    /// Standard deviation of the initial embedding table.
    pub init_scale: f64,
    pub min_count: usize,
    pub optimizer: OptimizerConfig,
    pub lr_schedule: LrSchedule,
    pub temperatures: Temperatures,
    pub weights: LossWeights,
    pub method: RankMethod,
    pub eval_interval: u64,
    pub select_metric: SelectMetric,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            dropout_p: 0.1,
            batch_size: 32,
            steps: 500,
            seed: 42,
            init_scale: 0.1,
            min_count: 1,
            optimizer: OptimizerConfig::default(),
            lr_schedule: LrSchedule::Constant,
            temperatures: Temperatures::default(),
            weights: LossWeights::default(),
            method: RankMethod::ListNet,
            eval_interval: 125,
            select_metric: SelectMetric::Spearman,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("dim must be positive".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::BatchTooSmall {
                size: self.batch_size,
            });
        }
        if self.eval_interval == 0 {
            return Err(Error::Config("eval_interval must be positive".into()));
        }
        if self.min_count == 0 {
            return Err(Error::Config("min_count must be at least 1".into()));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::Config(format!(
                "init_scale must be positive, got {}",
                self.init_scale
            )));
        }
        check_dropout(self.dropout_p)?;
        self.optimizer.validate()?;
        self.lr_schedule.validate()?;
        self.temperatures.validate()?;
        self.weights.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub step: u64,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingReport {
    /// One entry per optimizer step.
    pub history: Vec<LossBreakdown>,
    pub evaluations: Vec<Evaluation>,
    /// Metric actually used; `Spearman` falls back to `Last` without
    /// validation data.
    pub selection: SelectMetric,
    pub best_step: u64,
    pub best_value: Option<f64>,
    pub best: Student,
    pub last: Student,
}

fn tokenize_corpus(student: &Student, corpus: &Corpus) -> Result<Vec<Vec<usize>>> {
    corpus
        .sentences
        .iter()
        .map(|s| tokenize(&student.vocab, s))
        .collect()
}

const EVAL_STREAM: u64 = 0x4556_414C;

/// Mean over evaluation batches of the mean per-row Kendall tau between the
/// student's dropout-free similarity rows and the teacher's, with the
/// self-similarity entry removed from both.
pub fn mean_teacher_kcc(
    student: &Student,
    corpus: &Corpus,
    teachers: &TeacherEnsemble,
    batch_size: usize,
    seed: u64,
) -> Result<f64> {
    let tokens = tokenize_corpus(student, corpus)?;
    let batches = batch_iterator(
        corpus.len(),
        batch_size,
        seeding::mix(&[seed, EVAL_STREAM]),
        0,
    )?;
    if batches.is_empty() {
        return Err(Error::BatchTooSmall { size: corpus.len() });
    }
    let mut total = 0.0;
    for batch in &batches {
        let embs: Vec<EmbeddingVector> = batch
            .iter()
            .map(|&i| encode_clean(&student.params, &tokens[i]))
            .collect::<Result<_>>()?;
        let sim = similarity_matrix(&embs, &embs)?;
        let keys: Vec<&str> = batch
            .iter()
            .map(|&i| corpus.sentences[i].as_str())
            .collect();
        let teacher = teacher_similarity_matrix(teachers, &keys)?;
        let mut batch_sum = 0.0;
        for i in 0..batch.len() {
            let s = exclude_positive(sim.row(i), i)?;
            let t = exclude_positive(teacher.row(i), i)?;
            batch_sum += match kendall_tau(&s.values, &t.values) {
                Ok(v) => v,
                Err(Error::DegenerateInput(_)) => 0.0,
                Err(e) => return Err(e),
            };
        }
        total += batch_sum / batch.len() as f64;
    }
    Ok(total / batches.len() as f64)
}

/// Mean per-row JS divergence between two dropout views of each evaluation
/// batch, using `dropout_p` in place of the student's own setting.
pub fn mean_two_view_js(
    student: &Student,
    corpus: &Corpus,
    dropout_p: f64,
    batch_size: usize,
    seed: u64,
    tau1: f64,
) -> Result<f64> {
    check_dropout(dropout_p)?;
    let tokens = tokenize_corpus(student, corpus)?;
    let params = EncoderParams {
        dropout_p,
        ..student.params.clone()
    };
    let batches = batch_iterator(
        corpus.len(),
        batch_size,
        seeding::mix(&[seed, EVAL_STREAM]),
        0,
    )?;
    if batches.is_empty() {
        return Err(Error::BatchTooSmall { size: corpus.len() });
    }
    let mut total = 0.0;
    for (b, batch) in batches.iter().enumerate() {
        let sents: Vec<Vec<usize>> = batch.iter().map(|&i| tokens[i].clone()).collect();
        let views = encode_batch(
            &params,
            &sents,
            seeding::mix(&[seed, EVAL_STREAM, 1]),
            b as u64,
        )?;
        let ab = similarity_matrix(&views.view_a, &views.view_b)?;
        let ba = similarity_matrix(&views.view_b, &views.view_a)?;
        let rows = js_rows(&ab, &ba, tau1)?;
        total += rows.iter().sum::<f64>() / rows.len() as f64;
    }
    Ok(total / batches.len() as f64)
}

/// Trains a student on `corpus` against frozen teacher similarities.
///
/// Each step encodes a shuffled batch twice under independent dropout,
/// computes the combined loss against the teacher rows, backpropagates into
/// the embedding table, and takes one Adam step. Every `eval_interval` steps
/// (and after the last one) the selection metric is evaluated and the best
/// parameters so far are kept.
pub fn train(
    config: &TrainConfig,
    corpus: &Corpus,
    teachers: &TeacherEnsemble,
    validation: &[StsExample],
) -> Result<TrainingReport> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if corpus.len() < 2 {
        return Err(Error::BatchTooSmall { size: corpus.len() });
    }
    teachers.check_coverage(corpus.sentences.iter().map(String::as_str))?;

    let vocab = build_vocab(corpus, config.min_count);
    let params = EncoderParams::random(
        vocab.len(),
        config.dim,
        config.dropout_p,
        config.init_scale,
        config.seed,
    )?;
    let mut student = Student::new(vocab, params)?;
    let tokens = tokenize_corpus(&student, corpus)?;
    let mut opt = OptimizerState::new(config.optimizer, &student.params);

    let selection = match config.select_metric {
        SelectMetric::Spearman if validation.is_empty() => SelectMetric::Last,
        other => other,
    };
    let evaluate = |s: &Student| -> Result<f64> {
        match selection {
            SelectMetric::Spearman => evaluate_sts(s, validation),
            SelectMetric::TeacherKcc => {
                mean_teacher_kcc(s, corpus, teachers, config.batch_size, config.seed)
            }
            SelectMetric::Last => Ok(0.0),
        }
    };

    let mut history = Vec::with_capacity(config.steps as usize);
    let mut evaluations = Vec::new();
    let mut best: Option<(u64, f64, Student)> = None;
    let mut step = 0u64;
    let mut epoch = 0u64;
    'outer: while step < config.steps {
        for batch in batch_iterator(corpus.len(), config.batch_size, config.seed, epoch)? {
            if step >= config.steps {
                break 'outer;
            }
            let sents: Vec<Vec<usize>> = batch.iter().map(|&i| tokens[i].clone()).collect();
            let views = encode_batch(&student.params, &sents, config.seed, step)?;
            let sim_ab = similarity_matrix(&views.view_a, &views.view_b)?;
            let sim_ba = similarity_matrix(&views.view_b, &views.view_a)?;
            let keys: Vec<&str> = batch
                .iter()
                .map(|&i| corpus.sentences[i].as_str())
                .collect();
            let teacher = teacher_similarity_matrix(teachers, &keys)?;
            let (breakdown, grad_ab, grad_ba) = combined_loss(
                &sim_ab,
                &sim_ba,
                &teacher,
                &config.temperatures,
                &config.weights,
                config.method,
            )?;
            let grads = backward_to_params(&student.params, &views, &grad_ab, &grad_ba)?;
            opt.config.learning_rate =
                config.optimizer.learning_rate * config.lr_schedule.multiplier(step, config.steps);
            optimizer_step(&mut student.params, &mut opt, &grads)?;
            history.push(breakdown);
            step += 1;

            if step.is_multiple_of(config.eval_interval) || step == config.steps {
                let value = evaluate(&student)?;
                evaluations.push(Evaluation { step, value });
                let improved = match (&best, selection) {
                    (_, SelectMetric::Last) | (None, _) => true,
                    (Some((_, v, _)), _) => value > *v,
                };
                if improved {
                    best = Some((step, value, student.clone()));
                }
            }
        }
        epoch += 1;
    }

    let (best_step, best_value, best_student) = match best {
        Some((s, v, st)) => (s, (selection != SelectMetric::Last).then_some(v), st),
        None => (0, None, student.clone()),
    };
    Ok(TrainingReport {
        history,
        evaluations,
        selection,
        best_step,
        best_value,
        best: best_student,
        last: student,
    })
}
