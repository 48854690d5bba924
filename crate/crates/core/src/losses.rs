//! Training objectives over batch similarity matrices.
//!
//! Each loss returns its value together with the gradient with respect to the
//! student similarity scores it consumed. All losses are summed over the
//! batch rows in ascending row order.
//!
//! | Term | Input | Value |
//! |------|-------|-------|
//! | [`info_nce`] | `M = S(A, B)` | `sum_i -log softmax(M_i / t1)[i]` |
//! | [`js_consistency`] | `S(A, B)`, `S(B, A)` | `sum_i JS(P_i, Q_i)` over row softmaxes |
//! | [`listnet_loss`] | student row, teacher row | top-one cross-entropy |
//! | [`listmle_loss`] | student row, teacher ordering | negative Plackett-Luce log-likelihood |
//!
//! [`combined_loss`] adds them up as `info_nce + beta * consistency + gamma * rank`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rankprob::{argsort_desc, check_temperature, log_softmax, log_sum_exp, Permutation};
use crate::vectors::SimilarityMatrix;

/// Softmax temperatures for the three places they appear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Temperatures {
    /// Contrastive and consistency terms.
    pub tau1: f64,
    /// Student side of the distillation term.
    pub tau2: f64,
    /// Teacher side of the distillation term (ListNet only).
    pub tau3: f64,
}

impl Default for Temperatures {
    fn default() -> Self {
        Self {
            tau1: 0.05,
            tau2: 0.025,
            tau3: 0.0125,
        }
    }
}

impl Temperatures {
    pub fn validate(&self) -> Result<()> {
        check_temperature(self.tau1)?;
        check_temperature(self.tau2)?;
        check_temperature(self.tau3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Weight of the consistency term.
    pub beta: f64,
    /// Weight of the ranking distillation term.
    pub gamma: f64,
    /// Weight of the first teacher when two are blended.
    pub alpha: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            beta: 1.0,
            gamma: 1.0,
            alpha: 1.0 / 3.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("beta", self.beta), ("gamma", self.gamma)] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::InvalidWeight { name, value });
            }
        }
        check_alpha(self.alpha)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::AlphaOutOfRange(alpha))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankMethod {
    ListNet,
    ListMle,
}

impl FromStr for RankMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "listnet" => Ok(RankMethod::ListNet),
            "listmle" => Ok(RankMethod::ListMle),
            other => Err(Error::Config(format!(
                "unknown rank method {other:?} (expected listnet or listmle)"
            ))),
        }
    }
}

impl fmt::Display for RankMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RankMethod::ListNet => "listnet",
            RankMethod::ListMle => "listmle",
        })
    }
}

/// Per-term loss values and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub info_nce: f64,
    pub consistency: f64,
    pub rank: f64,
    pub total: f64,
}

/// Gradient of a loss with respect to an `N x N` score matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreGradient {
    n: usize,
    values: Vec<f64>,
}

impl ScoreGradient {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            values: vec![0.0; n * n],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &ScoreGradient, scale: f64) {
        debug_assert_eq!(self.n, other.n);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
    }
}

fn check_square_pair(a: &SimilarityMatrix, b: &SimilarityMatrix) -> Result<()> {
    if a.size() != b.size() {
        return Err(Error::DimensionMismatch {
            expected: a.size(),
            actual: b.size(),
        });
    }
    Ok(())
}

/// In-batch contrastive loss; the diagonal holds the positive pairs.
pub fn info_nce(sim: &SimilarityMatrix, tau1: f64) -> Result<(f64, ScoreGradient)> {
    check_temperature(tau1)?;
    let n = sim.size();
    if n < 2 {
        return Err(Error::BatchTooSmall { size: n });
    }
    let mut loss = 0.0;
    let mut grad = ScoreGradient::zeros(n);
    for (i, row) in sim.rows().enumerate() {
        let logp = log_softmax(row, tau1);
        loss -= logp[i];
        for (g, lp) in grad.row_mut(i).iter_mut().zip(&logp) {
            *g = lp.exp() / tau1;
        }
        grad.row_mut(i)[i] -= 1.0 / tau1;
    }
    Ok((loss, grad))
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Jensen-Shannon divergence between two distributions given as log-probs.
/// Returns the value and the per-coordinate half log-ratios for each side.
fn js_from_logs(logp: &[f64], logq: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let ln2 = std::f64::consts::LN_2;
    let mut value = 0.0;
    let mut gp = Vec::with_capacity(logp.len());
    let mut gq = Vec::with_capacity(logp.len());
    for (&lp, &lq) in logp.iter().zip(logq) {
        let lm = log_add_exp(lp, lq);
        let rp = 0.5 * (ln2 + lp - lm);
        let rq = 0.5 * (ln2 + lq - lm);
        value += lp.exp() * rp + lq.exp() * rq;
        gp.push(rp);
        gq.push(rq);
    }
    // Rounding can leave a tiny negative residue when P == Q.
    (value.max(0.0), gp, gq)
}

/// Softmax backward: `d/ds_k = p_k (g_k - <p, g>) / t`.
fn softmax_backward(logp: &[f64], upstream: &[f64], t: f64, out: &mut [f64]) {
    let mean: f64 = logp.iter().zip(upstream).map(|(lp, g)| lp.exp() * g).sum();
    for ((o, lp), g) in out.iter_mut().zip(logp).zip(upstream) {
        *o = lp.exp() * (g - mean) / t;
    }
}

/// Per-row JS divergence between the two views' top-one distributions.
pub fn js_rows(
    sim_ab: &SimilarityMatrix,
    sim_ba: &SimilarityMatrix,
    tau1: f64,
) -> Result<Vec<f64>> {
    check_square_pair(sim_ab, sim_ba)?;
    check_temperature(tau1)?;
    Ok(sim_ab
        .rows()
        .zip(sim_ba.rows())
        .map(|(a, b)| js_from_logs(&log_softmax(a, tau1), &log_softmax(b, tau1)).0)
        .collect())
}

/// Ranking consistency between the similarity lists of the two dropout views.
pub fn js_consistency(
    sim_ab: &SimilarityMatrix,
    sim_ba: &SimilarityMatrix,
    tau1: f64,
) -> Result<(f64, ScoreGradient, ScoreGradient)> {
    check_square_pair(sim_ab, sim_ba)?;
    check_temperature(tau1)?;
    let n = sim_ab.size();
    let mut loss = 0.0;
    let mut grad_ab = ScoreGradient::zeros(n);
    let mut grad_ba = ScoreGradient::zeros(n);
    for i in 0..n {
        let logp = log_softmax(sim_ab.row(i), tau1);
        let logq = log_softmax(sim_ba.row(i), tau1);
        let (value, gp, gq) = js_from_logs(&logp, &logq);
        loss += value;
        softmax_backward(&logp, &gp, tau1, grad_ab.row_mut(i));
        softmax_backward(&logq, &gq, tau1, grad_ba.row_mut(i));
    }
    Ok((loss, grad_ab, grad_ba))
}

/// A score row with one entry removed, remembering where the rest came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcludedRow {
    pub values: Vec<f64>,
    /// `source[k]` is the index in the original row of `values[k]`.
    pub source: Vec<usize>,
}

impl ExcludedRow {
    /// Adds `grad` (over the reduced row) into `full` at the original positions.
    pub fn scatter_into(&self, grad: &[f64], scale: f64, full: &mut [f64]) {
        for (&src, g) in self.source.iter().zip(grad) {
            full[src] += scale * g;
        }
    }
}

/// Drops the positive-pair score from a similarity row.
pub fn exclude_positive(row: &[f64], positive_index: usize) -> Result<ExcludedRow> {
    if row.len() < 2 {
        return Err(Error::BatchTooSmall { size: row.len() });
    }
    if positive_index >= row.len() {
        return Err(Error::IndexOutOfRange {
            index: positive_index,
            len: row.len(),
        });
    }
    let (values, source) = row
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != positive_index)
        .map(|(j, &v)| (v, j))
        .unzip();
    Ok(ExcludedRow { values, source })
}

/// Top-one cross-entropy of the student list against the teacher list.
pub fn listnet_loss(
    student_row: &[f64],
    teacher_row: &[f64],
    tau2: f64,
    tau3: f64,
) -> Result<(f64, Vec<f64>)> {
    if student_row.len() != teacher_row.len() {
        return Err(Error::DimensionMismatch {
            expected: student_row.len(),
            actual: teacher_row.len(),
        });
    }
    if student_row.is_empty() {
        return Err(Error::EmptyList);
    }
    check_temperature(tau2)?;
    check_temperature(tau3)?;
    let log_t = log_softmax(teacher_row, tau3);
    let log_s = log_softmax(student_row, tau2);
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(student_row.len());
    for (lt, ls) in log_t.iter().zip(&log_s) {
        let t = lt.exp();
        loss -= t * ls;
        grad.push((ls.exp() - t) / tau2);
    }
    Ok((loss, grad))
}

/// Negative log-likelihood of the teacher ordering under the student scores.
pub fn listmle_loss(
    student_row: &[f64],
    teacher_perm: &Permutation,
    tau2: f64,
) -> Result<(f64, Vec<f64>)> {
    if teacher_perm.len() != student_row.len() {
        return Err(Error::InvalidPermutation(format!(
            "permutation of length {} over {} scores",
            teacher_perm.len(),
            student_row.len()
        )));
    }
    check_temperature(tau2)?;
    let order = teacher_perm.order();
    let logits: Vec<f64> = order.iter().map(|&k| student_row[k] / tau2).collect();
    let mut loss = 0.0;
    let mut grad = vec![0.0; student_row.len()];
    for i in 0..logits.len() {
        let lse = log_sum_exp(&logits[i..]);
        loss -= logits[i] - lse;
        for j in i..logits.len() {
            grad[order[j]] += (logits[j] - lse).exp() / tau2;
        }
        grad[order[i]] -= 1.0 / tau2;
    }
    Ok((loss, grad))
}

/// Convex combination `alpha * s1 + (1 - alpha) * s2`.
pub fn blend_teacher_scores(s1: &[f64], s2: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if s1.len() != s2.len() {
        return Err(Error::DimensionMismatch {
            expected: s1.len(),
            actual: s2.len(),
        });
    }
    check_alpha(alpha)?;
    if alpha == 1.0 {
        return Ok(s1.to_vec());
    }
    Ok(s1
        .iter()
        .zip(s2)
        .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
        .collect())
}

/// Ranking distillation over all rows of `sim_ab` against the teacher rows,
/// with the positive pair (the diagonal) excluded from both.
pub fn rank_loss(
    sim_ab: &SimilarityMatrix,
    teacher: &SimilarityMatrix,
    temps: &Temperatures,
    method: RankMethod,
) -> Result<(f64, ScoreGradient)> {
    check_square_pair(sim_ab, teacher)?;
    let n = sim_ab.size();
    let mut loss = 0.0;
    let mut grad = ScoreGradient::zeros(n);
    for i in 0..n {
        let student = exclude_positive(sim_ab.row(i), i)?;
        let target = exclude_positive(teacher.row(i), i)?;
        let (value, g) = match method {
            RankMethod::ListNet => {
                listnet_loss(&student.values, &target.values, temps.tau2, temps.tau3)?
            }
            RankMethod::ListMle => {
                let perm = argsort_desc(&target.values)?;
                listmle_loss(&student.values, &perm, temps.tau2)?
            }
        };
        loss += value;
        student.scatter_into(&g, 1.0, grad.row_mut(i));
    }
    Ok((loss, grad))
}

/// Weighted sum of the contrastive, consistency, and distillation terms.
///
/// Terms whose weight is zero are skipped and reported as 0; in that case the
/// teacher matrix is not read.
pub fn combined_loss(
    sim_ab: &SimilarityMatrix,
    sim_ba: &SimilarityMatrix,
    teacher: &SimilarityMatrix,
    temps: &Temperatures,
    weights: &LossWeights,
    method: RankMethod,
) -> Result<(LossBreakdown, ScoreGradient, ScoreGradient)> {
    temps.validate()?;
    weights.validate()?;
    check_square_pair(sim_ab, sim_ba)?;
    let n = sim_ab.size();

    let (info, mut grad_ab) = info_nce(sim_ab, temps.tau1)?;
    let mut grad_ba = ScoreGradient::zeros(n);
    let mut breakdown = LossBreakdown {
        info_nce: info,
        ..Default::default()
    };

    if weights.beta > 0.0 {
        let (value, g_ab, g_ba) = js_consistency(sim_ab, sim_ba, temps.tau1)?;
        breakdown.consistency = value;
        grad_ab.add_scaled(&g_ab, weights.beta);
        grad_ba.add_scaled(&g_ba, weights.beta);
    }
    if weights.gamma > 0.0 {
        let (value, g) = rank_loss(sim_ab, teacher, temps, method)?;
        breakdown.rank = value;
        grad_ab.add_scaled(&g, weights.gamma);
    }
    breakdown.total =
        breakdown.info_nce + weights.beta * breakdown.consistency + weights.gamma * breakdown.rank;
    Ok((breakdown, grad_ab, grad_ba))
}
