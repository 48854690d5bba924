//! Desk-scale sentence encoder: token embedding table, elementwise dropout,
//! mean pooling.
//!
//! Two calls with different dropout seeds give the two views of a sentence
//! that form its positive pair. The backward pass chains score gradients
//! through cosine similarity, pooling, and the cached dropout masks into the
//! embedding table.

mod checkpoint;
mod optim;
mod train;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC,
};
pub use optim::{optimizer_step, OptimizerConfig, OptimizerState};
pub use train::{
    mean_teacher_kcc, mean_two_view_js, train, Evaluation, LrSchedule, SelectMetric, TrainConfig,
    TrainingReport,
};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data_io::{tokenize, Vocabulary};
use crate::error::{Error, Result};
use crate::losses::ScoreGradient;
use crate::metrics::SentenceEncoder;
use crate::seeding;
use crate::vectors::{cosine_grad, EmbeddingVector};

/// Trainable encoder weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub vocab_size: usize,
    pub dim: usize,
    /// Row-major `vocab_size x dim`.
    pub table: Vec<f64>,
    pub dropout_p: f64,
}

impl EncoderParams {
    pub fn new(vocab_size: usize, dim: usize, table: Vec<f64>, dropout_p: f64) -> Result<Self> {
        if vocab_size == 0 || dim == 0 {
            return Err(Error::Config("vocab_size and dim must be positive".into()));
        }
        if table.len() != vocab_size * dim {
            return Err(Error::ShapeMismatch {
                expected: (vocab_size, dim),
                actual: (table.len() / dim.max(1), dim),
            });
        }
        if table.iter().any(|x| !x.is_finite()) {
            return Err(Error::DegenerateInput("non-finite embedding table entry"));
        }
        check_dropout(dropout_p)?;
        Ok(Self {
            vocab_size,
            dim,
            table,
            dropout_p,
        })
    }

    /// Gaussian initialization with standard deviation `scale`.
    pub fn random(
        vocab_size: usize,
        dim: usize,
        dropout_p: f64,
        scale: f64,
        seed: u64,
    ) -> Result<Self> {
        let normal = Normal::new(0.0, scale)
            .map_err(|_| Error::Config(format!("invalid init scale {scale}")))?;
        let mut rng = seeding::rng_from(&[seed, 0x494E_4954]);
        let table = (0..vocab_size * dim)
            .map(|_| normal.sample(&mut rng))
            .collect();
        Self::new(vocab_size, dim, table, dropout_p)
    }

    pub fn row(&self, id: usize) -> &[f64] {
        &self.table[id * self.dim..(id + 1) * self.dim]
    }

    fn check_tokens(&self, tokens: &[usize]) -> Result<()> {
        if tokens.is_empty() {
            return Err(Error::EmptyTokenList);
        }
        if let Some(&id) = tokens.iter().find(|&&id| id >= self.vocab_size) {
            return Err(Error::TokenIdOutOfRange {
                id,
                vocab_size: self.vocab_size,
            });
        }
        Ok(())
    }
}

pub(crate) fn check_dropout(p: f64) -> Result<()> {
    if (0.0..1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "dropout_p must lie in [0, 1), got {p}"
        )))
    }
}

/// Forward state of one encoded sentence view.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceCache {
    pub tokens: Vec<usize>,
    /// Per `(token position, dim)` multiplier: `0` or `1 / (1 - p)`.
    /// Empty when dropout is disabled.
    pub mask: Vec<f64>,
}

fn draw_mask(n_tokens: usize, dim: usize, p: f64, seed: u64) -> Vec<f64> {
    if p == 0.0 {
        return Vec::new();
    }
    let keep_scale = 1.0 / (1.0 - p);
    let mut rng = seeding::rng_from(&[seed]);
    (0..n_tokens * dim)
        .map(|_| {
            if rng.random::<f64>() < p {
                0.0
            } else {
                keep_scale
            }
        })
        .collect()
}

fn pool(params: &EncoderParams, cache: &SentenceCache) -> Vec<f64> {
    let d = params.dim;
    let mut out = vec![0.0; d];
    for (t, &id) in cache.tokens.iter().enumerate() {
        let row = params.row(id);
        if cache.mask.is_empty() {
            for (o, x) in out.iter_mut().zip(row) {
                *o += x;
            }
        } else {
            let m = &cache.mask[t * d..(t + 1) * d];
            for ((o, x), s) in out.iter_mut().zip(row).zip(m) {
                *o += x * s;
            }
        }
    }
    let inv = 1.0 / cache.tokens.len() as f64;
    out.iter_mut().for_each(|o| *o *= inv);
    out
}

fn encode_cached(
    params: &EncoderParams,
    tokens: &[usize],
    dropout_seed: u64,
) -> Result<(EmbeddingVector, SentenceCache)> {
    params.check_tokens(tokens)?;
    let cache = SentenceCache {
        tokens: tokens.to_vec(),
        mask: draw_mask(tokens.len(), params.dim, params.dropout_p, dropout_seed),
    };
    let v = EmbeddingVector::new(pool(params, &cache))?;
    Ok((v, cache))
}

/// Embeds a token sequence under the dropout mask drawn from `dropout_seed`.
pub fn encode(
    params: &EncoderParams,
    tokens: &[usize],
    dropout_seed: u64,
) -> Result<EmbeddingVector> {
    encode_cached(params, tokens, dropout_seed).map(|(v, _)| v)
}

/// Mean of the token embeddings, dropout disabled.
pub fn encode_clean(params: &EncoderParams, tokens: &[usize]) -> Result<EmbeddingVector> {
    params.check_tokens(tokens)?;
    let cache = SentenceCache {
        tokens: tokens.to_vec(),
        mask: Vec::new(),
    };
    EmbeddingVector::new(pool(params, &cache))
}

/// Dropout seed for sentence `index` of step `step_index`, view 0 or 1:
/// `mix([base_seed, step_index, index, view])`.
pub fn view_seed(base_seed: u64, step_index: u64, index: usize, view: u8) -> u64 {
    seeding::mix(&[base_seed, step_index, index as u64, u64::from(view)])
}

/// Both dropout views of a batch plus what the backward pass needs.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchViews {
    pub view_a: Vec<EmbeddingVector>,
    pub view_b: Vec<EmbeddingVector>,
    pub cache_a: Vec<SentenceCache>,
    pub cache_b: Vec<SentenceCache>,
}

impl BatchViews {
    pub fn len(&self) -> usize {
        self.view_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.view_a.is_empty()
    }

    /// Drops the forward caches, e.g. before handing views to evaluation.
    pub fn without_cache(mut self) -> Self {
        self.cache_a.clear();
        self.cache_b.clear();
        self
    }
}

pub fn encode_batch(
    params: &EncoderParams,
    sentences: &[Vec<usize>],
    base_seed: u64,
    step_index: u64,
) -> Result<BatchViews> {
    if sentences.len() < 2 {
        return Err(Error::BatchTooSmall {
            size: sentences.len(),
        });
    }
    let n = sentences.len();
    let mut views = BatchViews {
        view_a: Vec::with_capacity(n),
        view_b: Vec::with_capacity(n),
        cache_a: Vec::with_capacity(n),
        cache_b: Vec::with_capacity(n),
    };
    for (i, tokens) in sentences.iter().enumerate() {
        let (a, ca) = encode_cached(params, tokens, view_seed(base_seed, step_index, i, 0))?;
        let (b, cb) = encode_cached(params, tokens, view_seed(base_seed, step_index, i, 1))?;
        views.view_a.push(a);
        views.cache_a.push(ca);
        views.view_b.push(b);
        views.cache_b.push(cb);
    }
    Ok(views)
}

/// Gradient with respect to the embedding table, row-major like the table.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradient {
    pub vocab_size: usize,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl ParamGradient {
    pub fn zeros(vocab_size: usize, dim: usize) -> Self {
        Self {
            vocab_size,
            dim,
            values: vec![0.0; vocab_size * dim],
        }
    }

    pub fn row(&self, id: usize) -> &[f64] {
        &self.values[id * self.dim..(id + 1) * self.dim]
    }

    fn scatter(&mut self, cache: &SentenceCache, upstream: &[f64]) {
        let d = self.dim;
        let inv = 1.0 / cache.tokens.len() as f64;
        for (t, &id) in cache.tokens.iter().enumerate() {
            let dst = &mut self.values[id * d..(id + 1) * d];
            if cache.mask.is_empty() {
                for (g, u) in dst.iter_mut().zip(upstream) {
                    *g += u * inv;
                }
            } else {
                let m = &cache.mask[t * d..(t + 1) * d];
                for ((g, u), s) in dst.iter_mut().zip(upstream).zip(m) {
                    *g += u * s * inv;
                }
            }
        }
    }
}

/// Chains the score gradients of `S(A, B)` and `S(B, A)` back to the table.
///
/// Contributions are accumulated in ascending sentence order, view A before
/// view B, so the result is bitwise reproducible.
pub fn backward_to_params(
    params: &EncoderParams,
    views: &BatchViews,
    grad_ab: &ScoreGradient,
    grad_ba: &ScoreGradient,
) -> Result<ParamGradient> {
    let n = views.len();
    if views.cache_a.len() != n || views.cache_b.len() != n {
        return Err(Error::MissingCache);
    }
    for g in [grad_ab, grad_ba] {
        if g.size() != n {
            return Err(Error::ShapeMismatch {
                expected: (n, n),
                actual: (g.size(), g.size()),
            });
        }
    }
    let d = params.dim;
    let mut d_a = vec![vec![0.0; d]; n];
    let mut d_b = vec![vec![0.0; d]; n];
    for i in 0..n {
        for j in 0..n {
            let g = grad_ab.get(i, j);
            if g != 0.0 {
                let (gu, gv) = cosine_grad(views.view_a[i].as_slice(), views.view_b[j].as_slice())?;
                axpy(&mut d_a[i], g, &gu);
                axpy(&mut d_b[j], g, &gv);
            }
            let g = grad_ba.get(i, j);
            if g != 0.0 {
                let (gu, gv) = cosine_grad(views.view_b[i].as_slice(), views.view_a[j].as_slice())?;
                axpy(&mut d_b[i], g, &gu);
                axpy(&mut d_a[j], g, &gv);
            }
        }
    }
    let mut out = ParamGradient::zeros(params.vocab_size, d);
    for i in 0..n {
        out.scatter(&views.cache_a[i], &d_a[i]);
        out.scatter(&views.cache_b[i], &d_b[i]);
    }
    Ok(out)
}

fn axpy(dst: &mut [f64], a: f64, x: &[f64]) {
    for (d, v) in dst.iter_mut().zip(x) {
        *d += a * v;
    }
}

/// A trained student: vocabulary plus encoder weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Student {
    pub vocab: Vocabulary,
    pub params: EncoderParams,
}

impl Student {
    pub fn new(vocab: Vocabulary, params: EncoderParams) -> Result<Self> {
        if vocab.len() != params.vocab_size {
            return Err(Error::DimensionMismatch {
                expected: vocab.len(),
                actual: params.vocab_size,
            });
        }
        Ok(Self { vocab, params })
    }
}

impl SentenceEncoder for Student {
    fn embed(&self, sentence: &str) -> Result<EmbeddingVector> {
        encode_clean(&self.params, &tokenize(&self.vocab, sentence)?)
    }
}
