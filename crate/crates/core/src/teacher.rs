//! Frozen teacher embeddings that supply pseudo ranking labels.
//!
//! Teacher file layout (UTF-8):
//!
//! ```text
//! RCSE-TEACHER 1 <count> <dim>
//! <sentence text>
//! <dim whitespace-separated floats>
//! ...
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};

use crate::data_io::read_utf8;
use crate::error::{Error, Result};
use crate::losses::blend_teacher_scores;
use crate::metrics::SentenceEncoder;
use crate::seeding;
use crate::vectors::{
    cosine_similarity, normalize, EmbeddingVector, SimilarityMatrix, ZERO_NORM_THRESHOLD,
};

pub const TEACHER_MAGIC: &str = "RCSE-TEACHER";
pub const TEACHER_VERSION: u32 = 1;

/// Sentence embeddings keyed by exact sentence text, in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherStore {
    pub name: String,
    dim: usize,
    entries: Vec<(String, EmbeddingVector)>,
    index: HashMap<String, usize>,
}

impl TeacherStore {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        Self {
            name: name.into(),
            dim,
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn insert(&mut self, sentence: impl Into<String>, vector: EmbeddingVector) -> Result<()> {
        let sentence = sentence.into();
        if vector.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.dim(),
            });
        }
        let norm = vector.norm();
        if norm <= ZERO_NORM_THRESHOLD {
            return Err(Error::ZeroVector { norm });
        }
        if self.index.contains_key(&sentence) {
            return Err(Error::DuplicateKey(sentence));
        }
        self.index.insert(sentence.clone(), self.entries.len());
        self.entries.push((sentence, vector));
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, sentence: &str) -> Option<&EmbeddingVector> {
        self.index.get(sentence).map(|&i| &self.entries[i].1)
    }

    pub fn contains(&self, sentence: &str) -> bool {
        self.index.contains_key(sentence)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &EmbeddingVector)> {
        self.entries.iter().map(|(s, v)| (s.as_str(), v))
    }

    fn lookup(&self, sentence: &str) -> Result<&EmbeddingVector> {
        self.get(sentence).ok_or_else(|| Error::TeacherCoverageGap {
            teacher: self.name.clone(),
            sentence: sentence.to_owned(),
        })
    }

    /// Cosine similarity matrix of the given sentences against each other.
    pub fn similarity_rows(&self, sentences: &[&str]) -> Result<Vec<Vec<f64>>> {
        let vecs: Vec<&EmbeddingVector> = sentences
            .iter()
            .map(|s| self.lookup(s))
            .collect::<Result<_>>()?;
        vecs.iter()
            .map(|a| vecs.iter().map(|b| cosine_similarity(a, b)).collect())
            .collect()
    }
}

impl SentenceEncoder for TeacherStore {
    fn embed(&self, sentence: &str) -> Result<EmbeddingVector> {
        self.lookup(sentence).cloned()
    }
}

/// Reads a teacher file. The store is named after the file stem.
pub fn load_teacher(path: impl AsRef<Path>) -> Result<TeacherStore> {
    let path = path.as_ref();
    let text = read_utf8(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "teacher".into());
    parse_teacher(&text, &name, &path.display().to_string())
}

pub fn parse_teacher(text: &str, name: &str, source: &str) -> Result<TeacherStore> {
    let mut lines = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l));
    let header = lines
        .next()
        .ok_or_else(|| Error::format(source, 1, "missing header"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let bad_header = || Error::format(source, 1, format!("malformed header {header:?}"));
    if fields.len() != 4 || fields[0] != TEACHER_MAGIC {
        return Err(bad_header());
    }
    if fields[1].parse::<u32>().ok() != Some(TEACHER_VERSION) {
        return Err(Error::format(
            source,
            1,
            format!("unsupported version {}", fields[1]),
        ));
    }
    let count: usize = fields[2].parse().map_err(|_| bad_header())?;
    let dim: usize = fields[3].parse().map_err(|_| bad_header())?;
    if dim == 0 {
        return Err(Error::format(source, 1, "dimension must be positive"));
    }

    let mut store = TeacherStore::new(name, dim);
    let mut line_no = 1;
    for _ in 0..count {
        let (Some(sentence), Some(values)) = (lines.next(), lines.next()) else {
            return Err(Error::format(
                source,
                line_no + 1,
                format!("header declares {count} sentences, found {}", store.len()),
            ));
        };
        line_no += 2;
        let parsed: Vec<f64> = values
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::format(source, line_no, "invalid float"))?;
        if parsed.len() != dim {
            return Err(Error::format(
                source,
                line_no,
                format!("expected {dim} values, found {}", parsed.len()),
            ));
        }
        let vector = EmbeddingVector::new(parsed)
            .map_err(|e| Error::format(source, line_no, e.to_string()))?;
        match store.insert(sentence, vector) {
            Ok(()) => {}
            Err(Error::ZeroVector { .. }) => {
                return Err(Error::format(source, line_no, "zero vector"));
            }
            Err(e) => return Err(e),
        }
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(Error::format(
            source,
            line_no + 1,
            format!("more rows than the {count} declared in the header"),
        ));
    }
    Ok(store)
}

/// Serializes in the teacher file format. Floats use the shortest
/// representation that parses back to the same bits.
pub fn format_teacher(store: &TeacherStore) -> Result<String> {
    let mut out = format!(
        "{TEACHER_MAGIC} {TEACHER_VERSION} {} {}\n",
        store.len(),
        store.dim()
    );
    for (sentence, vector) in store.iter() {
        if sentence.contains(['\n', '\r']) || sentence.trim().is_empty() {
            return Err(Error::Config(format!(
                "sentence {sentence:?} cannot be stored on a single line"
            )));
        }
        out.push_str(sentence);
        out.push('\n');
        for (k, v) in vector.as_slice().iter().enumerate() {
            if k > 0 {
                out.push(' ');
            }
            write!(out, "{v:?}").expect("writing to a String");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn save_teacher(store: &TeacherStore, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_teacher(store)?)?;
    Ok(())
}

/// One teacher, or two blended as `alpha * first + (1 - alpha) * second`.
#[derive(Debug, Clone)]
pub struct TeacherEnsemble {
    pub teachers: Vec<TeacherStore>,
    pub alpha: f64,
}

impl TeacherEnsemble {
    pub fn single(teacher: TeacherStore) -> Self {
        Self {
            teachers: vec![teacher],
            alpha: 1.0,
        }
    }

    pub fn new(teachers: Vec<TeacherStore>, alpha: f64) -> Result<Self> {
        if teachers.is_empty() || teachers.len() > 2 {
            return Err(Error::Config(format!(
                "expected one or two teachers, got {}",
                teachers.len()
            )));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::AlphaOutOfRange(alpha));
        }
        Ok(Self { teachers, alpha })
    }

    /// First missing sentence across all teachers, if any.
    pub fn check_coverage<'a>(&self, sentences: impl IntoIterator<Item = &'a str>) -> Result<()> {
        for s in sentences {
            for t in &self.teachers {
                t.lookup(s)?;
            }
        }
        Ok(())
    }
}

/// Teacher cosine similarities among a batch of sentences, blended across
/// teachers on raw scores.
pub fn teacher_similarity_matrix(
    ensemble: &TeacherEnsemble,
    batch_sentences: &[&str],
) -> Result<SimilarityMatrix> {
    let first = ensemble.teachers[0].similarity_rows(batch_sentences)?;
    let rows = match ensemble.teachers.get(1) {
        None => first,
        Some(second) => {
            let second = second.similarity_rows(batch_sentences)?;
            first
                .iter()
                .zip(&second)
                .map(|(a, b)| blend_teacher_scores(a, b, ensemble.alpha))
                .collect::<Result<_>>()?
        }
    };
    SimilarityMatrix::from_rows(&rows)
}

/// Deterministic stand-in teacher for tests and toy runs.
///
/// Each distinct lowercased token gets a unit Gaussian direction keyed by
/// `(seed, token)`; a sentence embeds as the normalized sum of its tokens'
/// directions. The result is a pseudo-random unit vector per sentence whose
/// similarity structure a bag-of-words student can in principle recover.
pub fn build_synthetic_teacher(seed: u64, sentences: &[String], dim: usize) -> TeacherStore {
    assert!(dim >= 2, "synthetic teacher needs dim >= 2");
    let mut directions: HashMap<String, Vec<f64>> = HashMap::new();
    let mut store = TeacherStore::new(format!("synthetic-{seed}"), dim);
    for sentence in sentences {
        if store.contains(sentence) {
            continue;
        }
        let mut sum = vec![0.0; dim];
        for token in sentence.split_whitespace().map(str::to_lowercase) {
            let dir = directions
                .entry(token)
                .or_insert_with_key(|tok| random_unit(&[seed, seeding::hash_str(tok)], dim));
            for (s, d) in sum.iter_mut().zip(dir.iter()) {
                *s += d;
            }
        }
        let mut v = EmbeddingVector::new(sum).expect("finite by construction");
        if v.norm() < 1e-6 {
            v = EmbeddingVector::new(random_unit(&[seed, seeding::hash_str(sentence), 1], dim))
                .expect("finite by construction");
        }
        let unit = normalize(&v).expect("nonzero by construction");
        store.insert(sentence.clone(), unit).expect("unique keys");
    }
    store
}

fn random_unit(parts: &[u64], dim: usize) -> Vec<f64> {
    let mut rng = seeding::rng_from(parts);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = crate::vectors::norm(&v);
        if n > 1e-6 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(v: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(v.to_vec()).unwrap()
    }

    fn two_sentence_store() -> TeacherStore {
        let mut t = TeacherStore::new("t", 4);
        t.insert("first sentence", ev(&[1.0, 0.0, 0.0, 0.0]))
            .unwrap();
        t.insert("second one", ev(&[0.0, 1.0, 0.0, 0.0])).unwrap();
        t
    }

    #[test]
    fn parse_round_trip() {
        let t = two_sentence_store();
        let text = format_teacher(&t).unwrap();
        assert!(text.starts_with("RCSE-TEACHER 1 2 4\n"));
        let back = parse_teacher(&text, "t", "mem").unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back, t);
    }

    #[test]
    fn parse_errors() {
        let short = "RCSE-TEACHER 1 3 2\na\n1 0\nb\n0 1\n";
        assert!(matches!(
            parse_teacher(short, "t", "m"),
            Err(Error::FormatError { .. })
        ));
        let long = "RCSE-TEACHER 1 1 2\na\n1 0\nb\n0 1\n";
        assert!(matches!(
            parse_teacher(long, "t", "m"),
            Err(Error::FormatError { .. })
        ));
        let zero = "RCSE-TEACHER 1 1 2\na\n0 0\n";
        assert!(matches!(
            parse_teacher(zero, "t", "m"),
            Err(Error::FormatError { line: 3, .. })
        ));
        let dup = "RCSE-TEACHER 1 2 2\na\n1 0\na\n0 1\n";
        assert!(matches!(
            parse_teacher(dup, "t", "m"),
            Err(Error::DuplicateKey(_))
        ));
        let magic = "RCSE-STUDENT 1 1 2\na\n1 0\n";
        assert!(matches!(
            parse_teacher(magic, "t", "m"),
            Err(Error::FormatError { line: 1, .. })
        ));
        let width = "RCSE-TEACHER 1 1 3\na\n1 0\n";
        assert!(matches!(
            parse_teacher(width, "t", "m"),
            Err(Error::FormatError { .. })
        ));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_teacher("/nonexistent/teacher.txt"),
            Err(Error::FileNotFound(_))
        ));
    }

    #[test]
    fn orthonormal_teacher_gives_identity() {
        let ens = TeacherEnsemble::single(two_sentence_store());
        let m = teacher_similarity_matrix(&ens, &["first sentence", "second one"]).unwrap();
        assert_eq!(m.to_rows(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn coverage_gap_names_sentence() {
        let ens = TeacherEnsemble::single(two_sentence_store());
        match teacher_similarity_matrix(&ens, &["first sentence", "unknown"]) {
            Err(Error::TeacherCoverageGap { sentence, .. }) => assert_eq!(sentence, "unknown"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn blend_of_two_teachers() {
        let mut t1 = TeacherStore::new("a", 2);
        t1.insert("x", ev(&[1.0, 0.0])).unwrap();
        t1.insert("y", ev(&[0.0, 1.0])).unwrap();
        let mut t2 = TeacherStore::new("b", 2);
        t2.insert("x", ev(&[1.0, 0.0])).unwrap();
        t2.insert("y", ev(&[1.0, 1.0])).unwrap();
        let ens = TeacherEnsemble::new(vec![t1, t2], 1.0 / 3.0).unwrap();
        let m = teacher_similarity_matrix(&ens, &["x", "y"]).unwrap();
        let off = (0.0 + 2.0 * std::f64::consts::FRAC_1_SQRT_2) / 3.0;
        assert!((m.get(0, 1) - off).abs() < 1e-12);
        assert!((m.get(1, 0) - off).abs() < 1e-12);
        assert!((m.get(0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_teachers_blend_to_either() {
        let ens =
            TeacherEnsemble::new(vec![two_sentence_store(), two_sentence_store()], 0.77).unwrap();
        let single = TeacherEnsemble::single(two_sentence_store());
        let s = ["first sentence", "second one"];
        let a = teacher_similarity_matrix(&ens, &s).unwrap();
        let b = teacher_similarity_matrix(&single, &s).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((a.get(i, j) - b.get(i, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn ensemble_size_limits() {
        assert!(TeacherEnsemble::new(vec![], 0.5).is_err());
        let three = vec![
            two_sentence_store(),
            two_sentence_store(),
            two_sentence_store(),
        ];
        assert!(TeacherEnsemble::new(three, 0.5).is_err());
    }

    #[test]
    fn synthetic_teacher_properties() {
        let sentences: Vec<String> = ["w1 w2 w3", "w2 w4", "w5 w6 w7 w8", "w1 w2 w3"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let a = build_synthetic_teacher(3, &sentences, 16);
        let b = build_synthetic_teacher(3, &sentences, 16);
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        for (_, v) in a.iter() {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        let c = build_synthetic_teacher(4, &sentences, 16);
        assert!(a.iter().zip(c.iter()).any(|(x, y)| x.1 != y.1));
    }
}
