//! Corpus and STS dataset loading, vocabulary, tokenization, and batching.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::metrics::StsExample;
use crate::seeding;

/// Id reserved for unknown tokens.
pub const UNK_ID: usize = 0;
pub const UNK_TOKEN: &str = "<unk>";

/// Raw sentences, one per line of the source file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub sentences: Vec<String>,
    pub deduplicated: bool,
}

impl Corpus {
    pub fn new(sentences: Vec<String>) -> Self {
        Self {
            sentences,
            deduplicated: false,
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Drops repeated sentences, keeping first occurrences in order.
    pub fn deduplicate(&mut self) {
        let mut seen = std::collections::HashSet::new();
        self.sentences.retain(|s| seen.insert(s.clone()));
        self.deduplicated = true;
    }
}

pub(crate) fn read_utf8(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    String::from_utf8(bytes).map_err(|_| Error::EncodingError(path.to_path_buf()))
}

/// Reads one sentence per line. Blank lines are skipped; an empty file gives
/// an empty corpus.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let text = read_utf8(path.as_ref())?;
    Ok(Corpus::new(
        text.lines()
            .map(str::trim_end)
            .filter(|l| !l.trim().is_empty())
            .map(str::to_owned)
            .collect(),
    ))
}

/// Reads `sentence1 TAB sentence2 TAB score` lines; blank lines are skipped.
pub fn load_sts_tsv(path: impl AsRef<Path>) -> Result<Vec<StsExample>> {
    let path = path.as_ref();
    let text = read_utf8(path)?;
    parse_sts(&text, &path.display().to_string())
}

pub fn parse_sts(text: &str, source: &str) -> Result<Vec<StsExample>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::format(
                source,
                line_no,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let score: f64 = fields[2].trim().parse().map_err(|_| {
            Error::format(source, line_no, format!("invalid score {:?}", fields[2]))
        })?;
        if !(0.0..=5.0).contains(&score) {
            return Err(Error::ScoreOutOfRange {
                line: line_no,
                score,
            });
        }
        let (s1, s2) = (fields[0].trim(), fields[1].trim());
        if s1.is_empty() || s2.is_empty() {
            return Err(Error::format(source, line_no, "empty sentence"));
        }
        out.push(StsExample {
            sentence1: s1.to_owned(),
            sentence2: s2.to_owned(),
            gold: score,
        });
    }
    Ok(out)
}

fn words(sentence: &str) -> impl Iterator<Item = String> + '_ {
    sentence.split_whitespace().map(str::to_lowercase)
}

/// Token/id mapping; id 0 is always [`UNK_TOKEN`].
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
}

impl Vocabulary {
    /// Builds from tokens listed in id order, starting at id 1.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Self {
            token_to_id: HashMap::new(),
            id_to_token: vec![UNK_TOKEN.to_owned()],
        };
        for tok in tokens {
            let tok = tok.into();
            if tok.is_empty() || tok.chars().any(char::is_whitespace) || tok == UNK_TOKEN {
                return Err(Error::Config(format!("invalid vocabulary token {tok:?}")));
            }
            let id = vocab.id_to_token.len();
            if vocab.token_to_id.insert(tok.clone(), id).is_some() {
                return Err(Error::DuplicateKey(tok));
            }
            vocab.id_to_token.push(tok);
        }
        Ok(vocab)
    }

    /// Number of ids, including UNK.
    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    /// Listed tokens in id order, UNK first.
    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }
}

/// Counts lowercased whitespace tokens; ids go by descending frequency, then
/// first occurrence. Tokens rarer than `min_count` are left to UNK.
pub fn build_vocab(corpus: &Corpus, min_count: usize) -> Vocabulary {
    let min_count = min_count.max(1);
    let mut counts: HashMap<String, (usize, usize)> = HashMap::new();
    let mut next = 0usize;
    for sentence in &corpus.sentences {
        for w in words(sentence) {
            let entry = counts.entry(w).or_insert_with(|| {
                next += 1;
                (0, next)
            });
            entry.0 += 1;
        }
    }
    let mut ranked: Vec<(String, usize, usize)> = counts
        .into_iter()
        .filter(|(tok, (c, _))| *c >= min_count && tok != UNK_TOKEN)
        .map(|(tok, (c, first))| (tok, c, first))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    Vocabulary::from_tokens(ranked.into_iter().map(|(t, _, _)| t))
        .expect("counted tokens are unique and whitespace-free")
}

/// Lowercased whitespace split mapped through the vocabulary.
pub fn tokenize(vocab: &Vocabulary, sentence: &str) -> Result<Vec<usize>> {
    let ids: Vec<usize> = words(sentence)
        .map(|w| vocab.id(&w).unwrap_or(UNK_ID))
        .collect();
    if ids.is_empty() {
        return Err(Error::EmptySentence);
    }
    Ok(ids)
}

/// Shuffled index batches for one epoch. A trailing batch shorter than 2 is
/// dropped.
pub fn batch_iterator(
    corpus_len: usize,
    batch_size: usize,
    shuffle_seed: u64,
    epoch: u64,
) -> Result<Vec<Vec<usize>>> {
    if batch_size < 2 {
        return Err(Error::BatchTooSmall { size: batch_size });
    }
    let mut order: Vec<usize> = (0..corpus_len).collect();
    let mut rng = seeding::rng_from(&[shuffle_seed, epoch, 0x5348_5546]);
    order.shuffle(&mut rng);
    Ok(order
        .chunks(batch_size)
        .filter(|c| c.len() >= 2)
        .map(<[usize]>::to_vec)
        .collect())
}
