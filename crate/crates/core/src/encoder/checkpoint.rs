//! Versioned student checkpoints.
//!
//! ```text
//! RCSE1\n
//! <vocab_size> <dim>\n
//! <token 0>\n ... <token vocab_size-1>\n
//! <vocab_size * dim little-endian f64, row-major>
//! ```

use std::fs;
use std::path::Path;

use super::{EncoderParams, Student};
use crate::data_io::{Vocabulary, UNK_TOKEN};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "RCSE1";

pub fn encode_checkpoint(student: &Student) -> Vec<u8> {
    let p = &student.params;
    let mut out = format!("{CHECKPOINT_MAGIC}\n{} {}\n", p.vocab_size, p.dim).into_bytes();
    for tok in student.vocab.tokens() {
        out.extend_from_slice(tok.as_bytes());
        out.push(b'\n');
    }
    out.reserve(p.table.len() * 8);
    for x in &p.table {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn save_checkpoint(student: &Student, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_checkpoint(student))?;
    Ok(())
}

/// Splits off the next `\n`-terminated line as UTF-8.
fn take_line<'a>(bytes: &mut &'a [u8], source: &str, line: usize) -> Result<&'a str> {
    let end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format(source, line, "truncated header"))?;
    let text = std::str::from_utf8(&bytes[..end])
        .map_err(|_| Error::format(source, line, "invalid UTF-8"))?;
    *bytes = &bytes[end + 1..];
    Ok(text)
}

pub fn decode_checkpoint(bytes: &[u8], source: &str) -> Result<Student> {
    let mut rest = bytes;
    if take_line(&mut rest, source, 1)? != CHECKPOINT_MAGIC {
        return Err(Error::format(source, 1, "bad checkpoint magic"));
    }
    let dims = take_line(&mut rest, source, 2)?;
    let parsed: Vec<usize> = dims
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::format(source, 2, format!("malformed shape line {dims:?}")))?;
    let [vocab_size, dim] = parsed[..] else {
        return Err(Error::format(
            source,
            2,
            format!("malformed shape line {dims:?}"),
        ));
    };
    if vocab_size == 0 || dim == 0 {
        return Err(Error::format(source, 2, "empty shape"));
    }
    let mut tokens = Vec::with_capacity(vocab_size);
    for i in 0..vocab_size {
        tokens.push(take_line(&mut rest, source, 3 + i)?);
    }
    if tokens[0] != UNK_TOKEN {
        return Err(Error::format(
            source,
            3,
            "first vocabulary entry must be the unknown token",
        ));
    }
    let vocab = Vocabulary::from_tokens(tokens[1..].iter().copied())
        .map_err(|e| Error::format(source, 3, e.to_string()))?;

    let expected = vocab_size * dim * 8;
    if rest.len() != expected {
        return Err(Error::format(
            source,
            3 + vocab_size,
            format!("expected {expected} table bytes, found {}", rest.len()),
        ));
    }
    let table: Vec<f64> = rest
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let params = EncoderParams::new(vocab_size, dim, table, 0.0)
        .map_err(|e| Error::format(source, 3 + vocab_size, e.to_string()))?;
    Student::new(vocab, params)
}

/// Loads a checkpoint; the returned encoder has dropout disabled.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Student> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    decode_checkpoint(&bytes, &path.display().to_string())
}
