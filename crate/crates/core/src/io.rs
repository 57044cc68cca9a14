//! Binary model format.
//!
//! Little-endian, no padding:
//!
//! ```text
//! "OLID"  u32 version=3  u32 dim  u32 minn  u32 maxn  u32 word_ngrams  u32 bucket
//! u32 n_words  u32 n_labels
//! n_labels x (u16 len, utf-8 bytes)
//! n_words  x (u16 len, utf-8 bytes, u64 count)
//! (n_words + bucket) x dim f32   input matrix, row-major
//! n_labels x dim f32             output matrix, row-major
//! ```
//!
//! Training-only settings (learning rate, epochs, seed, pooling,
//! normalization) are not stored; a loaded model uses the defaults.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::features::FeatureParams;
use crate::label::LanguageLabel;
use crate::model::{Matrix, Model, ModelError, TrainParams, Vocabulary};

pub const MAGIC: [u8; 4] = *b"OLID";
pub const VERSION: u32 = 3;

/// Serializes a model into `w`.
pub fn write_model<W: Write>(model: &Model, mut w: W) -> Result<(), ModelError> {
    let p = model.params();
    let vocab = model.vocab();
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| ModelError::ShapeMismatch(format!("{what} does not fit in u32")))
    };
    let mut buf = Vec::with_capacity(64);
    buf.extend_from_slice(&MAGIC);
    for v in [
        VERSION,
        to_u32(p.dim, "dim")?,
        p.feature.minn,
        p.feature.maxn,
        p.feature.word_ngrams,
        p.feature.bucket,
        to_u32(vocab.n_words(), "n_words")?,
        to_u32(vocab.n_labels(), "n_labels")?,
    ] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for l in vocab.labels() {
        put_str(&mut buf, &l.to_string())?;
    }
    for (word, count) in vocab.words() {
        put_str(&mut buf, word)?;
        buf.extend_from_slice(&count.to_le_bytes());
    }
    w.write_all(&buf)?;
    for m in [model.input_matrix(), model.output_matrix()] {
        let mut bytes = Vec::with_capacity(m.as_slice().len() * 4);
        for v in m.as_slice() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&bytes)?;
    }
    w.flush()?;
    Ok(())
}

fn put_str(buf: &mut Vec<u8>, s: &str) -> Result<(), ModelError> {
    let len = u16::try_from(s.len())
        .map_err(|_| ModelError::ShapeMismatch(format!("string of {} bytes exceeds u16", s.len())))?;
    buf.extend_from_slice(&len.to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
    Ok(())
}

pub fn save_model(model: &Model, path: &Path) -> Result<(), ModelError> {
    let file = fs::File::create(path)?;
    write_model(model, std::io::BufWriter::new(file))
}

pub fn load_model(path: &Path) -> Result<Model, ModelError> {
    let bytes = fs::read(path)?;
    read_model(&bytes)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(ModelError::TruncatedFile {
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, ModelError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<&'a str, ModelError> {
        let len = self.u16()? as usize;
        let at = self.pos;
        std::str::from_utf8(self.take(len)?)
            .map_err(|_| ModelError::Format(format!("invalid UTF-8 string at offset {at}")))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix, ModelError> {
        let n = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| ModelError::ShapeMismatch(format!("{rows}x{cols} matrix is too large")))?;
        let raw = self.take(n)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Matrix::from_vec(rows, cols, data)
    }
}

/// Parses a model from bytes.
pub fn read_model(bytes: &[u8]) -> Result<Model, ModelError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4)?;
    if magic != MAGIC {
        return Err(ModelError::Format(format!("bad magic {magic:02x?}")));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(ModelError::Format(format!("unsupported version {version}")));
    }
    let dim = cur.u32()? as usize;
    let minn = cur.u32()?;
    let maxn = cur.u32()?;
    let word_ngrams = cur.u32()?;
    let bucket = cur.u32()?;
    let n_words = cur.u32()? as usize;
    let n_labels = cur.u32()? as usize;

    let mut labels = Vec::with_capacity(n_labels.min(1 << 16));
    for _ in 0..n_labels {
        let s = cur.string()?;
        let l =
            LanguageLabel::parse(s).map_err(|_| ModelError::Format(format!("invalid label {s:?} in label table")))?;
        labels.push(l);
    }
    let mut words = Vec::with_capacity(n_words.min(1 << 20));
    for _ in 0..n_words {
        let w = cur.string()?.to_string();
        let c = cur.u64()?;
        words.push((w, c));
    }
    let min_count = words.iter().map(|(_, c)| *c).min().unwrap_or(1).max(1);
    let vocab = Vocabulary::from_parts(words, labels).map_err(|e| ModelError::Format(e.to_string()))?;

    let feature = FeatureParams {
        minn,
        maxn,
        word_ngrams,
        bucket,
        min_count,
        ..FeatureParams::default()
    };
    let params = TrainParams {
        dim,
        feature,
        ..TrainParams::default()
    };
    params.validate().map_err(|e| ModelError::Format(e.to_string()))?;

    let in_rows = n_words
        .checked_add(bucket as usize)
        .ok_or_else(|| ModelError::ShapeMismatch("row count overflow".into()))?;
    let input = cur.matrix(in_rows, dim)?;
    let output = cur.matrix(n_labels, dim)?;
    if cur.pos != bytes.len() {
        return Err(ModelError::ShapeMismatch(format!(
            "{} trailing bytes after output matrix",
            bytes.len() - cur.pos
        )));
    }
    Model::from_parts(vocab, input, output, params)
}
