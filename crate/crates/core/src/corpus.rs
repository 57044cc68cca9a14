//! Labeled text and the line formats it is read from and written to.
//!
//! fastText lines: `__label__<label>( __label__<label>)* <text>`, LF-terminated.
//! Multilabel TSV lines: `<label>(,<label>)*<TAB><text>`.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

use crate::label::{LanguageLabel, MergeMap, LABEL_PREFIX};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: empty gold label set")]
    EmptyGoldSet { line: usize },
    #[error("labeled text needs at least one label")]
    NoLabels,
    #[error("text contains a newline")]
    NewlineInText,
    #[error("invalid noise spec: {0}")]
    InvalidRange(String),
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        CorpusError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn is_io(&self) -> bool {
        matches!(self, CorpusError::Io { .. })
    }
}

/// A text with its gold label set (a singleton for training data).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledText {
    labels: Vec<LanguageLabel>,
    text: String,
}

impl LabeledText {
    /// Duplicate labels collapse, keeping first-occurrence order.
    pub fn new(labels: Vec<LanguageLabel>, text: &str) -> Result<Self, CorpusError> {
        let mut uniq: Vec<LanguageLabel> = Vec::with_capacity(labels.len());
        for l in labels {
            if !uniq.contains(&l) {
                uniq.push(l);
            }
        }
        if uniq.is_empty() {
            return Err(CorpusError::NoLabels);
        }
        if text.contains('\n') {
            return Err(CorpusError::NewlineInText);
        }
        Ok(LabeledText {
            labels: uniq,
            text: text.to_string(),
        })
    }

    pub fn labels(&self) -> &[LanguageLabel] {
        &self.labels
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn is_single_label(&self) -> bool {
        self.labels.len() == 1
    }

    pub fn canonicalized(&self, merges: &MergeMap) -> LabeledText {
        let labels = self.labels.iter().map(|l| merges.canonicalize(*l)).collect();
        LabeledText::new(labels, &self.text).expect("same text, non-empty labels")
    }

    pub fn to_fasttext_line(&self) -> String {
        let mut s = String::with_capacity(self.text.len() + 16 * self.labels.len());
        for l in &self.labels {
            s.push_str(LABEL_PREFIX);
            s.push_str(&l.to_string());
            s.push(' ');
        }
        s.push_str(&self.text);
        s
    }
}

/// Parses one fastText line (without its terminator).
pub fn parse_fasttext_line(line: &str, line_no: usize) -> Result<LabeledText, CorpusError> {
    let malformed = |reason: String| CorpusError::MalformedLine { line: line_no, reason };
    let mut labels = Vec::new();
    let mut rest = line;
    while rest.starts_with(LABEL_PREFIX) {
        let (tok, tail) = match rest.find(' ') {
            Some(i) => (&rest[..i], &rest[i + 1..]),
            None => (rest, ""),
        };
        let l = LanguageLabel::parse(tok).map_err(|_| malformed(format!("invalid label {tok:?}")))?;
        labels.push(l);
        rest = tail;
    }
    if labels.is_empty() {
        return Err(malformed("no __label__ prefix".into()));
    }
    if rest.trim().is_empty() {
        return Err(malformed("no text after labels".into()));
    }
    LabeledText::new(labels, rest).map_err(|e| malformed(e.to_string()))
}

/// Streaming reader over a fastText file. Malformed lines surface as
/// `Err(MalformedLine)` items; the caller decides whether they are fatal.
pub struct FastTextReader<R> {
    inner: R,
    line_no: usize,
    buf: String,
}

impl<R: BufRead> FastTextReader<R> {
    pub fn new(inner: R) -> Self {
        FastTextReader {
            inner,
            line_no: 0,
            buf: String::new(),
        }
    }

    /// 1-based file line of the item most recently returned.
    pub fn line_no(&self) -> usize {
        self.line_no
    }
}

impl<R: BufRead> Iterator for FastTextReader<R> {
    type Item = Result<LabeledText, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.inner.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => {
                    return Some(Err(CorpusError::Io {
                        path: format!("line {}", self.line_no + 1),
                        source: e,
                    }))
                }
            }
            self.line_no += 1;
            let line = self.buf.trim_end_matches('\n').trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            return Some(parse_fasttext_line(line, self.line_no));
        }
    }
}

/// Examples plus the malformed lines that were skipped.
#[derive(Debug, Default)]
pub struct ReadOutcome {
    pub examples: Vec<LabeledText>,
    pub malformed: Vec<CorpusError>,
}

fn open(path: &Path) -> Result<BufReader<File>, CorpusError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CorpusError::io(path, e))
}

/// Reads a fastText file. With `strict`, the first malformed line is an error.
pub fn read_fasttext(path: &Path, strict: bool) -> Result<ReadOutcome, CorpusError> {
    collect_reader(FastTextReader::new(open(path)?), strict, path)
}

pub fn read_fasttext_from<R: BufRead>(r: R, strict: bool) -> Result<ReadOutcome, CorpusError> {
    collect_reader(FastTextReader::new(r), strict, Path::new("<stream>"))
}

fn collect_reader<I>(items: I, strict: bool, path: &Path) -> Result<ReadOutcome, CorpusError>
where
    I: Iterator<Item = Result<LabeledText, CorpusError>>,
{
    let mut out = ReadOutcome::default();
    for item in items {
        match item {
            Ok(ex) => out.examples.push(ex),
            Err(CorpusError::Io { source, .. }) => return Err(CorpusError::io(path, source)),
            Err(e) if strict => return Err(e),
            Err(e) => out.malformed.push(e),
        }
    }
    Ok(out)
}

pub fn write_fasttext<W: Write>(mut w: W, items: &[LabeledText]) -> io::Result<()> {
    for ex in items {
        writeln!(w, "{}", ex.to_fasttext_line())?;
    }
    w.flush()
}

pub fn write_fasttext_file(path: &Path, items: &[LabeledText]) -> Result<(), CorpusError> {
    let f = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    write_fasttext(io::BufWriter::new(f), items).map_err(|e| CorpusError::io(path, e))
}

/// Parses one multilabel TSV line.
pub fn parse_multilabel_line(line: &str, line_no: usize) -> Result<LabeledText, CorpusError> {
    let (labels, text) = line.split_once('\t').ok_or_else(|| CorpusError::MalformedLine {
        line: line_no,
        reason: "missing tab separator".into(),
    })?;
    let mut gold = Vec::new();
    for part in labels.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let l = LanguageLabel::parse(part).map_err(|_| CorpusError::MalformedLine {
            line: line_no,
            reason: format!("invalid label {part:?}"),
        })?;
        gold.push(l);
    }
    if gold.is_empty() {
        return Err(CorpusError::EmptyGoldSet { line: line_no });
    }
    LabeledText::new(gold, text).map_err(|e| CorpusError::MalformedLine {
        line: line_no,
        reason: e.to_string(),
    })
}

pub fn read_multilabel_tsv_from<R: BufRead>(r: R) -> Result<Vec<LabeledText>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| CorpusError::io(Path::new("<stream>"), e))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        out.push(parse_multilabel_line(line, i + 1)?);
    }
    Ok(out)
}

pub fn read_multilabel_tsv(path: &Path) -> Result<Vec<LabeledText>, CorpusError> {
    read_multilabel_tsv_from(open(path)?).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::io(path, source),
        other => other,
    })
}
