//! Language labels, macrolanguage merge maps and cross-inventory alignment.
//!
//! A label is an ISO 639-3 language code joined to an ISO 15924 script code,
//! e.g. `srp_Latn`. Two labels are reserved: `zxx_Zxxx` marks content that is
//! not natural language, and the [`LanguageLabel::Other`] sentinel marks a
//! rejected or out-of-inventory prediction. `other` is produced by the decision
//! layer only and is never a trainable class.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

/// Prefix used by fastText-format files in front of every label.
pub const LABEL_PREFIX: &str = "__label__";

const OTHER: &str = "other";

/// Shipped class inventory (one label per line).
pub const V3_INVENTORY: &str = include_str!("../data/openlid_v3_labels.txt");
/// Shipped macrolanguage merge map.
pub const V3_MERGE_MAP: &str = include_str!("../data/merge_v3.tsv");
/// Shipped alignment from a GlotLID-style inventory onto the v3 inventory.
pub const V3_ALIGNMENT: &str = include_str!("../data/align_v3.tsv");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LabelError {
    #[error("invalid label {0:?}")]
    InvalidLabel(String),
    #[error("duplicate label {0}")]
    DuplicateLabel(LanguageLabel),
    #[error("line {line}: {reason}")]
    MapSyntax { line: usize, reason: String },
    #[error("merge map is not idempotent: target {0} is also a source")]
    ChainedMerge(LanguageLabel),
    #[error("merge map source {0} is mapped twice")]
    ConflictingMerge(LanguageLabel),
    #[error("`other` cannot take part in a merge")]
    OtherInMerge,
    #[error("i/o error reading {path}: {message}")]
    Io { path: String, message: String },
}

/// A `lang_Script` pair. Stored as raw ASCII so the type is `Copy`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct LangScript {
    lang: [u8; 3],
    script: [u8; 4],
}

impl LangScript {
    pub fn lang(&self) -> &str {
        // grammar guarantees ASCII
        std::str::from_utf8(&self.lang).unwrap()
    }

    pub fn script(&self) -> &str {
        std::str::from_utf8(&self.script).unwrap()
    }

    fn bytes(&self) -> [u8; 8] {
        let mut out = [0u8; 8];
        out[..3].copy_from_slice(&self.lang);
        out[3] = b'_';
        out[4..].copy_from_slice(&self.script);
        out
    }
}

/// A class label, or the `other` sentinel.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub enum LanguageLabel {
    Lang(LangScript),
    Other,
}

impl LanguageLabel {
    /// The reserved not-a-language class.
    pub const NOT_A_LANGUAGE: LanguageLabel = LanguageLabel::Lang(LangScript {
        lang: *b"zxx",
        script: *b"Zxxx",
    });

    /// Parses `xxx_Yyyy`, `__label__xxx_Yyyy` or `other`.
    pub fn parse(s: &str) -> Result<Self, LabelError> {
        let body = s.strip_prefix(LABEL_PREFIX).unwrap_or(s);
        if body == OTHER {
            return Ok(LanguageLabel::Other);
        }
        let b = body.as_bytes();
        let ok = b.len() == 8
            && b[..3].iter().all(u8::is_ascii_lowercase)
            && b[3] == b'_'
            && b[4].is_ascii_uppercase()
            && b[5..].iter().all(u8::is_ascii_lowercase);
        if !ok {
            return Err(LabelError::InvalidLabel(s.to_string()));
        }
        let mut lang = [0u8; 3];
        let mut script = [0u8; 4];
        lang.copy_from_slice(&b[..3]);
        script.copy_from_slice(&b[4..]);
        Ok(LanguageLabel::Lang(LangScript { lang, script }))
    }

    pub fn is_other(&self) -> bool {
        matches!(self, LanguageLabel::Other)
    }

    pub fn is_not_a_language(&self) -> bool {
        *self == Self::NOT_A_LANGUAGE
    }

    /// True for gold labels that count as "foreign" in trash-bin analysis.
    pub fn is_foreign(&self) -> bool {
        self.is_other() || self.is_not_a_language()
    }

    pub fn lang_script(&self) -> Option<&LangScript> {
        match self {
            LanguageLabel::Lang(ls) => Some(ls),
            LanguageLabel::Other => None,
        }
    }

    pub fn as_string(&self) -> String {
        self.to_string()
    }

    fn sort_key(&self) -> [u8; 8] {
        match self {
            LanguageLabel::Lang(ls) => ls.bytes(),
            // "other" padded; '\0' sorts before every grammar byte
            LanguageLabel::Other => *b"other\0\0\0",
        }
    }
}

/// Free-function form of [`LanguageLabel::parse`].
pub fn parse_label(s: &str) -> Result<LanguageLabel, LabelError> {
    LanguageLabel::parse(s)
}

impl FromStr for LanguageLabel {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LanguageLabel::parse(s)
    }
}

impl fmt::Display for LanguageLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LanguageLabel::Lang(ls) => write!(f, "{}_{}", ls.lang(), ls.script()),
            LanguageLabel::Other => f.write_str(OTHER),
        }
    }
}

impl fmt::Debug for LanguageLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Labels order by their string form.
impl Ord for LanguageLabel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for LanguageLabel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Iterates `(line_number, columns)` over a two-column TSV, skipping blanks and `#` comments.
fn tsv_pairs(text: &str) -> impl Iterator<Item = Result<(usize, &str, &str), LabelError>> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            return None;
        }
        let mut cols = line.split('\t');
        let res = match (cols.next(), cols.next(), cols.next()) {
            (Some(a), Some(b), None) => Ok((i + 1, a.trim(), b.trim())),
            _ => Err(LabelError::MapSyntax {
                line: i + 1,
                reason: format!("expected two tab-separated columns, got {line:?}"),
            }),
        };
        Some(res)
    })
}

fn read_to_string(path: &Path) -> Result<String, LabelError> {
    std::fs::read_to_string(path).map_err(|e| LabelError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Source → canonical label mapping for macrolanguage merges.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MergeMap {
    entries: HashMap<LanguageLabel, LanguageLabel>,
}

impl MergeMap {
    pub fn new<I>(pairs: I) -> Result<Self, LabelError>
    where
        I: IntoIterator<Item = (LanguageLabel, LanguageLabel)>,
    {
        let mut entries = HashMap::new();
        for (src, dst) in pairs {
            if src.is_other() || dst.is_other() {
                return Err(LabelError::OtherInMerge);
            }
            if src == dst {
                continue;
            }
            if let Some(prev) = entries.insert(src, dst) {
                if prev != dst {
                    return Err(LabelError::ConflictingMerge(src));
                }
            }
        }
        // targets must never be sources; this also rules out cycles
        if let Some(t) = entries.values().find(|t| entries.contains_key(*t)) {
            return Err(LabelError::ChainedMerge(*t));
        }
        Ok(MergeMap { entries })
    }

    /// The shipped v3 merges: Arabic varieties, Persian varieties, Dyula.
    pub fn v3() -> Self {
        Self::parse_tsv(V3_MERGE_MAP).expect("shipped merge map is valid")
    }

    pub fn parse_tsv(text: &str) -> Result<Self, LabelError> {
        let mut pairs = Vec::new();
        for row in tsv_pairs(text) {
            let (line, a, b) = row?;
            let parse = |s: &str| {
                LanguageLabel::parse(s).map_err(|_| LabelError::MapSyntax {
                    line,
                    reason: format!("invalid label {s:?}"),
                })
            };
            pairs.push((parse(a)?, parse(b)?));
        }
        Self::new(pairs)
    }

    pub fn load(path: &Path) -> Result<Self, LabelError> {
        Self::parse_tsv(&read_to_string(path)?)
    }

    pub fn canonicalize(&self, label: LanguageLabel) -> LanguageLabel {
        self.entries.get(&label).copied().unwrap_or(label)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sources(&self) -> impl Iterator<Item = &LanguageLabel> {
        self.entries.keys()
    }
}

/// Returns `map[label]` if present, else `label`.
pub fn canonicalize(label: LanguageLabel, map: &MergeMap) -> LanguageLabel {
    map.canonicalize(label)
}

/// Maps labels of a foreign inventory onto this one. Unlisted labels map to `other`.
#[derive(Debug, Clone, Default)]
pub struct AlignmentMap {
    entries: HashMap<String, LanguageLabel>,
}

impl AlignmentMap {
    pub fn new<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, LanguageLabel)>,
        S: Into<String>,
    {
        let entries = pairs
            .into_iter()
            .map(|(k, v)| (strip_prefix_owned(k.into()), v))
            .collect();
        AlignmentMap { entries }
    }

    /// Identity over `inventory`, plus every merge source mapped to its target.
    pub fn from_inventory(inventory: &[LanguageLabel], merges: &MergeMap) -> Self {
        let mut pairs: Vec<(String, LanguageLabel)> = inventory
            .iter()
            .map(|l| (l.to_string(), merges.canonicalize(*l)))
            .collect();
        pairs.extend(merges.sources().map(|s| (s.to_string(), merges.canonicalize(*s))));
        Self::new(pairs)
    }

    /// The shipped GlotLID-style → v3 alignment.
    pub fn v3() -> Self {
        Self::parse_tsv(V3_ALIGNMENT).expect("shipped alignment map is valid")
    }

    /// Target column accepts `other`; source column is any whitespace-free string.
    pub fn parse_tsv(text: &str) -> Result<Self, LabelError> {
        let mut pairs = Vec::new();
        for row in tsv_pairs(text) {
            let (line, a, b) = row?;
            if a.is_empty() || a.contains(char::is_whitespace) {
                return Err(LabelError::MapSyntax {
                    line,
                    reason: format!("invalid foreign label {a:?}"),
                });
            }
            let target = LanguageLabel::parse(b).map_err(|_| LabelError::MapSyntax {
                line,
                reason: format!("invalid label {b:?}"),
            })?;
            pairs.push((a.to_string(), target));
        }
        Ok(Self::new(pairs))
    }

    pub fn load(path: &Path) -> Result<Self, LabelError> {
        Self::parse_tsv(&read_to_string(path)?)
    }

    pub fn align(&self, foreign: &str) -> LanguageLabel {
        let key = foreign.strip_prefix(LABEL_PREFIX).unwrap_or(foreign);
        if key == OTHER {
            return LanguageLabel::Other;
        }
        self.entries.get(key).copied().unwrap_or(LanguageLabel::Other)
    }

    /// Set of labels this map can produce, excluding `other`.
    pub fn targets(&self) -> BTreeSet<LanguageLabel> {
        self.entries.values().filter(|l| !l.is_other()).copied().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn strip_prefix_owned(s: String) -> String {
    match s.strip_prefix(LABEL_PREFIX) {
        Some(rest) => rest.to_string(),
        None => s,
    }
}

pub fn align(foreign_label: &str, map: &AlignmentMap) -> LanguageLabel {
    map.align(foreign_label)
}

/// Outcome of [`validate_inventory`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InventoryReport {
    pub count: usize,
    pub has_not_a_language: bool,
    pub languages: usize,
}

/// Checks an inventory for grammar, uniqueness and presence of `zxx_Zxxx`.
///
/// `other` is rejected: it is a decision-layer output, not a class.
pub fn validate_inventory(labels: &[LanguageLabel]) -> Result<InventoryReport, LabelError> {
    let mut seen = HashSet::with_capacity(labels.len());
    for l in labels {
        if l.is_other() {
            return Err(LabelError::InvalidLabel(OTHER.to_string()));
        }
        if !seen.insert(*l) {
            return Err(LabelError::DuplicateLabel(*l));
        }
    }
    let has_not_a_language = seen.contains(&LanguageLabel::NOT_A_LANGUAGE);
    Ok(InventoryReport {
        count: labels.len(),
        has_not_a_language,
        languages: labels.len() - usize::from(has_not_a_language),
    })
}

/// Parses an inventory file: one label per line, `#` comments allowed.
pub fn parse_inventory(text: &str) -> Result<Vec<LanguageLabel>, LabelError> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(LanguageLabel::parse)
        .collect()
}

pub fn load_inventory(path: &Path) -> Result<Vec<LanguageLabel>, LabelError> {
    parse_inventory(&read_to_string(path)?)
}

/// The shipped v3 class inventory.
pub fn v3_inventory() -> Vec<LanguageLabel> {
    parse_inventory(V3_INVENTORY).expect("shipped inventory is valid")
}
