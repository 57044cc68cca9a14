//! Text to feature ids: tokenization, character n-grams and the hashing trick.
//!
//! Feature ids come in two regions. Word ids index the vocabulary; n-gram ids
//! index `bucket` hash slots shared by character n-grams and word n-grams of
//! order two and above. The model's input matrix stacks the two regions, so the
//! row for n-gram id `b` is `n_words + b`.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use unicode_normalization::UnicodeNormalization;

use crate::model::Vocabulary;

pub const BOW: char = '<';
pub const EOW: char = '>';

const FNV_OFFSET: u32 = 2_166_136_261;
const FNV_PRIME: u32 = 16_777_619;

/// Unicode normalization applied before tokenization. Off by default: casing
/// and script are signal for language identification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    #[default]
    None,
    Nfc,
}

impl FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Normalization::None),
            "nfc" => Ok(Normalization::Nfc),
            other => Err(format!("unknown normalization {other:?} (expected none|nfc)")),
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::None => "none",
            Normalization::Nfc => "nfc",
        })
    }
}

/// Featurization hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureParams {
    /// Minimum character n-gram length.
    pub minn: u32,
    /// Maximum character n-gram length; 0 disables character n-grams.
    pub maxn: u32,
    /// Maximum word n-gram order; 1 means unigrams only.
    pub word_ngrams: u32,
    /// Number of hash slots for n-grams.
    pub bucket: u32,
    /// Vocabulary frequency floor.
    pub min_count: u64,
    pub normalization: Normalization,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            minn: 2,
            maxn: 5,
            word_ngrams: 1,
            bucket: 1 << 21,
            min_count: 5,
            normalization: Normalization::None,
        }
    }
}

impl FeatureParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.minn > self.maxn {
            return Err(format!("minn ({}) exceeds maxn ({})", self.minn, self.maxn));
        }
        if self.bucket == 0 {
            return Err("bucket must be at least 1".into());
        }
        if self.word_ngrams == 0 {
            return Err("word_ngrams must be at least 1".into());
        }
        if self.min_count == 0 {
            return Err("min_count must be at least 1".into());
        }
        Ok(())
    }
}

/// Multiset of feature ids extracted from one text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureVector {
    pub word_ids: Vec<u32>,
    pub ngram_ids: Vec<u32>,
    pub token_count: usize,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.word_ids.len() + self.ngram_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Input-matrix rows, with n-gram ids offset past the vocabulary.
    pub fn rows(&self, n_words: usize) -> impl Iterator<Item = usize> + '_ {
        self.word_ids
            .iter()
            .map(|&w| w as usize)
            .chain(self.ngram_ids.iter().map(move |&b| n_words + b as usize))
    }
}

/// Drops control characters other than tab and newline, then applies `norm`.
pub fn preprocess(text: &str, norm: Normalization) -> Cow<'_, str> {
    let keep = |c: char| !c.is_control() || c == '\t' || c == '\n';
    let cleaned: Cow<'_, str> = if text.chars().all(keep) {
        Cow::Borrowed(text)
    } else {
        Cow::Owned(text.chars().filter(|&c| keep(c)).collect())
    };
    match norm {
        Normalization::None => cleaned,
        Normalization::Nfc => Cow::Owned(cleaned.nfc().collect()),
    }
}

/// Splits on Unicode whitespace; no empty tokens.
pub fn tokenize(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// All substrings of `<token>` with code-point length in `[minn, maxn]`,
/// grouped by length (shortest first), left to right within a length.
pub fn char_ngrams(token: &str, minn: u32, maxn: u32) -> Vec<String> {
    let mut out = Vec::new();
    for_each_char_ngram(token, minn, maxn, |g| out.push(g.to_string()));
    out
}

fn for_each_char_ngram(token: &str, minn: u32, maxn: u32, mut f: impl FnMut(&str)) {
    if maxn == 0 || minn > maxn {
        return;
    }
    let mut wrapped = String::with_capacity(token.len() + 2);
    wrapped.push(BOW);
    wrapped.push_str(token);
    wrapped.push(EOW);
    // byte offset of every code point, plus the end
    let bounds: Vec<usize> = wrapped
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(wrapped.len()))
        .collect();
    let len = bounds.len() - 1;
    let lo = minn.max(1) as usize;
    let hi = (maxn as usize).min(len);
    for n in lo..=hi {
        for start in 0..=(len - n) {
            f(&wrapped[bounds[start]..bounds[start + n]]);
        }
    }
}

/// FNV-1a, 32 bit, over the UTF-8 bytes of `s`.
pub fn hash_feature(s: &str) -> u32 {
    fnv1a(s.as_bytes())
}

fn fnv1a(bytes: &[u8]) -> u32 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u32::from(b)).wrapping_mul(FNV_PRIME))
}

/// Word n-grams are hashed as their tokens joined by a single space, which
/// cannot collide with a character n-gram since tokens contain no whitespace.
fn word_ngram_hash(tokens: &[&str]) -> u32 {
    let mut h = FNV_OFFSET;
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            h = (h ^ u32::from(b' ')).wrapping_mul(FNV_PRIME);
        }
        for &b in t.as_bytes() {
            h = (h ^ u32::from(b)).wrapping_mul(FNV_PRIME);
        }
    }
    h
}

/// Converts a text to its feature multiset.
pub fn featurize(text: &str, vocab: &Vocabulary, params: &FeatureParams) -> FeatureVector {
    let text = preprocess(text, params.normalization);
    let tokens = tokenize(&text);
    let bucket = params.bucket;
    let mut fv = FeatureVector {
        token_count: tokens.len(),
        ..FeatureVector::default()
    };
    for tok in &tokens {
        if let Some(id) = vocab.word_id(tok) {
            fv.word_ids.push(id);
        }
        for_each_char_ngram(tok, params.minn, params.maxn, |g| {
            fv.ngram_ids.push(hash_feature(g) % bucket);
        });
    }
    let max_order = params.word_ngrams as usize;
    for order in 2..=max_order.min(tokens.len()) {
        for window in tokens.windows(order) {
            fv.ngram_ids.push(word_ngram_hash(window) % bucket);
        }
    }
    fv
}
