//! Removal of test examples that also occur in training data.
//!
//! Exact mode compares whitespace-normalized texts. Shingle mode additionally
//! removes near-duplicates: test lines whose character 5-gram Jaccard
//! similarity with some training line exceeds the threshold.

use std::collections::{HashMap, HashSet};
use std::str::FromStr;

use crate::corpus::LabeledText;

pub const DEFAULT_SHINGLE: usize = 5;
pub const DEFAULT_JACCARD: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DedupMode {
    Exact,
    Shingle,
}

impl FromStr for DedupMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(DedupMode::Exact),
            "shingle" => Ok(DedupMode::Shingle),
            other => Err(format!("unknown dedup mode {other:?} (expected exact|shingle)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DedupConfig {
    pub mode: DedupMode,
    pub shingle: usize,
    /// Near-duplicate when Jaccard similarity is strictly greater than this.
    pub threshold: f64,
}

impl DedupConfig {
    pub fn new(mode: DedupMode) -> Self {
        DedupConfig {
            mode,
            shingle: DEFAULT_SHINGLE,
            threshold: DEFAULT_JACCARD,
        }
    }
}

/// Why a test example was dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Removal {
    /// 0-based position in the test slice.
    pub test_index: usize,
    pub item: LabeledText,
    /// 1-based index of the matching training example.
    pub train_line: usize,
    pub train_text: String,
    /// 1.0 for exact matches.
    pub similarity: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DedupOutcome {
    pub kept: Vec<LabeledText>,
    pub removed: Vec<Removal>,
}

/// Trims and collapses internal whitespace runs to single spaces.
pub fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Character `n`-gram set of a normalized text; texts shorter than `n` form a
/// single shingle.
pub fn shingles(text: &str, n: usize) -> HashSet<String> {
    let chars: Vec<char> = text.chars().collect();
    if chars.len() <= n {
        return std::iter::once(text.to_string()).collect();
    }
    chars.windows(n).map(|w| w.iter().collect()).collect()
}

pub fn jaccard(a: &HashSet<String>, b: &HashSet<String>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

struct ShingleIndex {
    postings: HashMap<String, Vec<u32>>,
    sizes: Vec<usize>,
}

impl ShingleIndex {
    fn best_match(&self, set: &HashSet<String>) -> Option<(usize, f64)> {
        let mut inter: HashMap<u32, usize> = HashMap::new();
        for s in set {
            if let Some(ids) = self.postings.get(s) {
                for &id in ids {
                    *inter.entry(id).or_default() += 1;
                }
            }
        }
        inter
            .into_iter()
            .map(|(id, i)| {
                let union = set.len() + self.sizes[id as usize] - i;
                (id as usize, i as f64 / union as f64)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
    }
}

/// Splits `test` into the examples kept and those found in `train`.
pub fn dedup<'a, I>(test: &[LabeledText], train: I, config: &DedupConfig) -> DedupOutcome
where
    I: IntoIterator<Item = &'a LabeledText>,
{
    let mut exact: HashMap<String, (usize, String)> = HashMap::new();
    let mut index = ShingleIndex {
        postings: HashMap::new(),
        sizes: Vec::new(),
    };
    let mut train_texts: Vec<String> = Vec::new();
    for (i, ex) in train.into_iter().enumerate() {
        let norm = normalize(ex.text());
        if config.mode == DedupMode::Shingle {
            let set = shingles(&norm, config.shingle);
            let id = index.sizes.len() as u32;
            index.sizes.push(set.len());
            for s in set {
                index.postings.entry(s).or_default().push(id);
            }
            train_texts.push(ex.text().to_string());
        }
        exact.entry(norm).or_insert_with(|| (i + 1, ex.text().to_string()));
    }

    let mut out = DedupOutcome::default();
    for (test_index, item) in test.iter().enumerate() {
        let norm = normalize(item.text());
        if let Some((line, text)) = exact.get(&norm) {
            out.removed.push(Removal {
                test_index,
                item: item.clone(),
                train_line: *line,
                train_text: text.clone(),
                similarity: 1.0,
            });
            continue;
        }
        if config.mode == DedupMode::Shingle {
            let set = shingles(&norm, config.shingle);
            if let Some((id, sim)) = index.best_match(&set) {
                if sim > config.threshold {
                    out.removed.push(Removal {
                        test_index,
                        item: item.clone(),
                        train_line: id + 1,
                        train_text: train_texts[id].clone(),
                        similarity: sim,
                    });
                    continue;
                }
            }
        }
        out.kept.push(item.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::LanguageLabel;
    use proptest::prelude::*;

    fn ex(t: &str) -> LabeledText {
        LabeledText::new(vec![LanguageLabel::parse("eng_Latn").unwrap()], t).unwrap()
    }

    /// Brute-force Jaccard over explicit 5-gram lists.
    fn brute_jaccard(a: &str, b: &str) -> f64 {
        let grams = |s: &str| -> Vec<String> {
            let c: Vec<char> = s.chars().collect();
            let mut v: Vec<String> = (0..=c.len() - 5).map(|i| c[i..i + 5].iter().collect()).collect();
            v.sort();
            v.dedup();
            v
        };
        let (ga, gb) = (grams(a), grams(b));
        let inter = ga.iter().filter(|g| gb.contains(g)).count();
        inter as f64 / (ga.len() + gb.len() - inter) as f64
    }

    #[test]
    fn exact_examples() {
        let train = vec![ex("the quick brown fox"), ex("a b")];
        let test = vec![ex("the quick brown fox"), ex("a  b"), ex("something else")];
        let out = dedup(&test, &train, &DedupConfig::new(DedupMode::Exact));
        assert_eq!(out.kept, vec![ex("something else")]);
        assert_eq!(out.removed.len(), 2);
        assert_eq!(out.removed[0].train_line, 1);
        assert_eq!(out.removed[1].train_line, 2);
        assert_eq!(out.removed[1].test_index, 1);
    }

    #[test]
    fn near_duplicate_only_caught_by_shingles() {
        let a = "the committee approved the annual budget for road repairs on tuesday";
        let b = "the committee approved the annual budget for road repairs on tuesday!";
        let sim = brute_jaccard(&normalize(a), &normalize(b));
        assert!(sim > 0.8 && sim < 1.0, "{sim}");
        let train = vec![ex(a)];
        let test = vec![ex(b)];
        let exact = dedup(&test, &train, &DedupConfig::new(DedupMode::Exact));
        assert_eq!(exact.kept.len(), 1);
        let sh = dedup(&test, &train, &DedupConfig::new(DedupMode::Shingle));
        assert!(sh.kept.is_empty());
        assert!((sh.removed[0].similarity - sim).abs() < 1e-12);
    }

    #[test]
    fn dissimilar_lines_survive_shingle_mode() {
        let train = vec![ex("completely unrelated words here")];
        let test = vec![ex("the committee approved the budget")];
        let out = dedup(&test, &train, &DedupConfig::new(DedupMode::Shingle));
        assert_eq!(out.kept.len(), 1);
    }

    #[test]
    fn short_texts_use_whole_text_shingle() {
        assert_eq!(shingles("abc", 5).len(), 1);
        let s = shingles("abcdef", 5);
        assert_eq!(s.len(), 2);
    }

    proptest! {
        #[test]
        fn partition_and_disjointness(
            test in proptest::collection::vec("[ab ]{1,12}", 0..15),
            train in proptest::collection::vec("[ab ]{1,12}", 0..15),
            shingle_mode in any::<bool>(),
        ) {
            let test: Vec<LabeledText> = test.iter().filter(|t| !t.trim().is_empty()).map(|t| ex(t)).collect();
            let train: Vec<LabeledText> = train.iter().filter(|t| !t.trim().is_empty()).map(|t| ex(t)).collect();
            let mode = if shingle_mode { DedupMode::Shingle } else { DedupMode::Exact };
            let cfg = DedupConfig::new(mode);
            let out = dedup(&test, &train, &cfg);
            prop_assert_eq!(out.kept.len() + out.removed.len(), test.len());
            let train_norm: HashSet<String> = train.iter().map(|t| normalize(t.text())).collect();
            for k in &out.kept {
                let n = normalize(k.text());
                prop_assert!(!train_norm.contains(&n));
                if mode == DedupMode::Shingle {
                    let s = shingles(&n, 5);
                    for t in &train {
                        prop_assert!(jaccard(&s, &shingles(&normalize(t.text()), 5)) <= 0.8);
                    }
                }
            }
        }
    }
}
