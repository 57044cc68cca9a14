//! A small bundled corpus for end-to-end checks: eight languages built from
//! original seed prose, plus generated not-a-language noise.
//!
//! Each seed text is split by words: the first 80% feeds training lines and
//! the last 20% feeds test lines, so no test window shares a word position
//! with any training window. Lines are seeded random windows of 5 to 12
//! consecutive words.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::LabeledText;
use crate::label::LanguageLabel;
use crate::noise::{default_script_ranges, gen_noise, NoiseSpec};

pub const SEEDS: [(&str, &str); 8] = [
    ("deu_Latn", include_str!("../data/seeds/deu_Latn.txt")),
    ("ell_Grek", include_str!("../data/seeds/ell_Grek.txt")),
    ("eng_Latn", include_str!("../data/seeds/eng_Latn.txt")),
    ("fra_Latn", include_str!("../data/seeds/fra_Latn.txt")),
    ("ita_Latn", include_str!("../data/seeds/ita_Latn.txt")),
    ("pol_Latn", include_str!("../data/seeds/pol_Latn.txt")),
    ("rus_Cyrl", include_str!("../data/seeds/rus_Cyrl.txt")),
    ("spa_Latn", include_str!("../data/seeds/spa_Latn.txt")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeskConfig {
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Generated not-a-language training lines. Noise spans many scripts, so
    /// it needs more examples than a single language to cover each one.
    pub noise_train: usize,
    pub min_words: usize,
    pub max_words: usize,
    pub seed: u64,
}

impl Default for DeskConfig {
    fn default() -> Self {
        DeskConfig {
            train_per_class: 400,
            test_per_class: 100,
            noise_train: 1600,
            min_words: 5,
            max_words: 12,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DeskCorpus {
    pub train: Vec<LabeledText>,
    pub test: Vec<LabeledText>,
}

fn windows(words: &[&str], n: usize, cfg: &DeskConfig, rng: &mut ChaCha8Rng, label: LanguageLabel) -> Vec<LabeledText> {
    (0..n)
        .map(|_| {
            let len = rng.random_range(cfg.min_words..=cfg.max_words).min(words.len());
            let start = rng.random_range(0..=words.len() - len);
            LabeledText::new(vec![label], &words[start..start + len].join(" ")).expect("seed text has no newlines")
        })
        .collect()
}

/// Builds the corpus. Noise test lines number `test_per_class`; train and
/// test noise come from independent seeds.
pub fn desk_corpus(cfg: &DeskConfig) -> DeskCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (code, text) in SEEDS {
        let label = LanguageLabel::parse(code).expect("seed label");
        let words: Vec<&str> = text.split_whitespace().collect();
        let cut = words.len() * 4 / 5;
        train.extend(windows(&words[..cut], cfg.train_per_class, cfg, &mut rng, label));
        test.extend(windows(&words[cut..], cfg.test_per_class, cfg, &mut rng, label));
    }
    let noise = |n: usize, seed: u64| {
        gen_noise(&NoiseSpec {
            scripts: default_script_ranges(),
            n,
            len_min: 5,
            len_max: 40,
            seed,
        })
        .expect("shipped script ranges are valid")
    };
    train.extend(noise(cfg.noise_train, cfg.seed.wrapping_mul(2).wrapping_add(1)));
    test.extend(noise(cfg.test_per_class, cfg.seed.wrapping_mul(2).wrapping_add(2)));
    DeskCorpus { train, test }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_labels() {
        let c = desk_corpus(&DeskConfig::default());
        assert_eq!(c.train.len(), 8 * 400 + 1600);
        assert_eq!(c.test.len(), 9 * 100);
        for ex in c.train.iter().chain(&c.test) {
            assert!(ex.is_single_label());
        }
        let zxx = c.test.iter().filter(|e| e.labels()[0].is_not_a_language()).count();
        assert_eq!(zxx, 100);
    }

    #[test]
    fn seed_texts_are_long_enough() {
        for (code, text) in SEEDS {
            assert!(text.split_whitespace().count() >= 200, "{code}");
        }
    }

    #[test]
    fn deterministic() {
        let a = desk_corpus(&DeskConfig::default());
        let b = desk_corpus(&DeskConfig::default());
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
    }
}
