//! Synthetic not-a-language data: random code-point sequences drawn from
//! per-script ranges.
//!
//! Each example picks a script uniformly, a length uniformly in
//! `[len_min, len_max]`, then draws code points uniformly over the script's
//! ranges (weighted by range width). Surrogates, unassigned code points,
//! control characters and whitespace are rejected and redrawn, so every
//! example is a single whitespace-free token.

use std::ops::RangeInclusive;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unicode_general_category::{get_general_category, GeneralCategory};

use crate::corpus::{CorpusError, LabeledText};
use crate::label::LanguageLabel;

/// Shipped script ranges covering the scripts of the v3 inventory.
pub const DEFAULT_SCRIPT_RANGES: &str = include_str!("../data/script_ranges.tsv");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptRanges {
    pub name: String,
    pub ranges: Vec<RangeInclusive<u32>>,
}

impl ScriptRanges {
    fn width(&self) -> u64 {
        self.ranges.iter().map(|r| u64::from(r.end() - r.start()) + 1).sum()
    }

    fn nth(&self, mut i: u64) -> u32 {
        for r in &self.ranges {
            let w = u64::from(r.end() - r.start()) + 1;
            if i < w {
                return r.start() + i as u32;
            }
            i -= w;
        }
        unreachable!("index within total width")
    }

    fn has_usable(&self) -> bool {
        self.ranges.iter().any(|r| r.clone().any(|cp| usable(cp).is_some()))
    }
}

fn usable(cp: u32) -> Option<char> {
    let c = char::from_u32(cp)?;
    if c.is_control() || c.is_whitespace() {
        return None;
    }
    match get_general_category(c) {
        GeneralCategory::Unassigned | GeneralCategory::Surrogate => None,
        _ => Some(c),
    }
}

/// Parses `script<TAB>hexlo-hexhi(,hexlo-hexhi)*` lines.
pub fn parse_script_ranges(text: &str) -> Result<Vec<ScriptRanges>, CorpusError> {
    let bad = |line: usize, reason: String| CorpusError::InvalidRange(format!("line {line}: {reason}"));
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let (name, spec) = line.split_once('\t').ok_or_else(|| bad(i + 1, "missing tab".into()))?;
        let mut ranges = Vec::new();
        for part in spec.split(',') {
            let (lo, hi) = part
                .trim()
                .split_once('-')
                .ok_or_else(|| bad(i + 1, format!("range {part:?} lacks '-'")))?;
            let parse = |h: &str| u32::from_str_radix(h, 16).map_err(|_| bad(i + 1, format!("bad hex {h:?}")));
            ranges.push(parse(lo)?..=parse(hi)?);
        }
        out.push(ScriptRanges {
            name: name.trim().to_string(),
            ranges,
        });
    }
    Ok(out)
}

pub fn load_script_ranges(path: &Path) -> Result<Vec<ScriptRanges>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    parse_script_ranges(&text)
}

pub fn default_script_ranges() -> Vec<ScriptRanges> {
    parse_script_ranges(DEFAULT_SCRIPT_RANGES).expect("shipped script ranges are valid")
}

#[derive(Debug, Clone)]
pub struct NoiseSpec {
    pub scripts: Vec<ScriptRanges>,
    pub n: usize,
    pub len_min: usize,
    pub len_max: usize,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |s: String| Err(CorpusError::InvalidRange(s));
        if self.len_min == 0 || self.len_min > self.len_max {
            return bad(format!(
                "need 1 <= len_min <= len_max, got {}..{}",
                self.len_min, self.len_max
            ));
        }
        if self.scripts.is_empty() && self.n > 0 {
            return bad("no scripts given".into());
        }
        for s in &self.scripts {
            if s.ranges.is_empty() {
                return bad(format!("script {} has no ranges", s.name));
            }
            for r in &s.ranges {
                if r.start() > r.end() || *r.end() > 0x10FFFF {
                    return bad(format!(
                        "script {}: invalid range {:X}-{:X}",
                        s.name,
                        r.start(),
                        r.end()
                    ));
                }
            }
            if !s.has_usable() {
                return bad(format!("script {} has no assigned printable code points", s.name));
            }
        }
        Ok(())
    }
}

/// Generates `spec.n` examples labeled `zxx_Zxxx`.
pub fn gen_noise(spec: &NoiseSpec) -> Result<Vec<LabeledText>, CorpusError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let widths: Vec<u64> = spec.scripts.iter().map(ScriptRanges::width).collect();
    let mut out = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let si = rng.random_range(0..spec.scripts.len());
        let script = &spec.scripts[si];
        let len = rng.random_range(spec.len_min..=spec.len_max);
        let mut text = String::with_capacity(len * 3);
        let mut produced = 0;
        while produced < len {
            let cp = script.nth(rng.random_range(0..widths[si]));
            if let Some(c) = usable(cp) {
                text.push(c);
                produced += 1;
            }
        }
        out.push(LabeledText::new(vec![LanguageLabel::NOT_A_LANGUAGE], &text)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn latin_spec(seed: u64, n: usize) -> NoiseSpec {
        NoiseSpec {
            scripts: parse_script_ranges("Latn\t0041-005A,0061-007A").unwrap(),
            n,
            len_min: 3,
            len_max: 12,
            seed,
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let a = gen_noise(&latin_spec(42, 50)).unwrap();
        let b = gen_noise(&latin_spec(42, 50)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gen_noise(&latin_spec(43, 50)).unwrap());
    }

    #[test]
    fn code_points_stay_in_ranges() {
        for ex in gen_noise(&latin_spec(1, 200)).unwrap() {
            assert_eq!(ex.labels(), &[LanguageLabel::NOT_A_LANGUAGE]);
            let n = ex.text().chars().count();
            assert!((3..=12).contains(&n));
            assert!(ex.text().chars().all(|c| c.is_ascii_alphabetic()));
        }
    }

    #[test]
    fn zero_examples() {
        assert!(gen_noise(&latin_spec(1, 0)).unwrap().is_empty());
    }

    #[test]
    fn skips_surrogates_and_unassigned() {
        // D7FF is assigned only in part; D800-DFFF are surrogates; 0378-0379 unassigned
        let spec = NoiseSpec {
            scripts: parse_script_ranges("X\t0378-037A,D800-DFFF").unwrap(),
            n: 30,
            len_min: 2,
            len_max: 4,
            seed: 3,
        };
        for ex in gen_noise(&spec).unwrap() {
            assert!(ex.text().chars().all(|c| c == '\u{37A}'));
        }
    }

    #[test]
    fn invalid_specs() {
        let mut s = latin_spec(0, 1);
        s.len_min = 0;
        assert!(matches!(gen_noise(&s), Err(CorpusError::InvalidRange(_))));
        let mut s = latin_spec(0, 1);
        s.len_min = 5;
        s.len_max = 4;
        assert!(gen_noise(&s).is_err());
        let mut s = latin_spec(0, 1);
        s.scripts[0].ranges = vec![0x110000..=0x110005];
        assert!(gen_noise(&s).is_err());
        let mut s = latin_spec(0, 1);
        s.scripts[0].ranges = vec![0xD800..=0xDFFF];
        assert!(gen_noise(&s).is_err());
        assert!(parse_script_ranges("Latn\t41").is_err());
        assert!(parse_script_ranges("Latn\t4G-50").is_err());
    }

    #[test]
    fn shipped_ranges_are_valid() {
        let spec = NoiseSpec {
            scripts: default_script_ranges(),
            n: 100,
            len_min: 1,
            len_max: 30,
            seed: 9,
        };
        assert!(spec.scripts.len() >= 25);
        assert_eq!(gen_noise(&spec).unwrap().len(), 100);
    }
}
