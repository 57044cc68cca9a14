//! Decision policies applied after classification: softmax thresholding,
//! two-model agreement ensembles and routing to group-specialist models.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::io::load_model;
use crate::label::{AlignmentMap, LanguageLabel};
use crate::model::{Model, Prediction};

/// Threshold applied by default to the toolkit's own model.
pub const DEFAULT_TAU: f64 = 0.5;

#[derive(Debug, Error)]
pub enum DecisionError {
    #[error("threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("unknown ensemble mode {0:?} (expected top1|top3)")]
    UnknownMode(String),
    #[error("cascade config line {line}: {reason}")]
    ConfigSyntax { line: usize, reason: String },
    #[error("invalid cascade config: {0}")]
    InvalidConfig(String),
    #[error("no usable specialist for group {group}: {reason}")]
    SpecialistMissing { group: String, reason: String },
}

/// Replaces the top-1 label with `other` when its probability is below `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdPolicy {
    tau: f64,
}

impl ThresholdPolicy {
    pub fn new(tau: f64) -> Result<Self, DecisionError> {
        if (0.0..=1.0).contains(&tau) {
            Ok(ThresholdPolicy { tau })
        } else {
            Err(DecisionError::InvalidThreshold(tau))
        }
    }

    /// Accepts every top-1 label.
    pub fn disabled() -> Self {
        ThresholdPolicy { tau: 0.0 }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn apply(&self, pred: &Prediction) -> LanguageLabel {
        match pred.top() {
            Some((label, p)) if p >= self.tau => label,
            _ => LanguageLabel::Other,
        }
    }
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy { tau: DEFAULT_TAU }
    }
}

/// Top-1 label if its probability is at least `tau`, else `other`.
pub fn apply_threshold(pred: &Prediction, policy: &ThresholdPolicy) -> LanguageLabel {
    policy.apply(pred)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnsembleMode {
    Top1,
    Top3,
}

impl FromStr for EnsembleMode {
    type Err = DecisionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "top1" => Ok(EnsembleMode::Top1),
            "top3" => Ok(EnsembleMode::Top3),
            other => Err(DecisionError::UnknownMode(other.to_string())),
        }
    }
}

/// Agreement of two already thresholded, aligned labels.
pub fn ensemble_top1(a: LanguageLabel, b: LanguageLabel) -> LanguageLabel {
    if a == b {
        a
    } else {
        LanguageLabel::Other
    }
}

/// Agreement of two top-3 lists.
///
/// Candidates are the labels both lists contain (ignoring `other`); the winner
/// has the highest mean of its two probabilities, ties going to the smaller
/// label. An empty intersection yields `other`. Only the first three entries
/// of each list are considered, and a repeated label counts at its first
/// (highest) position.
pub fn ensemble_top3(a: &Prediction, b: &Prediction) -> LanguageLabel {
    let top3 = |p: &Prediction| {
        let mut seen: Vec<(LanguageLabel, f64)> = Vec::with_capacity(3);
        for &(l, prob) in p.ranked.iter().take(3) {
            if !l.is_other() && !seen.iter().any(|(s, _)| *s == l) {
                seen.push((l, prob));
            }
        }
        seen
    };
    let (ta, tb) = (top3(a), top3(b));
    ta.iter()
        .filter_map(|(l, pa)| tb.iter().find(|(m, _)| m == l).map(|(_, pb)| (*l, (pa + pb) / 2.0)))
        .min_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)))
        .map(|(l, _)| l)
        .unwrap_or(LanguageLabel::Other)
}

/// Maps every label of a foreign ranked list through `map`. Order and
/// probabilities are kept.
pub fn align_ranked(ranked: &[(String, f64)], map: &AlignmentMap) -> Prediction {
    Prediction {
        ranked: ranked.iter().map(|(l, p)| (map.align(l), *p)).collect(),
    }
}

/// One language group and the specialist that resolves it.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeGroup {
    pub name: String,
    pub members: Vec<LanguageLabel>,
    pub model_path: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CascadeConfig {
    pub groups: Vec<CascadeGroup>,
}

/// Group memberships used when training hierarchical models for the four
/// closely related groups (Scandinavian, South Slavic, Arabic and Persian
/// varieties). The Arabic and Persian groups list unmerged varieties, so they
/// only apply to a base model trained without the macrolanguage merges.
pub fn default_groups() -> Vec<(&'static str, Vec<LanguageLabel>)> {
    let parse = |xs: &[&str]| -> Vec<LanguageLabel> {
        xs.iter()
            .map(|s| LanguageLabel::parse(s).expect("static label"))
            .collect()
    };
    vec![
        (
            "scandinavian",
            parse(&["dan_Latn", "fao_Latn", "isl_Latn", "nob_Latn", "nno_Latn", "swe_Latn"]),
        ),
        ("south_slavic", parse(&["bos_Latn", "hrv_Latn", "srp_Latn"])),
        (
            "arabic",
            parse(&[
                "arz_Arab", "apc_Arab", "acm_Arab", "ary_Arab", "ars_Arab", "arb_Arab", "acq_Arab", "aeb_Arab",
            ]),
        ),
        ("persian", parse(&["prs_Arab", "pes_Arab"])),
    ]
}

impl CascadeConfig {
    /// Parses `group<TAB>member<TAB>model_path` rows. Relative model paths
    /// resolve against `base_dir`.
    pub fn parse_tsv(text: &str, base_dir: &Path) -> Result<Self, DecisionError> {
        let mut groups: Vec<CascadeGroup> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let syntax = |reason: String| DecisionError::ConfigSyntax { line: i + 1, reason };
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            let [name, member, path] = cols[..] else {
                return Err(syntax(format!("expected 3 tab-separated columns, got {}", cols.len())));
            };
            if name.is_empty() || path.is_empty() {
                return Err(syntax("empty group name or model path".into()));
            }
            let member = LanguageLabel::parse(member).map_err(|e| syntax(e.to_string()))?;
            let path = base_dir.join(path);
            match groups.iter_mut().find(|g| g.name == name) {
                Some(g) => {
                    if g.model_path != path {
                        return Err(syntax(format!(
                            "group {name} names two model paths ({} and {})",
                            g.model_path.display(),
                            path.display()
                        )));
                    }
                    g.members.push(member);
                }
                None => groups.push(CascadeGroup {
                    name: name.to_string(),
                    members: vec![member],
                    model_path: path,
                }),
            }
        }
        let cfg = CascadeConfig { groups };
        cfg.check_disjoint()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, DecisionError> {
        let text = std::fs::read_to_string(path).map_err(|e| DecisionError::ConfigSyntax {
            line: 0,
            reason: format!("{}: {e}", path.display()),
        })?;
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse_tsv(&text, dir)
    }

    fn check_disjoint(&self) -> Result<(), DecisionError> {
        let mut seen: HashMap<LanguageLabel, &str> = HashMap::new();
        for g in &self.groups {
            for m in &g.members {
                if m.is_other() {
                    return Err(DecisionError::InvalidConfig("`other` cannot be a group member".into()));
                }
                if let Some(prev) = seen.insert(*m, &g.name) {
                    if prev != g.name {
                        return Err(DecisionError::InvalidConfig(format!(
                            "{m} belongs to both {prev} and {}",
                            g.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Which model produced a cascade decision.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeOutcome {
    pub label: LanguageLabel,
    /// Top-1 probability of the deciding model.
    pub prob: f64,
    /// Index of the group whose specialist decided, if any.
    pub group: Option<usize>,
}

/// Base model plus lazily loaded group specialists.
pub struct Cascade {
    base: Arc<Model>,
    config: CascadeConfig,
    owner: HashMap<LanguageLabel, usize>,
    specialists: Vec<OnceLock<Result<Arc<Model>, String>>>,
}

impl Cascade {
    /// Checks that every group member is in the base model's inventory.
    pub fn new(base: Arc<Model>, config: CascadeConfig) -> Result<Self, DecisionError> {
        config.check_disjoint()?;
        let inventory: HashSet<&LanguageLabel> = base.labels().iter().collect();
        let mut owner = HashMap::new();
        for (gi, g) in config.groups.iter().enumerate() {
            for m in &g.members {
                if !inventory.contains(m) {
                    return Err(DecisionError::InvalidConfig(format!(
                        "group {} member {m} is not a base model label",
                        g.name
                    )));
                }
                owner.insert(*m, gi);
            }
        }
        let specialists = config.groups.iter().map(|_| OnceLock::new()).collect();
        Ok(Cascade {
            base,
            config,
            owner,
            specialists,
        })
    }

    /// Installs an already loaded specialist for `group`.
    pub fn with_specialist(self, group: &str, model: Arc<Model>) -> Result<Self, DecisionError> {
        let gi = self
            .config
            .groups
            .iter()
            .position(|g| g.name == group)
            .ok_or_else(|| DecisionError::InvalidConfig(format!("unknown group {group}")))?;
        let checked = check_specialist(&self.config.groups[gi], &model).map(|_| model);
        let cell = OnceLock::new();
        let _ = cell.set(checked);
        let mut this = self;
        this.specialists[gi] = cell;
        Ok(this)
    }

    pub fn config(&self) -> &CascadeConfig {
        &self.config
    }

    pub fn base(&self) -> &Model {
        &self.base
    }

    fn specialist(&self, gi: usize) -> Result<&Arc<Model>, DecisionError> {
        let group = &self.config.groups[gi];
        let res = self.specialists[gi].get_or_init(|| {
            let model = load_model(&group.model_path).map_err(|e| format!("{}: {e}", group.model_path.display()))?;
            check_specialist(group, &model)?;
            Ok(Arc::new(model))
        });
        res.as_ref().map_err(|reason| DecisionError::SpecialistMissing {
            group: group.name.clone(),
            reason: reason.clone(),
        })
    }

    /// Thresholded base prediction, replaced by the owning group's specialist
    /// (same threshold) when the base label falls inside a group.
    pub fn predict(&self, text: &str, threshold: &ThresholdPolicy) -> Result<CascadeOutcome, DecisionError> {
        let base = self.base.predict_topk(text, 1);
        let prob = base.top().map(|(_, p)| p).unwrap_or(0.0);
        let label = threshold.apply(&base);
        let Some(&gi) = self.owner.get(&label) else {
            return Ok(CascadeOutcome {
                label,
                prob,
                group: None,
            });
        };
        let spec = self.specialist(gi)?.predict_topk(text, 1);
        Ok(CascadeOutcome {
            label: threshold.apply(&spec),
            prob: spec.top().map(|(_, p)| p).unwrap_or(0.0),
            group: Some(gi),
        })
    }
}

fn check_specialist(group: &CascadeGroup, model: &Model) -> Result<(), String> {
    match model.labels().iter().find(|l| !group.members.contains(l)) {
        Some(l) => Err(format!("specialist label {l} is outside group {}", group.name)),
        None => Ok(()),
    }
}

/// Free-function form of [`Cascade::predict`].
pub fn cascade_predict(
    cascade: &Cascade,
    text: &str,
    threshold: &ThresholdPolicy,
) -> Result<LanguageLabel, DecisionError> {
    cascade.predict(text, threshold).map(|o| o.label)
}
