//! Evaluation: confusion matrices, per-class FPR/precision/recall/F1, macro
//! averages, multilabel loose/exact accuracy and trash-bin diagnostics.
//!
//! Every ratio with a zero denominator is defined as 0.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::label::LanguageLabel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {golds} gold labels vs {preds} predictions")]
    LengthMismatch { golds: usize, preds: usize },
    #[error("no examples to evaluate")]
    NoExamples,
    #[error("class {0} is not in the confusion matrix")]
    UnknownClass(LanguageLabel),
    #[error("no classes to average")]
    NoClasses,
    #[error("example {0} has an empty gold set")]
    EmptyGoldSet(usize),
    #[error("trash-bin threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1_of(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Gold × predicted counts. `classes` is sorted and always contains `other`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: Vec<LanguageLabel>,
    index: HashMap<LanguageLabel, usize>,
    counts: Vec<u64>,
    n_total: u64,
}

impl ConfusionMatrix {
    fn with_classes(set: BTreeSet<LanguageLabel>) -> Self {
        let classes: Vec<LanguageLabel> = set.into_iter().collect();
        let index = classes.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        let n = classes.len();
        ConfusionMatrix {
            classes,
            index,
            counts: vec![0; n * n],
            n_total: 0,
        }
    }

    pub fn classes(&self) -> &[LanguageLabel] {
        &self.classes
    }

    pub fn n_total(&self) -> u64 {
        self.n_total
    }

    /// `counts[gold][pred]`; zero for labels outside the matrix.
    pub fn count(&self, gold: &LanguageLabel, pred: &LanguageLabel) -> u64 {
        match (self.index.get(gold), self.index.get(pred)) {
            (Some(&g), Some(&p)) => self.counts[g * self.classes.len() + p],
            _ => 0,
        }
    }

    fn add(&mut self, gold: &LanguageLabel, pred: &LanguageLabel, n: u64) {
        let k = self.classes.len();
        let (g, p) = (self.index[gold], self.index[pred]);
        self.counts[g * k + p] += n;
        self.n_total += n;
    }

    pub fn gold_total(&self, c: &LanguageLabel) -> u64 {
        self.classes.iter().map(|p| self.count(c, p)).sum()
    }

    pub fn pred_total(&self, c: &LanguageLabel) -> u64 {
        self.classes.iter().map(|g| self.count(g, c)).sum()
    }

    /// Classes with at least one gold or predicted example.
    pub fn active_classes(&self) -> Vec<LanguageLabel> {
        self.classes
            .iter()
            .filter(|c| self.gold_total(c) + self.pred_total(c) > 0)
            .copied()
            .collect()
    }

    /// Elementwise sum over the union of both class sets.
    pub fn merge(&self, other: &ConfusionMatrix) -> ConfusionMatrix {
        let set: BTreeSet<LanguageLabel> = self.classes.iter().chain(&other.classes).copied().collect();
        let mut out = ConfusionMatrix::with_classes(set);
        for m in [self, other] {
            for g in &m.classes {
                for p in &m.classes {
                    let n = m.count(g, p);
                    if n > 0 {
                        out.add(g, p, n);
                    }
                }
            }
        }
        out
    }
}

/// Cross-tabulates gold against predicted labels.
pub fn confusion(golds: &[LanguageLabel], preds: &[LanguageLabel]) -> Result<ConfusionMatrix, EvalError> {
    if golds.len() != preds.len() {
        return Err(EvalError::LengthMismatch {
            golds: golds.len(),
            preds: preds.len(),
        });
    }
    if golds.is_empty() {
        return Err(EvalError::NoExamples);
    }
    let mut set: BTreeSet<LanguageLabel> = golds.iter().chain(preds).copied().collect();
    set.insert(LanguageLabel::Other);
    let mut cm = ConfusionMatrix::with_classes(set);
    for (g, p) in golds.iter().zip(preds) {
        cm.add(g, p, 1);
    }
    Ok(cm)
}

/// One-vs-rest counts and ratios for one class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub fpr: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ClassMetrics {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        ClassMetrics {
            tp,
            fp,
            fn_,
            tn,
            fpr: ratio(fp, fp + tn),
            precision,
            recall,
            f1: f1_of(precision, recall),
        }
    }

    pub fn ratios(&self) -> RatioMetrics {
        RatioMetrics {
            fpr: self.fpr,
            precision: self.precision,
            recall: self.recall,
            f1: self.f1,
        }
    }
}

/// The ratio part of [`ClassMetrics`], used for macro averages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioMetrics {
    pub fpr: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn per_class_metrics(cm: &ConfusionMatrix, c: &LanguageLabel) -> Result<ClassMetrics, EvalError> {
    if !cm.index.contains_key(c) {
        return Err(EvalError::UnknownClass(*c));
    }
    let tp = cm.count(c, c);
    let fp = cm.pred_total(c) - tp;
    let fn_ = cm.gold_total(c) - tp;
    let tn = cm.n_total - tp - fp - fn_;
    Ok(ClassMetrics::from_counts(tp, fp, fn_, tn))
}

/// Metrics for every class with at least one gold or predicted example.
pub fn all_class_metrics(cm: &ConfusionMatrix) -> BTreeMap<LanguageLabel, ClassMetrics> {
    cm.active_classes()
        .into_iter()
        .map(|c| (c, per_class_metrics(cm, &c).expect("class from matrix")))
        .collect()
}

/// Unweighted mean of the ratios.
pub fn macro_average(per_class: &BTreeMap<LanguageLabel, ClassMetrics>) -> Result<RatioMetrics, EvalError> {
    if per_class.is_empty() {
        return Err(EvalError::NoClasses);
    }
    let n = per_class.len() as f64;
    let sum = per_class.values().fold([0.0; 4], |acc, m| {
        [acc[0] + m.fpr, acc[1] + m.precision, acc[2] + m.recall, acc[3] + m.f1]
    });
    Ok(RatioMetrics {
        fpr: sum[0] / n,
        precision: sum[1] / n,
        recall: sum[2] / n,
        f1: sum[3] / n,
    })
}

/// A non-empty gold label set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultilabelGold(BTreeSet<LanguageLabel>);

impl MultilabelGold {
    pub fn new<I: IntoIterator<Item = LanguageLabel>>(labels: I) -> Option<Self> {
        let set: BTreeSet<LanguageLabel> = labels.into_iter().collect();
        (!set.is_empty()).then_some(MultilabelGold(set))
    }

    pub fn labels(&self) -> &BTreeSet<LanguageLabel> {
        &self.0
    }

    pub fn contains(&self, l: &LanguageLabel) -> bool {
        self.0.contains(l)
    }
}

/// Per-class counts under loose matching.
///
/// `tp`: predicted c and c is gold. `fp`: predicted c and c is not gold.
/// `fn_`: c is gold and the prediction is not in the gold set at all (a
/// multilabel example predicted as another of its valid labels is not a miss
/// for c).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LooseClassMetrics {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl LooseClassMetrics {
    fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        LooseClassMetrics {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1: f1_of(precision, recall),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultilabelReport {
    pub n: u64,
    pub loose_correct: u64,
    pub exact_correct: u64,
    pub loose_acc: f64,
    pub exact_acc: f64,
    pub per_class: BTreeMap<LanguageLabel, LooseClassMetrics>,
}

/// Loose (`{p} ⊆ gold`) and exact (`{p} = gold`) accuracy plus per-class loose F1.
pub fn multilabel_metrics(golds: &[MultilabelGold], preds: &[LanguageLabel]) -> Result<MultilabelReport, EvalError> {
    if golds.len() != preds.len() {
        return Err(EvalError::LengthMismatch {
            golds: golds.len(),
            preds: preds.len(),
        });
    }
    if let Some(i) = golds.iter().position(|g| g.0.is_empty()) {
        return Err(EvalError::EmptyGoldSet(i));
    }
    let mut counts: BTreeMap<LanguageLabel, (u64, u64, u64)> = BTreeMap::new();
    let (mut loose, mut exact) = (0u64, 0u64);
    for (g, p) in golds.iter().zip(preds) {
        let hit = g.contains(p);
        if hit {
            loose += 1;
            if g.0.len() == 1 {
                exact += 1;
            }
            counts.entry(*p).or_default().0 += 1;
        } else {
            counts.entry(*p).or_default().1 += 1;
            for c in &g.0 {
                counts.entry(*c).or_default().2 += 1;
            }
        }
        for c in &g.0 {
            counts.entry(*c).or_default();
        }
    }
    let n = golds.len() as u64;
    Ok(MultilabelReport {
        n,
        loose_correct: loose,
        exact_correct: exact,
        loose_acc: ratio(loose, n),
        exact_acc: ratio(exact, n),
        per_class: counts
            .into_iter()
            .map(|(c, (tp, fp, fn_))| (c, LooseClassMetrics::from_counts(tp, fp, fn_)))
            .collect(),
    })
}

/// Share of each predicted class's predictions whose gold is `other` or
/// `zxx_Zxxx`. Returns classes at or above `threshold`, highest share first.
pub fn trash_bin_report(cm: &ConfusionMatrix, threshold: f64) -> Result<Vec<(LanguageLabel, f64)>, EvalError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(EvalError::InvalidThreshold(threshold));
    }
    let mut out: Vec<(LanguageLabel, f64)> = cm
        .classes
        .iter()
        .filter_map(|c| {
            let total = cm.pred_total(c);
            if total == 0 {
                return None;
            }
            let foreign: u64 = cm
                .classes
                .iter()
                .filter(|g| g.is_foreign())
                .map(|g| cm.count(g, c))
                .sum();
            let share = ratio(foreign, total);
            (share >= threshold).then_some((*c, share))
        })
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsReport {
    pub per_class: BTreeMap<LanguageLabel, ClassMetrics>,
    pub macro_avg: Option<RatioMetrics>,
    pub multilabel: Option<MultilabelReport>,
    pub trash_bins: Vec<(LanguageLabel, f64)>,
}

/// Single-label evaluation.
pub fn evaluate(
    golds: &[LanguageLabel],
    preds: &[LanguageLabel],
    trash_threshold: f64,
) -> Result<MetricsReport, EvalError> {
    let cm = confusion(golds, preds)?;
    let per_class = all_class_metrics(&cm);
    Ok(MetricsReport {
        macro_avg: macro_average(&per_class).ok(),
        per_class,
        multilabel: None,
        trash_bins: trash_bin_report(&cm, trash_threshold)?,
    })
}

/// Multilabel evaluation. Per-class single-label metrics are reported only
/// when every gold set is a singleton; trash bins use a loose reduction where
/// a correct prediction counts as its own gold and a miss counts against the
/// smallest gold label.
pub fn evaluate_multilabel(
    golds: &[MultilabelGold],
    preds: &[LanguageLabel],
    trash_threshold: f64,
) -> Result<MetricsReport, EvalError> {
    let multilabel = multilabel_metrics(golds, preds)?;
    let reduced: Vec<LanguageLabel> = golds
        .iter()
        .zip(preds)
        .map(|(g, p)| if g.contains(p) { *p } else { *g.0.iter().next().unwrap() })
        .collect();
    let cm = confusion(&reduced, preds)?;
    let singletons = golds.iter().all(|g| g.0.len() == 1);
    let per_class = if singletons {
        all_class_metrics(&cm)
    } else {
        BTreeMap::new()
    };
    Ok(MetricsReport {
        macro_avg: macro_average(&per_class).ok(),
        per_class,
        multilabel: Some(multilabel),
        trash_bins: trash_bin_report(&cm, trash_threshold)?,
    })
}
