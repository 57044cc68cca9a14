//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use lidkit::decision::{ensemble_top1, Cascade, CascadeConfig, CascadeGroup, ThresholdPolicy};
use lidkit::desk::{desk_corpus, DeskConfig};
use lidkit::eval::{
    all_class_metrics, confusion, evaluate, macro_average, multilabel_metrics, per_class_metrics, ClassMetrics,
    ConfusionMatrix, MultilabelGold,
};
use lidkit::features::FeatureParams;
use lidkit::io::{read_model, write_model};
use lidkit::label::{canonicalize, v3_inventory, validate_inventory, LanguageLabel, MergeMap};
use lidkit::model::{Matrix, Model, ModelError, Prediction, TrainParams, Vocabulary};
use lidkit::noise::{default_script_ranges, gen_noise, NoiseSpec};
use lidkit::train::train;
use lidkit::LabeledText;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn l(s: &str) -> LanguageLabel {
    LanguageLabel::parse(s).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn pool(n: usize) -> Vec<LanguageLabel> {
    ["aaa_Latn", "bbb_Latn", "ccc_Cyrl", "ddd_Grek", "eee_Arab", "fff_Latn"][..n]
        .iter()
        .map(|s| l(s))
        .collect()
}

// 1 -------------------------------------------------------------------------

fn desk_params() -> TrainParams {
    TrainParams {
        dim: 32,
        lr: 0.5,
        epochs: 10,
        seed: 1,
        threads: 1,
        feature: FeatureParams {
            bucket: 1 << 18,
            min_count: 1,
            ..FeatureParams::default()
        },
        ..TrainParams::default()
    }
}

fn c1_desk_end_to_end() -> Outcome {
    let start = Instant::now();
    let corpus = desk_corpus(&DeskConfig::default());
    let model = train(&corpus.train, &desk_params()).map_err(|e| e.to_string())?;
    let golds: Vec<LanguageLabel> = corpus.test.iter().map(|e| e.labels()[0]).collect();
    let policy = ThresholdPolicy::disabled();
    let preds: Vec<LanguageLabel> = corpus
        .test
        .iter()
        .map(|e| policy.apply(&model.predict_topk(e.text(), 1)))
        .collect();
    let report = evaluate(&golds, &preds, 0.5).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let macro_f1 = report.macro_avg.map(|m| m.f1).unwrap_or(0.0);
    let zxx_recall = report
        .per_class
        .get(&LanguageLabel::NOT_A_LANGUAGE)
        .map(|m| m.recall)
        .unwrap_or(0.0);
    let detail = format!(
        "macro F1 {macro_f1:.4}, zxx recall {zxx_recall:.4}, {} train / {} test, {:.1}s",
        corpus.train.len(),
        corpus.test.len(),
        elapsed.as_secs_f64()
    );
    ensure(macro_f1 >= 0.95, || format!("macro F1 below 0.95: {detail}"))?;
    ensure(zxx_recall >= 0.95, || format!("zxx recall below 0.95: {detail}"))?;
    ensure(elapsed.as_secs_f64() < 120.0, || format!("too slow: {detail}"))?;
    Ok(detail)
}

// 2 -------------------------------------------------------------------------

/// Independent f64 forward pass: mean-pooled rows, linear layer, cross-entropy.
fn oracle_loss(input: &[Vec<f64>], output: &[Vec<f64>], rows: &[usize], target: usize) -> f64 {
    let dim = output[0].len();
    let mut h = vec![0.0; dim];
    for &r in rows {
        for c in 0..dim {
            h[c] += input[r][c];
        }
    }
    for v in &mut h {
        *v /= rows.len() as f64;
    }
    let z: Vec<f64> = output
        .iter()
        .map(|w| w.iter().zip(&h).map(|(a, b)| a * b).sum())
        .collect();
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    lse - z[target]
}

fn norm_rel_err(a: &[f64], n: &[f64]) -> f64 {
    let diff = a.iter().zip(n).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(n.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn random_model(
    rng: &mut ChaCha8Rng,
    dim: usize,
    labels: Vec<LanguageLabel>,
    words: Vec<String>,
    feature: FeatureParams,
) -> Model {
    let vocab = Vocabulary::from_parts(words.into_iter().map(|w| (w, feature.min_count)).collect(), labels).unwrap();
    let in_rows = vocab.n_words() + feature.bucket as usize;
    let scale = 1.0f32;
    let input: Vec<f32> = (0..in_rows * dim).map(|_| rng.random_range(-scale..scale)).collect();
    let output: Vec<f32> = (0..vocab.n_labels() * dim)
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    let n_labels = vocab.n_labels();
    Model::from_parts(
        vocab,
        Matrix::from_vec(in_rows, dim, input).unwrap(),
        Matrix::from_vec(n_labels, dim, output).unwrap(),
        TrainParams {
            dim,
            feature,
            ..TrainParams::default()
        },
    )
    .unwrap()
}

fn random_word(rng: &mut ChaCha8Rng) -> String {
    let alphabet: Vec<char> = "abcdefghijklmnopqrstuvwxyzäöüßпрβλ".chars().collect();
    let n = rng.random_range(1..8);
    (0..n).map(|_| *alphabet.choose(rng).unwrap()).collect()
}

fn random_text(rng: &mut ChaCha8Rng, vocab: &[String]) -> String {
    let n = rng.random_range(1..8);
    (0..n)
        .map(|_| {
            if !vocab.is_empty() && rng.random_bool(0.5) {
                vocab.choose(rng).unwrap().clone()
            } else {
                random_word(rng)
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn c2_gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let eps = 1e-3;
    let mut worst_in: f64 = 0.0;
    let mut worst_out: f64 = 0.0;
    for point in 0..20 {
        let dim = rng.random_range(2..=8);
        let words: Vec<String> = (0..6)
            .map(|_| random_word(&mut rng))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let feature = FeatureParams {
            bucket: 50,
            min_count: 1,
            word_ngrams: 2,
            ..FeatureParams::default()
        };
        let model = random_model(&mut rng, dim, pool(3), words.clone(), feature);
        let text = random_text(&mut rng, &words);
        let target = rng.random_range(0..3);
        let fv = model.featurize(&text);
        let rows: Vec<usize> = fv.rows(model.vocab().n_words()).collect();
        if rows.is_empty() {
            return Err(format!("point {point}: empty feature vector"));
        }
        let grad = model.example_gradient(&fv, target);

        let mut input: Vec<Vec<f64>> = (0..model.input_matrix().rows())
            .map(|r| model.input_matrix().row(r).iter().map(|v| f64::from(*v)).collect())
            .collect();
        let mut output: Vec<Vec<f64>> = (0..3)
            .map(|r| model.output_matrix().row(r).iter().map(|v| f64::from(*v)).collect())
            .collect();

        let base = oracle_loss(&input, &output, &rows, target);
        ensure((base - grad.loss).abs() < 1e-9, || {
            format!("point {point}: loss {base} vs {}", grad.loss)
        })?;

        let mut num_out = Vec::new();
        for k in 0..3 {
            for c in 0..dim {
                let orig = output[k][c];
                output[k][c] = orig + eps;
                let plus = oracle_loss(&input, &output, &rows, target);
                output[k][c] = orig - eps;
                let minus = oracle_loss(&input, &output, &rows, target);
                output[k][c] = orig;
                num_out.push((plus - minus) / (2.0 * eps));
            }
        }
        let e_out = norm_rel_err(&grad.output, &num_out);

        let distinct: BTreeSet<usize> = rows.iter().copied().collect();
        let mut ana_in = Vec::new();
        let mut num_in = Vec::new();
        for &r in &distinct {
            ana_in.extend(grad.input_row(r));
            for c in 0..dim {
                let orig = input[r][c];
                input[r][c] = orig + eps;
                let plus = oracle_loss(&input, &output, &rows, target);
                input[r][c] = orig - eps;
                let minus = oracle_loss(&input, &output, &rows, target);
                input[r][c] = orig;
                num_in.push((plus - minus) / (2.0 * eps));
            }
        }
        let e_in = norm_rel_err(&ana_in, &num_in);
        worst_in = worst_in.max(e_in);
        worst_out = worst_out.max(e_out);
        ensure(e_in <= 1e-4 && e_out <= 1e-4, || {
            format!("point {point}: rel err input {e_in:.2e}, output {e_out:.2e}")
        })?;
    }
    Ok(format!(
        "20 points, max rel err input {worst_in:.2e}, output {worst_out:.2e}"
    ))
}

// 3 -------------------------------------------------------------------------

struct OracleCounts {
    tp: u64,
    fp: u64,
    fn_: u64,
    tn: u64,
}

fn oracle_counts(golds: &[LanguageLabel], preds: &[LanguageLabel], c: LanguageLabel) -> OracleCounts {
    let mut o = OracleCounts {
        tp: 0,
        fp: 0,
        fn_: 0,
        tn: 0,
    };
    for (g, p) in golds.iter().zip(preds) {
        match (*g == c, *p == c) {
            (true, true) => o.tp += 1,
            (false, true) => o.fp += 1,
            (true, false) => o.fn_ += 1,
            (false, false) => o.tn += 1,
        }
    }
    o
}

fn safe_div(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

fn oracle_ratios(o: &OracleCounts) -> [f64; 4] {
    let p = safe_div(o.tp as f64, (o.tp + o.fp) as f64);
    let r = safe_div(o.tp as f64, (o.tp + o.fn_) as f64);
    let f = safe_div(2.0 * p * r, p + r);
    [safe_div(o.fp as f64, (o.fp + o.tn) as f64), p, r, f]
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

fn check_single(golds: &[LanguageLabel], preds: &[LanguageLabel]) -> Result<(), String> {
    let cm = confusion(golds, preds).map_err(|e| e.to_string())?;
    let active: BTreeSet<LanguageLabel> = golds.iter().chain(preds).copied().collect();
    let per_class = all_class_metrics(&cm);
    let keys: BTreeSet<LanguageLabel> = per_class.keys().copied().collect();
    ensure(keys == active, || format!("evaluated classes {keys:?} vs {active:?}"))?;
    let mut sums = [0.0; 4];
    for c in &active {
        let o = oracle_counts(golds, preds, *c);
        let m = per_class_metrics(&cm, c).map_err(|e| e.to_string())?;
        ensure((m.tp, m.fp, m.fn_, m.tn) == (o.tp, o.fp, o.fn_, o.tn), || {
            format!("counts differ for {c}")
        })?;
        let r = oracle_ratios(&o);
        ensure(
            close(m.fpr, r[0]) && close(m.precision, r[1]) && close(m.recall, r[2]) && close(m.f1, r[3]),
            || format!("ratios differ for {c}"),
        )?;
        for i in 0..4 {
            sums[i] += r[i];
        }
    }
    let mac = macro_average(&per_class).map_err(|e| e.to_string())?;
    let n = active.len() as f64;
    ensure(
        close(mac.fpr, sums[0] / n)
            && close(mac.precision, sums[1] / n)
            && close(mac.recall, sums[2] / n)
            && close(mac.f1, sums[3] / n),
        || "macro average differs".to_string(),
    )
}

fn check_multilabel(golds: &[BTreeSet<LanguageLabel>], preds: &[LanguageLabel]) -> Result<(), String> {
    let gs: Vec<MultilabelGold> = golds
        .iter()
        .map(|g| MultilabelGold::new(g.iter().copied()).unwrap())
        .collect();
    let r = multilabel_metrics(&gs, preds).map_err(|e| e.to_string())?;
    let loose = golds.iter().zip(preds).filter(|(g, p)| g.contains(p)).count() as u64;
    let exact = golds
        .iter()
        .zip(preds)
        .filter(|(g, p)| g.len() == 1 && g.contains(p))
        .count() as u64;
    ensure(r.loose_correct == loose && r.exact_correct == exact, || {
        "accuracy counts differ".into()
    })?;
    let n = golds.len() as f64;
    ensure(
        close(r.loose_acc, loose as f64 / n) && close(r.exact_acc, exact as f64 / n),
        || "accuracies differ".into(),
    )?;
    let classes: BTreeSet<LanguageLabel> = golds.iter().flatten().chain(preds).copied().collect();
    ensure(r.per_class.keys().copied().collect::<BTreeSet<_>>() == classes, || {
        "multilabel classes differ".into()
    })?;
    for c in &classes {
        let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
        for (g, p) in golds.iter().zip(preds) {
            if p == c && g.contains(c) {
                tp += 1;
            }
            if p == c && !g.contains(c) {
                fp += 1;
            }
            if g.contains(c) && !g.contains(p) {
                fn_ += 1;
            }
        }
        let m = r.per_class[c];
        ensure((m.tp, m.fp, m.fn_) == (tp, fp, fn_), || {
            format!("loose counts differ for {c}")
        })?;
        let rat = oracle_ratios(&OracleCounts { tp, fp, fn_, tn: 0 });
        ensure(
            close(m.precision, rat[1]) && close(m.recall, rat[2]) && close(m.f1, rat[3]),
            || format!("loose ratios differ for {c}"),
        )?;
    }
    Ok(())
}

fn c3_metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for inst in 0..1000 {
        let k = rng.random_range(1..=5);
        let classes = pool(k);
        let mut universe = classes.clone();
        universe.push(LanguageLabel::Other);
        let n = rng.random_range(1..=200);
        let golds: Vec<LanguageLabel> = (0..n).map(|_| *classes.choose(&mut rng).unwrap()).collect();
        let preds: Vec<LanguageLabel> = (0..n).map(|_| *universe.choose(&mut rng).unwrap()).collect();
        check_single(&golds, &preds).map_err(|e| format!("instance {inst}: {e}"))?;

        let mgolds: Vec<BTreeSet<LanguageLabel>> = (0..n)
            .map(|_| {
                let size = rng.random_range(1..=k.min(3));
                classes.choose_multiple(&mut rng, size).copied().collect()
            })
            .collect();
        check_multilabel(&mgolds, &preds).map_err(|e| format!("multilabel instance {inst}: {e}"))?;
    }
    Ok("1000 single-label and 1000 multilabel instances match".into())
}

// 4 -------------------------------------------------------------------------

fn counts_for(cm: &ConfusionMatrix, c: &LanguageLabel) -> ClassMetrics {
    per_class_metrics(cm, c).unwrap_or_else(|_| ClassMetrics::from_counts(0, 0, 0, 0))
}

fn c4_ensemble_inclusion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checks = 0usize;
    for inst in 0..200 {
        let k = rng.random_range(2..=5);
        let classes = pool(k);
        let mut universe = classes.clone();
        universe.push(LanguageLabel::Other);
        let n = rng.random_range(1..=200);
        let golds: Vec<LanguageLabel> = (0..n).map(|_| *classes.choose(&mut rng).unwrap()).collect();
        let noisy = |rng: &mut ChaCha8Rng, g: &LanguageLabel| {
            if rng.random_bool(0.6) {
                *g
            } else {
                *universe.choose(rng).unwrap()
            }
        };
        let a: Vec<LanguageLabel> = golds.iter().map(|g| noisy(&mut rng, g)).collect();
        let b: Vec<LanguageLabel> = golds.iter().map(|g| noisy(&mut rng, g)).collect();
        let e: Vec<LanguageLabel> = a.iter().zip(&b).map(|(x, y)| ensemble_top1(*x, *y)).collect();
        let (ca, cb, ce) = (
            confusion(&golds, &a).unwrap(),
            confusion(&golds, &b).unwrap(),
            confusion(&golds, &e).unwrap(),
        );
        for c in &classes {
            let (ma, mb, me) = (counts_for(&ca, c), counts_for(&cb, c), counts_for(&ce, c));
            ensure(me.fpr <= ma.fpr.min(mb.fpr), || {
                format!("instance {inst}: FPR violation for {c}")
            })?;
            ensure(me.recall <= ma.recall.min(mb.recall), || {
                format!("instance {inst}: recall violation for {c}")
            })?;
            checks += 1;
        }
    }

    // total disagreement: the two models never agree, so every output is `other`
    let (hrv, srp, bos) = (l("hrv_Latn"), l("srp_Latn"), l("bos_Latn"));
    let gold_sets = [vec![hrv, srp], vec![hrv], vec![srp, bos], vec![bos]];
    let a = [hrv, srp, bos, hrv];
    let b = [srp, hrv, srp, srp];
    let e: Vec<LanguageLabel> = a.iter().zip(&b).map(|(x, y)| ensemble_top1(*x, *y)).collect();
    ensure(e.iter().all(|x| x.is_other()), || {
        "disagreement did not yield other".into()
    })?;
    let gs: Vec<MultilabelGold> = gold_sets
        .iter()
        .map(|g| MultilabelGold::new(g.iter().copied()).unwrap())
        .collect();
    let ml = multilabel_metrics(&gs, &e).unwrap();
    ensure(ml.loose_acc == 0.0 && ml.exact_acc == 0.0, || {
        "degenerate accuracies not zero".into()
    })?;
    for c in [hrv, srp, bos] {
        let m = ml.per_class[&c];
        ensure(m.precision == 0.0 && m.recall == 0.0 && m.f1 == 0.0, || {
            format!("degenerate {c} not zero")
        })?;
    }
    let single_golds: Vec<LanguageLabel> = gold_sets.iter().map(|g| g[0]).collect();
    let r = evaluate(&single_golds, &e, 0.5).unwrap();
    let m = r.macro_avg.unwrap();
    ensure(m.precision == 0.0 && m.recall == 0.0 && m.f1 == 0.0, || {
        "degenerate macro not zero".into()
    })?;
    for c in [hrv, srp, bos] {
        let pc = r.per_class[&c];
        ensure(pc.tp == 0 && pc.fp == 0 && pc.fpr == 0.0 && pc.f1 == 0.0, || {
            format!("degenerate {c} per-class")
        })?;
    }
    Ok(format!(
        "{checks} class checks, 0 violations; total-disagreement case all zero"
    ))
}

// 5 -------------------------------------------------------------------------

fn random_prediction(rng: &mut ChaCha8Rng, classes: &[LanguageLabel]) -> Prediction {
    let raw: Vec<f64> = classes.iter().map(|_| rng.random::<f64>().powi(3)).collect();
    let s: f64 = raw.iter().sum();
    let mut ranked: Vec<(LanguageLabel, f64)> = classes.iter().copied().zip(raw.iter().map(|v| v / s)).collect();
    ranked.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    Prediction { ranked }
}

fn c5_threshold_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let classes = pool(5);
    let n = 2000;
    let golds: Vec<LanguageLabel> = (0..n).map(|_| *classes.choose(&mut rng).unwrap()).collect();
    let preds: Vec<Prediction> = (0..n).map(|_| random_prediction(&mut rng, &classes)).collect();
    let mut prev: Option<BTreeMap<LanguageLabel, (u64, u64)>> = None;
    let mut violations = 0;
    for step in 0..=10 {
        let tau = step as f64 / 10.0;
        let policy = ThresholdPolicy::new(tau).unwrap();
        let labels: Vec<LanguageLabel> = preds.iter().map(|p| policy.apply(p)).collect();
        let cm = confusion(&golds, &labels).unwrap();
        let cur: BTreeMap<LanguageLabel, (u64, u64)> = classes
            .iter()
            .map(|c| {
                let m = counts_for(&cm, c);
                (*c, (m.tp, m.fp))
            })
            .collect();
        if let Some(p) = &prev {
            for c in &classes {
                if cur[c].0 > p[c].0 || cur[c].1 > p[c].1 {
                    violations += 1;
                }
            }
        }
        prev = Some(cur);
    }
    ensure(violations == 0, || format!("{violations} violations"))?;
    let last = prev.unwrap();
    Ok(format!(
        "11 thresholds × 5 classes, 0 violations (TP+FP at tau=1: {})",
        last.values().map(|v| v.0 + v.1).sum::<u64>()
    ))
}

// 6 -------------------------------------------------------------------------

fn synthetic_language(rng: &mut ChaCha8Rng, syllables: &[&str], label: LanguageLabel, n: usize) -> Vec<LabeledText> {
    (0..n)
        .map(|_| {
            let words: Vec<String> = (0..rng.random_range(3..9))
                .map(|_| {
                    (0..rng.random_range(1..4))
                        .map(|_| *syllables.choose(rng).unwrap())
                        .collect()
                })
                .collect();
            LabeledText::new(vec![label], &words.join(" ")).unwrap()
        })
        .collect()
}

fn c6_cascade_conservativity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (hrv, srp, bos, eng, deu) = (
        l("hrv_Latn"),
        l("srp_Latn"),
        l("bos_Latn"),
        l("eng_Latn"),
        l("deu_Latn"),
    );
    let slav_common = ["ja", "ti", "da", "ne", "ko", "sta", "bi"];
    let mut data = Vec::new();
    let mut spec_data = Vec::new();
    for (label, own) in [
        (hrv, ["tko", "što", "kruh"]),
        (srp, ["ko", "šta", "hleb"]),
        (bos, ["ko", "šta", "hljeb"]),
    ] {
        let syl: Vec<&str> = slav_common.iter().copied().chain(own).collect();
        let ex = synthetic_language(&mut rng, &syl, label, 150);
        data.extend(ex.iter().cloned());
        spec_data.extend(ex);
    }
    data.extend(synthetic_language(
        &mut rng,
        &["the", "and", "ing", "th", "wh", "er"],
        eng,
        150,
    ));
    data.extend(synthetic_language(
        &mut rng,
        &["der", "und", "sch", "ei", "ch", "en"],
        deu,
        150,
    ));

    let params = TrainParams {
        dim: 16,
        lr: 0.3,
        epochs: 5,
        seed: 6,
        feature: FeatureParams {
            bucket: 1 << 14,
            min_count: 1,
            ..FeatureParams::default()
        },
        ..TrainParams::default()
    };
    let base = Arc::new(train(&data, &params).map_err(|e| e.to_string())?);
    let spec = Arc::new(train(&spec_data, &TrainParams { seed: 7, ..params }).map_err(|e| e.to_string())?);
    let members = vec![bos, hrv, srp];
    let cfg = CascadeConfig {
        groups: vec![CascadeGroup {
            name: "south_slavic".into(),
            members: members.clone(),
            model_path: "unused.bin".into(),
        }],
    };
    let cascade = Cascade::new(base.clone(), cfg)
        .and_then(|c| c.with_specialist("south_slavic", spec))
        .map_err(|e| e.to_string())?;

    let mut inputs: Vec<String> = data.iter().map(|e| e.text().to_string()).collect();
    inputs.extend((0..200).map(|_| random_text(&mut rng, &[])));
    let (mut routed, mut kept) = (0, 0);
    for tau in [0.0, 0.5, 0.9] {
        let policy = ThresholdPolicy::new(tau).unwrap();
        for text in &inputs {
            let b = base.predict_topk(text, 1);
            let b_label = policy.apply(&b);
            let out = cascade.predict(text, &policy).map_err(|e| e.to_string())?;
            if members.contains(&b_label) {
                routed += 1;
                ensure(out.label.is_other() || members.contains(&out.label), || {
                    format!("in-group output {} outside group", out.label)
                })?;
            } else {
                kept += 1;
                ensure(
                    out.label == b_label && out.prob.to_bits() == b.top().unwrap().1.to_bits() && out.group.is_none(),
                    || format!("out-of-group output changed for {text:?}"),
                )?;
            }
        }
    }
    ensure(routed > 0 && kept > 0, || {
        format!("degenerate split: {routed} routed, {kept} kept")
    })?;
    Ok(format!(
        "{kept} out-of-group outputs identical, {routed} in-group outputs within group ∪ {{other}}"
    ))
}

// 7 -------------------------------------------------------------------------

fn c7_serialization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut last_bytes = Vec::new();
    for i in 0..50 {
        let dim = rng.random_range(1..=12);
        let n_labels = rng.random_range(2..=6);
        let words: Vec<String> = (0..rng.random_range(0..30))
            .map(|_| random_word(&mut rng))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let minn = rng.random_range(1..=4);
        let feature = FeatureParams {
            minn,
            maxn: rng.random_range(minn..=6),
            word_ngrams: rng.random_range(1..=3),
            bucket: rng.random_range(1..=2000),
            min_count: 1,
            ..FeatureParams::default()
        };
        let model = random_model(&mut rng, dim, pool(n_labels), words.clone(), feature);
        let path = dir.path().join(format!("m{i}.bin"));
        lidkit::save_model(&model, &path).map_err(|e| e.to_string())?;
        let back = lidkit::load_model(&path).map_err(|e| e.to_string())?;
        for _ in 0..100 {
            let text = random_text(&mut rng, &words);
            let (s1, s2) = (model.scores(&text), back.scores(&text));
            ensure(
                s1.len() == s2.len() && s1.iter().zip(&s2).all(|(a, b)| a.to_bits() == b.to_bits()),
                || format!("model {i}: scores differ on {text:?}"),
            )?;
            ensure(model.predict_topk(&text, 3) == back.predict_topk(&text, 3), || {
                format!("model {i}: top-k differs")
            })?;
        }
        last_bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
    }

    let mut bad_magic = last_bytes.clone();
    bad_magic[0] = b'X';
    ensure(matches!(read_model(&bad_magic), Err(ModelError::Format(_))), || {
        "corrupted magic accepted".into()
    })?;
    let mut bad_version = last_bytes.clone();
    bad_version[4] = 9;
    ensure(matches!(read_model(&bad_version), Err(ModelError::Format(_))), || {
        "bad version accepted".into()
    })?;
    for cut in [0, 3, 10, 36, last_bytes.len() / 2, last_bytes.len() - 1] {
        ensure(
            matches!(read_model(&last_bytes[..cut]), Err(ModelError::TruncatedFile { .. })),
            || format!("truncation at {cut} not reported as TruncatedFile"),
        )?;
    }
    let path = dir.path().join("truncated.bin");
    std::fs::write(&path, &last_bytes[..last_bytes.len() - 5]).map_err(|e| e.to_string())?;
    ensure(
        matches!(lidkit::load_model(&path), Err(ModelError::TruncatedFile { .. })),
        || "truncated file on disk not reported".into(),
    )?;
    Ok("50 models × 100 inputs bit-identical; bad magic/version → Format, truncation → TruncatedFile".into())
}

// 8 -------------------------------------------------------------------------

fn c8_determinism() -> Outcome {
    let corpus = desk_corpus(&DeskConfig {
        train_per_class: 100,
        test_per_class: 10,
        ..DeskConfig::default()
    });
    let params = TrainParams {
        epochs: 3,
        ..desk_params()
    };
    let bytes = |m: &Model| {
        let mut v = Vec::new();
        write_model(m, &mut v).unwrap();
        v
    };
    let a = bytes(&train(&corpus.train, &params).map_err(|e| e.to_string())?);
    let b = bytes(&train(&corpus.train, &params).map_err(|e| e.to_string())?);
    ensure(a == b, || "model files differ between identical runs".into())?;
    let c = bytes(&train(&corpus.train, &TrainParams { seed: 99, ..params }).map_err(|e| e.to_string())?);
    ensure(a != c, || "seed has no effect".into())?;

    let spec = NoiseSpec {
        scripts: default_script_ranges(),
        n: 500,
        len_min: 1,
        len_max: 50,
        seed: 8,
    };
    let render = |items: Vec<LabeledText>| {
        let mut v = Vec::new();
        lidkit::corpus::write_fasttext(&mut v, &items).unwrap();
        v
    };
    let n1 = render(gen_noise(&spec).map_err(|e| e.to_string())?);
    let n2 = render(gen_noise(&spec).map_err(|e| e.to_string())?);
    ensure(n1 == n2, || "noise corpora differ".into())?;
    Ok(format!(
        "model files identical ({} bytes); noise corpora identical ({} bytes)",
        a.len(),
        n1.len()
    ))
}

// 9 -------------------------------------------------------------------------

fn c9_label_space() -> Outcome {
    let inv = v3_inventory();
    let report = validate_inventory(&inv).map_err(|e| e.to_string())?;
    ensure(
        report.count == 195 && report.languages == 194 && report.has_not_a_language,
        || format!("inventory report {report:?}"),
    )?;
    let merges = MergeMap::v3();
    let table = [
        ("acm_Arab", "ara_Arab"),
        ("acq_Arab", "ara_Arab"),
        ("aeb_Arab", "ara_Arab"),
        ("apc_Arab", "ara_Arab"),
        ("arb_Arab", "ara_Arab"),
        ("ars_Arab", "ara_Arab"),
        ("ary_Arab", "ara_Arab"),
        ("arz_Arab", "ara_Arab"),
        ("pes_Arab", "fas_Arab"),
        ("prs_Arab", "fas_Arab"),
        ("dyu_Latn", "bam_Latn"),
        ("eng_Latn", "eng_Latn"),
        ("ara_Arab", "ara_Arab"),
    ];
    for (src, dst) in table {
        ensure(canonicalize(l(src), &merges) == l(dst), || {
            format!("{src} does not map to {dst}")
        })?;
    }
    for (src, dst) in &table[..11] {
        ensure(!inv.contains(&l(src)), || {
            format!("merged source {src} listed in inventory")
        })?;
        ensure(inv.contains(&l(dst)), || {
            format!("merge target {dst} missing from inventory")
        })?;
    }
    Ok(format!(
        "195 classes (194 languages + zxx_Zxxx); {} merges verified",
        merges.len()
    ))
}

// 10 ------------------------------------------------------------------------

fn c10_multilabel() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let classes = pool(5);
    for inst in 0..500 {
        let n = rng.random_range(1..=100);
        let golds: Vec<MultilabelGold> = (0..n)
            .map(|_| {
                let size = rng.random_range(1..=3);
                MultilabelGold::new(classes.choose_multiple(&mut rng, size).copied()).unwrap()
            })
            .collect();
        let preds: Vec<LanguageLabel> = (0..n).map(|_| *classes.choose(&mut rng).unwrap()).collect();
        let r = multilabel_metrics(&golds, &preds).map_err(|e| e.to_string())?;
        ensure(r.loose_acc >= r.exact_acc, || format!("instance {inst}: loose < exact"))?;
    }
    let g = MultilabelGold::new([l("hrv_Latn"), l("srp_Latn")]).unwrap();
    let r = multilabel_metrics(&[g], &[l("srp_Latn")]).unwrap();
    ensure(r.loose_correct == 1 && r.exact_correct == 0, || {
        "hrv/srp case wrong".into()
    })?;
    Ok("500 instances loose ≥ exact; {hrv,srp} → srp is loose-correct, exact-incorrect".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("desk-scale end-to-end", c1_desk_end_to_end),
        ("gradient correctness", c2_gradients),
        ("metric oracle equivalence", c3_metric_oracle),
        ("ensemble set inclusion", c4_ensemble_inclusion),
        ("threshold monotonicity", c5_threshold_monotonicity),
        ("cascade conservativity", c6_cascade_conservativity),
        ("serialization round trip", c7_serialization),
        ("determinism", c8_determinism),
        ("label-space conformance", c9_label_space),
        ("multilabel semantics", c10_multilabel),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("PASS  {:>2}. {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {:>2}. {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
