use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;

use lidkit::corpus::{parse_fasttext_line, parse_multilabel_line, write_fasttext, FastTextReader, LabeledText};
use lidkit::decision::{ensemble_top1, ensemble_top3, Cascade, CascadeConfig, ThresholdPolicy};
use lidkit::dedup::{dedup as run_dedup, DedupConfig, DedupMode};
use lidkit::eval::{evaluate, evaluate_multilabel, MultilabelGold};
use lidkit::features::{FeatureParams, Normalization};
use lidkit::label::{AlignmentMap, LanguageLabel, MergeMap};
use lidkit::model::{Model, Pooling, Prediction, TrainParams};
use lidkit::noise::{default_script_ranges, gen_noise as run_gen_noise, load_script_ranges, NoiseSpec};
use lidkit::report::{render_report, ReportFormat};
use lidkit::{load_model, save_model, train as run_train};

use crate::error::CliError;
use crate::predfile::parse_predictions;
use crate::{
    CascadeArgs, DedupArgs, DedupModeArg, EnsembleArgs, EvalArgs, GenNoiseArgs, InferenceArgs, ModeArg, NormArg,
    PoolingArg, PredFormat, PredictArgs, ReportArg, TrainArgs,
};

fn io_err(path: &Path, e: io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    let mut s = String::new();
    if path == Path::new("-") {
        io::stdin().read_to_string(&mut s).map_err(|e| io_err(path, e))?;
    } else {
        s = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    }
    Ok(s)
}

fn read_lines(path: &Path) -> Result<Vec<String>, CliError> {
    Ok(read_text(path)?
        .lines()
        .map(|l| l.trim_end_matches('\r').to_string())
        .collect())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn check_tau(tau: f64, flag: &str) -> Result<ThresholdPolicy, CliError> {
    ThresholdPolicy::new(tau).map_err(|_| CliError::usage(format!("{flag} must be within [0, 1], got {tau}")))
}

fn check_threads(threads: usize) -> Result<(), CliError> {
    if threads == 0 {
        return Err(CliError::usage("--threads must be at least 1"));
    }
    Ok(())
}

fn check_trash(t: f64) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(CliError::usage(format!(
            "--trash-threshold must be within [0, 1], got {t}"
        )));
    }
    Ok(())
}

fn merge_map(arg: Option<&str>) -> Result<MergeMap, CliError> {
    match arg {
        None => Ok(MergeMap::default()),
        Some("v3") => Ok(MergeMap::v3()),
        Some(p) => Ok(MergeMap::load(Path::new(p))?),
    }
}

fn alignment(arg: Option<&str>) -> Result<Option<AlignmentMap>, CliError> {
    match arg {
        None => Ok(None),
        Some("v3") => Ok(Some(AlignmentMap::v3())),
        Some(p) => Ok(Some(AlignmentMap::load(Path::new(p))?)),
    }
}

fn pooling(p: PoolingArg) -> Pooling {
    match p {
        PoolingArg::Mean => Pooling::Mean,
        PoolingArg::Sum => Pooling::Sum,
    }
}

fn normalization(n: NormArg) -> Normalization {
    match n {
        NormArg::None => Normalization::None,
        NormArg::Nfc => Normalization::Nfc,
    }
}

fn report_format(r: ReportArg) -> ReportFormat {
    match r {
        ReportArg::Json => ReportFormat::Json,
        ReportArg::Tsv => ReportFormat::Tsv,
        ReportArg::Markdown => ReportFormat::Markdown,
    }
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Io(format!("cannot start worker threads: {e}")))
}

fn load_for_inference(path: &Path, inf: &InferenceArgs) -> Result<Model, CliError> {
    let mut model = load_model(path).map_err(|e| match CliError::from(e) {
        CliError::Io(m) => CliError::Io(format!("{}: {m}", path.display())),
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })?;
    model.set_pooling(pooling(inf.pooling));
    model.set_normalization(normalization(inf.normalization));
    Ok(model)
}

/// Runs `f` over `items` on `threads` workers, keeping input order.
fn par_map<T: Sync, R: Send>(
    threads: usize,
    items: &[T],
    f: impl Fn(&T) -> R + Sync + Send,
) -> Result<Vec<R>, CliError> {
    if threads == 1 {
        return Ok(items.iter().map(f).collect());
    }
    Ok(thread_pool(threads)?.install(|| items.par_iter().map(f).collect()))
}

pub fn train(a: TrainArgs) -> Result<(), CliError> {
    check_threads(a.threads)?;
    let params = TrainParams {
        dim: a.dim,
        lr: a.lr,
        epochs: a.epochs,
        seed: a.seed,
        threads: a.threads,
        pooling: pooling(a.pooling),
        feature: FeatureParams {
            minn: a.minn,
            maxn: a.maxn,
            word_ngrams: a.word_ngrams,
            bucket: a.bucket,
            min_count: a.min_count,
            normalization: normalization(a.normalization),
        },
        ..TrainParams::default()
    };
    params.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let merges = merge_map(a.merge_map.as_deref())?;

    let start = Instant::now();
    let read = lidkit::corpus::read_fasttext(&a.data, a.strict)?;
    for m in &read.malformed {
        warn!("{}: skipping {m}", a.data.display());
    }
    let corpus: Vec<LabeledText> = read.examples.iter().map(|e| e.canonicalized(&merges)).collect();
    if a.threads > 1 {
        warn!(
            "training with {} threads is not reproducible; use --threads 1 for identical runs",
            a.threads
        );
    }
    let model = run_train(&corpus, &params)?;
    save_model(&model, &a.out).map_err(|e| match CliError::from(e) {
        CliError::Io(m) => CliError::Io(format!("{}: {m}", a.out.display())),
        other => other,
    })?;
    let mut out = io::stdout().lock();
    writeln!(out, "classes\t{}", model.labels().len())?;
    writeln!(out, "examples\t{}", corpus.len())?;
    writeln!(out, "words\t{}", model.vocab().n_words())?;
    eprintln!("trained in {:.2}s", start.elapsed().as_secs_f64());
    Ok(())
}

fn thresholded(pred: &Prediction, policy: &ThresholdPolicy) -> Prediction {
    let mut p = pred.clone();
    if let Some(first) = p.ranked.first_mut() {
        first.0 = policy.apply(pred);
    }
    p
}

fn tsv_row(pred: &Prediction) -> String {
    pred.ranked
        .iter()
        .map(|(l, p)| format!("{l}\t{p:.6}"))
        .collect::<Vec<_>>()
        .join("\t")
}

fn json_row(pred: &Prediction) -> String {
    let items: Vec<serde_json::Value> = pred
        .ranked
        .iter()
        .map(|(l, p)| serde_json::json!({"label": l.to_string(), "prob": p}))
        .collect();
    serde_json::json!({ "predictions": items }).to_string()
}

pub fn predict(a: PredictArgs) -> Result<(), CliError> {
    let policy = check_tau(a.tau, "--tau")?;
    check_threads(a.inference.threads)?;
    if a.k == 0 {
        return Err(CliError::usage("--k must be at least 1"));
    }
    let model = load_for_inference(&a.model, &a.inference)?;
    let lines = read_lines(&a.input)?;
    let rows = par_map(a.inference.threads, &lines, |line| {
        let pred = thresholded(&model.predict_topk(line, a.k), &policy);
        match a.format {
            PredFormat::Tsv => tsv_row(&pred),
            PredFormat::Json => json_row(&pred),
        }
    })?;
    let mut out = BufWriter::new(io::stdout().lock());
    for r in rows {
        writeln!(out, "{r}")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a gold file. Lines starting with `__label__` are fastText lines;
/// other lines are `label(,label)*<TAB>text`.
fn read_gold(path: &Path, multilabel: bool, merges: &MergeMap) -> Result<Vec<LabeledText>, CliError> {
    let mut out = Vec::new();
    for (i, line) in read_lines(path)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ex = if line.starts_with(lidkit::label::LABEL_PREFIX) {
            parse_fasttext_line(line, i + 1)?
        } else {
            parse_multilabel_line(line, i + 1)?
        };
        if !multilabel && !ex.is_single_label() {
            return Err(CliError::data(format!(
                "{} line {}: several gold labels; pass --multilabel",
                path.display(),
                i + 1
            )));
        }
        out.push(ex.canonicalized(merges));
    }
    Ok(out)
}

/// Replaces gold labels outside `space` by `other`, or fails.
fn restrict_gold(
    gold: Vec<LabeledText>,
    space: &BTreeSet<LanguageLabel>,
    as_other: bool,
) -> Result<Vec<LabeledText>, CliError> {
    let unknown: BTreeSet<LanguageLabel> = gold
        .iter()
        .flat_map(|g| g.labels().iter().copied())
        .filter(|l| !l.is_other() && !space.contains(l))
        .collect();
    if unknown.is_empty() {
        return Ok(gold);
    }
    if !as_other {
        let list: Vec<String> = unknown.iter().map(|l| l.to_string()).collect();
        return Err(CliError::data(format!(
            "gold labels outside the predictor's label space: {} (use --unknown-gold-as-other to score them as other)",
            list.join(", ")
        )));
    }
    warn!("scoring {} unknown gold labels as other", unknown.len());
    gold.into_iter()
        .map(|g| {
            let labels = g
                .labels()
                .iter()
                .map(|l| if unknown.contains(l) { LanguageLabel::Other } else { *l })
                .collect();
            LabeledText::new(labels, g.text()).map_err(CliError::from)
        })
        .collect()
}

fn score(
    gold: &[LabeledText],
    preds: &[LanguageLabel],
    multilabel: bool,
    trash: f64,
    format: ReportArg,
) -> Result<String, CliError> {
    if gold.len() != preds.len() {
        return Err(CliError::data(format!(
            "{} gold examples but {} predictions",
            gold.len(),
            preds.len()
        )));
    }
    let report = if multilabel {
        let golds: Vec<MultilabelGold> = gold
            .iter()
            .map(|g| MultilabelGold::new(g.labels().iter().copied()).expect("gold labels are non-empty"))
            .collect();
        evaluate_multilabel(&golds, preds, trash)?
    } else {
        let golds: Vec<LanguageLabel> = gold.iter().map(|g| g.labels()[0]).collect();
        evaluate(&golds, preds, trash)?
    };
    Ok(render_report(&report, report_format(format)))
}

pub fn eval(a: EvalArgs) -> Result<(), CliError> {
    let default_tau = if a.model.is_some() {
        lidkit::decision::DEFAULT_TAU
    } else {
        0.0
    };
    let policy = check_tau(a.tau.unwrap_or(default_tau), "--tau")?;
    check_threads(a.inference.threads)?;
    check_trash(a.trash_threshold)?;
    if a.align.is_some() && a.model.is_some() {
        return Err(CliError::usage("--align applies to --pred-file only"));
    }
    let merges = merge_map(a.merge_map.as_deref())?;
    let align = alignment(a.align.as_deref())?;
    let gold = read_gold(&a.gold, a.multilabel, &merges)?;

    let (gold, preds) = if let Some(path) = &a.model {
        let model = load_for_inference(path, &a.inference)?;
        let space: BTreeSet<LanguageLabel> = model.labels().iter().map(|l| merges.canonicalize(*l)).collect();
        let gold = restrict_gold(gold, &space, a.unknown_gold_as_other)?;
        let preds = par_map(a.inference.threads, &gold, |g| {
            merges.canonicalize(policy.apply(&model.predict_topk(g.text(), 1)))
        })?;
        (gold, preds)
    } else {
        let path = a.pred_file.as_ref().expect("clap enforces one source");
        let preds = parse_predictions(&read_text(path)?, align.as_ref(), &merges)?;
        let gold = match &align {
            Some(map) => {
                let space = map.targets().into_iter().map(|l| merges.canonicalize(l)).collect();
                restrict_gold(gold, &space, a.unknown_gold_as_other)?
            }
            None => gold,
        };
        (gold, preds.iter().map(|p| policy.apply(p)).collect())
    };
    let text = score(&gold, &preds, a.multilabel, a.trash_threshold, a.report)?;
    io::stdout().lock().write_all(text.as_bytes())?;
    Ok(())
}

pub fn ensemble(a: EnsembleArgs) -> Result<(), CliError> {
    let (pa, pb) = (check_tau(a.tau_a, "--tau-a")?, check_tau(a.tau_b, "--tau-b")?);
    check_trash(a.trash_threshold)?;
    let merges = merge_map(a.merge_map.as_deref())?;
    let (align_a, align_b) = (alignment(a.align_a.as_deref())?, alignment(a.align_b.as_deref())?);
    let gold = a
        .gold
        .as_ref()
        .map(|g| read_gold(g, a.multilabel, &merges))
        .transpose()?;
    let preds_a = parse_predictions(&read_text(&a.pred_a)?, align_a.as_ref(), &merges)?;
    let preds_b = parse_predictions(&read_text(&a.pred_b)?, align_b.as_ref(), &merges)?;
    if preds_a.len() != preds_b.len() {
        return Err(CliError::data(format!(
            "prediction files differ in length: {} rows vs {} rows",
            preds_a.len(),
            preds_b.len()
        )));
    }
    let labels: Vec<LanguageLabel> = preds_a
        .iter()
        .zip(&preds_b)
        .map(|(x, y)| match a.mode {
            ModeArg::Top1 => ensemble_top1(pa.apply(x), pb.apply(y)),
            ModeArg::Top3 => ensemble_top3(x, y),
        })
        .collect();
    if a.out.is_some() || gold.is_none() {
        let mut out = sink(a.out.as_deref())?;
        for l in &labels {
            writeln!(out, "{l}")?;
        }
        out.flush()?;
    }
    if let Some(gold) = gold {
        let text = score(&gold, &labels, a.multilabel, a.trash_threshold, a.report)?;
        io::stdout().lock().write_all(text.as_bytes())?;
    }
    Ok(())
}

pub fn cascade(a: CascadeArgs) -> Result<(), CliError> {
    let policy = check_tau(a.tau, "--tau")?;
    check_threads(a.threads)?;
    let cfg_text = read_text(&a.config)?;
    let dir = a
        .config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let config = CascadeConfig::parse_tsv(&cfg_text, &dir)?;
    let base = load_model(&a.base)?;
    let cascade = Cascade::new(Arc::new(base), config)?;
    let lines = read_lines(&a.input)?;
    let rows = par_map(a.threads, &lines, |line| cascade.predict(line, &policy))?;
    let mut out = BufWriter::new(io::stdout().lock());
    for r in rows {
        let o = r?;
        writeln!(out, "{}\t{:.6}", o.label, o.prob)?;
    }
    out.flush()?;
    Ok(())
}

pub fn gen_noise(a: GenNoiseArgs) -> Result<(), CliError> {
    let scripts = if Path::new(&a.scripts).is_file() {
        load_script_ranges(Path::new(&a.scripts))?
    } else {
        let all = default_script_ranges();
        if a.scripts == "all" {
            all
        } else {
            a.scripts
                .split(',')
                .map(str::trim)
                .map(|name| {
                    all.iter().find(|s| s.name == name).cloned().ok_or_else(|| {
                        CliError::usage(format!(
                            "unknown script {name:?} (not a file, not in the shipped table)"
                        ))
                    })
                })
                .collect::<Result<_, _>>()?
        }
    };
    let spec = NoiseSpec {
        scripts,
        n: a.n,
        len_min: a.len_min,
        len_max: a.len_max,
        seed: a.seed,
    };
    spec.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let items = run_gen_noise(&spec)?;
    write_fasttext(sink(a.out.as_deref())?, &items)?;
    Ok(())
}

/// File line numbers alongside the parsed examples; malformed lines are skipped.
fn read_numbered(path: &Path) -> Result<(Vec<usize>, Vec<LabeledText>), CliError> {
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = FastTextReader::new(BufReader::new(f));
    let (mut lines, mut items) = (Vec::new(), Vec::new());
    while let Some(item) = reader.next() {
        match item {
            Ok(ex) => {
                lines.push(reader.line_no());
                items.push(ex);
            }
            Err(e) if e.is_io() => return Err(CliError::Io(format!("{}: {e}", path.display()))),
            Err(e) => warn!("{}: skipping {e}", path.display()),
        }
    }
    Ok((lines, items))
}

pub fn dedup(a: DedupArgs) -> Result<(), CliError> {
    let mode = match a.mode {
        DedupModeArg::Exact => DedupMode::Exact,
        DedupModeArg::Shingle => DedupMode::Shingle,
    };
    let (test_lines, test) = read_numbered(&a.test)?;
    let (train_lines, train) = read_numbered(&a.train)?;
    let outcome = run_dedup(&test, &train, &DedupConfig::new(mode));
    write_fasttext(create(&a.out_kept)?, &outcome.kept).map_err(|e| io_err(&a.out_kept, e))?;
    if let Some(p) = &a.out_removed {
        let removed: Vec<LabeledText> = outcome.removed.iter().map(|r| r.item.clone()).collect();
        write_fasttext(create(p)?, &removed).map_err(|e| io_err(p, e))?;
    }
    let mut out = BufWriter::new(io::stdout().lock());
    for r in &outcome.removed {
        writeln!(
            out,
            "removed\t{}\t{}\t{:.6}",
            test_lines[r.test_index],
            train_lines[r.train_line - 1],
            r.similarity
        )?;
    }
    out.flush()?;
    info!("kept {}, removed {}", outcome.kept.len(), outcome.removed.len());
    eprintln!("kept {} of {} test examples", outcome.kept.len(), test.len());
    Ok(())
}
