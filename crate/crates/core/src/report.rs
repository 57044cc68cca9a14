//! Rendering of [`MetricsReport`] as JSON, TSV or a Markdown table.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::eval::{ClassMetrics, MetricsReport, RatioMetrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Tsv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "tsv" => Ok(ReportFormat::Tsv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format {other:?} (expected json|tsv|md)")),
        }
    }
}

pub fn render_report(report: &MetricsReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => render_json(report),
        ReportFormat::Tsv => render_tsv(report),
        ReportFormat::Markdown => render_markdown(report),
    }
}

fn f(x: f64) -> String {
    format!("{x:.6}")
}

fn json_ratios(r: &RatioMetrics) -> String {
    format!(
        "{{\"fpr\": {}, \"precision\": {}, \"recall\": {}, \"f1\": {}}}",
        f(r.fpr),
        f(r.precision),
        f(r.recall),
        f(r.f1)
    )
}

fn json_class(m: &ClassMetrics) -> String {
    format!(
        "{{\"tp\": {}, \"fp\": {}, \"fn\": {}, \"tn\": {}, \"fpr\": {}, \"precision\": {}, \"recall\": {}, \"f1\": {}}}",
        m.tp,
        m.fp,
        m.fn_,
        m.tn,
        f(m.fpr),
        f(m.precision),
        f(m.recall),
        f(m.f1)
    )
}

/// Keys appear in a fixed order and floats carry six decimals so output is
/// byte-stable. Labels need no escaping: the label grammar is ASCII
/// alphanumerics and `_`.
pub fn render_json(r: &MetricsReport) -> String {
    let mut s = String::from("{\n  \"per_class\": {");
    let rows: Vec<String> = r
        .per_class
        .iter()
        .map(|(l, m)| format!("\n    \"{l}\": {}", json_class(m)))
        .collect();
    s.push_str(&rows.join(","));
    s.push_str(if rows.is_empty() { "},\n" } else { "\n  },\n" });

    s.push_str("  \"macro\": ");
    match &r.macro_avg {
        Some(m) => s.push_str(&json_ratios(m)),
        None => s.push_str("{}"),
    }
    s.push_str(",\n  \"multilabel\": ");
    match &r.multilabel {
        None => s.push_str("null"),
        Some(ml) => {
            let _ = write!(
                s,
                "{{\"loose_acc\": {}, \"exact_acc\": {}, \"per_class_loose_f1\": {{",
                f(ml.loose_acc),
                f(ml.exact_acc)
            );
            let items: Vec<String> = ml
                .per_class
                .iter()
                .map(|(l, m)| format!("\"{l}\": {}", f(m.f1)))
                .collect();
            s.push_str(&items.join(", "));
            s.push_str("}}");
        }
    }
    s.push_str(",\n  \"trash_bins\": [");
    let bins: Vec<String> = r
        .trash_bins
        .iter()
        .map(|(l, share)| format!("[\"{l}\", {}]", f(*share)))
        .collect();
    s.push_str(&bins.join(", "));
    s.push_str("]\n}\n");
    s
}

pub fn render_tsv(r: &MetricsReport) -> String {
    let mut s = String::from("label\ttp\tfp\tfn\ttn\tfpr\tprecision\trecall\tf1\n");
    for (l, m) in &r.per_class {
        let _ = writeln!(
            s,
            "{l}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            m.tp,
            m.fp,
            m.fn_,
            m.tn,
            f(m.fpr),
            f(m.precision),
            f(m.recall),
            f(m.f1)
        );
    }
    if let Some(m) = &r.macro_avg {
        let _ = writeln!(
            s,
            "macro\t\t\t\t\t{}\t{}\t{}\t{}",
            f(m.fpr),
            f(m.precision),
            f(m.recall),
            f(m.f1)
        );
    }
    if let Some(ml) = &r.multilabel {
        let _ = writeln!(s, "loose_acc\t{}", f(ml.loose_acc));
        let _ = writeln!(s, "exact_acc\t{}", f(ml.exact_acc));
        for (l, m) in &ml.per_class {
            let _ = writeln!(s, "loose_f1\t{l}\t{}", f(m.f1));
        }
    }
    for (l, share) in &r.trash_bins {
        let _ = writeln!(s, "trash_bin\t{l}\t{}", f(*share));
    }
    s
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

/// Values in percent.
pub fn render_markdown(r: &MetricsReport) -> String {
    let mut s = String::from("| Language | FPR | Prec. | Rec. | F1 |\n|---|---:|---:|---:|---:|\n");
    for (l, m) in &r.per_class {
        let _ = writeln!(
            s,
            "| {l} | {} | {} | {} | {} |",
            pct(m.fpr),
            pct(m.precision),
            pct(m.recall),
            pct(m.f1)
        );
    }
    if let Some(m) = &r.macro_avg {
        let _ = writeln!(
            s,
            "| **macro** | {} | {} | {} | {} |",
            pct(m.fpr),
            pct(m.precision),
            pct(m.recall),
            pct(m.f1)
        );
    }
    if let Some(ml) = &r.multilabel {
        let _ = write!(
            s,
            "\n| Loose acc. | Exact acc. |\n|---:|---:|\n| {} | {} |\n",
            pct(ml.loose_acc),
            pct(ml.exact_acc)
        );
    }
    if !r.trash_bins.is_empty() {
        s.push_str("\n| Trash bin | Foreign share |\n|---|---:|\n");
        for (l, share) in &r.trash_bins {
            let _ = writeln!(s, "| {l} | {} |", pct(*share));
        }
    }
    s
}
