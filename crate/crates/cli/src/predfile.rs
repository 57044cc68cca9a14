//! Prediction files: one row per example, `label<TAB>prob(<TAB>label<TAB>prob)*`.
//! A bare label means probability 1. Labels may carry the `__label__` prefix.

use lidkit::decision::align_ranked;
use lidkit::label::{AlignmentMap, LanguageLabel, MergeMap};
use lidkit::model::Prediction;

use crate::error::CliError;

pub fn parse_row(line: &str, line_no: usize) -> Result<Vec<(String, f64)>, CliError> {
    let line = line.trim_end_matches('\r');
    if line.trim().is_empty() {
        return Ok(Vec::new());
    }
    let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
    if cols.len() == 1 {
        return Ok(vec![(cols[0].to_string(), 1.0)]);
    }
    if !cols.len().is_multiple_of(2) {
        return Err(CliError::data(format!(
            "prediction line {line_no}: expected label/probability pairs, got {} columns",
            cols.len()
        )));
    }
    cols.chunks(2)
        .map(|pair| {
            let p: f64 =
                pair[1].parse().ok().filter(|p: &f64| p.is_finite()).ok_or_else(|| {
                    CliError::data(format!("prediction line {line_no}: bad probability {:?}", pair[1]))
                })?;
            Ok((pair[0].to_string(), p))
        })
        .collect()
}

/// Parses every row into a canonicalized prediction. Without an alignment
/// map, labels must already be valid inventory labels.
pub fn parse_predictions(
    text: &str,
    align: Option<&AlignmentMap>,
    merges: &MergeMap,
) -> Result<Vec<Prediction>, CliError> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let ranked = parse_row(line, i + 1)?;
            let pred = match align {
                Some(map) => align_ranked(&ranked, map),
                None => Prediction {
                    ranked: ranked
                        .iter()
                        .map(|(l, p)| {
                            LanguageLabel::parse(l)
                                .map(|l| (l, *p))
                                .map_err(|_| CliError::data(format!("prediction line {}: invalid label {l:?}", i + 1)))
                        })
                        .collect::<Result<_, _>>()?,
                },
            };
            Ok(Prediction {
                ranked: pred
                    .ranked
                    .into_iter()
                    .map(|(l, p)| (merges.canonicalize(l), p))
                    .collect(),
            })
        })
        .collect()
}
