//! Reading and writing Praat TextGrids and tab-separated tier files.

mod textgrid;
mod tsv;

use std::ops::Range;

use thiserror::Error;

pub use textgrid::{format_time, read_textgrid, write_textgrid, Interval, IntervalTier, TextGrid};
pub use tsv::{read_tsv, write_tsv, COLUMNS as TSV_COLUMNS};

use crate::annotation::{AnnotationError, Document, TierName, TierValue, Token};
use crate::tokenizer::SourceInterval;

/// Times written to TextGrids are rounded to microseconds; this matches them back.
const MATCH_EPS: f64 = 2e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("encoding error: {0}")]
    Encoding(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("missing tier {0:?}")]
    MissingTier(String),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
}

/// Non-empty intervals of the transcription tier, with the speaker taken
/// from the speaker tier at each interval's midpoint.
pub fn transcription_intervals(
    grid: &TextGrid,
    tier: &str,
    speaker_tier: Option<&str>,
) -> Result<Vec<SourceInterval>, CorpusError> {
    let source = grid.tier(tier).ok_or_else(|| CorpusError::MissingTier(tier.to_string()))?;
    let speakers = match speaker_tier {
        Some(name) => Some(grid.tier(name).ok_or_else(|| CorpusError::MissingTier(name.to_string()))?),
        None => None,
    };
    Ok(source
        .intervals
        .iter()
        .filter(|i| !i.text.trim().is_empty())
        .map(|i| {
            let mid = 0.5 * (i.xmin + i.xmax);
            let speaker =
                speakers.and_then(|s| s.interval_at(mid)).map_or(String::new(), |s| s.text.trim().to_string());
            SourceInterval { t_min: i.xmin, t_max: i.xmax, text: i.text.clone(), speaker }
        })
        .collect())
}

/// The six annotation tiers of `doc` as interval tiers, gaps filled with
/// empty intervals. Tokens must not overlap in time, whatever their speaker.
pub fn document_tiers(doc: &Document) -> Result<Vec<IntervalTier>, CorpusError> {
    for (i, w) in doc.tokens.windows(2).enumerate() {
        if w[1].t_min < w[0].t_max - 1e-9 {
            return Err(CorpusError::Invariant(format!(
                "tokens {i} and {} overlap; overlapping speech cannot share one tier",
                i + 1
            )));
        }
    }
    let (xmin, xmax) = match (doc.tokens.first(), doc.tokens.last()) {
        (Some(a), Some(b)) => (a.t_min.min(0.0), b.t_max),
        _ => (0.0, 0.0),
    };
    let span_interval = |v: &TierValue| {
        Interval::new(doc.tokens[v.span.start].t_min, doc.tokens[v.span.end - 1].t_max, v.value.clone())
    };
    let congruent = |values: &[TierValue]| values.iter().map(span_interval).collect::<Vec<_>>();
    let tok_min: Vec<Interval> = doc.tokens.iter().map(|t| Interval::new(t.t_min, t.t_max, t.text.clone())).collect();
    let tiers = [
        (TierName::TokMin, tok_min),
        (TierName::PosMin, congruent(&doc.tiers.pos_min)),
        (TierName::Disfluency, congruent(&doc.tiers.disfluency)),
        (TierName::TokMwu, congruent(&doc.tiers.tok_mwu)),
        (TierName::PosMwu, congruent(&doc.tiers.pos_mwu)),
        (TierName::Discourse, congruent(&doc.tiers.discourse)),
    ];
    tiers.into_iter().map(|(name, items)| IntervalTier::from_sparse(name.as_str(), xmin, xmax, items)).collect()
}

/// Adds (or replaces) the six annotation tiers on `grid`.
pub fn add_document_tiers(grid: &mut TextGrid, doc: &Document) -> Result<(), CorpusError> {
    for tier in document_tiers(doc)? {
        grid.set_tier(tier);
    }
    Ok(())
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= MATCH_EPS
}

/// Value of the interval spanning exactly `t_min..t_max`, scanning forward
/// from `cursor`.
fn exact_value(tier: &IntervalTier, cursor: &mut usize, t_min: f64, t_max: f64) -> Option<String> {
    while let Some(ivl) = tier.intervals.get(*cursor) {
        if close(ivl.xmin, t_min) && close(ivl.xmax, t_max) {
            *cursor += 1;
            return Some(ivl.text.clone());
        }
        if ivl.xmin > t_min + MATCH_EPS {
            return None;
        }
        *cursor += 1;
    }
    None
}

/// Token spans covered by the non-empty intervals of `tier`, in order.
fn covered_spans(tier: &IntervalTier, tokens: &[Token]) -> Vec<(Range<usize>, String)> {
    let mut out = Vec::new();
    let mut t = 0;
    for ivl in tier.intervals.iter().filter(|i| !i.text.is_empty()) {
        while t < tokens.len() && tokens[t].t_min < ivl.xmin - MATCH_EPS {
            t += 1;
        }
        let start = t;
        while t < tokens.len() && tokens[t].t_max <= ivl.xmax + MATCH_EPS && tokens[t].t_min >= ivl.xmin - MATCH_EPS {
            t += 1;
            // a zero-length interval holds one token at most
            if ivl.xmin == ivl.xmax {
                break;
            }
        }
        if t > start {
            out.push((start..t, ivl.text.clone()));
        }
    }
    out
}

/// Rebuilds a document from the six annotation tiers. Tokens come from the
/// non-empty `tok-min` intervals; a token whose text is `pause_symbol` is a pause.
pub fn document_from_textgrid(grid: &TextGrid, pause_symbol: &str) -> Result<Document, CorpusError> {
    let tier = |name: TierName| grid.tier(name.as_str()).ok_or_else(|| CorpusError::MissingTier(name.to_string()));
    let tokens: Vec<Token> = tier(TierName::TokMin)?
        .intervals
        .iter()
        .filter(|i| !i.text.is_empty())
        .map(|i| {
            if i.text == pause_symbol {
                Token::pause(pause_symbol, i.xmin, i.xmax)
            } else {
                Token::word(&i.text, i.xmin, i.xmax)
            }
        })
        .collect();
    let mut doc = Document::new(tokens)?;
    doc.meta.pause_symbol = pause_symbol.to_string();

    for name in [TierName::PosMin, TierName::Disfluency] {
        let Some(src) = grid.tier(name.as_str()) else { continue };
        let mut cursor = 0;
        for i in 0..doc.len() {
            let (a, b) = (doc.tokens[i].t_min, doc.tokens[i].t_max);
            let value = exact_value(src, &mut cursor, a, b).unwrap_or_default();
            match name {
                TierName::PosMin => doc.set_pos_min(i, value),
                _ => doc.set_disfluency(i, value),
            }
        }
    }

    if let Some(src) = grid.tier(TierName::TokMwu.as_str()) {
        let mut units = Vec::new();
        let mut next = 0;
        for (span, text) in covered_spans(src, &doc.tokens) {
            units.extend((next..span.start).map(|i| TierValue::new(i..i + 1, doc.tokens[i].text.clone())));
            next = span.end;
            units.push(TierValue::new(span, text));
        }
        units.extend((next..doc.len()).map(|i| TierValue::new(i..i + 1, doc.tokens[i].text.clone())));
        doc.tiers.tok_mwu = units;
    }
    let pos_src = grid.tier(TierName::PosMwu.as_str());
    let mut cursor = 0;
    doc.tiers.pos_mwu = doc
        .tiers
        .tok_mwu
        .iter()
        .map(|u| {
            let (a, b) = (doc.tokens[u.span.start].t_min, doc.tokens[u.span.end - 1].t_max);
            let value = pos_src.and_then(|s| exact_value(s, &mut cursor, a, b)).unwrap_or_default();
            TierValue::new(u.span.clone(), value)
        })
        .collect();
    if let Some(src) = grid.tier(TierName::Discourse.as_str()) {
        doc.tiers.discourse =
            covered_spans(src, &doc.tokens).into_iter().map(|(span, v)| TierValue::new(span, v)).collect();
    }
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::validate;
    use crate::tagset::PosTag;

    fn sample_doc() -> Document {
        let words = ["ben", "_", "parce", "que", "il", "est", "là"];
        let mut t = 0.0;
        let tokens = words
            .iter()
            .map(|w| {
                let tok = if *w == "_" { Token::pause("_", t, t + 0.6) } else { Token::word(w, t, t + 0.25) };
                t = tok.t_max + 0.05;
                tok
            })
            .collect();
        let mut doc = Document::new(tokens).unwrap();
        for (i, tag) in ["ITJ", "", "CON:sub", "CON:sub", "PRO:per:sujt", "VER:pres", "ADV"].iter().enumerate() {
            doc.set_pos_min(i, *tag);
        }
        doc.set_disfluency(1, "SIL");
        doc.group_mwu(2..4, &"CON:sub".parse::<PosTag>().unwrap()).unwrap();
        doc.tiers.pos_mwu[0].value = "ITJ".into();
        doc.tiers.discourse.push(TierValue::new(0..1, "DM"));
        doc
    }

    #[test]
    fn document_through_textgrid() {
        let doc = sample_doc();
        let mut grid = TextGrid::default();
        add_document_tiers(&mut grid, &doc).unwrap();
        let bytes = write_textgrid(&grid).unwrap();
        let back = document_from_textgrid(&read_textgrid(&bytes).unwrap(), "_").unwrap();
        assert!(validate(&back).is_empty(), "{:?}", validate(&back));
        assert_eq!(back.tiers, doc.tiers);
        assert_eq!(back.tokens.len(), doc.tokens.len());
        for (a, b) in back.tokens.iter().zip(&doc.tokens) {
            assert_eq!(a.text, b.text);
            assert_eq!(a.is_pause, b.is_pause);
            assert!((a.t_min - b.t_min).abs() < 1e-6 && (a.t_max - b.t_max).abs() < 1e-6);
        }
    }

    #[test]
    fn overlapping_speakers_rejected() {
        let tokens = vec![Token::word("a", 0.0, 1.0).with_speaker("A"), Token::word("b", 0.5, 1.5).with_speaker("B")];
        let doc = Document::new(tokens).unwrap();
        assert!(matches!(document_tiers(&doc), Err(CorpusError::Invariant(_))));
    }

    #[test]
    fn speaker_by_midpoint() {
        let mut grid = TextGrid::default();
        grid.set_tier(
            IntervalTier::from_sparse(
                "trans",
                0.0,
                3.0,
                [Interval::new(0.0, 1.0, "oui"), Interval::new(2.0, 3.0, "non")],
            )
            .unwrap(),
        );
        grid.set_tier(
            IntervalTier::from_sparse("spk", 0.0, 3.0, [Interval::new(0.0, 1.8, "L1"), Interval::new(1.8, 3.0, "L2")])
                .unwrap(),
        );
        let src = transcription_intervals(&grid, "trans", Some("spk")).unwrap();
        assert_eq!(src.len(), 2);
        assert_eq!((src[0].speaker.as_str(), src[1].speaker.as_str()), ("L1", "L2"));
        assert!(matches!(transcription_intervals(&grid, "nope", None), Err(CorpusError::MissingTier(_))));
    }
}
