//! Six-tier annotation document.
//!
//! `tok-min`, `pos-min` and `disfluency` are congruent (one value per
//! token). `tok-mwu` partitions the token sequence into multi-word units and
//! `pos-mwu` is congruent with it. `discourse` is a sparse tier of spans
//! aligned to token boundaries.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;

use thiserror::Error;

use crate::tagset::PosTag;

pub const DEFAULT_PAUSE_SYMBOL: &str = "_";

/// Tolerance for comparing token boundaries, in seconds.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnnotationError {
    #[error("token {index} overlaps the previous token of speaker {speaker:?}")]
    Overlap { index: usize, speaker: String },
    #[error("token {index} has tMin > tMax")]
    NegativeDuration { index: usize },
    #[error("span {start}..{end} is not aligned to tok-mwu boundaries")]
    MisalignedSpan { start: usize, end: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PauseClass {
    Short,
    Long,
}

impl PauseClass {
    pub fn as_str(self) -> &'static str {
        match self {
            PauseClass::Short => "short",
            PauseClass::Long => "long",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub text: String,
    pub t_min: f64,
    pub t_max: f64,
    pub speaker: String,
    pub is_pause: bool,
    /// Transcribed with the false-start marker.
    pub false_start: bool,
    /// Transcribed with an intra-word pause marker.
    pub intra_word_pause: bool,
    /// Split off the preceding token by a tokenizer rule (no whitespace before).
    pub attached: bool,
    pub pause_class: Option<PauseClass>,
}

impl Token {
    pub fn word(text: &str, t_min: f64, t_max: f64) -> Self {
        Token {
            text: text.to_string(),
            t_min,
            t_max,
            speaker: String::new(),
            is_pause: false,
            false_start: false,
            intra_word_pause: false,
            attached: false,
            pause_class: None,
        }
    }

    pub fn pause(symbol: &str, t_min: f64, t_max: f64) -> Self {
        Token { is_pause: true, ..Token::word(symbol, t_min, t_max) }
    }

    pub fn with_speaker(mut self, speaker: &str) -> Self {
        self.speaker = speaker.to_string();
        self
    }

    pub fn duration_ms(&self) -> f64 {
        (self.t_max - self.t_min) * 1000.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TierValue {
    pub span: Range<usize>,
    pub value: String,
}

impl TierValue {
    pub fn new(span: Range<usize>, value: impl Into<String>) -> Self {
        TierValue { span, value: value.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TierName {
    TokMin,
    PosMin,
    Disfluency,
    TokMwu,
    PosMwu,
    Discourse,
}

impl TierName {
    pub const ALL: [TierName; 6] = [
        TierName::TokMin,
        TierName::PosMin,
        TierName::Disfluency,
        TierName::TokMwu,
        TierName::PosMwu,
        TierName::Discourse,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TierName::TokMin => "tok-min",
            TierName::PosMin => "pos-min",
            TierName::Disfluency => "disfluency",
            TierName::TokMwu => "tok-mwu",
            TierName::PosMwu => "pos-mwu",
            TierName::Discourse => "discourse",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        TierName::ALL.into_iter().find(|t| t.as_str() == name)
    }
}

impl fmt::Display for TierName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tiers {
    pub pos_min: Vec<TierValue>,
    pub disfluency: Vec<TierValue>,
    pub tok_mwu: Vec<TierValue>,
    pub pos_mwu: Vec<TierValue>,
    pub discourse: Vec<TierValue>,
}

impl Tiers {
    /// The value tiers; `tok-min` is the token list itself and has none.
    pub fn get(&self, name: TierName) -> Option<&Vec<TierValue>> {
        match name {
            TierName::TokMin => None,
            TierName::PosMin => Some(&self.pos_min),
            TierName::Disfluency => Some(&self.disfluency),
            TierName::TokMwu => Some(&self.tok_mwu),
            TierName::PosMwu => Some(&self.pos_mwu),
            TierName::Discourse => Some(&self.discourse),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocumentMeta {
    pub sample_id: String,
    pub subcorpus: String,
    pub pause_symbol: String,
}

impl Default for DocumentMeta {
    fn default() -> Self {
        DocumentMeta {
            sample_id: String::new(),
            subcorpus: String::new(),
            pause_symbol: DEFAULT_PAUSE_SYMBOL.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Document {
    pub meta: DocumentMeta,
    pub tokens: Vec<Token>,
    pub tiers: Tiers,
    /// Opaque per-token columns carried through from the input.
    pub attributes: Vec<(String, Vec<String>)>,
}

/// Builds a document with singleton MWU spans and empty tag tiers.
pub fn new_document(tokens: Vec<Token>) -> Result<Document, AnnotationError> {
    Document::new(tokens)
}

impl Document {
    pub fn new(tokens: Vec<Token>) -> Result<Self, AnnotationError> {
        check_timing(&tokens)?;
        let tiers = Tiers {
            pos_min: singleton_values(tokens.len(), |_| String::new()),
            disfluency: singleton_values(tokens.len(), |_| String::new()),
            tok_mwu: singleton_values(tokens.len(), |i| tokens[i].text.clone()),
            pos_mwu: singleton_values(tokens.len(), |_| String::new()),
            discourse: Vec::new(),
        };
        Ok(Document { meta: DocumentMeta::default(), tokens, tiers, attributes: Vec::new() })
    }

    pub fn with_meta(mut self, meta: DocumentMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Distinct speakers in first-appearance order.
    pub fn speakers(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for t in &self.tokens {
            if !out.contains(&t.speaker.as_str()) {
                out.push(&t.speaker);
            }
        }
        out
    }

    /// True when any token has a positive duration.
    pub fn has_timing(&self) -> bool {
        self.tokens.iter().any(|t| t.t_max > t.t_min)
    }

    pub fn pos_min(&self, i: usize) -> &str {
        &self.tiers.pos_min[i].value
    }

    pub fn disfluency(&self, i: usize) -> &str {
        &self.tiers.disfluency[i].value
    }

    pub fn set_pos_min(&mut self, i: usize, value: impl Into<String>) {
        self.tiers.pos_min[i].value = value.into();
    }

    pub fn set_disfluency(&mut self, i: usize, value: impl Into<String>) {
        self.tiers.disfluency[i].value = value.into();
    }

    /// Index of the tok-mwu unit containing token `i`.
    pub fn mwu_index(&self, i: usize) -> Option<usize> {
        self.tiers.tok_mwu.iter().position(|v| v.span.contains(&i))
    }

    /// Merges the tok-mwu units covering `span` into one unit tagged `tag`.
    pub fn group_mwu(&mut self, span: Range<usize>, tag: &PosTag) -> Result<(), AnnotationError> {
        let misaligned = AnnotationError::MisalignedSpan { start: span.start, end: span.end };
        if span.is_empty() || span.end > self.tokens.len() {
            return Err(misaligned);
        }
        let first = self.tiers.tok_mwu.iter().position(|v| v.span.start == span.start).ok_or(misaligned.clone())?;
        let last = self.tiers.tok_mwu.iter().position(|v| v.span.end == span.end).ok_or(misaligned.clone())?;
        if last < first {
            return Err(misaligned);
        }
        let text = self.tokens[span.clone()].iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ");
        self.tiers.tok_mwu.splice(first..=last, [TierValue::new(span.clone(), text)]);
        let pos_first = self.tiers.pos_mwu.iter().position(|v| v.span.start == span.start);
        let pos_last = self.tiers.pos_mwu.iter().position(|v| v.span.end == span.end);
        match (pos_first, pos_last) {
            (Some(a), Some(b)) if a <= b => {
                self.tiers.pos_mwu.splice(a..=b, [TierValue::new(span, tag.to_string())]);
            }
            _ => {
                // pos-mwu out of step with tok-mwu: rebuild it from tok-mwu
                let mut old: HashMap<Range<usize>, String> =
                    self.tiers.pos_mwu.drain(..).map(|v| (v.span, v.value)).collect();
                old.insert(span, tag.to_string());
                self.tiers.pos_mwu = self
                    .tiers
                    .tok_mwu
                    .iter()
                    .map(|u| {
                        let v = old.remove(&u.span).unwrap_or_default();
                        TierValue::new(u.span.clone(), v)
                    })
                    .collect();
            }
        }
        Ok(())
    }

    /// Copy of the tokens in `range` with every tier clipped to it and
    /// re-indexed from zero. Units straddling the range edges are cut.
    pub fn slice(&self, range: Range<usize>) -> Document {
        let clip = |values: &[TierValue]| -> Vec<TierValue> {
            values
                .iter()
                .filter_map(|v| {
                    let start = v.span.start.max(range.start);
                    let end = v.span.end.min(range.end);
                    (start < end).then(|| TierValue::new(start - range.start..end - range.start, v.value.clone()))
                })
                .collect()
        };
        let tokens = self.tokens[range.clone()].to_vec();
        let mut tok_mwu = clip(&self.tiers.tok_mwu);
        for unit in &mut tok_mwu {
            unit.value = tokens[unit.span.clone()].iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ");
        }
        Document {
            meta: self.meta.clone(),
            tiers: Tiers {
                pos_min: clip(&self.tiers.pos_min),
                disfluency: clip(&self.tiers.disfluency),
                tok_mwu,
                pos_mwu: clip(&self.tiers.pos_mwu),
                discourse: clip(&self.tiers.discourse),
            },
            attributes: self.attributes.iter().map(|(k, v)| (k.clone(), v[range.clone()].to_vec())).collect(),
            tokens,
        }
    }

    /// Same tokens and metadata with all annotation tiers reset.
    pub fn unannotated(&self) -> Document {
        let mut doc = Document::new(self.tokens.clone())
            .unwrap_or_else(|_| Document { tokens: self.tokens.clone(), ..Document::default() });
        doc.meta = self.meta.clone();
        doc.attributes = self.attributes.clone();
        doc
    }
}

pub fn group_mwu(mut doc: Document, span: Range<usize>, tag: &PosTag) -> Result<Document, AnnotationError> {
    doc.group_mwu(span, tag)?;
    Ok(doc)
}

fn singleton_values(n: usize, value: impl Fn(usize) -> String) -> Vec<TierValue> {
    (0..n).map(|i| TierValue::new(i..i + 1, value(i))).collect()
}

#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN times must fail
fn check_timing(tokens: &[Token]) -> Result<(), AnnotationError> {
    let mut last_end: HashMap<&str, f64> = HashMap::new();
    for (index, t) in tokens.iter().enumerate() {
        if !(t.t_min <= t.t_max) {
            return Err(AnnotationError::NegativeDuration { index });
        }
        if let Some(&end) = last_end.get(t.speaker.as_str()) {
            if t.t_min < end - TIME_EPS {
                return Err(AnnotationError::Overlap { index, speaker: t.speaker.clone() });
            }
        }
        last_end.insert(&t.speaker, t.t_max);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rule {
    /// A token-congruent tier does not hold exactly one value per token.
    Congruence,
    /// tok-mwu does not partition the token sequence.
    Partition,
    /// Spans out of range, empty, overlapping or unordered.
    Span,
    /// tok-mwu unit text differs from its joined token texts.
    UnitText,
    /// Token timing out of order, negative, or overlapping for one speaker.
    Timing,
    /// Pause token text differs from the pause symbol.
    PauseSymbol,
    /// Opaque attribute column length differs from the token count.
    Attribute,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub tier: String,
    pub index: usize,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]: {:?}", self.tier, self.index, self.rule)
    }
}

/// Checks every document invariant; an empty list means the document is valid.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn validate(doc: &Document) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = doc.tokens.len();
    let mut push = |tier: &str, index: usize, rule: Rule| out.push(Violation { tier: tier.to_string(), index, rule });

    let mut last_end: HashMap<&str, f64> = HashMap::new();
    for (i, t) in doc.tokens.iter().enumerate() {
        let overlaps = last_end.get(t.speaker.as_str()).is_some_and(|&end| t.t_min < end - TIME_EPS);
        if !(t.t_min <= t.t_max) || overlaps {
            push("tok-min", i, Rule::Timing);
        }
        last_end.insert(&t.speaker, t.t_max);
        if t.is_pause && t.text != doc.meta.pause_symbol {
            push("tok-min", i, Rule::PauseSymbol);
        }
    }

    for name in [TierName::PosMin, TierName::Disfluency] {
        let values = doc.tiers.get(name).expect("value tier");
        if values.len() != n {
            push(name.as_str(), values.len().min(n), Rule::Congruence);
        }
        for (i, v) in values.iter().enumerate() {
            if v.span != (i..i + 1) {
                push(name.as_str(), i, Rule::Congruence);
            }
        }
    }

    let mut cursor = 0;
    for (k, unit) in doc.tiers.tok_mwu.iter().enumerate() {
        if unit.span.start != cursor || unit.span.is_empty() || unit.span.end > n {
            push("tok-mwu", k, Rule::Partition);
        } else {
            let text = doc.tokens[unit.span.clone()].iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ");
            if text != unit.value {
                push("tok-mwu", k, Rule::UnitText);
            }
        }
        cursor = unit.span.end;
    }
    if cursor != n {
        push("tok-mwu", doc.tiers.tok_mwu.len(), Rule::Partition);
    }

    let mwu_spans: Vec<&Range<usize>> = doc.tiers.tok_mwu.iter().map(|v| &v.span).collect();
    let pos_spans: Vec<&Range<usize>> = doc.tiers.pos_mwu.iter().map(|v| &v.span).collect();
    if mwu_spans != pos_spans {
        let k =
            mwu_spans.iter().zip(&pos_spans).position(|(a, b)| a != b).unwrap_or(mwu_spans.len().min(pos_spans.len()));
        push("pos-mwu", k, Rule::Congruence);
    }

    let mut prev_end = 0;
    for (k, v) in doc.tiers.discourse.iter().enumerate() {
        if v.span.is_empty() || v.span.end > n || v.span.start < prev_end {
            push("discourse", k, Rule::Span);
        }
        prev_end = v.span.end;
    }

    for (name, values) in &doc.attributes {
        if values.len() != n {
            push(name, values.len().min(n), Rule::Attribute);
        }
    }
    out
}

/// Pause-separated units: maximal runs of non-pause tokens separated by
/// silent pauses of at least `threshold_ms`. Adjacent pause tokens count as
/// one pause. Each unit lists its non-pause token indices, so short pauses
/// inside a unit belong to no unit.
pub fn psu_segments(doc: &Document, threshold_ms: u32) -> Vec<Vec<usize>> {
    segment_tokens(&doc.tokens, threshold_ms)
}

pub(crate) fn segment_tokens(tokens: &[Token], threshold_ms: u32) -> Vec<Vec<usize>> {
    let mut segments = Vec::new();
    let mut current = Vec::new();
    let mut pause_ms = 0.0;
    for (i, t) in tokens.iter().enumerate() {
        if t.is_pause {
            pause_ms += t.duration_ms();
            continue;
        }
        // a hair of slack so 0.5 s written in decimal still counts as 500 ms
        if pause_ms + 1e-6 >= f64::from(threshold_ms) && !current.is_empty() {
            segments.push(std::mem::take(&mut current));
        }
        pause_ms = 0.0;
        current.push(i);
    }
    if !current.is_empty() {
        segments.push(current);
    }
    segments
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tagset::parse_pos_tag;

    fn words(texts: &[&str]) -> Vec<Token> {
        texts.iter().enumerate().map(|(i, t)| Token::word(t, i as f64 * 0.3, i as f64 * 0.3 + 0.3)).collect()
    }

    #[test]
    fn new_document_singletons() {
        let doc = new_document(words(&["a", "b", "c"])).unwrap();
        assert_eq!(doc.tiers.tok_mwu.len(), 3);
        assert_eq!(doc.tiers.pos_mwu.len(), 3);
        assert!(validate(&doc).is_empty());
        let empty = new_document(vec![]).unwrap();
        assert!(empty.tiers.tok_mwu.is_empty() && empty.tiers.pos_min.is_empty());
        assert!(validate(&empty).is_empty());
    }

    #[test]
    fn overlap_rejected() {
        let toks = vec![Token::word("a", 0.0, 1.0), Token::word("b", 0.5, 1.5)];
        assert!(matches!(new_document(toks), Err(AnnotationError::Overlap { index: 1, .. })));
        // different speakers may overlap
        let toks = vec![Token::word("a", 0.0, 1.0).with_speaker("A"), Token::word("b", 0.5, 1.5).with_speaker("B")];
        assert!(new_document(toks).is_ok());
    }

    #[test]
    fn group_parce_que() {
        let doc = new_document(words(&["parce", "que", "il"])).unwrap();
        let tag = parse_pos_tag("CON:sub").unwrap();
        let doc = group_mwu(doc, 0..2, &tag).unwrap();
        assert_eq!(doc.tiers.tok_mwu[0], TierValue::new(0..2, "parce que"));
        assert_eq!(doc.tiers.pos_mwu[0], TierValue::new(0..2, "CON:sub"));
        assert_eq!(doc.tiers.tok_mwu.len(), 2);
        assert_eq!(doc.tokens.len(), 3);
        assert!(validate(&doc).is_empty());
    }

    #[test]
    fn group_singleton_and_misaligned() {
        let tag = parse_pos_tag("ADV").unwrap();
        let doc = new_document(words(&["a", "b", "c"])).unwrap();
        let mut grouped = doc.clone();
        grouped.group_mwu(1..2, &tag).unwrap();
        assert_eq!(grouped.tiers.tok_mwu, doc.tiers.tok_mwu);
        assert_eq!(grouped.tiers.pos_mwu[1].value, "ADV");

        grouped.group_mwu(0..2, &tag).unwrap();
        assert_eq!(grouped.group_mwu(1..3, &tag), Err(AnnotationError::MisalignedSpan { start: 1, end: 3 }));
        assert!(grouped.group_mwu(2..2, &tag).is_err());
        assert!(grouped.group_mwu(2..4, &tag).is_err());
    }

    #[test]
    fn validate_reports_broken_tiers() {
        let mut doc = new_document(words(&["a", "b"])).unwrap();
        doc.tiers.pos_min.pop();
        let v = validate(&doc);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].tier, "pos-min");
        assert_eq!(v[0].rule, Rule::Congruence);

        let mut doc = new_document(words(&["a", "b", "c"])).unwrap();
        doc.tiers.tok_mwu.remove(1);
        doc.tiers.pos_mwu.remove(1);
        let v = validate(&doc);
        assert!(v.iter().all(|x| x.tier == "tok-mwu" && x.rule == Rule::Partition));
        assert!(!v.is_empty());
    }

    #[test]
    fn validate_discourse_and_pauses() {
        let mut doc = new_document(vec![Token::pause("#", 0.0, 0.2), Token::word("a", 0.2, 0.4)]).unwrap();
        doc.tiers.discourse.push(TierValue::new(1..3, "DM"));
        let rules: Vec<Rule> = validate(&doc).into_iter().map(|v| v.rule).collect();
        assert_eq!(rules, vec![Rule::PauseSymbol, Rule::Span]);
    }

    fn with_pauses(pauses_ms: &[f64]) -> Vec<Token> {
        // groups of two words separated by the given pauses
        let mut toks = Vec::new();
        let mut t = 0.0;
        for (g, p) in pauses_ms.iter().chain([0.0].iter()).enumerate() {
            for w in 0..2 {
                toks.push(Token::word(&format!("w{g}{w}"), t, t + 0.2));
                t += 0.2;
            }
            if *p > 0.0 {
                toks.push(Token::pause("_", t, t + p / 1000.0));
                t += p / 1000.0;
            }
        }
        toks
    }

    #[test]
    fn psu_split() {
        let doc = new_document(with_pauses(&[200.0, 600.0])).unwrap();
        let segs = psu_segments(&doc, 500);
        assert_eq!(segs, vec![vec![0, 1, 3, 4], vec![6, 7]]);
        let doc = new_document(words(&["a", "b", "c"])).unwrap();
        assert_eq!(psu_segments(&doc, 500), vec![vec![0, 1, 2]]);
        // two adjacent short pauses add up
        let doc = new_document(with_pauses(&[300.0])).unwrap();
        let mut toks = doc.tokens.clone();
        toks.insert(3, Token::pause("_", toks[2].t_max, toks[2].t_max));
        toks[3].t_max = toks[2].t_max + 0.3;
        toks[2].t_max = toks[2].t_min + 0.3;
        for t in toks.iter_mut().skip(4) {
            t.t_min += 0.3;
            t.t_max += 0.3;
        }
        let doc = new_document(toks).unwrap();
        assert_eq!(psu_segments(&doc, 500).len(), 2);
    }

    #[test]
    fn slice_clips_tiers() {
        let tag = parse_pos_tag("CON:sub").unwrap();
        let mut doc = new_document(words(&["a", "parce", "que", "b"])).unwrap();
        doc.group_mwu(1..3, &tag).unwrap();
        doc.tiers.discourse.push(TierValue::new(0..1, "DM"));
        let s = doc.slice(1..4);
        assert_eq!(s.tokens.len(), 3);
        assert_eq!(s.tiers.tok_mwu[0], TierValue::new(0..2, "parce que"));
        assert!(s.tiers.discourse.is_empty());
        assert!(validate(&s).is_empty());
        let cut = doc.slice(2..4);
        assert!(validate(&cut).is_empty());
    }
}
