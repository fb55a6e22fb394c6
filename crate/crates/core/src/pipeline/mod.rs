//! The annotation cascade over a shared token list: lexicon lookup,
//! preliminary POS, pause-based boundaries, disfluencies, final POS with
//! multi-word units, discourse markers and rule-based refinement.

mod disfluency;
mod features;
mod rules;
mod training;

use std::ops::Range;

use thiserror::Error;

pub use disfluency::{
    code_of, detect_simple_disfluencies, detect_structured_disfluencies, find_repetitions, is_excluded,
    StructuredDisfluency,
};
pub use features::{position, sequence, shape};
pub use rules::{apply_post_rules, parse_rules, ActionTier, MatchTier, Matcher, PostRule, SAMPLE_RULES};
pub use training::{gold_sequences, train_models, GoldSequences, TrainedModels};

use crate::annotation::{segment_tokens, AnnotationError, Document, TierValue};
use crate::crf::{CrfError, CrfModel, LabelMask};
use crate::lexicon::{Entry, Lexicon, MwuMatch};
use crate::scalar::Scalar;
use crate::tagset::{DisfluencyCode, DisfluencyLabel, PosTag, TagRegistry};
use crate::tokenizer::{classify_pauses, tokenize, SourceInterval, TokenizerConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("model label {label:?} is not valid for the {model} model")]
    LabelOutsideRegistry { model: &'static str, label: String },
    #[error("rule line {line}: {message}")]
    RuleParse { line: usize, message: String },
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Crf(#[from] CrfError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub tokenizer: TokenizerConfig,
    /// LEN fires above speaker mean + this many standard deviations.
    pub len_sd_factor: f64,
    /// Longest repeated stretch the repetition rule looks for.
    pub max_repetition: usize,
    /// Tag categories that count as the discourse-marker reading.
    pub discourse_categories: Vec<String>,
    pub discourse_value: String,
    /// A candidate is marked when its mean marginal is strictly above this.
    pub discourse_threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            tokenizer: TokenizerConfig::sample(),
            len_sd_factor: 3.0,
            max_repetition: 4,
            discourse_categories: vec!["ITJ".into()],
            discourse_value: "DM".into(),
            discourse_threshold: 0.5,
        }
    }
}

impl PipelineConfig {
    pub fn psu_threshold_ms(&self) -> u32 {
        self.tokenizer.psu_threshold_ms
    }
}

/// Everything `annotate` needs; immutable and shareable across threads.
#[derive(Debug, Clone)]
pub struct PipelineResources<F = f64> {
    pub lexicon: Lexicon,
    pub prelim: CrfModel<F>,
    pub disfluency: Option<CrfModel<F>>,
    pub final_model: CrfModel<F>,
    pub post_rules: Vec<PostRule>,
    pub config: PipelineConfig,
}

impl<F: Scalar> PipelineResources<F> {
    /// Checks that POS model labels are registry tags and disfluency model
    /// labels are disfluency codes (or `O`).
    pub fn new(
        lexicon: Lexicon,
        prelim: CrfModel<F>,
        disfluency: Option<CrfModel<F>>,
        final_model: CrfModel<F>,
        post_rules: Vec<PostRule>,
        config: PipelineConfig,
    ) -> Result<Self, PipelineError> {
        let registry = TagRegistry::builtin();
        for (name, model) in [("preliminary", &prelim), ("final", &final_model)] {
            for label in model.labels() {
                registry
                    .parse_tag(label)
                    .map_err(|_| PipelineError::LabelOutsideRegistry { model: name, label: label.clone() })?;
            }
        }
        if let Some(m) = &disfluency {
            for label in m.labels() {
                if label != NO_DISFLUENCY && label.parse::<DisfluencyLabel>().is_err() {
                    return Err(PipelineError::LabelOutsideRegistry { model: "disfluency", label: label.clone() });
                }
            }
        }
        Ok(PipelineResources { lexicon, prelim, disfluency, final_model, post_rules, config })
    }
}

/// Label of fluent tokens in the optional disfluency model.
pub const NO_DISFLUENCY: &str = "O";

/// The shared working state of the cascade.
#[derive(Debug, Clone)]
pub struct TokenList {
    pub doc: Document,
    /// Single-word lexicon entry per token (empty for pauses and unknown words).
    pub candidates: Vec<Entry>,
    pub locked_pos: Vec<bool>,
    pub locked_disfluency: Vec<bool>,
    /// Multi-word candidates starting at each token.
    pub mwu_candidates: Vec<Vec<MwuMatch>>,
    /// Candidate discourse-marker spans, ordered and non-overlapping.
    pub discourse_candidates: Vec<Range<usize>>,
    /// Pause-separated units: non-pause token indices.
    pub segments: Vec<Vec<usize>>,
    pub structured: Vec<StructuredDisfluency>,
}

impl TokenList {
    /// A token list with no lexicon information, everything unlocked.
    pub fn bare(doc: Document) -> Self {
        let n = doc.len();
        TokenList {
            doc,
            candidates: vec![Entry::default(); n],
            locked_pos: vec![false; n],
            locked_disfluency: vec![false; n],
            mwu_candidates: vec![Vec::new(); n],
            discourse_candidates: Vec::new(),
            segments: Vec::new(),
            structured: Vec::new(),
        }
    }

    /// `TAG/B` or `TAG/I` for the longest multi-word candidate covering token `i`.
    pub fn mwu_attr(&self, i: usize) -> Option<String> {
        let mut best: Option<(usize, usize, &str)> = None;
        for j in (0..=i).rev() {
            for m in &self.mwu_candidates[j] {
                if j + m.len > i && best.is_none_or(|(len, _, _)| m.len > len) {
                    best = Some((m.len, j, &m.tag));
                }
            }
            if i - j >= 8 {
                break;
            }
        }
        best.map(|(_, j, tag)| format!("{tag}/{}", if j == i { "B" } else { "I" }))
    }

    /// Candidate tags for decoding: the single-word entry plus the tags of
    /// multi-word candidates covering the token.
    fn allowed_tags(&self, i: usize) -> Vec<String> {
        let mut tags: Vec<String> = self.candidates[i].tags.iter().cloned().collect();
        for j in i.saturating_sub(8)..=i {
            for m in &self.mwu_candidates[j] {
                if j + m.len > i && !tags.contains(&m.tag) {
                    tags.push(m.tag.clone());
                }
            }
        }
        tags
    }

    fn covered_by_mwu(&self, i: usize) -> bool {
        (i.saturating_sub(8)..i).any(|j| self.mwu_candidates[j].iter().any(|m| j + m.len > i))
            || !self.mwu_candidates[i].is_empty()
    }

    /// Decoding mask for `idx`: locked tokens allow only their tag, others
    /// their lexicon candidates known to the model (free if none are).
    pub fn mask<F: Scalar>(&self, model: &CrfModel<F>, idx: &[usize]) -> LabelMask {
        idx.iter()
            .map(|&i| {
                let allowed: Vec<usize> = if self.locked_pos[i] {
                    model.label_index(self.doc.pos_min(i)).into_iter().collect()
                } else {
                    let mut v: Vec<usize> = self.allowed_tags(i).iter().filter_map(|t| model.label_index(t)).collect();
                    v.sort_unstable();
                    v
                };
                (!allowed.is_empty()).then_some(allowed)
            })
            .collect()
    }
}

fn is_filled_pause(entry: &Entry, text: &str, cfg: &TokenizerConfig) -> bool {
    entry.filled_pause || cfg.filled_pause_forms.contains(&crate::lexicon::fold(text))
}

/// Lexicon pass: candidates, locks for unambiguous tokens, FIL and FST,
/// and the multi-word and discourse-marker candidates.
pub fn preprocess(doc: &Document, lexicon: &Lexicon, cfg: &PipelineConfig) -> TokenList {
    let mut tl = TokenList::bare(doc.unannotated());
    let n = tl.doc.len();
    for i in 0..n {
        let tok = &tl.doc.tokens[i];
        if tok.is_pause {
            tl.doc.set_disfluency(i, DisfluencyCode::Sil.as_str());
            continue;
        }
        // a fragment is not the word it happens to spell
        if tok.false_start {
            continue;
        }
        tl.candidates[i] = lexicon.lookup(&tok.text);
        tl.mwu_candidates[i] = lexicon
            .mwu_matches(&tl.doc.tokens, i)
            .into_iter()
            .filter(|m| !tl.doc.tokens[i..i + m.len].iter().any(|t| t.false_start))
            .collect();
    }
    for i in 0..n {
        let tok = &tl.doc.tokens[i];
        if tok.is_pause {
            continue;
        }
        if is_filled_pause(&tl.candidates[i], &tok.text, &cfg.tokenizer) {
            tl.doc.set_pos_min(i, "ITJ");
            tl.locked_pos[i] = true;
            tl.doc.set_disfluency(i, DisfluencyCode::Fil.as_str());
            tl.locked_disfluency[i] = true;
            continue;
        }
        if tl.candidates[i].tags.len() == 1 && !tl.covered_by_mwu(i) {
            let tag = tl.candidates[i].tags.iter().next().cloned().unwrap_or_default();
            tl.doc.set_pos_min(i, tag);
            tl.locked_pos[i] = true;
        }
        if tl.doc.tokens[i].false_start {
            tl.doc.set_disfluency(i, DisfluencyCode::Fst.as_str());
            tl.locked_disfluency[i] = true;
        }
    }

    // discourse candidates: multi-word first, longest first, left to right
    let mut spans: Vec<Range<usize>> = Vec::new();
    let mut i = 0;
    while i < n {
        let mwu = tl.mwu_candidates[i].iter().find(|m| m.discourse_marker).map(|m| m.len);
        let len = mwu.or((tl.candidates[i].discourse_marker && !tl.locked_disfluency[i]).then_some(1));
        match len {
            Some(len) => {
                spans.push(i..i + len);
                i += len;
            }
            None => i += 1,
        }
    }
    tl.discourse_candidates = spans;
    tl
}

/// Splits the token list into pause-separated units.
pub fn detect_boundaries(tl: &mut TokenList, cfg: &PipelineConfig) {
    tl.segments = segment_tokens(&tl.doc.tokens, cfg.psu_threshold_ms());
}

fn decode_into<F: Scalar>(tl: &mut TokenList, model: &CrfModel<F>, idx: &[usize], with_mwu: bool) {
    if idx.is_empty() {
        return;
    }
    let seq = sequence(tl, idx, with_mwu);
    let mask = tl.mask(model, idx);
    let labels = model.decode_constrained(&seq, &mask);
    for (&i, label) in idx.iter().zip(labels) {
        if !tl.locked_pos[i] {
            tl.doc.set_pos_min(i, label);
        }
    }
}

/// Preliminary POS over every non-pause token of each unit.
pub fn preliminary_pos<F: Scalar>(tl: &mut TokenList, model: &CrfModel<F>) {
    for seg in tl.segments.clone() {
        decode_into(tl, model, &seg, false);
    }
}

/// Fluent tokens of a unit: the final model's input.
pub fn fluent_tokens(tl: &TokenList, seg: &[usize]) -> Vec<usize> {
    seg.iter().copied().filter(|&i| !is_excluded(tl, i)).collect()
}

fn category(tag: &str) -> &str {
    tag.split(':').next().unwrap_or_default()
}

/// Final POS on fluent tokens, then greedy multi-word grouping.
pub fn final_pos_mwu<F: Scalar>(tl: &mut TokenList, model: &CrfModel<F>) -> Result<(), PipelineError> {
    for seg in tl.segments.clone() {
        let idx = fluent_tokens(tl, &seg);
        decode_into(tl, model, &idx, true);
    }

    let n = tl.doc.len();
    let mut accepted: Vec<(Range<usize>, String)> = Vec::new();
    let mut i = 0;
    while i < n {
        let mut next = i + 1;
        for m in &tl.mwu_candidates[i] {
            let span = i..i + m.len;
            let crosses_ip = (span.start..span.end - 1).any(|k| tl.doc.disfluency(k).ends_with('*'));
            if crosses_ip || span.clone().any(|k| is_excluded(tl, k)) {
                continue;
            }
            let cat = category(&m.tag);
            let components_agree = span.clone().all(|k| category(tl.doc.pos_min(k)) == cat);
            let initial_allows = tl.candidates[i].tags.iter().any(|t| category(t) == cat);
            if components_agree || initial_allows {
                accepted.push((span.clone(), m.tag.clone()));
                next = span.end;
                break;
            }
        }
        i = next;
    }
    for k in 0..n {
        tl.doc.tiers.pos_mwu[k].value = tl.doc.pos_min(k).to_string();
    }
    for (span, tag) in accepted {
        let tag: PosTag =
            tag.parse().map_err(|_| PipelineError::LabelOutsideRegistry { model: "lexicon", label: tag.clone() })?;
        tl.doc.group_mwu(span, &tag)?;
    }
    Ok(())
}

/// Marks discourse-marker candidates whose mean marginal of the
/// discourse categories, under the final model, is above the threshold.
pub fn detect_discourse_markers<F: Scalar>(tl: &mut TokenList, model: &CrfModel<F>, cfg: &PipelineConfig) {
    let is_dm = |tag: &str| cfg.discourse_categories.iter().any(|c| c == category(tag));
    let dm_labels: Vec<usize> = (0..model.num_labels()).filter(|&y| is_dm(&model.labels()[y])).collect();
    let mut prob = vec![None; tl.doc.len()];
    for seg in tl.segments.clone() {
        let idx = fluent_tokens(tl, &seg);
        if idx.is_empty() || !idx.iter().any(|i| tl.discourse_candidates.iter().any(|s| s.contains(i))) {
            continue;
        }
        let seq = sequence(tl, &idx, true);
        let mask = tl.mask(model, &idx);
        let marginals = model.marginals_constrained(&seq, &mask);
        for (&i, dist) in idx.iter().zip(marginals) {
            let p: f64 = dm_labels.iter().map(|&y| dist[y].to_f64_lossy()).sum();
            prob[i] = Some(p);
        }
    }
    let mut marked = Vec::new();
    for span in &tl.discourse_candidates {
        let ps: Vec<f64> =
            span.clone().map(|i| prob[i].unwrap_or(if is_dm(tl.doc.pos_min(i)) { 1.0 } else { 0.0 })).collect();
        let mean = ps.iter().sum::<f64>() / ps.len() as f64;
        if mean > cfg.discourse_threshold {
            marked.push(TierValue::new(span.clone(), cfg.discourse_value.clone()));
        }
    }
    tl.doc.tiers.discourse = marked;
}

/// Runs the whole cascade; returns the annotated token list. Tokens are
/// returned exactly as given.
pub fn run<F: Scalar>(doc: &Document, res: &PipelineResources<F>) -> Result<TokenList, PipelineError> {
    let cfg = &res.config;
    let mut work = doc.clone();
    if work.tokens.iter().any(|t| t.is_pause && t.pause_class.is_none()) {
        classify_pauses(&mut work.tokens, &cfg.tokenizer);
    }
    let mut tl = preprocess(&work, &res.lexicon, cfg);
    detect_boundaries(&mut tl, cfg);
    preliminary_pos(&mut tl, &res.prelim);
    detect_simple_disfluencies(&mut tl, cfg);
    detect_structured_disfluencies(&mut tl, res.disfluency.as_ref(), cfg);
    final_pos_mwu(&mut tl, &res.final_model)?;
    detect_discourse_markers(&mut tl, &res.final_model, cfg);
    apply_post_rules(&mut tl, &res.post_rules);
    // pause classes were only needed as features
    tl.doc.tokens.clone_from(&doc.tokens);
    Ok(tl)
}

/// Annotates a tokenized document with all six tiers.
pub fn annotate<F: Scalar>(doc: &Document, res: &PipelineResources<F>) -> Result<Document, PipelineError> {
    Ok(run(doc, res)?.doc)
}

/// Tokenizes transcription intervals and annotates the result.
pub fn annotate_intervals<F: Scalar>(
    intervals: &[SourceInterval],
    res: &PipelineResources<F>,
) -> Result<Document, PipelineError> {
    let mut doc = Document::new(tokenize(intervals, &res.config.tokenizer))?;
    doc.meta.pause_symbol = res.config.tokenizer.pause_symbol.clone();
    annotate(&doc, res)
}
