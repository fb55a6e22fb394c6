//! Building CRF training sequences from gold documents.

use super::disfluency::code_of;
use super::{fluent_tokens, preprocess, sequence, PipelineConfig, PipelineError, TokenList, NO_DISFLUENCY};
use crate::annotation::{segment_tokens, Document};
use crate::crf::{train, CrfModel, FeatureTemplate, LabeledSequence, TrainingConfig, TrainingLog};
use crate::lexicon::Lexicon;
use crate::scalar::Scalar;
use crate::tagset::DisfluencyCode;
use crate::tokenizer::classify_pauses;

/// Training material for the three statistical layers.
#[derive(Debug, Clone, Default)]
pub struct GoldSequences {
    /// Every non-pause token of each unit, gold `pos-min`.
    pub prelim: Vec<LabeledSequence>,
    /// Fluent tokens of each unit with the `mwu` attribute, gold `pos-min`.
    pub final_pos: Vec<LabeledSequence>,
    /// Every non-pause token, DEL/SUB/INS labels and `O` elsewhere.
    pub disfluency: Vec<LabeledSequence>,
}

fn gold_list(doc: &Document, lexicon: &Lexicon, cfg: &PipelineConfig) -> TokenList {
    let mut doc = doc.clone();
    if doc.tokens.iter().any(|t| t.is_pause && t.pause_class.is_none()) {
        classify_pauses(&mut doc.tokens, &cfg.tokenizer);
    }
    let mut tl = preprocess(&doc, lexicon, cfg);
    tl.doc = doc;
    tl.segments = segment_tokens(&tl.doc.tokens, cfg.psu_threshold_ms());
    tl
}

fn labeled(tl: &TokenList, idx: &[usize], with_mwu: bool, label: impl Fn(usize) -> String) -> Option<LabeledSequence> {
    let labels: Vec<String> = idx.iter().map(|&i| label(i)).collect();
    if idx.is_empty() || labels.iter().any(String::is_empty) {
        return None;
    }
    LabeledSequence::labeled(sequence(tl, idx, with_mwu).positions, labels).ok()
}

/// Extracts training sequences; units with an untagged word are skipped.
pub fn gold_sequences(docs: &[Document], lexicon: &Lexicon, cfg: &PipelineConfig) -> GoldSequences {
    let mut out = GoldSequences::default();
    for doc in docs {
        let tl = gold_list(doc, lexicon, cfg);
        for seg in &tl.segments {
            let pos = |i: usize| tl.doc.pos_min(i).to_string();
            out.prelim.extend(labeled(&tl, seg, false, pos));
            out.final_pos.extend(labeled(&tl, &fluent_tokens(&tl, seg), true, pos));
            let dis = |i: usize| match code_of(tl.doc.disfluency(i)) {
                Some(DisfluencyCode::Del | DisfluencyCode::Sub | DisfluencyCode::Ins) => {
                    tl.doc.disfluency(i).to_string()
                }
                _ => NO_DISFLUENCY.to_string(),
            };
            out.disfluency.extend(labeled(&tl, seg, false, dis));
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainedModels<F> {
    pub prelim: CrfModel<F>,
    /// Absent when the gold data has no DEL/SUB/INS labels.
    pub disfluency: Option<CrfModel<F>>,
    pub final_model: CrfModel<F>,
    pub logs: Vec<(&'static str, TrainingLog)>,
}

/// Trains the preliminary and final POS models (and the disfluency model
/// when there is something to learn) on gold documents.
pub fn train_models<F: Scalar>(
    docs: &[Document],
    lexicon: &Lexicon,
    cfg: &PipelineConfig,
    templates: &[FeatureTemplate],
    train_cfg: &TrainingConfig,
) -> Result<TrainedModels<F>, PipelineError> {
    let gold = gold_sequences(docs, lexicon, cfg);
    let has_statistical = gold.disfluency.iter().any(|s| s.labels.iter().flatten().any(|l| l != NO_DISFLUENCY));
    let ((prelim, final_model), disfluency) = rayon::join(
        || {
            rayon::join(
                || train::<F>(&gold.prelim, templates, train_cfg),
                || train::<F>(&gold.final_pos, templates, train_cfg),
            )
        },
        || has_statistical.then(|| train::<F>(&gold.disfluency, templates, train_cfg)),
    );
    let (prelim, prelim_log) = prelim?;
    let (final_model, final_log) = final_model?;
    let mut logs = vec![("preliminary", prelim_log), ("final", final_log)];
    let disfluency = match disfluency.transpose()? {
        Some((m, log)) => {
            logs.push(("disfluency", log));
            Some(m)
        }
        None => None,
    };
    Ok(TrainedModels { prelim, disfluency, final_model, logs })
}
