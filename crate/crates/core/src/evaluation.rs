//! PSU-balanced k-fold cross-validation and tagging metrics.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::annotation::{psu_segments, Document, TierValue};
use crate::crf::{FeatureTemplate, TrainingConfig};
use crate::lexicon::Lexicon;
use crate::pipeline::{annotate, code_of, train_models, PipelineConfig, PipelineError, PipelineResources, PostRule};
use crate::scalar::Scalar;
use crate::tagset::{project_tag_value, TagLevel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("sub-corpus {stratum:?} has {units} units, fewer than k = {k}")]
    TooFewUnits { stratum: String, units: usize, k: usize },
    #[error("k must be at least 2, got {0}")]
    BadK(usize),
    #[error("documents are not congruent: {0}")]
    IncongruentDocuments(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

/// A pause-separated unit: document index and unit index within it.
pub type UnitId = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: BTreeMap<UnitId, usize>,
    /// Sub-corpus of each unit.
    pub strata: BTreeMap<UnitId, String>,
}

impl FoldPlan {
    pub fn units_in(&self, fold: usize) -> impl Iterator<Item = UnitId> + '_ {
        self.assignment.iter().filter(move |(_, &f)| f == fold).map(|(&u, _)| u)
    }

    /// Fold sizes per sub-corpus.
    pub fn sizes(&self) -> BTreeMap<String, Vec<usize>> {
        let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (u, &f) in &self.assignment {
            out.entry(self.strata[u].clone()).or_insert_with(|| vec![0; self.k])[f] += 1;
        }
        out
    }
}

/// Shuffles each sub-corpus's units with `seed` and deals them round-robin.
/// The dealing position carries over between sub-corpora so whole folds
/// stay balanced too.
pub fn split_folds(corpus: &[Document], k: usize, psu_threshold_ms: u32, seed: u64) -> Result<FoldPlan, EvalError> {
    if k < 2 {
        return Err(EvalError::BadK(k));
    }
    let mut by_stratum: BTreeMap<&str, Vec<UnitId>> = BTreeMap::new();
    for (d, doc) in corpus.iter().enumerate() {
        let n = psu_segments(doc, psu_threshold_ms).len();
        by_stratum.entry(doc.meta.subcorpus.as_str()).or_default().extend((0..n).map(|u| (d, u)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut plan = FoldPlan { k, assignment: BTreeMap::new(), strata: BTreeMap::new() };
    let mut next = 0;
    for (stratum, mut units) in by_stratum {
        if units.len() < k {
            return Err(EvalError::TooFewUnits { stratum: stratum.to_string(), units: units.len(), k });
        }
        units.shuffle(&mut rng);
        for u in units {
            plan.assignment.insert(u, next % k);
            plan.strata.insert(u, stratum.to_string());
            next += 1;
        }
    }
    Ok(plan)
}

fn concat(parts: Vec<Document>, template: &Document) -> Document {
    let mut out = Document {
        meta: template.meta.clone(),
        attributes: template.attributes.iter().map(|(k, _)| (k.clone(), Vec::new())).collect(),
        ..Document::default()
    };
    for part in parts {
        let off = out.tokens.len();
        let shift = |v: &TierValue| TierValue::new(v.span.start + off..v.span.end + off, v.value.clone());
        out.tiers.pos_min.extend(part.tiers.pos_min.iter().map(shift));
        out.tiers.disfluency.extend(part.tiers.disfluency.iter().map(shift));
        out.tiers.tok_mwu.extend(part.tiers.tok_mwu.iter().map(shift));
        out.tiers.pos_mwu.extend(part.tiers.pos_mwu.iter().map(shift));
        out.tiers.discourse.extend(part.tiers.discourse.iter().map(shift));
        for ((_, dst), (_, src)) in out.attributes.iter_mut().zip(part.attributes) {
            dst.extend(src);
        }
        out.tokens.extend(part.tokens);
    }
    out
}

/// Per document, the units accepted by `keep`, each with the pauses
/// before it, joined into one document. Documents with no kept unit are
/// dropped.
pub fn select_units(corpus: &[Document], psu_threshold_ms: u32, mut keep: impl FnMut(UnitId) -> bool) -> Vec<Document> {
    let mut out = Vec::new();
    for (d, doc) in corpus.iter().enumerate() {
        let segments = psu_segments(doc, psu_threshold_ms);
        let mut ranges: Vec<Range<usize>> = Vec::new();
        let mut start = 0;
        for (u, seg) in segments.iter().enumerate() {
            let end = seg.last().map_or(start, |&i| i + 1);
            if keep((d, u)) {
                ranges.push(start..end);
            }
            start = end;
        }
        if !ranges.is_empty() {
            out.push(concat(ranges.into_iter().map(|r| doc.slice(r)).collect(), doc));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CodeScore {
    pub gold: usize,
    pub predicted: usize,
    pub correct: usize,
}

impl CodeScore {
    pub fn precision(&self) -> f64 {
        ratio(self.correct, self.predicted)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.correct, self.gold)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metrics {
    pub pos_precision_l1: f64,
    pub pos_precision_l2: f64,
    pub pos_precision_full: f64,
    pub disf_detection_precision: f64,
    pub disf_detection_recall: f64,
    pub disf_classification_precision: f64,
    /// Per disfluency code (markers ignored): precision and recall.
    pub code_precision: BTreeMap<String, f64>,
    pub code_recall: BTreeMap<String, f64>,
    /// Non-pause tokens scored.
    pub tokens: usize,
}

/// Empty denominators count as perfect.
fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

fn check_congruent(gold: &Document, pred: &Document) -> Result<(), EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::IncongruentDocuments(format!("{} gold tokens, {} predicted", gold.len(), pred.len())));
    }
    for (i, (g, p)) in gold.tokens.iter().zip(&pred.tokens).enumerate() {
        if g.text != p.text || g.is_pause != p.is_pause {
            return Err(EvalError::IncongruentDocuments(format!("token {i}: {:?} vs {:?}", g.text, p.text)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct PosCounts {
    total: usize,
    hits: [usize; 3],
}

fn pos_counts(gold: &Document, pred: &Document) -> Result<PosCounts, EvalError> {
    check_congruent(gold, pred)?;
    let mut c = PosCounts::default();
    for i in (0..gold.len()).filter(|&i| !gold.tokens[i].is_pause) {
        c.total += 1;
        let (g, p) = (gold.pos_min(i), pred.pos_min(i));
        for (slot, level) in [TagLevel::Category, TagLevel::Subcategory].into_iter().enumerate() {
            c.hits[slot] += usize::from(project_tag_value(g, level) == project_tag_value(p, level));
        }
        c.hits[2] += usize::from(g == p);
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Default)]
struct DisfCounts {
    gold: usize,
    predicted: usize,
    detected: usize,
    classified: usize,
    codes: BTreeMap<String, CodeScore>,
}

fn code_key(value: &str) -> String {
    code_of(value).map_or_else(|| value.to_string(), |c| c.as_str().to_string())
}

fn disf_counts(gold: &Document, pred: &Document) -> Result<DisfCounts, EvalError> {
    check_congruent(gold, pred)?;
    let mut c = DisfCounts::default();
    for i in (0..gold.len()).filter(|&i| !gold.tokens[i].is_pause) {
        let (g, p) = (gold.disfluency(i), pred.disfluency(i));
        let (gk, pk) = (code_key(g), code_key(p));
        if !g.is_empty() {
            c.gold += 1;
            c.codes.entry(gk.clone()).or_default().gold += 1;
        }
        if !p.is_empty() {
            c.predicted += 1;
            c.codes.entry(pk.clone()).or_default().predicted += 1;
        }
        if !g.is_empty() && !p.is_empty() {
            c.detected += 1;
            if gk == pk {
                c.classified += 1;
                c.codes.entry(gk).or_default().correct += 1;
            }
        }
    }
    Ok(c)
}

/// Token accuracy of `pos-min` at levels 1, 2 and full, over non-pause tokens.
pub fn score_pos(gold: &Document, pred: &Document) -> Result<Metrics, EvalError> {
    let c = pos_counts(gold, pred)?;
    Ok(pos_metrics(&c, Metrics::default()))
}

fn pos_metrics(c: &PosCounts, mut m: Metrics) -> Metrics {
    m.pos_precision_l1 = ratio(c.hits[0], c.total);
    m.pos_precision_l2 = ratio(c.hits[1], c.total);
    m.pos_precision_full = ratio(c.hits[2], c.total);
    m.tokens = c.total;
    m
}

/// Token-level disfluency detection and classification.
pub fn score_disfluency(gold: &Document, pred: &Document) -> Result<Metrics, EvalError> {
    let c = disf_counts(gold, pred)?;
    Ok(disf_metrics(&c, Metrics::default()))
}

fn disf_metrics(c: &DisfCounts, mut m: Metrics) -> Metrics {
    m.disf_detection_precision = ratio(c.detected, c.predicted);
    m.disf_detection_recall = ratio(c.detected, c.gold);
    m.disf_classification_precision = ratio(c.classified, c.detected);
    m.code_precision = c.codes.iter().map(|(k, s)| (k.clone(), s.precision())).collect();
    m.code_recall = c.codes.iter().map(|(k, s)| (k.clone(), s.recall())).collect();
    m
}

/// All metrics over paired document lists, counts pooled across documents.
pub fn score_corpus(gold: &[Document], pred: &[Document]) -> Result<Metrics, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::IncongruentDocuments(format!(
            "{} gold documents, {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    let mut pos = PosCounts::default();
    let mut dis = DisfCounts::default();
    for (g, p) in gold.iter().zip(pred) {
        let c = pos_counts(g, p)?;
        pos.total += c.total;
        for k in 0..3 {
            pos.hits[k] += c.hits[k];
        }
        let d = disf_counts(g, p)?;
        dis.gold += d.gold;
        dis.predicted += d.predicted;
        dis.detected += d.detected;
        dis.classified += d.classified;
        for (k, s) in d.codes {
            let e = dis.codes.entry(k).or_default();
            e.gold += s.gold;
            e.predicted += s.predicted;
            e.correct += s.correct;
        }
    }
    Ok(disf_metrics(&dis, pos_metrics(&pos, Metrics::default())))
}

/// Unweighted mean; a per-code value missing from a fold counts as 1.0
/// (nothing to find, nothing predicted).
pub fn mean_metrics(folds: &[Metrics]) -> Metrics {
    let n = folds.len().max(1) as f64;
    let mean = |f: fn(&Metrics) -> f64| folds.iter().map(f).sum::<f64>() / n;
    let codes: Vec<String> = folds
        .iter()
        .flat_map(|m| m.code_precision.keys().cloned())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let code_mean = |get: fn(&Metrics) -> &BTreeMap<String, f64>| -> BTreeMap<String, f64> {
        codes
            .iter()
            .map(|c| {
                let s: f64 = folds.iter().map(|m| get(m).get(c).copied().unwrap_or(1.0)).sum();
                (c.clone(), s / n)
            })
            .collect()
    };
    Metrics {
        pos_precision_l1: mean(|m| m.pos_precision_l1),
        pos_precision_l2: mean(|m| m.pos_precision_l2),
        pos_precision_full: mean(|m| m.pos_precision_full),
        disf_detection_precision: mean(|m| m.disf_detection_precision),
        disf_detection_recall: mean(|m| m.disf_detection_recall),
        disf_classification_precision: mean(|m| m.disf_classification_precision),
        code_precision: code_mean(|m| &m.code_precision),
        code_recall: code_mean(|m| &m.code_recall),
        tokens: folds.iter().map(|m| m.tokens).sum(),
    }
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub k: usize,
    pub seed: u64,
    pub pipeline: PipelineConfig,
    pub training: TrainingConfig,
    pub templates: Vec<FeatureTemplate>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k: 10,
            seed: 7,
            pipeline: PipelineConfig::default(),
            training: TrainingConfig::default(),
            templates: crate::crf::default_templates(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CvReport {
    pub folds: Vec<Metrics>,
    pub mean: Metrics,
}

/// Trains on k−1 folds, annotates the held-out fold, scores; folds run in
/// parallel and come back in fold order.
pub fn cross_validate<F: Scalar>(
    corpus: &[Document],
    lexicon: &Lexicon,
    post_rules: &[PostRule],
    cfg: &EvalConfig,
) -> Result<CvReport, EvalError> {
    let threshold = cfg.pipeline.psu_threshold_ms();
    let plan = split_folds(corpus, cfg.k, threshold, cfg.seed)?;
    let folds = (0..cfg.k)
        .into_par_iter()
        .map(|fold| -> Result<Metrics, EvalError> {
            let train = select_units(corpus, threshold, |u| plan.assignment[&u] != fold);
            let test = select_units(corpus, threshold, |u| plan.assignment[&u] == fold);
            let models = train_models::<F>(&train, lexicon, &cfg.pipeline, &cfg.templates, &cfg.training)?;
            let res = PipelineResources::new(
                lexicon.clone(),
                models.prelim,
                models.disfluency,
                models.final_model,
                post_rules.to_vec(),
                cfg.pipeline.clone(),
            )?;
            let pred = test.iter().map(|g| annotate(&g.unannotated(), &res)).collect::<Result<Vec<_>, _>>()?;
            score_corpus(&test, &pred)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CvReport { mean: mean_metrics(&folds), folds })
}

const ROWS: [(&str, &str); 6] = [
    ("pos_precision_l1", "Precision pos-min, level 1"),
    ("pos_precision_l2", "Precision pos-min, level 2"),
    ("pos_precision_full", "Precision pos-min, full tag"),
    ("disf_detection_precision", "Disfluency detection precision"),
    ("disf_detection_recall", "Disfluency detection recall"),
    ("disf_classification_precision", "Disfluency classification precision"),
];

fn row_values(m: &Metrics) -> [f64; 6] {
    [
        m.pos_precision_l1,
        m.pos_precision_l2,
        m.pos_precision_full,
        m.disf_detection_precision,
        m.disf_detection_recall,
        m.disf_classification_precision,
    ]
}

/// `key=value` lines for the mean and each fold, then an aligned table.
pub fn format_report(report: &CvReport) -> String {
    let mut out = String::new();
    let mut kv = |prefix: &str, m: &Metrics| {
        for ((key, _), v) in ROWS.iter().zip(row_values(m)) {
            let _ = writeln!(out, "{prefix}{key}={v:.6}");
        }
        for (code, v) in &m.code_precision {
            let _ = writeln!(out, "{prefix}precision.{code}={v:.6}");
        }
        for (code, v) in &m.code_recall {
            let _ = writeln!(out, "{prefix}recall.{code}={v:.6}");
        }
        let _ = writeln!(out, "{prefix}tokens={}", m.tokens);
    };
    kv("mean.", &report.mean);
    for (i, m) in report.folds.iter().enumerate() {
        kv(&format!("fold{i}."), m);
    }
    out.push('\n');
    let width = ROWS.iter().map(|(_, name)| name.len()).max().unwrap_or(0);
    for ((_, name), v) in ROWS.iter().zip(row_values(&report.mean)) {
        let _ = writeln!(out, "{name:<width$}  {:>6.2}%", v * 100.0);
    }
    out
}

/// Gold → predicted `pos-min` counts over non-pause tokens.
pub fn confusion(gold: &Document, pred: &Document) -> Result<BTreeMap<(String, String), usize>, EvalError> {
    check_congruent(gold, pred)?;
    let mut out = BTreeMap::new();
    for i in (0..gold.len()).filter(|&i| !gold.tokens[i].is_pause) {
        *out.entry((gold.pos_min(i).to_string(), pred.pos_min(i).to_string())).or_insert(0) += 1;
    }
    Ok(out)
}
