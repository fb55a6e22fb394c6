use std::collections::HashMap;

use super::features::{extract_features, FeatureTemplate, LabeledSequence, TemplateKind};
use super::inference::{self, Lattice};
use super::CrfError;
use crate::scalar::Scalar;

/// Insertion-ordered string interner for observation keys.
#[derive(Debug, Clone, PartialEq, Default)]
pub(crate) struct FeatureIndex {
    pub(crate) keys: Vec<String>,
    index: HashMap<String, usize>,
}

impl FeatureIndex {
    pub(crate) fn get(&self, key: &str) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub(crate) fn insert(&mut self, key: &str) -> usize {
        if let Some(&i) = self.index.get(key) {
            return i;
        }
        self.keys.push(key.to_string());
        self.index.insert(key.to_string(), self.keys.len() - 1);
        self.keys.len() - 1
    }

    pub(crate) fn len(&self) -> usize {
        self.keys.len()
    }
}

/// Per-position known feature ids for one sequence.
#[derive(Debug, Clone, Default)]
pub(crate) struct Compiled {
    pub(crate) unigram: Vec<Vec<u32>>,
    pub(crate) bigram: Vec<Vec<u32>>,
}

/// Allowed label indices per position; `None` leaves a position free.
pub type LabelMask = Vec<Option<Vec<usize>>>;

/// Linear-chain CRF. Every observation key is expanded over all labels
/// (unigram) or all label pairs (bigram); weights are stored flat, unigram
/// block first.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfModel<F> {
    labels: Vec<String>,
    label_index: HashMap<String, usize>,
    templates: Vec<FeatureTemplate>,
    pub(crate) unigram: FeatureIndex,
    pub(crate) bigram: FeatureIndex,
    weights: Vec<F>,
}

impl<F: Scalar> CrfModel<F> {
    /// A zero-weight model over `labels` whose feature space is every key the
    /// templates produce on `data`.
    pub fn with_features(
        labels: Vec<String>,
        templates: Vec<FeatureTemplate>,
        data: &[LabeledSequence],
    ) -> Result<Self, CrfError> {
        let mut model = CrfModel::empty(labels, templates)?;
        for seq in data {
            for feats in extract_features(seq, &model.templates) {
                for k in &feats.unigram {
                    model.unigram.insert(k);
                }
                for k in &feats.bigram {
                    model.bigram.insert(k);
                }
            }
        }
        model.weights = vec![F::zero(); model.num_weights()];
        Ok(model)
    }

    pub(crate) fn empty(labels: Vec<String>, templates: Vec<FeatureTemplate>) -> Result<Self, CrfError> {
        if labels.is_empty() {
            return Err(CrfError::NoData);
        }
        let mut label_index = HashMap::new();
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() || l.contains(['\t', '\n', '\r']) || label_index.insert(l.clone(), i).is_some() {
                return Err(CrfError::BadLabel(l.clone()));
            }
        }
        Ok(CrfModel {
            labels,
            label_index,
            templates,
            unigram: FeatureIndex::default(),
            bigram: FeatureIndex::default(),
            weights: Vec::new(),
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.label_index.get(label).copied()
    }

    pub fn templates(&self) -> &[FeatureTemplate] {
        &self.templates
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [F] {
        &mut self.weights
    }

    pub(crate) fn set_weights(&mut self, w: Vec<F>) {
        debug_assert_eq!(w.len(), self.num_weights());
        self.weights = w;
    }

    /// Weight of observation `key` for `label`; zero for unknown keys.
    pub fn unigram_weight(&self, key: &str, label: usize) -> F {
        self.unigram.get(key).map_or(F::zero(), |f| self.weights[f * self.labels.len() + label])
    }

    /// Weight of observation `key` for the transition `prev → label`.
    pub fn bigram_weight(&self, key: &str, prev: usize, label: usize) -> F {
        let l = self.labels.len();
        self.bigram.get(key).map_or(F::zero(), |g| self.weights[self.bigram_offset() + g * l * l + prev * l + label])
    }

    pub fn num_weights(&self) -> usize {
        let l = self.labels.len();
        self.unigram.len() * l + self.bigram.len() * l * l
    }

    pub(crate) fn bigram_offset(&self) -> usize {
        self.unigram.len() * self.labels.len()
    }

    pub(crate) fn template_kind(&self, id: &str) -> Option<TemplateKind> {
        self.templates.iter().find(|t| t.id == id).map(|t| t.kind)
    }

    /// Maps a sequence onto known feature ids; unseen keys are dropped.
    pub(crate) fn compile(&self, seq: &LabeledSequence) -> Compiled {
        let feats = extract_features(seq, &self.templates);
        let lookup = |keys: &[String], index: &FeatureIndex| -> Vec<u32> {
            keys.iter().filter_map(|k| index.get(k)).map(|i| i as u32).collect()
        };
        Compiled {
            unigram: feats.iter().map(|f| lookup(&f.unigram, &self.unigram)).collect(),
            bigram: feats.iter().map(|f| lookup(&f.bigram, &self.bigram)).collect(),
        }
    }

    pub(crate) fn lattice_with(&self, compiled: &Compiled, weights: &[F]) -> Lattice<F> {
        let l = self.labels.len();
        let n = compiled.unigram.len();
        let mut emit = vec![F::zero(); n * l];
        for (t, feats) in compiled.unigram.iter().enumerate() {
            let row = &mut emit[t * l..(t + 1) * l];
            for &f in feats {
                let w = &weights[f as usize * l..(f as usize + 1) * l];
                for (e, &wy) in row.iter_mut().zip(w) {
                    *e = *e + wy;
                }
            }
        }
        let off = self.bigram_offset();
        let ll = l * l;
        let mut trans = vec![F::zero(); n * ll];
        for (t, feats) in compiled.bigram.iter().enumerate().skip(1) {
            let block = &mut trans[t * ll..(t + 1) * ll];
            for &g in feats {
                let start = off + g as usize * ll;
                for (e, &w) in block.iter_mut().zip(&weights[start..start + ll]) {
                    *e = *e + w;
                }
            }
        }
        Lattice { n, l, emit, trans }
    }

    fn lattice(&self, seq: &LabeledSequence) -> Lattice<F> {
        self.lattice_with(&self.compile(seq), &self.weights)
    }

    /// Viterbi label indices; ties go to the lowest label index.
    pub fn decode_indices(&self, seq: &LabeledSequence, mask: Option<&LabelMask>) -> Vec<usize> {
        inference::viterbi(&self.lattice(seq), mask)
    }

    pub fn decode(&self, seq: &LabeledSequence) -> Vec<String> {
        self.labels_of(&self.decode_indices(seq, None))
    }

    pub fn decode_constrained(&self, seq: &LabeledSequence, mask: &LabelMask) -> Vec<String> {
        self.labels_of(&self.decode_indices(seq, Some(mask)))
    }

    /// Posterior label distribution at every position.
    pub fn marginals(&self, seq: &LabeledSequence) -> Vec<Vec<F>> {
        inference::marginals(&self.lattice(seq), None)
    }

    pub fn marginals_constrained(&self, seq: &LabeledSequence, mask: &LabelMask) -> Vec<Vec<F>> {
        inference::marginals(&self.lattice(seq), Some(mask))
    }

    /// Unnormalized log score of a label path (emissions plus transitions).
    pub fn path_score(&self, seq: &LabeledSequence, path: &[usize]) -> F {
        self.lattice(seq).path_score(path)
    }

    fn labels_of(&self, idx: &[usize]) -> Vec<String> {
        idx.iter().map(|&i| self.labels[i].clone()).collect()
    }
}

/// Decodes a sequence with the given model; see [`CrfModel::decode`].
pub fn decode<F: Scalar>(model: &CrfModel<F>, seq: &LabeledSequence) -> Vec<String> {
    model.decode(seq)
}

pub fn marginals<F: Scalar>(model: &CrfModel<F>, seq: &LabeledSequence) -> Vec<Vec<F>> {
    model.marginals(seq)
}
