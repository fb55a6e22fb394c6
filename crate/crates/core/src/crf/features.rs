//! Feature templates and per-position feature keys.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::CrfError;

/// Attribute value used for offsets before the start of the sequence.
pub const BOS: &str = "BOS";
/// Attribute value used for offsets past the end of the sequence.
pub const EOS: &str = "EOS";

/// Attribute name → value at one sequence position.
pub type Position = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledSequence {
    pub positions: Vec<Position>,
    pub labels: Option<Vec<String>>,
}

impl LabeledSequence {
    pub fn new(positions: Vec<Position>) -> Self {
        LabeledSequence { positions, labels: None }
    }

    pub fn labeled(positions: Vec<Position>, labels: Vec<String>) -> Result<Self, CrfError> {
        if positions.len() != labels.len() {
            return Err(CrfError::LengthMismatch { positions: positions.len(), labels: labels.len() });
        }
        Ok(LabeledSequence { positions, labels: Some(labels) })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TemplateKind {
    /// Observation × current label.
    Unigram,
    /// Observation × (previous label, current label).
    Bigram,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureTemplate {
    pub id: String,
    pub parts: Vec<(i32, String)>,
    pub kind: TemplateKind,
}

impl FeatureTemplate {
    pub fn unigram(id: &str, parts: &[(i32, &str)]) -> Self {
        FeatureTemplate {
            id: id.to_string(),
            parts: parts.iter().map(|&(o, a)| (o, a.to_string())).collect(),
            kind: TemplateKind::Unigram,
        }
    }

    pub fn bigram(id: &str, parts: &[(i32, &str)]) -> Self {
        FeatureTemplate { kind: TemplateKind::Bigram, ..FeatureTemplate::unigram(id, parts) }
    }

    /// The feature key at position `t`, or `None` when an attribute is absent.
    pub fn key_at(&self, positions: &[Position], t: usize) -> Option<String> {
        let mut key = self.id.clone();
        for (k, (offset, attr)) in self.parts.iter().enumerate() {
            key.push(if k == 0 { '=' } else { '/' });
            let at = t as i64 + i64::from(*offset);
            if at < 0 {
                key.push_str(BOS);
            } else if at as usize >= positions.len() {
                key.push_str(EOS);
            } else {
                let value = positions[at as usize].get(attr)?;
                key.extend(value.chars().map(|c| if c.is_control() { ' ' } else { c }));
            }
        }
        Some(key)
    }
}

impl fmt::Display for FeatureTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            TemplateKind::Unigram => "U",
            TemplateKind::Bigram => "B",
        };
        let parts: Vec<String> = self.parts.iter().map(|(o, a)| format!("{o}:{a}")).collect();
        write!(f, "{}\t{}\t{}", self.id, kind, parts.join(","))
    }
}

impl FromStr for FeatureTemplate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut fields = s.split('\t');
        let id = fields.next().filter(|id| !id.is_empty() && !id.contains(['=', '#']));
        let id = id.ok_or_else(|| format!("bad template id in {s:?}"))?;
        let kind = match fields.next() {
            Some("U") => TemplateKind::Unigram,
            Some("B") => TemplateKind::Bigram,
            other => return Err(format!("bad template kind {other:?}")),
        };
        let mut parts = Vec::new();
        for part in fields.next().unwrap_or("").split(',').filter(|p| !p.is_empty()) {
            let (offset, attr) = part.split_once(':').ok_or_else(|| format!("bad template part {part:?}"))?;
            let offset = offset.parse().map_err(|_| format!("bad offset {offset:?}"))?;
            parts.push((offset, attr.to_string()));
        }
        if fields.next().is_some() {
            return Err(format!("trailing fields in template {s:?}"));
        }
        Ok(FeatureTemplate { id: id.to_string(), parts, kind })
    }
}

/// Active feature keys at one position.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PositionFeatures {
    pub unigram: Vec<String>,
    pub bigram: Vec<String>,
}

/// Feature keys per position. Bigram keys are only produced from the second
/// position on, since there is no previous label at position 0.
pub fn extract_features(seq: &LabeledSequence, templates: &[FeatureTemplate]) -> Vec<PositionFeatures> {
    (0..seq.len())
        .map(|t| {
            let mut feats = PositionFeatures::default();
            for tpl in templates {
                match tpl.kind {
                    TemplateKind::Unigram => feats.unigram.extend(tpl.key_at(&seq.positions, t)),
                    TemplateKind::Bigram if t > 0 => feats.bigram.extend(tpl.key_at(&seq.positions, t)),
                    TemplateKind::Bigram => {}
                }
            }
            feats
        })
        .collect()
}

/// Attribute names produced by the pipeline's position builder.
pub mod attr {
    pub const BIAS: &str = "bias";
    pub const TEXT: &str = "text";
    pub const LOWER: &str = "lower";
    pub const PREFIX: [&str; 4] = ["p1", "p2", "p3", "p4"];
    pub const SUFFIX: [&str; 4] = ["s1", "s2", "s3", "s4"];
    pub const SHAPE: &str = "shape";
    pub const CANDIDATES: &str = "cand";
    pub const PAUSE_BEFORE: &str = "pause_before";
    pub const PAUSE_AFTER: &str = "pause_after";
    pub const FALSE_START: &str = "fst";
    pub const MWU: &str = "mwu";
}

/// Word identity within ±2, lowercase, affixes, shape, lexicon candidates,
/// adjacent pause classes, false-start flag, MWU candidate, and one label
/// transition template.
pub fn default_templates() -> Vec<FeatureTemplate> {
    let mut t =
        vec![FeatureTemplate::unigram("bias", &[(0, attr::BIAS)]), FeatureTemplate::unigram("t0", &[(0, attr::TEXT)])];
    for o in -2..=2 {
        t.push(FeatureTemplate::unigram(&format!("w{o}"), &[(o, attr::LOWER)]));
    }
    t.push(FeatureTemplate::unigram("ww-1", &[(-1, attr::LOWER), (0, attr::LOWER)]));
    t.push(FeatureTemplate::unigram("ww1", &[(0, attr::LOWER), (1, attr::LOWER)]));
    for (i, name) in attr::PREFIX.iter().enumerate() {
        t.push(FeatureTemplate::unigram(&format!("p{}", i + 1), &[(0, name)]));
    }
    for (i, name) in attr::SUFFIX.iter().enumerate() {
        t.push(FeatureTemplate::unigram(&format!("s{}", i + 1), &[(0, name)]));
    }
    t.push(FeatureTemplate::unigram("shape", &[(0, attr::SHAPE)]));
    for o in -1..=1 {
        t.push(FeatureTemplate::unigram(&format!("c{o}"), &[(o, attr::CANDIDATES)]));
    }
    t.push(FeatureTemplate::unigram("pb", &[(0, attr::PAUSE_BEFORE)]));
    t.push(FeatureTemplate::unigram("pa", &[(0, attr::PAUSE_AFTER)]));
    t.push(FeatureTemplate::unigram("fst", &[(0, attr::FALSE_START)]));
    t.push(FeatureTemplate::unigram("mwu", &[(0, attr::MWU)]));
    t.push(FeatureTemplate::bigram("B", &[]));
    t
}
