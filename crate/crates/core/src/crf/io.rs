//! Versioned text serialization of CRF models.
//!
//! ```text
//! speechtag-crf
//! format<TAB>1
//! labels<TAB>N        then N label lines
//! templates<TAB>M     then M `id<TAB>U|B<TAB>offset:attr,...` lines
//! weights<TAB>W       then W `featureKey<TAB>weight` lines
//! ```
//!
//! A unigram feature key is `observation#label`, a bigram key
//! `observation#prev#label`, with labels given by index. Weights are written
//! in shortest round-trip exponent form.

use std::fmt::Write as _;

use super::features::{FeatureTemplate, TemplateKind};
use super::model::CrfModel;
use super::CrfError;
use crate::scalar::Scalar;

pub const MAGIC: &str = "speechtag-crf";
pub const FORMAT_VERSION: u32 = 1;

pub fn save_model<F: Scalar>(model: &CrfModel<F>) -> Vec<u8> {
    let l = model.num_labels();
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}\nformat\t{FORMAT_VERSION}");
    let _ = writeln!(out, "labels\t{l}");
    for label in model.labels() {
        let _ = writeln!(out, "{label}");
    }
    let _ = writeln!(out, "templates\t{}", model.templates().len());
    for tpl in model.templates() {
        let _ = writeln!(out, "{tpl}");
    }
    let _ = writeln!(out, "weights\t{}", model.num_weights());
    let w = model.weights();
    for (f, key) in model.unigram.keys.iter().enumerate() {
        for y in 0..l {
            let _ = writeln!(out, "{key}#{y}\t{:e}", w[f * l + y]);
        }
    }
    let off = model.bigram_offset();
    for (g, key) in model.bigram.keys.iter().enumerate() {
        for prev in 0..l {
            for y in 0..l {
                let _ = writeln!(out, "{key}#{prev}#{y}\t{:e}", w[off + g * l * l + prev * l + y]);
            }
        }
    }
    out.into_bytes()
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str, CrfError> {
        match self.inner.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l)
            }
            None => Err(self.corrupt("unexpected end of file")),
        }
    }

    fn corrupt(&self, message: impl Into<String>) -> CrfError {
        CrfError::CorruptModel { line: self.line, message: message.into() }
    }

    fn header(&mut self, name: &str) -> Result<usize, CrfError> {
        let line = self.next()?;
        line.strip_prefix(name)
            .and_then(|r| r.strip_prefix('\t'))
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| self.corrupt(format!("expected `{name}<TAB>count`")))
    }
}

pub fn load_model<F: Scalar>(bytes: &[u8]) -> Result<CrfModel<F>, CrfError> {
    let text =
        std::str::from_utf8(bytes).map_err(|_| CrfError::CorruptModel { line: 0, message: "not UTF-8".into() })?;
    let mut lines = Lines { inner: text.lines().enumerate(), line: 0 };
    if lines.next()? != MAGIC {
        return Err(lines.corrupt("bad magic"));
    }
    let version = lines.header("format")?;
    if version != FORMAT_VERSION as usize {
        return Err(CrfError::VersionMismatch { found: version as u32, expected: FORMAT_VERSION });
    }
    let n_labels = lines.header("labels")?;
    let labels = (0..n_labels).map(|_| lines.next().map(str::to_string)).collect::<Result<Vec<_>, _>>()?;
    let n_templates = lines.header("templates")?;
    let mut templates = Vec::with_capacity(n_templates);
    for _ in 0..n_templates {
        let line = lines.next()?;
        templates.push(line.parse::<FeatureTemplate>().map_err(|e| lines.corrupt(e))?);
    }
    let mut model = CrfModel::<F>::empty(labels, templates).map_err(|e| lines.corrupt(e.to_string()))?;
    let l = model.num_labels();

    let n_weights = lines.header("weights")?;
    let mut unigram = Vec::new();
    let mut bigram = Vec::new();
    for _ in 0..n_weights {
        let line = lines.next()?;
        let (key, value) = line.rsplit_once('\t').ok_or_else(|| lines.corrupt("missing weight"))?;
        let value: F = value.parse().map_err(|_| lines.corrupt(format!("bad weight {value:?}")))?;
        let template_of = |obs: &str| model.template_kind(obs.split('=').next().unwrap_or(obs));
        let label = |s: &str| s.parse::<usize>().ok().filter(|&y| y < l);
        let (obs, last) = key.rsplit_once('#').ok_or_else(|| lines.corrupt("bad feature key"))?;
        let y = label(last).ok_or_else(|| lines.corrupt("bad label index"))?;
        match template_of(obs) {
            Some(TemplateKind::Unigram) => {
                let f = model.unigram.insert(obs);
                unigram.push((f * l + y, value));
            }
            _ => {
                let (obs, prev) = obs.rsplit_once('#').ok_or_else(|| lines.corrupt("bad feature key"))?;
                let prev = label(prev).ok_or_else(|| lines.corrupt("bad label index"))?;
                if template_of(obs) != Some(TemplateKind::Bigram) {
                    return Err(lines.corrupt(format!("unknown template in {key:?}")));
                }
                let g = model.bigram.insert(obs);
                bigram.push((g * l * l + prev * l + y, value));
            }
        }
    }
    if let Some((i, extra)) = lines.inner.next().filter(|(_, s)| !s.is_empty()) {
        return Err(CrfError::CorruptModel { line: i + 1, message: format!("trailing content {extra:?}") });
    }
    if model.num_weights() != n_weights {
        return Err(lines.corrupt("weight table does not cover the feature space"));
    }
    let mut weights = vec![F::zero(); n_weights];
    let off = model.bigram_offset();
    let mut seen = vec![false; n_weights];
    for (i, w) in unigram.into_iter().chain(bigram.into_iter().map(|(i, w)| (off + i, w))) {
        if std::mem::replace(&mut seen[i], true) {
            return Err(lines.corrupt("duplicate feature key"));
        }
        weights[i] = w;
    }
    model.set_weights(weights);
    Ok(model)
}
