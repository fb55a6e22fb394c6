//! Token attributes fed to the CRF templates.

use crate::crf::{attr, LabeledSequence, Position};
use crate::lexicon::fold;

use super::TokenList;

/// Coarse character shape with runs collapsed: `Paris` → `Xx`, `2e` → `dx`.
pub fn shape(text: &str) -> String {
    let mut out = String::new();
    for c in text.chars() {
        let s = if c.is_uppercase() {
            'X'
        } else if c.is_lowercase() {
            'x'
        } else if c.is_numeric() {
            'd'
        } else if c == '\'' || c == '-' {
            c
        } else {
            '.'
        };
        if !out.ends_with(s) {
            out.push(s);
        }
    }
    out
}

fn pause_attr(tl: &TokenList, j: Option<usize>) -> String {
    match j.map(|j| &tl.doc.tokens[j]) {
        Some(t) if t.is_pause => t.pause_class.map_or("pause", |c| c.as_str()).to_string(),
        Some(_) => "none".to_string(),
        None => "edge".to_string(),
    }
}

/// Attributes of token `i`. The `mwu` attribute is added only for the
/// final model, which decides on multi-word units.
pub fn position(tl: &TokenList, i: usize, with_mwu: bool) -> Position {
    let tok = &tl.doc.tokens[i];
    let lower = fold(&tok.text);
    let chars: Vec<char> = lower.chars().collect();
    let mut p = Position::new();
    p.insert(attr::BIAS.into(), "1".into());
    p.insert(attr::TEXT.into(), tok.text.clone());
    for k in 1..=4.min(chars.len()) {
        p.insert(attr::PREFIX[k - 1].into(), chars[..k].iter().collect());
        p.insert(attr::SUFFIX[k - 1].into(), chars[chars.len() - k..].iter().collect());
    }
    p.insert(attr::LOWER.into(), lower);
    p.insert(attr::SHAPE.into(), shape(&tok.text));
    let cand = tl.candidates[i].signature();
    p.insert(attr::CANDIDATES.into(), if cand.is_empty() { "UNK".into() } else { cand });
    p.insert(attr::PAUSE_BEFORE.into(), pause_attr(tl, i.checked_sub(1)));
    p.insert(attr::PAUSE_AFTER.into(), pause_attr(tl, (i + 1 < tl.doc.len()).then_some(i + 1)));
    if tok.false_start {
        p.insert(attr::FALSE_START.into(), "1".into());
    }
    if with_mwu {
        if let Some(v) = tl.mwu_attr(i) {
            p.insert(attr::MWU.into(), v);
        }
    }
    p
}

pub fn sequence(tl: &TokenList, idx: &[usize], with_mwu: bool) -> LabeledSequence {
    LabeledSequence::new(idx.iter().map(|&i| position(tl, i, with_mwu)).collect())
}
