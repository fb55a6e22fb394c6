//! Pattern → retag rules run after statistical tagging.
//!
//! One rule per line: `[tier=matcher]...[tier=matcher] => index:tier=value`.
//! Matchers are an exact string, `PREFIX*` (so `DET:*` covers every
//! determiner) or `*`. Pattern tiers: `text` (or `tok-min`), `lower`,
//! `pos-min`, `disfluency`, `pos-mwu`. Actions set `pos-min` or `pos-mwu`.

use std::fmt;

use super::{PipelineError, TokenList};
use crate::lexicon::fold;
use crate::tagset::TagRegistry;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchTier {
    Text,
    Lower,
    PosMin,
    Disfluency,
    PosMwu,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Matcher {
    Any,
    Exact(String),
    Prefix(String),
}

impl Matcher {
    fn parse(s: &str) -> Self {
        if s == "*" {
            Matcher::Any
        } else if let Some(p) = s.strip_suffix('*') {
            Matcher::Prefix(p.to_string())
        } else {
            Matcher::Exact(s.to_string())
        }
    }

    pub fn matches(&self, value: &str) -> bool {
        match self {
            Matcher::Any => true,
            Matcher::Exact(s) => value == s,
            Matcher::Prefix(p) => value.starts_with(p.as_str()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionTier {
    PosMin,
    PosMwu,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PostRule {
    pub pattern: Vec<(MatchTier, Matcher)>,
    pub index: usize,
    pub tier: ActionTier,
    pub value: String,
    source: String,
}

impl fmt::Display for PostRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

fn rule_err(line: usize, message: impl Into<String>) -> PipelineError {
    PipelineError::RuleParse { line, message: message.into() }
}

impl PostRule {
    pub fn parse(text: &str, line: usize) -> Result<Self, PipelineError> {
        let (lhs, rhs) = text.split_once("=>").ok_or_else(|| rule_err(line, "expected `pattern => action`"))?;
        let mut pattern = Vec::new();
        let mut rest = lhs.trim();
        while !rest.is_empty() {
            let body = rest
                .strip_prefix('[')
                .and_then(|r| r.split_once(']'))
                .ok_or_else(|| rule_err(line, format!("expected `[tier=matcher]` at {rest:?}")))?;
            let (cell, tail) = body;
            let (tier, matcher) =
                cell.split_once('=').ok_or_else(|| rule_err(line, format!("expected tier=matcher in [{cell}]")))?;
            let tier = match tier.trim() {
                "text" | "tok-min" => MatchTier::Text,
                "lower" => MatchTier::Lower,
                "pos-min" => MatchTier::PosMin,
                "disfluency" => MatchTier::Disfluency,
                "pos-mwu" => MatchTier::PosMwu,
                other => return Err(rule_err(line, format!("unknown pattern tier {other:?}"))),
            };
            pattern.push((tier, Matcher::parse(matcher.trim())));
            rest = tail.trim_start();
        }
        if !(1..=5).contains(&pattern.len()) {
            return Err(rule_err(line, "pattern must have 1 to 5 cells"));
        }
        let (index, action) = rhs.trim().split_once(':').ok_or_else(|| rule_err(line, "expected index:tier=value"))?;
        let index: usize = index.trim().parse().map_err(|_| rule_err(line, format!("bad index {index:?}")))?;
        if index >= pattern.len() {
            return Err(rule_err(line, format!("index {index} outside the pattern")));
        }
        let (tier, value) = action.split_once('=').ok_or_else(|| rule_err(line, "expected tier=value"))?;
        let tier = match tier.trim() {
            "pos-min" => ActionTier::PosMin,
            "pos-mwu" => ActionTier::PosMwu,
            other => return Err(rule_err(line, format!("action tier must be pos-min or pos-mwu, got {other:?}"))),
        };
        let value = value.trim();
        TagRegistry::builtin().parse_tag(value).map_err(|e| rule_err(line, format!("invalid tag: {e}")))?;
        Ok(PostRule { pattern, index, tier, value: value.to_string(), source: text.trim().to_string() })
    }
}

/// Parses a rule file; blank lines and `#` comments are skipped.
pub fn parse_rules(text: &str) -> Result<Vec<PostRule>, PipelineError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| PostRule::parse(l, i + 1))
        .collect()
}

pub const SAMPLE_RULES: &str = include_str!("../../resources/post_rules.txt");

fn cell_value(tl: &TokenList, i: usize, tier: MatchTier) -> String {
    match tier {
        MatchTier::Text => tl.doc.tokens[i].text.clone(),
        MatchTier::Lower => fold(&tl.doc.tokens[i].text),
        MatchTier::PosMin => tl.doc.pos_min(i).to_string(),
        MatchTier::Disfluency => tl.doc.disfluency(i).to_string(),
        MatchTier::PosMwu => tl.doc.mwu_index(i).map_or(String::new(), |k| tl.doc.tiers.pos_mwu[k].value.clone()),
    }
}

/// Applies each rule once, left to right over the non-pause tokens, with
/// non-overlapping matches. Locked targets are left alone.
pub fn apply_post_rules(tl: &mut TokenList, rules: &[PostRule]) {
    let words: Vec<usize> = (0..tl.doc.len()).filter(|&i| !tl.doc.tokens[i].is_pause).collect();
    for rule in rules {
        let w = rule.pattern.len();
        let mut k = 0;
        while k + w <= words.len() {
            let window = &words[k..k + w];
            let hit = window.iter().zip(&rule.pattern).all(|(&i, (tier, m))| m.matches(&cell_value(tl, i, *tier)));
            let target = window[rule.index];
            if !hit || tl.locked_pos[target] {
                k += 1;
                continue;
            }
            match rule.tier {
                ActionTier::PosMin => {
                    tl.doc.set_pos_min(target, rule.value.clone());
                    if let Some(u) = tl.doc.mwu_index(target) {
                        if tl.doc.tiers.pos_mwu[u].span.len() == 1 {
                            tl.doc.tiers.pos_mwu[u].value = rule.value.clone();
                        }
                    }
                }
                ActionTier::PosMwu => {
                    if let Some(u) = tl.doc.mwu_index(target) {
                        tl.doc.tiers.pos_mwu[u].value = rule.value.clone();
                    }
                }
            }
            k += w;
        }
    }
}
