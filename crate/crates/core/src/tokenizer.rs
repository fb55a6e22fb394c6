//! Transcription intervals to minimal tokens.

use std::collections::BTreeSet;
use std::path::Path;

use thiserror::Error;

use crate::annotation::{PauseClass, Token};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TokenizerError {
    #[error("line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("markers must be non-empty and distinct: {0}")]
    Markers(String),
    #[error("rule line {line}: {message}")]
    Rule { line: usize, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// One stretch of transcribed speech.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceInterval {
    pub t_min: f64,
    pub t_max: f64,
    pub text: String,
    pub speaker: String,
}

impl SourceInterval {
    pub fn new(t_min: f64, t_max: f64, text: &str) -> Self {
        SourceInterval { t_min, t_max, text: text.to_string(), speaker: String::new() }
    }
}

/// How pauses are sorted into short and long.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PauseMode {
    /// Long when longer than `short_pause_max_ms`.
    #[default]
    Threshold,
    /// Long when longer than median + 1.5 IQR of the sample's pauses.
    Distribution,
}

/// A split rule. Patterns ending in `'` or `-` match a word prefix,
/// patterns starting with `-` match a suffix, others the whole word.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitRule {
    pub pattern: String,
    pub parts: Vec<String>,
}

impl SplitRule {
    pub fn new(pattern: &str, parts: &[&str]) -> Result<Self, TokenizerError> {
        let rule = SplitRule { pattern: pattern.to_string(), parts: parts.iter().map(|p| p.to_string()).collect() };
        if pattern.is_empty() || rule.parts.iter().any(|p| p.is_empty()) || rule.parts.concat() != pattern {
            return Err(TokenizerError::Rule {
                line: 0,
                message: format!("parts of {pattern:?} must be non-empty and concatenate to it"),
            });
        }
        Ok(rule)
    }

    fn is_prefix(&self) -> bool {
        self.pattern.chars().count() > 1 && (self.pattern.ends_with('\'') || self.pattern.ends_with('-'))
    }

    fn is_suffix(&self) -> bool {
        self.pattern.chars().count() > 1 && self.pattern.starts_with('-') && !self.is_prefix()
    }
}

/// Parses a rule table: `PATTERN<TAB>part1 part2 ...`; `#` starts a comment.
pub fn parse_rules(text: &str) -> Result<Vec<SplitRule>, TokenizerError> {
    let mut rules = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (pattern, parts) = line
            .split_once('\t')
            .ok_or_else(|| TokenizerError::Rule { line: i + 1, message: "expected PATTERN<TAB>parts".into() })?;
        let parts: Vec<&str> = parts.split_whitespace().collect();
        rules.push(SplitRule::new(pattern.trim(), &parts).map_err(|e| match e {
            TokenizerError::Rule { message, .. } => TokenizerError::Rule { line: i + 1, message },
            other => other,
        })?);
    }
    Ok(rules)
}

pub const SAMPLE_RULES: &str = include_str!("../resources/tokenizer_rules.tsv");

#[derive(Debug, Clone, PartialEq)]
pub struct TokenizerConfig {
    pub filled_pause_forms: BTreeSet<String>,
    pub false_start_marker: String,
    pub intra_word_pause_marker: String,
    pub ignore_strings: Vec<String>,
    pub pause_symbol: String,
    rules: Vec<SplitRule>,
    pub short_pause_max_ms: u32,
    pub psu_threshold_ms: u32,
    pub pause_mode: PauseMode,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            filled_pause_forms: ["euh", "hum"].iter().map(|s| s.to_string()).collect(),
            false_start_marker: "/".into(),
            intra_word_pause_marker: "=".into(),
            ignore_strings: Vec::new(),
            pause_symbol: "_".into(),
            rules: Vec::new(),
            short_pause_max_ms: 250,
            psu_threshold_ms: 500,
            pause_mode: PauseMode::Threshold,
        }
    }
}

impl TokenizerConfig {
    /// Default settings with the bundled French rule table.
    pub fn sample() -> Self {
        let mut cfg = TokenizerConfig::default();
        cfg.set_rules(parse_rules(SAMPLE_RULES).expect("bundled rules parse"));
        cfg
    }

    pub fn rules(&self) -> &[SplitRule] {
        &self.rules
    }

    /// Installs a rule table, ordered longest pattern first (stable for ties).
    pub fn set_rules(&mut self, mut rules: Vec<SplitRule>) {
        rules.sort_by_key(|r| std::cmp::Reverse(r.pattern.chars().count()));
        self.rules = rules;
    }

    pub fn check(&self) -> Result<(), TokenizerError> {
        let markers = [
            ("false_start_marker", &self.false_start_marker),
            ("intra_word_pause_marker", &self.intra_word_pause_marker),
            ("pause_symbol", &self.pause_symbol),
        ];
        for (i, (name, m)) in markers.iter().enumerate() {
            if m.is_empty() || m.chars().any(char::is_whitespace) {
                return Err(TokenizerError::Markers(format!("{name} is empty or contains whitespace")));
            }
            for (other, o) in &markers[..i] {
                if m == o {
                    return Err(TokenizerError::Markers(format!("{name} equals {other}")));
                }
            }
        }
        Ok(())
    }

    /// Reads `key = value` lines over the defaults. List values are
    /// whitespace- or comma-separated. Keys accept snake_case or camelCase.
    pub fn parse(text: &str) -> Result<Self, TokenizerError> {
        let mut cfg = TokenizerConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| TokenizerError::Config { line: i + 1, message };
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected `key = value`".into()))?;
            let value = value.trim();
            let list = || -> Vec<String> {
                value
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect()
            };
            let number = || value.parse::<u32>().map_err(|_| err(format!("bad number {value:?}")));
            match normalize_key(key).as_str() {
                "filledpauseforms" => cfg.filled_pause_forms = list().into_iter().collect(),
                "falsestartmarker" => cfg.false_start_marker = value.to_string(),
                "intrawordpausemarker" => cfg.intra_word_pause_marker = value.to_string(),
                "ignorestrings" => cfg.ignore_strings = list(),
                "pausesymbol" => cfg.pause_symbol = value.to_string(),
                "shortpausemaxms" => cfg.short_pause_max_ms = number()?,
                "psuthresholdms" => cfg.psu_threshold_ms = number()?,
                "pausemode" | "pauseclassification" => {
                    cfg.pause_mode = match value {
                        "threshold" => PauseMode::Threshold,
                        "distribution" => PauseMode::Distribution,
                        other => return Err(err(format!("unknown pause mode {other:?}"))),
                    }
                }
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(config: Option<&Path>, rules: Option<&Path>) -> Result<Self, TokenizerError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p)
                .map_err(|e| TokenizerError::Io { path: p.display().to_string(), message: e.to_string() })
        };
        let mut cfg = match config {
            Some(p) => TokenizerConfig::parse(&read(p)?)?,
            None => TokenizerConfig::default(),
        };
        let table = match rules {
            Some(p) => parse_rules(&read(p)?)?,
            None => parse_rules(SAMPLE_RULES)?,
        };
        cfg.set_rules(table);
        Ok(cfg)
    }
}

fn normalize_key(key: &str) -> String {
    key.trim().chars().filter(|c| *c != '_' && *c != '-').flat_map(char::to_lowercase).collect()
}

fn eq_fold(a: &str, b: &str) -> bool {
    a.chars().count() == b.chars().count() && a.to_lowercase() == b.to_lowercase()
}

/// Splits `word` at char offsets matching the part lengths of `rule`.
fn cut<'a>(word: &'a str, rule: &SplitRule, out: &mut Vec<&'a str>) {
    let mut rest = word;
    for part in &rule.parts {
        let n = part.chars().count();
        let at = rest.char_indices().nth(n).map_or(rest.len(), |(b, _)| b);
        out.push(&rest[..at]);
        rest = &rest[at..];
    }
}

fn char_prefix(word: &str, n: usize) -> Option<(&str, &str)> {
    let at = word.char_indices().nth(n).map(|(b, _)| b)?;
    Some(word.split_at(at))
}

/// Applies the rule table to one whitespace-delimited word.
pub fn split_word<'a>(word: &'a str, rules: &[SplitRule]) -> Vec<&'a str> {
    let mut out = Vec::new();
    let mut rest = word;
    let mut suffixes: Vec<&str> = Vec::new();
    'outer: while !rest.is_empty() {
        for rule in rules {
            let n = rule.pattern.chars().count();
            if eq_fold(rest, &rule.pattern) {
                cut(rest, rule, &mut out);
                rest = "";
                continue 'outer;
            }
            if rule.is_prefix() {
                if let Some((head, tail)) = char_prefix(rest, n) {
                    if eq_fold(head, &rule.pattern) {
                        cut(head, rule, &mut out);
                        rest = tail;
                        continue 'outer;
                    }
                }
            }
            if rule.is_suffix() {
                let len = rest.chars().count();
                if len > n {
                    let (head, tail) = char_prefix(rest, len - n).expect("in range");
                    if eq_fold(tail, &rule.pattern) {
                        let mut parts = Vec::new();
                        cut(tail, rule, &mut parts);
                        suffixes.splice(0..0, parts);
                        rest = head;
                        continue 'outer;
                    }
                }
            }
        }
        out.push(rest);
        break;
    }
    out.extend(suffixes);
    out
}

struct Piece {
    text: String,
    pause: bool,
    false_start: bool,
    intra_word_pause: bool,
    attached: bool,
}

fn pieces(text: &str, cfg: &TokenizerConfig) -> Vec<Piece> {
    let mut cleaned = text.to_string();
    for s in cfg.ignore_strings.iter().filter(|s| !s.is_empty()) {
        cleaned = cleaned.replace(s.as_str(), "");
    }
    let mut out = Vec::new();
    for word in cleaned.split_whitespace() {
        if word == cfg.pause_symbol {
            out.push(Piece {
                text: word.to_string(),
                pause: true,
                false_start: false,
                intra_word_pause: false,
                attached: false,
            });
            continue;
        }
        let mut w = word.to_string();
        let mut false_start = false;
        if let Some(stem) = w.strip_suffix(cfg.false_start_marker.as_str()) {
            if !stem.is_empty() {
                w = stem.to_string();
                false_start = true;
            }
        }
        let mut intra = false;
        if w.contains(cfg.intra_word_pause_marker.as_str()) {
            let joined = w.replace(cfg.intra_word_pause_marker.as_str(), "");
            if !joined.is_empty() {
                w = joined;
                intra = true;
            }
        }
        let parts = split_word(&w, &cfg.rules);
        let last = parts.len() - 1;
        for (k, part) in parts.into_iter().enumerate() {
            out.push(Piece {
                text: part.to_string(),
                pause: false,
                false_start: false_start && k == last,
                intra_word_pause: intra,
                attached: k > 0,
            });
        }
    }
    out
}

/// Splits each interval into tokens with times interpolated by character
/// count, and turns gaps between intervals into pause tokens. Adjacent
/// pauses are merged.
pub fn tokenize(intervals: &[SourceInterval], cfg: &TokenizerConfig) -> Vec<Token> {
    let mut tokens: Vec<Token> = Vec::new();
    let push = |tokens: &mut Vec<Token>, tok: Token| {
        if tok.is_pause {
            if let Some(prev) = tokens.last_mut().filter(|p| p.is_pause) {
                prev.t_max = prev.t_max.max(tok.t_max);
                return;
            }
        }
        tokens.push(tok);
    };
    let mut prev_end: Option<f64> = None;
    for ivl in intervals {
        // clamp malformed input so the output stays ordered
        let t_min = prev_end.map_or(ivl.t_min, |e| ivl.t_min.max(e));
        let t_max = ivl.t_max.max(t_min);
        let ps = pieces(&ivl.text, cfg);
        if ps.is_empty() {
            continue;
        }
        if let Some(end) = prev_end {
            if t_min > end {
                push(&mut tokens, Token::pause(&cfg.pause_symbol, end, t_min).with_speaker(&ivl.speaker));
            }
        }
        let weights: Vec<usize> = ps.iter().map(|p| p.text.chars().count().max(1)).collect();
        let total: usize = weights.iter().sum();
        let span = t_max - t_min;
        let mut acc = 0;
        for (k, (p, w)) in ps.into_iter().zip(&weights).enumerate() {
            let a = t_min + span * acc as f64 / total as f64;
            acc += w;
            let b = if k + 1 == weights.len() { t_max } else { t_min + span * acc as f64 / total as f64 };
            let tok = if p.pause {
                Token::pause(&cfg.pause_symbol, a, b)
            } else {
                Token {
                    false_start: p.false_start,
                    intra_word_pause: p.intra_word_pause,
                    attached: p.attached,
                    ..Token::word(&p.text, a, b)
                }
            };
            push(&mut tokens, tok.with_speaker(&ivl.speaker));
        }
        prev_end = Some(t_max);
    }
    tokens
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Labels every pause token short or long.
pub fn classify_pauses(tokens: &mut [Token], cfg: &TokenizerConfig) {
    let cutoff = match cfg.pause_mode {
        PauseMode::Threshold => f64::from(cfg.short_pause_max_ms),
        PauseMode::Distribution => {
            let mut d: Vec<f64> = tokens.iter().filter(|t| t.is_pause).map(Token::duration_ms).collect();
            if d.is_empty() {
                return;
            }
            d.sort_by(f64::total_cmp);
            let (q1, med, q3) = (quantile(&d, 0.25), quantile(&d, 0.5), quantile(&d, 0.75));
            med + 1.5 * (q3 - q1)
        }
    };
    for t in tokens.iter_mut().filter(|t| t.is_pause) {
        t.pause_class = Some(if t.duration_ms() > cutoff { PauseClass::Long } else { PauseClass::Short });
    }
}
