//! Form → candidate tag dictionary with a multi-word prefix index.
//!
//! File format: `form<TAB>tag1|tag2|...<TAB>flags`, flags comma-separated
//! (`fil` for filled pauses, `dm` for discourse-marker candidates). A form
//! containing spaces is a multi-word unit.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use thiserror::Error;

use crate::annotation::Token;
use crate::tagset::{PosTag, TagRegistry};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LexiconError {
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error("{file}:{line}: invalid tag {tag:?}")]
    InvalidTag { file: String, line: usize, tag: String },
    #[error("{file}: {message}")]
    Io { file: String, message: String },
}

/// Candidate tags and flags for one form.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Entry {
    /// Canonical tag strings, sorted.
    pub tags: BTreeSet<String>,
    pub filled_pause: bool,
    pub discourse_marker: bool,
}

impl Entry {
    fn merge(&mut self, other: &Entry) {
        self.tags.extend(other.tags.iter().cloned());
        self.filled_pause |= other.filled_pause;
        self.discourse_marker |= other.discourse_marker;
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty() && !self.filled_pause && !self.discourse_marker
    }

    /// Sorted tags joined with `|`; the lexicon feature seen by the tagger.
    pub fn signature(&self) -> String {
        self.tags.iter().cloned().collect::<Vec<_>>().join("|")
    }

    pub fn parsed_tags(&self) -> Vec<PosTag> {
        self.tags.iter().filter_map(|t| t.parse().ok()).collect()
    }
}

#[derive(Debug, Clone, Default)]
struct TrieNode {
    children: HashMap<String, usize>,
    entry: Option<Entry>,
}

/// A multi-word match starting at some token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MwuMatch {
    pub len: usize,
    pub tag: String,
    pub discourse_marker: bool,
}

pub fn fold(form: &str) -> String {
    form.to_lowercase()
}

fn is_proper_only(entry: &Entry) -> bool {
    !entry.tags.is_empty() && entry.tags.iter().all(|t| t.starts_with("NOM:pro"))
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    case_folding: bool,
    folded: HashMap<String, Entry>,
    exact: HashMap<String, Entry>,
    trie: Vec<TrieNode>,
    mwu_count: usize,
}

impl Default for Lexicon {
    fn default() -> Self {
        LexiconBuilder::new(true).build()
    }
}

pub const SAMPLE_LEXICON: &str = include_str!("../resources/lexicon.tsv");

/// Accumulates entries from any number of files; the result does not
/// depend on the order they are added in.
#[derive(Debug, Clone)]
pub struct LexiconBuilder {
    case_folding: bool,
    words: HashMap<String, Entry>,
    mwus: HashMap<Vec<String>, Entry>,
}

impl LexiconBuilder {
    pub fn new(case_folding: bool) -> Self {
        LexiconBuilder { case_folding, words: HashMap::new(), mwus: HashMap::new() }
    }

    pub fn add_text(&mut self, file: &str, text: &str) -> Result<&mut Self, LexiconError> {
        let registry = TagRegistry::builtin();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: &str| LexiconError::Parse {
                file: file.to_string(),
                line: i + 1,
                message: message.to_string(),
            };
            let mut cols = line.split('\t');
            let form = cols.next().unwrap_or_default().trim();
            let tags = cols.next().ok_or_else(|| err("expected form<TAB>tags"))?;
            let flags = cols.next().unwrap_or_default();
            if cols.next().is_some() {
                return Err(err("too many columns"));
            }
            if form.is_empty() {
                return Err(err("empty form"));
            }
            let mut entry = Entry::default();
            for tag in tags.split('|').map(str::trim).filter(|t| !t.is_empty()) {
                let parsed = registry.parse_tag(tag).map_err(|_| LexiconError::InvalidTag {
                    file: file.to_string(),
                    line: i + 1,
                    tag: tag.to_string(),
                })?;
                entry.tags.insert(parsed.to_string());
            }
            for flag in flags.split(',').map(str::trim).filter(|f| !f.is_empty()) {
                match flag {
                    "fil" => entry.filled_pause = true,
                    "dm" => entry.discourse_marker = true,
                    _ => return Err(err(&format!("unknown flag {flag:?}"))),
                }
            }
            if entry.is_empty() {
                return Err(err("entry has no tags and no flags"));
            }
            let words: Vec<&str> = form.split_whitespace().collect();
            if words.len() >= 2 {
                let key = words.iter().map(|w| self.key(w)).collect();
                self.mwus.entry(key).or_default().merge(&entry);
            } else {
                self.words.entry(form.to_string()).or_default().merge(&entry);
            }
        }
        Ok(self)
    }

    pub fn add_file(&mut self, path: &Path) -> Result<&mut Self, LexiconError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path)
            .map_err(|e| LexiconError::Io { file: name.clone(), message: e.to_string() })?;
        self.add_text(&name, &text)
    }

    fn key(&self, w: &str) -> String {
        if self.case_folding {
            fold(w)
        } else {
            w.to_string()
        }
    }

    pub fn build(self) -> Lexicon {
        let mut folded: HashMap<String, Entry> = HashMap::new();
        let mut exact = HashMap::new();
        for (form, entry) in self.words {
            if self.case_folding && !is_proper_only(&entry) {
                folded.entry(fold(&form)).or_default().merge(&entry);
            } else {
                exact.insert(form, entry);
            }
        }
        let mut trie = vec![TrieNode::default()];
        let mwu_count = self.mwus.len();
        for (words, entry) in self.mwus {
            let mut node = 0;
            for w in words {
                node = match trie[node].children.get(&w) {
                    Some(&next) => next,
                    None => {
                        trie.push(TrieNode::default());
                        let next = trie.len() - 1;
                        trie[node].children.insert(w, next);
                        next
                    }
                };
            }
            trie[node].entry = Some(entry);
        }
        Lexicon { case_folding: self.case_folding, folded, exact, trie, mwu_count }
    }
}

impl Lexicon {
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut b = LexiconBuilder::new(true);
        b.add_text("<text>", text)?;
        Ok(b.build())
    }

    /// The bundled sample lexicon.
    pub fn sample() -> Self {
        Lexicon::parse(SAMPLE_LEXICON).expect("bundled lexicon parses")
    }

    pub fn case_folding(&self) -> bool {
        self.case_folding
    }

    /// Number of single-word forms.
    pub fn len(&self) -> usize {
        self.folded.len() + self.exact.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0 && self.mwu_count == 0
    }

    pub fn mwu_count(&self) -> usize {
        self.mwu_count
    }

    /// Candidates for a single form; unknown forms give an empty entry.
    pub fn lookup(&self, form: &str) -> Entry {
        let mut out = Entry::default();
        if let Some(e) = self.exact.get(form) {
            out.merge(e);
        }
        if self.case_folding {
            if let Some(e) = self.folded.get(&fold(form)) {
                out.merge(e);
            }
        }
        out
    }

    fn mwu_key(&self, w: &str) -> String {
        if self.case_folding {
            fold(w)
        } else {
            w.to_string()
        }
    }

    /// Every multi-word entry starting at token `i`, longest first (ties by
    /// tag). Pause tokens end a match.
    pub fn mwu_matches(&self, tokens: &[Token], i: usize) -> Vec<MwuMatch> {
        let mut out = Vec::new();
        let mut node = 0;
        for (k, tok) in tokens.iter().enumerate().skip(i) {
            if tok.is_pause {
                break;
            }
            match self.trie[node].children.get(&self.mwu_key(&tok.text)) {
                Some(&next) => node = next,
                None => break,
            }
            if let Some(entry) = &self.trie[node].entry {
                for tag in &entry.tags {
                    out.push(MwuMatch { len: k - i + 1, tag: tag.clone(), discourse_marker: entry.discourse_marker });
                }
            }
        }
        out.reverse();
        out.sort_by(|a, b| b.len.cmp(&a.len).then_with(|| a.tag.cmp(&b.tag)));
        out
    }

    /// All multi-word entries as (folded words, entry), in no fixed order.
    pub fn mwu_entries(&self) -> Vec<(Vec<String>, &Entry)> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, Vec::new())];
        while let Some((node, path)) = stack.pop() {
            if let Some(e) = &self.trie[node].entry {
                out.push((path.clone(), e));
            }
            for (w, &child) in &self.trie[node].children {
                let mut p = path.clone();
                p.push(w.clone());
                stack.push((child, p));
            }
        }
        out
    }
}

pub fn load_lexicon(files: &[&Path]) -> Result<Lexicon, LexiconError> {
    let mut b = LexiconBuilder::new(true);
    for f in files {
        b.add_file(f)?;
    }
    Ok(b.build())
}

pub fn lookup(lex: &Lexicon, form: &str) -> Entry {
    lex.lookup(form)
}

pub fn mwu_matches(lex: &Lexicon, tokens: &[Token], i: usize) -> Vec<MwuMatch> {
    lex.mwu_matches(tokens, i)
}
