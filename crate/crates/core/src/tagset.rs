//! Hierarchical POS tags and disfluency label codes.
//!
//! A POS tag has up to three registry levels (category, subcategory,
//! function) plus an uninterpreted extended level carrying gender, number or
//! person information copied from the lexicon. Tags are written colon-joined,
//! e.g. `VER:pres:aux` or `NOM:com:fs`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use thiserror::Error;

const BUILTIN_REGISTRY: &str = include_str!("../resources/tagset.tsv");

/// Categories whose tags may carry an extended (4th) level.
const EXTENDED_CATEGORIES: [&str; 5] = ["NOM", "ADJ", "VER", "DET", "PRO"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TagError {
    #[error("malformed tag {0:?}")]
    MalformedTag(String),
    #[error("unknown tag {0:?}")]
    UnknownTag(String),
    #[error("unknown disfluency code {0:?}")]
    UnknownCode(String),
    #[error("marker not allowed on simple disfluency {0:?}")]
    IllegalMarker(String),
    #[error("registry line {line}: {message}")]
    Registry { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PosTag {
    pub category: String,
    pub subcategory: Option<String>,
    pub function: Option<String>,
    pub extended: Option<String>,
}

/// Depth of a tag projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TagLevel {
    Category = 1,
    Subcategory = 2,
    Function = 3,
}

impl TagLevel {
    pub fn from_depth(depth: usize) -> Option<Self> {
        match depth {
            1 => Some(TagLevel::Category),
            2 => Some(TagLevel::Subcategory),
            3 => Some(TagLevel::Function),
            _ => None,
        }
    }
}

impl PosTag {
    pub fn new(category: &str) -> Self {
        PosTag { category: category.to_string(), subcategory: None, function: None, extended: None }
    }

    pub fn with_subcategory(mut self, sub: &str) -> Self {
        self.subcategory = Some(sub.to_string());
        self
    }

    pub fn with_function(mut self, function: &str) -> Self {
        self.function = Some(function.to_string());
        self
    }

    /// The registry part of the tag (no extended level).
    pub fn base(&self) -> String {
        self.project(TagLevel::Function)
    }

    /// Truncates the tag to `level`; missing deeper levels are dropped silently.
    pub fn project(&self, level: TagLevel) -> String {
        let mut out = self.category.clone();
        let deeper = [&self.subcategory, &self.function];
        for part in deeper.iter().take(level as usize - 1) {
            match part {
                Some(p) => {
                    out.push(':');
                    out.push_str(p);
                }
                None => break,
            }
        }
        out
    }

    fn levels(&self) -> Vec<&str> {
        let mut v = vec![self.category.as_str()];
        v.extend(self.subcategory.as_deref());
        v.extend(self.function.as_deref());
        v
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.levels().join(":"))?;
        if let Some(ext) = &self.extended {
            write!(f, ":{ext}")?;
        }
        Ok(())
    }
}

impl FromStr for PosTag {
    type Err = TagError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_pos_tag(s)
    }
}

/// The set of valid (category, subcategory, function) triples with glosses.
#[derive(Debug, Clone)]
pub struct TagRegistry {
    version: u32,
    entries: BTreeMap<String, String>,
}

impl TagRegistry {
    /// Parses the `TAG<TAB>gloss` registry format. A leading `#tagset<TAB>N`
    /// line sets the version; other `#` lines are comments.
    pub fn parse(text: &str) -> Result<Self, TagError> {
        let mut version = 1;
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.strip_prefix("tagset") {
                    version = v.trim().parse().map_err(|_| TagError::Registry {
                        line: n + 1,
                        message: format!("bad version {:?}", v.trim()),
                    })?;
                }
                continue;
            }
            let (tag, gloss) = line.split_once('\t').unwrap_or((line, ""));
            let levels: Vec<&str> = tag.split(':').collect();
            if levels.len() > 3 || levels.iter().any(|l| l.is_empty() || l.contains(' ')) {
                return Err(TagError::Registry { line: n + 1, message: format!("bad tag {tag:?}") });
            }
            entries.insert(tag.to_string(), gloss.trim().to_string());
        }
        Ok(TagRegistry { version, entries })
    }

    /// The shipped registry.
    pub fn builtin() -> &'static TagRegistry {
        static REGISTRY: OnceLock<TagRegistry> = OnceLock::new();
        REGISTRY.get_or_init(|| TagRegistry::parse(BUILTIN_REGISTRY).expect("builtin tag registry is well-formed"))
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, base: &str) -> bool {
        self.entries.contains_key(base)
    }

    pub fn gloss(&self, base: &str) -> Option<&str> {
        self.entries.get(base).map(String::as_str)
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("#tagset\t{}\n", self.version);
        for (tag, gloss) in &self.entries {
            out.push_str(tag);
            out.push('\t');
            out.push_str(gloss);
            out.push('\n');
        }
        out
    }

    /// Parses a tag against this registry.
    pub fn parse_tag(&self, text: &str) -> Result<PosTag, TagError> {
        if text.is_empty()
            || text.starts_with(':')
            || text.ends_with(':')
            || text.contains("::")
            || text.chars().any(char::is_whitespace)
        {
            return Err(TagError::MalformedTag(text.to_string()));
        }
        let parts: Vec<&str> = text.split(':').collect();
        let depth = (1..=parts.len().min(3))
            .rev()
            .find(|&k| self.contains(&parts[..k].join(":")))
            .ok_or_else(|| TagError::UnknownTag(text.to_string()))?;
        let extended = match parts.len() - depth {
            0 => None,
            1 if EXTENDED_CATEGORIES.contains(&parts[0]) => Some(parts[depth].to_string()),
            _ => return Err(TagError::UnknownTag(text.to_string())),
        };
        Ok(PosTag {
            category: parts[0].to_string(),
            subcategory: parts.get(1).filter(|_| depth >= 2).map(|s| s.to_string()),
            function: parts.get(2).filter(|_| depth >= 3).map(|s| s.to_string()),
            extended,
        })
    }
}

/// Parses a colon-separated tag against the builtin registry.
pub fn parse_pos_tag(text: &str) -> Result<PosTag, TagError> {
    TagRegistry::builtin().parse_tag(text)
}

pub fn format_pos_tag(tag: &PosTag) -> String {
    tag.to_string()
}

pub fn project_pos_tag(tag: &PosTag, level: TagLevel) -> String {
    tag.project(level)
}

/// Parses a tier value: one tag, or a space-separated concatenation
/// (`tag1 tag2`) for contracted forms.
pub fn parse_tag_value(text: &str) -> Result<Vec<PosTag>, TagError> {
    if text.trim().is_empty() {
        return Err(TagError::MalformedTag(text.to_string()));
    }
    text.split(' ').map(parse_pos_tag).collect()
}

/// Projects a tier value string. Unparseable tags fall back to keeping the
/// first `level` colon segments so scoring stays total.
pub fn project_tag_value(text: &str, level: TagLevel) -> String {
    text.split(' ')
        .map(|t| match parse_pos_tag(t) {
            Ok(tag) => tag.project(level),
            Err(_) => t.split(':').take(level as usize).collect::<Vec<_>>().join(":"),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DisfluencyCode {
    Fil,
    Len,
    Fst,
    Wdp,
    Rep,
    Del,
    Sub,
    Ins,
    Com,
    Sil,
}

impl DisfluencyCode {
    pub const ALL: [DisfluencyCode; 10] = [
        DisfluencyCode::Fil,
        DisfluencyCode::Len,
        DisfluencyCode::Fst,
        DisfluencyCode::Wdp,
        DisfluencyCode::Rep,
        DisfluencyCode::Del,
        DisfluencyCode::Sub,
        DisfluencyCode::Ins,
        DisfluencyCode::Com,
        DisfluencyCode::Sil,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DisfluencyCode::Fil => "FIL",
            DisfluencyCode::Len => "LEN",
            DisfluencyCode::Fst => "FST",
            DisfluencyCode::Wdp => "WDP",
            DisfluencyCode::Rep => "REP",
            DisfluencyCode::Del => "DEL",
            DisfluencyCode::Sub => "SUB",
            DisfluencyCode::Ins => "INS",
            DisfluencyCode::Com => "COM",
            DisfluencyCode::Sil => "SIL",
        }
    }

    /// Codes that take structure markers.
    pub fn is_structured(self) -> bool {
        matches!(
            self,
            DisfluencyCode::Rep | DisfluencyCode::Del | DisfluencyCode::Sub | DisfluencyCode::Ins | DisfluencyCode::Com
        )
    }

    /// Single-token disfluencies, excluded from final POS decoding.
    pub fn is_simple(self) -> bool {
        matches!(self, DisfluencyCode::Fil | DisfluencyCode::Len | DisfluencyCode::Fst | DisfluencyCode::Wdp)
    }
}

impl fmt::Display for DisfluencyCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DisfluencyCode {
    type Err = TagError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DisfluencyCode::ALL.into_iter().find(|c| c.as_str() == s).ok_or_else(|| TagError::UnknownCode(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StructureMarker {
    /// `*`, on the last reparandum token.
    InterruptionPoint,
    /// `-E`, on interregnum tokens.
    EditingTerm,
    /// `_`, on repair tokens.
    Repair,
}

impl StructureMarker {
    pub fn as_str(self) -> &'static str {
        match self {
            StructureMarker::InterruptionPoint => "*",
            StructureMarker::EditingTerm => "-E",
            StructureMarker::Repair => "_",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DisfluencyLabel {
    pub code: DisfluencyCode,
    pub marker: Option<StructureMarker>,
}

impl DisfluencyLabel {
    pub fn simple(code: DisfluencyCode) -> Self {
        DisfluencyLabel { code, marker: None }
    }

    pub fn new(code: DisfluencyCode, marker: Option<StructureMarker>) -> Result<Self, TagError> {
        if marker.is_some() && !code.is_structured() {
            return Err(TagError::IllegalMarker(code.to_string()));
        }
        Ok(DisfluencyLabel { code, marker })
    }
}

impl fmt::Display for DisfluencyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code.as_str())?;
        if let Some(m) = self.marker {
            f.write_str(m.as_str())?;
        }
        Ok(())
    }
}

impl FromStr for DisfluencyLabel {
    type Err = TagError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_disfluency_label(s)
    }
}

pub fn parse_disfluency_label(text: &str) -> Result<DisfluencyLabel, TagError> {
    let (code, marker) = if let Some(c) = text.strip_suffix("-E") {
        (c, Some(StructureMarker::EditingTerm))
    } else if let Some(c) = text.strip_suffix('*') {
        (c, Some(StructureMarker::InterruptionPoint))
    } else if let Some(c) = text.strip_suffix('_') {
        (c, Some(StructureMarker::Repair))
    } else {
        (text, None)
    };
    let code: DisfluencyCode = code.parse().map_err(|_| TagError::UnknownCode(text.to_string()))?;
    DisfluencyLabel::new(code, marker).map_err(|_| TagError::IllegalMarker(text.to_string()))
}
