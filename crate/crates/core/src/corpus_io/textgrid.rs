//! Praat TextGrid, long text format.

use std::fmt::Write as _;

use super::CorpusError;

/// Boundaries closer than this are treated as equal.
const BOUNDARY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub xmin: f64,
    pub xmax: f64,
    pub text: String,
}

impl Interval {
    pub fn new(xmin: f64, xmax: f64, text: impl Into<String>) -> Self {
        Interval { xmin, xmax, text: text.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalTier {
    pub name: String,
    pub xmin: f64,
    pub xmax: f64,
    pub intervals: Vec<Interval>,
}

impl IntervalTier {
    /// Builds a contiguous tier from ordered, non-overlapping labelled
    /// stretches, filling gaps with empty intervals.
    pub fn from_sparse(
        name: &str,
        xmin: f64,
        xmax: f64,
        items: impl IntoIterator<Item = Interval>,
    ) -> Result<Self, CorpusError> {
        let mut intervals = Vec::new();
        let mut cursor = xmin;
        for item in items {
            if item.xmin < cursor - BOUNDARY_EPS || item.xmax < item.xmin {
                return Err(CorpusError::Invariant(format!(
                    "tier {name:?}: interval {:.6}-{:.6} overlaps or is reversed",
                    item.xmin, item.xmax
                )));
            }
            if item.xmin > cursor + BOUNDARY_EPS {
                intervals.push(Interval::new(cursor, item.xmin, ""));
            }
            cursor = item.xmax;
            intervals.push(item);
        }
        if xmax > cursor + BOUNDARY_EPS {
            intervals.push(Interval::new(cursor, xmax, ""));
        }
        Ok(IntervalTier { name: name.to_string(), xmin, xmax: xmax.max(cursor), intervals })
    }

    /// The interval whose span contains `t`, preferring the later one on a boundary.
    pub fn interval_at(&self, t: f64) -> Option<&Interval> {
        self.intervals.iter().rev().find(|i| i.xmin <= t + BOUNDARY_EPS && t <= i.xmax + BOUNDARY_EPS)
    }

    fn check(&self) -> Result<(), CorpusError> {
        let bad = |what: &str| Err(CorpusError::Invariant(format!("tier {:?}: {what}", self.name)));
        if !(self.xmin.is_finite() && self.xmax.is_finite() && self.xmin <= self.xmax) {
            return bad("bad tier bounds");
        }
        let mut prev: Option<&Interval> = None;
        for ivl in &self.intervals {
            if !(ivl.xmin.is_finite() && ivl.xmax.is_finite()) || ivl.xmin > ivl.xmax {
                return bad("bad interval bounds");
            }
            match prev {
                None if (ivl.xmin - self.xmin).abs() > BOUNDARY_EPS => {
                    return bad("first interval does not start the tier")
                }
                Some(p) if ivl.xmin < p.xmax - BOUNDARY_EPS => return bad("overlapping intervals"),
                Some(p) if ivl.xmin > p.xmax + BOUNDARY_EPS => return bad("gap between intervals"),
                _ => {}
            }
            prev = Some(ivl);
        }
        if let Some(p) = prev {
            if (p.xmax - self.xmax).abs() > BOUNDARY_EPS {
                return bad("last interval does not end the tier");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TextGrid {
    pub xmin: f64,
    pub xmax: f64,
    pub tiers: Vec<IntervalTier>,
    /// Notes about skipped content, such as point tiers.
    pub warnings: Vec<String>,
}

impl TextGrid {
    pub fn tier(&self, name: &str) -> Option<&IntervalTier> {
        self.tiers.iter().find(|t| t.name == name)
    }

    /// Adds a tier, replacing any tier of the same name, and widens the grid.
    pub fn set_tier(&mut self, tier: IntervalTier) {
        if self.tiers.is_empty() {
            self.xmin = tier.xmin;
            self.xmax = tier.xmax;
        } else {
            self.xmin = self.xmin.min(tier.xmin);
            self.xmax = self.xmax.max(tier.xmax);
        }
        match self.tiers.iter_mut().find(|t| t.name == tier.name) {
            Some(slot) => *slot = tier,
            None => self.tiers.push(tier),
        }
    }
}

/// Decodes UTF-8 (optionally with BOM) or BOM-marked UTF-16.
pub(crate) fn decode_text(bytes: &[u8]) -> Result<String, CorpusError> {
    let utf16 = |be: bool| -> Result<String, CorpusError> {
        let body = &bytes[2..];
        if !body.len().is_multiple_of(2) {
            return Err(CorpusError::Encoding("odd UTF-16 length".into()));
        }
        let units = body.chunks_exact(2).map(|c| {
            if be {
                u16::from_be_bytes([c[0], c[1]])
            } else {
                u16::from_le_bytes([c[0], c[1]])
            }
        });
        char::decode_utf16(units).collect::<Result<String, _>>().map_err(|e| CorpusError::Encoding(e.to_string()))
    };
    match bytes {
        [0xFE, 0xFF, ..] => utf16(true),
        [0xFF, 0xFE, ..] => utf16(false),
        _ => {
            let body = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
            String::from_utf8(body.to_vec()).map_err(|e| CorpusError::Encoding(e.to_string()))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    Eq,
}

struct Lexer {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    last_line: usize,
}

impl Lexer {
    fn new(text: &str) -> Result<Self, CorpusError> {
        let mut toks = Vec::new();
        let mut line = 1;
        let mut chars = text.chars().peekable();
        while let Some(&c) = chars.peek() {
            match c {
                '\n' => {
                    line += 1;
                    chars.next();
                }
                c if c.is_whitespace() => {
                    chars.next();
                }
                '!' => while chars.next_if(|&c| c != '\n').is_some() {},
                '=' => {
                    chars.next();
                    toks.push((line, Tok::Eq));
                }
                '"' => {
                    let start = line;
                    chars.next();
                    let mut s = String::new();
                    loop {
                        match chars.next() {
                            None => {
                                return Err(CorpusError::Parse { line: start, message: "unterminated string".into() })
                            }
                            Some('"') if chars.peek() == Some(&'"') => {
                                chars.next();
                                s.push('"');
                            }
                            Some('"') => break,
                            Some(c) => {
                                if c == '\n' {
                                    line += 1;
                                }
                                s.push(c);
                            }
                        }
                    }
                    toks.push((start, Tok::Str(s)));
                }
                _ => {
                    let mut w = String::new();
                    while let Some(c) = chars.next_if(|&c| !c.is_whitespace() && c != '=' && c != '"') {
                        w.push(c);
                    }
                    toks.push((line, Tok::Word(w)));
                }
            }
        }
        Ok(Lexer { toks, pos: 0, last_line: line })
    }

    fn line(&self) -> usize {
        self.toks.get(self.pos).map_or(self.last_line, |t| t.0)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, CorpusError> {
        Err(CorpusError::Parse { line: self.line(), message: message.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn next(&mut self) -> Result<Tok, CorpusError> {
        match self.toks.get(self.pos) {
            Some((_, t)) => {
                self.pos += 1;
                Ok(t.clone())
            }
            None => self.err("unexpected end of file"),
        }
    }

    fn word(&mut self, expected: &str) -> Result<(), CorpusError> {
        match self.peek() {
            Some(Tok::Word(w)) if w == expected => {
                self.pos += 1;
                Ok(())
            }
            other => {
                let found = format!("{other:?}");
                self.err(format!("expected `{expected}`, found {found}"))
            }
        }
    }

    fn eq(&mut self) -> Result<(), CorpusError> {
        match self.next()? {
            Tok::Eq => Ok(()),
            other => {
                self.pos -= 1;
                self.err(format!("expected `=`, found {other:?}"))
            }
        }
    }

    fn string(&mut self) -> Result<String, CorpusError> {
        match self.next()? {
            Tok::Str(s) => Ok(s),
            other => {
                self.pos -= 1;
                self.err(format!("expected a string, found {other:?}"))
            }
        }
    }

    fn number(&mut self) -> Result<f64, CorpusError> {
        match self.next()? {
            Tok::Word(w) => match w.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => {
                    self.pos -= 1;
                    self.err(format!("expected a number, found {w:?}"))
                }
            },
            other => {
                self.pos -= 1;
                self.err(format!("expected a number, found {other:?}"))
            }
        }
    }

    fn count(&mut self) -> Result<usize, CorpusError> {
        let v = self.number()?;
        if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
            self.pos -= 1;
            return self.err(format!("bad count {v}"));
        }
        Ok(v as usize)
    }

    /// `key = number`, where the key may be several words.
    fn num_field(&mut self, key: &[&str]) -> Result<f64, CorpusError> {
        for k in key {
            self.word(k)?;
        }
        self.eq()?;
        self.number()
    }

    fn str_field(&mut self, key: &[&str]) -> Result<String, CorpusError> {
        for k in key {
            self.word(k)?;
        }
        self.eq()?;
        self.string()
    }

    fn count_field(&mut self, key: &[&str]) -> Result<usize, CorpusError> {
        for k in key {
            self.word(k)?;
        }
        self.eq()?;
        self.count()
    }
}

/// Parses a long-format TextGrid. Point tiers are skipped with a warning.
pub fn read_textgrid(bytes: &[u8]) -> Result<TextGrid, CorpusError> {
    let text = decode_text(bytes)?;
    let mut lx = Lexer::new(&text)?;
    if lx.str_field(&["File", "type"])? != "ooTextFile" {
        return lx.err("not an ooTextFile");
    }
    if lx.str_field(&["Object", "class"])? != "TextGrid" {
        return lx.err("not a TextGrid");
    }
    if let Some(Tok::Word(w)) = lx.peek() {
        if w.parse::<f64>().is_ok() {
            return lx.err("short text format is not supported; save as long text");
        }
    }
    let mut grid = TextGrid { xmin: lx.num_field(&["xmin"])?, xmax: lx.num_field(&["xmax"])?, ..TextGrid::default() };
    lx.word("tiers?")?;
    match lx.next()? {
        Tok::Word(w) if w == "<exists>" => {}
        Tok::Word(w) if w == "<absent>" => return Ok(grid),
        other => {
            lx.pos -= 1;
            return lx.err(format!("expected <exists> or <absent>, found {other:?}"));
        }
    }
    let n_tiers = lx.count_field(&["size"])?;
    lx.word("item")?;
    lx.word("[]:")?;
    for i in 1..=n_tiers {
        lx.word("item")?;
        lx.word(&format!("[{i}]:"))?;
        let class = lx.str_field(&["class"])?;
        let name = lx.str_field(&["name"])?;
        let xmin = lx.num_field(&["xmin"])?;
        let xmax = lx.num_field(&["xmax"])?;
        match class.as_str() {
            "IntervalTier" => {
                let n = lx.count_field(&["intervals:", "size"])?;
                let mut intervals = Vec::new();
                for j in 1..=n {
                    lx.word("intervals")?;
                    lx.word(&format!("[{j}]:"))?;
                    let a = lx.num_field(&["xmin"])?;
                    let b = lx.num_field(&["xmax"])?;
                    let t = lx.str_field(&["text"])?;
                    intervals.push(Interval::new(a, b, t));
                }
                grid.tiers.push(IntervalTier { name, xmin, xmax, intervals });
            }
            "TextTier" => {
                let n = lx.count_field(&["points:", "size"])?;
                for j in 1..=n {
                    lx.word("points")?;
                    lx.word(&format!("[{j}]:"))?;
                    // older Praat versions write `time` instead of `number`
                    match lx.peek() {
                        Some(Tok::Word(w)) if w == "time" => lx.num_field(&["time"])?,
                        _ => lx.num_field(&["number"])?,
                    };
                    lx.str_field(&["mark"])?;
                }
                grid.warnings.push(format!("skipped point tier {name:?}"));
            }
            other => return lx.err(format!("unknown tier class {other:?}")),
        }
    }
    if lx.peek().is_some() {
        return lx.err("trailing content after last tier");
    }
    Ok(grid)
}

/// Up to six fractional digits, trailing zeros trimmed.
pub fn format_time(t: f64) -> String {
    let s = format!("{t:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

/// Serializes in Praat's long text layout.
pub fn write_textgrid(grid: &TextGrid) -> Result<Vec<u8>, CorpusError> {
    for tier in &grid.tiers {
        tier.check()?;
        if tier.xmin < grid.xmin - BOUNDARY_EPS || tier.xmax > grid.xmax + BOUNDARY_EPS {
            return Err(CorpusError::Invariant(format!("tier {:?} exceeds the grid bounds", tier.name)));
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "File type = \"ooTextFile\"\nObject class = \"TextGrid\"\n");
    let _ = writeln!(out, "xmin = {} \nxmax = {} ", format_time(grid.xmin), format_time(grid.xmax));
    if grid.tiers.is_empty() {
        out.push_str("tiers? <absent> \n");
        return Ok(out.into_bytes());
    }
    let _ = writeln!(out, "tiers? <exists> \nsize = {} \nitem []: ", grid.tiers.len());
    for (i, tier) in grid.tiers.iter().enumerate() {
        let _ = writeln!(out, "    item [{}]:", i + 1);
        let _ = writeln!(out, "        class = \"IntervalTier\" ");
        let _ = writeln!(out, "        name = {} ", quote(&tier.name));
        let _ = writeln!(out, "        xmin = {} ", format_time(tier.xmin));
        let _ = writeln!(out, "        xmax = {} ", format_time(tier.xmax));
        let _ = writeln!(out, "        intervals: size = {} ", tier.intervals.len());
        for (j, ivl) in tier.intervals.iter().enumerate() {
            let _ = writeln!(out, "        intervals [{}]:", j + 1);
            let _ = writeln!(out, "            xmin = {} ", format_time(ivl.xmin));
            let _ = writeln!(out, "            xmax = {} ", format_time(ivl.xmax));
            let _ = writeln!(out, "            text = {} ", quote(&ivl.text));
        }
    }
    Ok(out.into_bytes())
}
