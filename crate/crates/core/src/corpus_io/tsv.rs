//! Tab-separated tier files: one row per minimal token.
//!
//! MWU and discourse values are repeated on every covered row; the
//! `mwu-id` and `discourse-id` columns tell adjacent spans apart.

use std::fmt::Write as _;
use std::ops::Range;

use super::CorpusError;
use crate::annotation::{Document, DocumentMeta, PauseClass, TierValue, Token};

pub const COLUMNS: [&str; 14] = [
    "tMin",
    "tMax",
    "speaker",
    "type",
    "tok-min",
    "flags",
    "pause-class",
    "pos-min",
    "disfluency",
    "mwu-id",
    "tok-mwu",
    "pos-mwu",
    "discourse-id",
    "discourse",
];

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str, line: usize) -> Result<String, CorpusError> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        out.push(match chars.next() {
            Some('\\') => '\\',
            Some('t') => '\t',
            Some('n') => '\n',
            Some('r') => '\r',
            other => {
                return Err(CorpusError::Parse {
                    line,
                    message: format!("bad escape \\{}", other.map_or(String::new(), String::from)),
                })
            }
        });
    }
    Ok(out)
}

/// Serializes a valid document. Metadata lines are written only when they
/// differ from the defaults, so an empty document gives a header-only file.
pub fn write_tsv(doc: &Document) -> Vec<u8> {
    let mut out = String::new();
    let defaults = DocumentMeta::default();
    for (key, value, default) in [
        ("sample_id", &doc.meta.sample_id, &defaults.sample_id),
        ("subcorpus", &doc.meta.subcorpus, &defaults.subcorpus),
        ("pause_symbol", &doc.meta.pause_symbol, &defaults.pause_symbol),
    ] {
        if value != default {
            let _ = writeln!(out, "#{key}={}", escape(value));
        }
    }
    let header: Vec<String> =
        COLUMNS.iter().map(|c| c.to_string()).chain(doc.attributes.iter().map(|(k, _)| escape(k))).collect();
    out.push_str(&header.join("\t"));
    out.push('\n');

    let n = doc.tokens.len();
    let mut mwu_of = vec![None; n];
    for (k, unit) in doc.tiers.tok_mwu.iter().enumerate() {
        for i in unit.span.clone().filter(|&i| i < n) {
            mwu_of[i].get_or_insert(k);
        }
    }
    let mut dm_of = vec![None; n];
    for (k, v) in doc.tiers.discourse.iter().enumerate() {
        for i in v.span.clone().filter(|&i| i < n) {
            dm_of[i].get_or_insert(k);
        }
    }
    let value = |values: &[TierValue], k: Option<usize>| -> String {
        k.and_then(|k| values.get(k)).map_or(String::new(), |v| escape(&v.value))
    };
    for (i, t) in doc.tokens.iter().enumerate() {
        let mut flags = Vec::new();
        if t.false_start {
            flags.push("fst");
        }
        if t.intra_word_pause {
            flags.push("wdp");
        }
        if t.attached {
            flags.push("att");
        }
        let cells = [
            format!("{}", t.t_min),
            format!("{}", t.t_max),
            escape(&t.speaker),
            (if t.is_pause { "pause" } else { "word" }).to_string(),
            escape(&t.text),
            flags.join(","),
            t.pause_class.map_or("", PauseClass::as_str).to_string(),
            value(&doc.tiers.pos_min, Some(i)),
            value(&doc.tiers.disfluency, Some(i)),
            mwu_of[i].map_or(String::new(), |k| k.to_string()),
            value(&doc.tiers.tok_mwu, mwu_of[i]),
            value(&doc.tiers.pos_mwu, mwu_of[i]),
            dm_of[i].map_or(String::new(), |k| k.to_string()),
            value(&doc.tiers.discourse, dm_of[i]),
        ];
        let extra = doc.attributes.iter().map(|(_, col)| col.get(i).map_or(String::new(), |v| escape(v)));
        let row: Vec<String> = cells.into_iter().chain(extra).collect();
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out.into_bytes()
}

/// Groups consecutive rows sharing a non-empty id into spans.
fn id_spans(ids: &[String]) -> Vec<(Range<usize>, usize)> {
    let mut spans = Vec::new();
    let mut i = 0;
    while i < ids.len() {
        if ids[i].is_empty() {
            i += 1;
            continue;
        }
        let start = i;
        while i < ids.len() && ids[i] == ids[start] {
            i += 1;
        }
        spans.push((start..i, start));
    }
    spans
}

pub fn read_tsv(bytes: &[u8]) -> Result<Document, CorpusError> {
    let body = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    let text = std::str::from_utf8(body).map_err(|e| CorpusError::Encoding(e.to_string()))?;
    let mut lines = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).enumerate();

    let mut meta = DocumentMeta::default();
    let header = loop {
        let Some((idx, line)) = lines.next() else {
            return Err(CorpusError::Parse { line: 1, message: "missing header row".into() });
        };
        let Some(rest) = line.strip_prefix('#') else {
            if line.is_empty() {
                return Err(CorpusError::Parse { line: idx + 1, message: "missing header row".into() });
            }
            break line;
        };
        let (key, value) = rest
            .split_once('=')
            .ok_or_else(|| CorpusError::Parse { line: idx + 1, message: "metadata line without `=`".into() })?;
        let value = unescape(value, idx + 1)?;
        match key.trim() {
            "sample_id" => meta.sample_id = value,
            "subcorpus" => meta.subcorpus = value,
            "pause_symbol" => meta.pause_symbol = value,
            _ => {}
        }
    };
    let names: Vec<String> = header.split('\t').map(|h| unescape(h, 1)).collect::<Result<_, _>>()?;
    let col = |name: &str| names.iter().position(|h| h == name);
    let standard: Vec<Option<usize>> = COLUMNS.iter().map(|c| col(c)).collect();
    for (name, idx) in COLUMNS.iter().zip(&standard) {
        if idx.is_none() && ["tMin", "tMax", "tok-min"].contains(name) {
            return Err(CorpusError::MissingColumn(name.to_string()));
        }
    }
    let extra: Vec<usize> = (0..names.len()).filter(|i| !standard.contains(&Some(*i))).collect();

    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut row_lines = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<String> = line.split('\t').map(|c| unescape(c, idx + 1)).collect::<Result<_, _>>()?;
        if cells.len() != names.len() {
            return Err(CorpusError::Parse {
                line: idx + 1,
                message: format!("expected {} cells, found {}", names.len(), cells.len()),
            });
        }
        rows.push(cells);
        row_lines.push(idx + 1);
    }

    let get = |row: &[String], c: usize| -> String { standard[c].map_or(String::new(), |i| row[i].clone()) };
    let mut tokens = Vec::with_capacity(rows.len());
    for (row, &line) in rows.iter().zip(&row_lines) {
        let bad = |message: String| CorpusError::Parse { line, message };
        let time = |c: usize| -> Result<f64, CorpusError> {
            let s = get(row, c);
            match s.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(bad(format!("bad {} value {s:?}", COLUMNS[c]))),
            }
        };
        let text = get(row, 4);
        let is_pause = match standard[3].map(|i| row[i].as_str()) {
            Some("pause") => true,
            Some("word") => false,
            None => text == meta.pause_symbol,
            Some(other) => return Err(bad(format!("bad type {other:?}"))),
        };
        let mut token = Token { speaker: get(row, 2), is_pause, ..Token::word(&text, time(0)?, time(1)?) };
        for flag in get(row, 5).split(',').filter(|f| !f.is_empty()) {
            match flag {
                "fst" => token.false_start = true,
                "wdp" => token.intra_word_pause = true,
                "att" => token.attached = true,
                other => return Err(bad(format!("unknown flag {other:?}"))),
            }
        }
        token.pause_class = match get(row, 6).as_str() {
            "" => None,
            "short" => Some(PauseClass::Short),
            "long" => Some(PauseClass::Long),
            other => return Err(bad(format!("bad pause class {other:?}"))),
        };
        tokens.push(token);
    }

    let mut doc = Document::new(tokens)?.with_meta(meta);
    for (i, row) in rows.iter().enumerate() {
        doc.tiers.pos_min[i].value = get(row, 7);
        doc.tiers.disfluency[i].value = get(row, 8);
    }

    let mwu_ids: Vec<String> = rows.iter().map(|r| get(r, 9)).collect();
    let mut units: Vec<Range<usize>> = Vec::new();
    let mut cursor = 0;
    for (span, _) in id_spans(&mwu_ids) {
        units.extend((cursor..span.start).map(|i| i..i + 1));
        cursor = span.end;
        units.push(span);
    }
    units.extend((cursor..rows.len()).map(|i| i..i + 1));
    let joined =
        |span: &Range<usize>| doc.tokens[span.clone()].iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ");
    let tok_mwu: Vec<TierValue> = units
        .iter()
        .map(|span| {
            let value = match standard[10] {
                Some(c) => rows[span.start][c].clone(),
                None => joined(span),
            };
            TierValue::new(span.clone(), value)
        })
        .collect();
    let pos_mwu = units.iter().map(|span| TierValue::new(span.clone(), get(&rows[span.start], 11))).collect();
    doc.tiers.tok_mwu = tok_mwu;
    doc.tiers.pos_mwu = pos_mwu;

    let dm_ids: Vec<String> = rows.iter().map(|r| get(r, 12)).collect();
    doc.tiers.discourse = if standard[12].is_some() {
        id_spans(&dm_ids).into_iter().map(|(span, first)| TierValue::new(span, get(&rows[first], 13))).collect()
    } else {
        // no ids: every non-empty value is its own span
        (0..rows.len())
            .filter_map(|i| {
                let v = get(&rows[i], 13);
                (!v.is_empty()).then(|| TierValue::new(i..i + 1, v))
            })
            .collect()
    };

    doc.attributes = extra.iter().map(|&c| (names[c].clone(), rows.iter().map(|r| r[c].clone()).collect())).collect();
    Ok(doc)
}
