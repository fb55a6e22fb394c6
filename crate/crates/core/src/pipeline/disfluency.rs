//! Simple (single-token) and structured (reparandum / interregnum / repair)
//! disfluency detection.

use std::collections::HashMap;
use std::ops::Range;

use super::{features, PipelineConfig, TokenList};
use crate::crf::CrfModel;
use crate::lexicon::fold;
use crate::scalar::Scalar;
use crate::tagset::{DisfluencyCode, DisfluencyLabel};

/// A detected structured disfluency, in token indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuredDisfluency {
    pub code: DisfluencyCode,
    pub reparandum: Range<usize>,
    /// Tokens between the interruption point and the repair (fillers, pauses).
    pub interregnum: Vec<usize>,
    pub repair: Range<usize>,
}

impl StructuredDisfluency {
    pub fn interruption_point(&self) -> usize {
        self.reparandum.end - 1
    }

    fn tokens(&self) -> impl Iterator<Item = usize> + '_ {
        self.reparandum.clone().chain(self.repair.clone())
    }
}

/// Code of a disfluency tier value, if it parses.
pub fn code_of(value: &str) -> Option<DisfluencyCode> {
    value.parse::<DisfluencyLabel>().ok().map(|l| l.code)
}

/// FIL, FST, WDP and pauses: never part of the fluent sequence.
pub fn is_excluded(tl: &TokenList, i: usize) -> bool {
    tl.doc.tokens[i].is_pause
        || matches!(
            code_of(tl.doc.disfluency(i)),
            Some(DisfluencyCode::Fil | DisfluencyCode::Fst | DisfluencyCode::Wdp)
        )
}

/// WDP from transcription markers, then LEN from per-speaker duration per
/// character. LEN needs timing and skips pre-pausal tokens.
pub fn detect_simple_disfluencies(tl: &mut TokenList, cfg: &PipelineConfig) {
    let n = tl.doc.len();
    for i in 0..n {
        if tl.doc.tokens[i].intra_word_pause && !tl.locked_disfluency[i] {
            tl.doc.set_disfluency(i, DisfluencyCode::Wdp.as_str());
            tl.locked_disfluency[i] = true;
        }
    }
    if !tl.doc.has_timing() {
        return;
    }
    let rate: Vec<f64> =
        tl.doc.tokens.iter().map(|t| (t.t_max - t.t_min) / t.text.chars().count().max(1) as f64).collect();
    let mut by_speaker: HashMap<&str, Vec<f64>> = HashMap::new();
    for (i, t) in tl.doc.tokens.iter().enumerate() {
        if !t.is_pause {
            by_speaker.entry(t.speaker.as_str()).or_default().push(rate[i]);
        }
    }
    let stats: HashMap<String, (f64, f64)> = by_speaker
        .into_iter()
        .map(|(s, v)| {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
            (s.to_string(), (mean, var.sqrt()))
        })
        .collect();
    for (i, &r) in rate.iter().enumerate().take(n) {
        let t = &tl.doc.tokens[i];
        if t.is_pause || !tl.doc.disfluency(i).is_empty() {
            continue;
        }
        let pre_pausal = tl.doc.tokens.get(i + 1).is_none_or(|next| next.is_pause);
        let (mean, sd) = stats[&t.speaker];
        if !pre_pausal && sd > 0.0 && r > mean + cfg.len_sd_factor * sd {
            tl.doc.set_disfluency(i, DisfluencyCode::Len.as_str());
        }
    }
}

/// Exact repetitions inside each PSU, fillers and pauses skipped.
pub fn find_repetitions(tl: &TokenList, max_len: usize) -> Vec<StructuredDisfluency> {
    let mut found = Vec::new();
    for seg in &tl.segments {
        let content: Vec<usize> =
            seg.iter().copied().filter(|&i| code_of(tl.doc.disfluency(i)) != Some(DisfluencyCode::Fil)).collect();
        let words: Vec<String> = content.iter().map(|&i| fold(&tl.doc.tokens[i].text)).collect();
        for k in 0..content.len() {
            let longest = max_len.min((content.len() - k) / 2);
            let Some(m) = (1..=longest).rev().find(|&m| words[k..k + m] == words[k + m..k + 2 * m]) else {
                continue;
            };
            let last = content[k + m - 1];
            let first_repair = content[k + m];
            found.push(StructuredDisfluency {
                code: DisfluencyCode::Rep,
                reparandum: content[k]..last + 1,
                interregnum: (last + 1..first_repair).collect(),
                repair: first_repair..content[k + 2 * m - 1] + 1,
            });
        }
    }
    found
}

/// Merges disfluencies sharing tokens into COM structures whose
/// interruption point is the last one of the group.
fn merge_overlapping(mut items: Vec<StructuredDisfluency>) -> Vec<StructuredDisfluency> {
    items.sort_by_key(|d| (d.reparandum.start, d.repair.end));
    let mut out: Vec<StructuredDisfluency> = Vec::new();
    for d in items {
        match out.last_mut() {
            Some(prev) if d.reparandum.start < prev.repair.end => {
                let ip = prev.interruption_point().max(d.interruption_point());
                let start = prev.reparandum.start.min(d.reparandum.start);
                let end = prev.repair.end.max(d.repair.end);
                let mut inter: Vec<usize> =
                    prev.interregnum.iter().chain(&d.interregnum).copied().filter(|&i| i > ip).collect();
                inter.sort_unstable();
                inter.dedup();
                let repair_start = (ip + 1..end).find(|i| !inter.contains(i)).unwrap_or(end);
                *prev = StructuredDisfluency {
                    code: DisfluencyCode::Com,
                    reparandum: start..ip + 1,
                    interregnum: inter,
                    repair: repair_start..end,
                };
            }
            _ => out.push(d),
        }
    }
    out
}

/// Repetition rule, then the optional statistical layer for DEL/SUB/INS.
/// Tokens with a locked label (FIL, FST, WDP) keep it.
pub fn detect_structured_disfluencies<F: Scalar>(
    tl: &mut TokenList,
    model: Option<&CrfModel<F>>,
    cfg: &PipelineConfig,
) {
    let found = merge_overlapping(find_repetitions(tl, cfg.max_repetition));
    for d in &found {
        let ip = d.interruption_point();
        for i in d.tokens() {
            if tl.locked_disfluency[i] || tl.doc.tokens[i].is_pause {
                continue;
            }
            let label = if i < ip {
                d.code.as_str().to_string()
            } else if i == ip {
                format!("{}*", d.code.as_str())
            } else if d.interregnum.contains(&i) {
                format!("{}-E", d.code.as_str())
            } else {
                format!("{}_", d.code.as_str())
            };
            tl.doc.set_disfluency(i, label);
        }
    }
    tl.structured = found;

    let Some(model) = model else { return };
    for seg in tl.segments.clone() {
        let seq = features::sequence(tl, &seg, false);
        for (&i, label) in seg.iter().zip(model.decode(&seq)) {
            let free = !tl.locked_disfluency[i] && tl.doc.disfluency(i).is_empty();
            let statistical =
                matches!(code_of(&label), Some(DisfluencyCode::Del | DisfluencyCode::Sub | DisfluencyCode::Ins));
            if free && statistical {
                tl.doc.set_disfluency(i, label);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{segment_tokens, Document, Token};

    /// Untimed tokens, `euh` pre-marked FIL as preprocessing would.
    fn list(text: &str) -> TokenList {
        let tokens: Vec<Token> = text.split(' ').map(|w| Token::word(w, 0.0, 0.0)).collect();
        let mut tl = TokenList::bare(Document::new(tokens).unwrap());
        for i in 0..tl.doc.len() {
            if tl.doc.tokens[i].text == "euh" {
                tl.doc.set_disfluency(i, "FIL");
                tl.locked_disfluency[i] = true;
            }
        }
        tl.segments = segment_tokens(&tl.doc.tokens, 500);
        tl
    }

    fn labels(tl: &TokenList) -> Vec<&str> {
        (0..tl.doc.len()).map(|i| tl.doc.disfluency(i)).collect()
    }

    fn run(text: &str) -> TokenList {
        let mut tl = list(text);
        detect_structured_disfluencies::<f64>(&mut tl, None, &PipelineConfig::default());
        tl
    }

    #[test]
    fn single_repetition() {
        assert_eq!(labels(&run("le le chat")), ["REP*", "REP_", ""]);
    }

    #[test]
    fn filler_interregnum_keeps_fil() {
        let tl = run("le euh le chat");
        assert_eq!(labels(&tl), ["REP*", "FIL", "REP_", ""]);
        assert_eq!(tl.structured[0].interregnum, [1]);
        assert_eq!(tl.structured[0].interruption_point(), 0);
    }

    #[test]
    fn no_repetition() {
        let tl = run("le chat");
        assert_eq!(labels(&tl), ["", ""]);
        assert!(tl.structured.is_empty());
    }

    #[test]
    fn two_word_repetition_case_folded() {
        assert_eq!(labels(&run("Le chat le chat dort")), ["REP", "REP*", "REP_", "REP_", ""]);
    }

    #[test]
    fn overlapping_become_com() {
        assert_eq!(labels(&run("le le le chat")), ["COM", "COM*", "COM_", ""]);
    }

    #[test]
    fn window_cap() {
        let five = "a b c d e a b c d e";
        let tl = list(five);
        assert!(find_repetitions(&tl, 4).is_empty());
        assert_eq!(find_repetitions(&tl, 5).len(), 1);
    }

    #[test]
    fn repetition_does_not_cross_units() {
        let tokens = vec![Token::word("le", 0.0, 0.2), Token::pause("_", 0.2, 0.9), Token::word("le", 0.9, 1.1)];
        let mut tl = TokenList::bare(Document::new(tokens).unwrap());
        tl.segments = segment_tokens(&tl.doc.tokens, 500);
        assert!(find_repetitions(&tl, 4).is_empty());
    }

    #[test]
    fn intra_word_pause() {
        let mut tl = list("bon jour");
        tl.doc.tokens[1].intra_word_pause = true;
        detect_simple_disfluencies(&mut tl, &PipelineConfig::default());
        assert_eq!(labels(&tl), ["", "WDP"]);
        assert!(tl.locked_disfluency[1]);
    }

    fn timed(durations: &[f64]) -> TokenList {
        let mut t = 0.0;
        let tokens = durations
            .iter()
            .map(|d| {
                let tok = Token::word("abcd", t, t + d);
                t += d;
                tok
            })
            .collect();
        TokenList::bare(Document::new(tokens).unwrap())
    }

    #[test]
    fn lengthening_by_z_score() {
        // 19 tokens at 0.2 s and one at 1.0 s, all four characters long.
        // Rates: 0.05 ×19 and 0.25. Mean 0.06, population sd
        // sqrt((19·0.01² + 0.19²)/20) = sqrt(0.0019) ≈ 0.0436, so the
        // cut-off is 0.06 + 3·0.0436 ≈ 0.1908 < 0.25.
        let mut d = vec![0.2; 20];
        d[10] = 1.0;
        let mut tl = timed(&d);
        detect_simple_disfluencies(&mut tl, &PipelineConfig::default());
        let marked: Vec<usize> = (0..20).filter(|&i| tl.doc.disfluency(i) == "LEN").collect();
        assert_eq!(marked, [10]);

        // with k = 5 the cut-off is 0.06 + 5·0.0436 ≈ 0.278 > 0.25
        let mut tl = timed(&d);
        let cfg = PipelineConfig { len_sd_factor: 5.0, ..PipelineConfig::default() };
        detect_simple_disfluencies(&mut tl, &cfg);
        assert!((0..20).all(|i| tl.doc.disfluency(i).is_empty()));
    }

    #[test]
    fn lengthening_skips_pre_pausal_and_untimed() {
        let mut d = vec![0.2; 20];
        d[19] = 1.0;
        let mut tl = timed(&d);
        detect_simple_disfluencies(&mut tl, &PipelineConfig::default());
        assert!((0..20).all(|i| tl.doc.disfluency(i).is_empty()));

        let mut tl = list("a b c d e f g h i j k l");
        detect_simple_disfluencies(&mut tl, &PipelineConfig::default());
        assert!(labels(&tl).iter().all(|l| l.is_empty()));
    }
}
