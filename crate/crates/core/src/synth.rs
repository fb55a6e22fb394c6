//! Seeded generator of gold-annotated French-like speech corpora.
//!
//! Sentences come from a small template grammar with lexical ambiguity that
//! context resolves (auxiliary vs. main `est`/`a`, `le` determiner vs.
//! object pronoun, `que` conjunction vs. relative, `bon` adjective vs.
//! discourse marker), unknown nouns, multi-word units, and injected
//! disfluencies: filled pauses, repetitions, false starts and lengthenings.
//! Every sentence is one pause-separated unit.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::annotation::{Document, DocumentMeta, TierValue, Token, DEFAULT_PAUSE_SYMBOL};
use crate::tagset::PosTag;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    /// Approximate number of non-pause tokens over the whole corpus.
    pub target_tokens: usize,
    pub documents: usize,
    /// Sub-corpus ids are `s1`..`sN`, dealt to documents round-robin.
    pub strata: usize,
    /// Probability that a sentence gets each kind of disfluency.
    pub filled_pause_rate: f64,
    pub repetition_rate: f64,
    pub false_start_rate: f64,
    pub lengthening_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            target_tokens: 5000,
            documents: 6,
            strata: 3,
            filled_pause_rate: 0.3,
            repetition_rate: 0.2,
            false_start_rate: 0.1,
            lengthening_rate: 0.03,
        }
    }
}

#[derive(Debug, Clone)]
struct Word {
    text: String,
    tag: &'static str,
    dis: String,
    false_start: bool,
    stretch: bool,
    /// Token may take part in a repetition or carry an inserted disfluency.
    free: bool,
}

fn w(text: &str, tag: &'static str) -> Word {
    Word { text: text.to_string(), tag, dis: String::new(), false_start: false, stretch: false, free: true }
}

#[derive(Debug, Default)]
struct Sentence {
    words: Vec<Word>,
    mwus: Vec<(Range<usize>, &'static str)>,
    markers: Vec<Range<usize>>,
}

impl Sentence {
    fn push(&mut self, word: Word) {
        self.words.push(word);
    }

    fn extend(&mut self, words: Vec<Word>) {
        self.words.extend(words);
    }

    fn push_mwu(&mut self, forms: &[&str], tag: &'static str, marker: bool) {
        let start = self.words.len();
        for f in forms {
            self.words.push(Word { free: false, ..w(f, tag) });
        }
        let span = start..self.words.len();
        if marker {
            self.markers.push(span.clone());
        }
        self.mwus.push((span, tag));
    }

    /// Inserts `count` words at `at`, shifting recorded spans.
    fn insert(&mut self, at: usize, new: Vec<Word>) {
        let count = new.len();
        self.words.splice(at..at, new);
        let shift = |r: &mut Range<usize>| {
            if r.start >= at {
                *r = r.start + count..r.end + count;
            }
        };
        self.mwus.iter_mut().for_each(|(r, _)| shift(r));
        self.markers.iter_mut().for_each(shift);
    }
}

const MASC: &[&str] = &[
    "chat",
    "chien",
    "livre",
    "jardin",
    "film",
    "problème",
    "moment",
    "soir",
    "matin",
    "père",
    "frère",
    "gâteau",
    "repas",
    "café",
    "pain",
    "fromage",
    "vin",
    "fruit",
    "arbre",
    "train",
    "bus",
    "avion",
    "vélo",
    "bateau",
    "salon",
    "bureau",
    "magasin",
    "marché",
    "restaurant",
    "journal",
    "téléphone",
    "ordinateur",
    "tableau",
    "voisin",
    "projet",
    "voyage",
    "cadeau",
    "jeu",
    "sport",
    "match",
    "professeur",
    "médecin",
];
const FEM: &[&str] = &[
    "maison", "pomme", "voiture", "table", "ville", "école", "fenêtre", "musique", "question", "histoire", "nuit",
    "semaine", "famille", "mère", "sœur", "fille", "copine", "fleur", "rue", "route", "chambre", "cuisine", "église",
    "plage", "mer", "montagne", "forêt", "rivière", "lune", "pluie", "chanson", "lettre", "photo", "couleur", "main",
    "tête", "voix", "classe", "leçon", "réunion", "fête", "voisine", "porte",
];
const ADJ: &[&str] = &[
    "grand",
    "petit",
    "content",
    "joli",
    "rouge",
    "vert",
    "noir",
    "important",
    "facile",
    "rapide",
    "calme",
    "drôle",
    "bizarre",
    "simple",
    "triste",
    "jeune",
    "fort",
    "chaud",
    "froid",
    "vrai",
    "seul",
    "prêt",
    "fatigué",
];
const NAMES: &[&str] = &["Marie", "Pierre", "Sophie", "Lucas", "Jean"];
const PLACES: &[&str] = &["Paris", "Lyon", "Marseille", "Bruxelles", "Genève"];
const ER_TRANS: &[&str] = &[
    "regarder",
    "chercher",
    "préparer",
    "trouver",
    "aimer",
    "porter",
    "garder",
    "fermer",
    "montrer",
    "donner",
    "raconter",
    "visiter",
    "dessiner",
    "écouter",
    "apporter",
    "casser",
    "cacher",
    "oublier",
];
const ER_INTR: &[&str] = &["parler", "travailler", "danser", "chanter", "marcher", "rester", "arriver", "pleurer"];
/// 3sg present and past participle of irregular transitive verbs.
const IRR_TRANS: &[(&str, &str)] = &[
    ("prend", "pris"),
    ("met", "mis"),
    ("lit", "lu"),
    ("voit", "vu"),
    ("fait", "fait"),
    ("écrit", "écrit"),
    ("boit", "bu"),
];
const IRR_INTR: &[&str] = &["dort", "part", "vient", "sort"];
const ETRE_PPAS: &[&str] = &["arrivé", "parti", "venu", "sorti", "entré", "resté", "tombé", "rentré", "monté"];
const ADV: &[&str] = &[
    "souvent",
    "toujours",
    "encore",
    "déjà",
    "vraiment",
    "beaucoup",
    "ici",
    "maintenant",
    "demain",
    "hier",
    "ensuite",
    "bientôt",
    "vite",
    "aussi",
];
const PRP: &[&str] = &["à", "dans", "avec", "pour", "chez", "sur", "sous", "devant", "pendant", "vers"];
const SAY: &[&str] = &["pense", "dit", "croit", "sait"];
const SYLL: &[&str] = &["ba", "lo", "ri", "ta", "mi", "po", "su", "ve", "ni", "ga", "de", "fo", "ru", "ki"];
const NOUN_SUFFIX: &[&str] = &["tion", "ment", "age", "isme", "ette", "eur", "ure", "ence"];

fn starts_with_vowel(s: &str) -> bool {
    s.chars().next().is_some_and(|c| "aeiouyéèêàâîôûh".contains(c))
}

fn plural(n: &str) -> String {
    if n.ends_with(['s', 'x', 'z']) {
        n.to_string()
    } else if n.ends_with("eau") || n.ends_with("eu") {
        format!("{n}x")
    } else if let Some(stem) = n.strip_suffix("al") {
        format!("{stem}aux")
    } else {
        format!("{n}s")
    }
}

fn adj_form(a: &str, fem: bool, pl: bool) -> String {
    let mut s = a.to_string();
    if fem && !s.ends_with('e') {
        s.push('e');
    }
    if pl {
        s = plural(&s);
    }
    s
}

struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    fn pick<'a>(&mut self, xs: &[&'a str]) -> &'a str {
        xs.choose(&mut self.rng).copied().unwrap_or_default()
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn unknown_noun(&mut self) -> String {
        let a = self.pick(SYLL);
        let b = self.pick(SYLL);
        let s = self.pick(NOUN_SUFFIX);
        format!("{a}{b}{s}")
    }

    /// Noun phrase; returns the words and whether it is feminine.
    fn noun_phrase(&mut self) -> Vec<Word> {
        let fem = self.chance(0.5);
        let pl = self.chance(0.2);
        let noun =
            if self.chance(0.1) { self.unknown_noun() } else { self.pick(if fem { FEM } else { MASC }).to_string() };
        let noun = if pl { plural(&noun) } else { noun };
        let mut out = Vec::new();
        let det = match (pl, self.rng.gen_range(0..5)) {
            (true, 0) => w(self.pick(&["deux", "trois", "quatre", "cinq"]), "NUM:crd:det"),
            (true, 1) => w("des", "DET:ind"),
            (true, 2) => w(if fem { "ces" } else { "mes" }, if fem { "DET:dem" } else { "DET:pos" }),
            (true, _) => w("les", "DET:def"),
            (false, 0) => w(if fem { "une" } else { "un" }, "DET:ind"),
            (false, 1) => w(if fem { "ma" } else { "mon" }, "DET:pos"),
            (false, 2) => w(if fem { "cette" } else { "ce" }, "DET:dem"),
            (false, _) => w(if fem { "la" } else { "le" }, "DET:def"),
        };
        out.push(det);
        if !pl && self.chance(0.08) {
            out.push(w(if fem { "bonne" } else { "bon" }, "ADJ"));
        }
        out.push(w(&noun, "NOM:com"));
        if self.chance(0.2) {
            out.push(w(&adj_form(self.pick(ADJ), fem, pl), "ADJ"));
        }
        out
    }

    fn object(&mut self) -> Vec<Word> {
        let mut np = self.noun_phrase();
        if self.chance(0.12) {
            // relative clause: "le livre que Marie lit"
            let (subj, _) = self.subject();
            np.push(w("que", "PRO:rel"));
            np.extend(subj);
            let (verb, _) = self.trans_verb();
            np.push(verb);
        }
        np
    }

    /// Subject and whether it is first person.
    fn subject(&mut self) -> (Vec<Word>, bool) {
        match self.rng.gen_range(0..6) {
            0 => (vec![w("je", "PRO:per:stj")], true),
            1 => (vec![w(self.pick(NAMES), "NOM:pro")], false),
            2 => (self.noun_phrase(), false),
            _ => (vec![w(self.pick(&["il", "elle", "on"]), "PRO:per:stj")], false),
        }
    }

    fn trans_verb(&mut self) -> (Word, &'static str) {
        if self.chance(0.6) {
            let v = self.pick(ER_TRANS);
            let stem = &v[..v.len() - 2];
            (w(&format!("{stem}e"), "VER:pres"), "er")
        } else {
            let (pres, _) = *IRR_TRANS.choose(&mut self.rng).unwrap_or(&IRR_TRANS[0]);
            (w(pres, "VER:pres"), "irr")
        }
    }

    fn participle(&mut self) -> String {
        if self.chance(0.6) {
            let v = self.pick(ER_TRANS);
            format!("{}é", &v[..v.len() - 2])
        } else {
            IRR_TRANS.choose(&mut self.rng).map_or("vu", |p| p.1).to_string()
        }
    }

    fn adjunct(&mut self) -> Vec<Word> {
        match self.rng.gen_range(0..4) {
            0 => vec![w(self.pick(ADV), "ADV")],
            1 => vec![w("à", "PRP"), w(self.pick(PLACES), "NOM:pro")],
            2 => {
                let mut v = vec![w(self.pick(PRP), "PRP")];
                v.extend(self.noun_phrase());
                v
            }
            _ => Vec::new(),
        }
    }

    fn clause(&mut self, s: &mut Sentence, depth: usize) {
        let (subj, first) = self.subject();
        s.extend(subj);
        let choice = self.rng.gen_range(0..10);
        match choice {
            0 | 1 => {
                let (v, kind) = self.trans_verb();
                if first && kind == "irr" {
                    s.push(w("regarde", "VER:pres"));
                } else {
                    s.push(v);
                }
                s.extend(self.object());
                s.extend(self.adjunct());
            }
            2 => {
                // object clitic: "il le voit", "elle l' aime"
                let (v, _) = self.trans_verb();
                s.push(w(self.pick(&["le", "la", "les"]), "PRO:per:objd"));
                s.push(v);
                s.extend(self.adjunct());
            }
            3 => {
                if first {
                    let v = self.pick(ER_INTR);
                    s.push(w(&format!("{}e", &v[..v.len() - 2]), "VER:pres"));
                } else if self.chance(0.5) {
                    s.push(w(self.pick(IRR_INTR), "VER:pres"));
                } else {
                    let v = self.pick(ER_INTR);
                    s.push(w(&format!("{}e", &v[..v.len() - 2]), "VER:pres"));
                }
                s.extend(self.adjunct());
            }
            4 => {
                s.push(w(if first { "ai" } else { "a" }, "VER:pres:aux"));
                s.push(w(&self.participle(), "VER:ppas"));
                s.extend(self.object());
            }
            5 => {
                s.push(w(if first { "suis" } else { "est" }, "VER:pres:aux"));
                s.push(w(self.pick(ETRE_PPAS), "VER:ppas"));
                s.extend(self.adjunct());
            }
            6 => {
                s.push(w(if first { "suis" } else { "est" }, "VER:pres"));
                s.push(w(self.pick(ADJ), "ADJ"));
            }
            7 => {
                s.push(w(if first { "ai" } else { "a" }, "VER:pres"));
                s.extend(self.noun_phrase());
            }
            8 => {
                let v = self.pick(ER_INTR);
                let form = format!("{}e", &v[..v.len() - 2]);
                s.push(w("ne", "ADV:neg"));
                s.push(w(&form, "VER:pres"));
                s.push(w("pas", "ADV:neg"));
                if self.chance(0.3) {
                    s.push(w("enfin", "ADV"));
                }
            }
            _ => {
                if first {
                    s.push(w("pense", "VER:pres"));
                } else {
                    s.push(w(self.pick(SAY), "VER:pres"));
                }
                if depth == 0 {
                    s.push(w("que", "CON:sub"));
                    self.clause(s, depth + 1);
                } else {
                    s.extend(self.object());
                }
            }
        }
    }

    fn sentence(&mut self, cfg: &SynthConfig) -> Sentence {
        loop {
            let mut s = Sentence::default();
            if self.chance(0.15) {
                match self.rng.gen_range(0..6) {
                    0 => s.push_mwu(&["du", "coup"], "ITJ", true),
                    1 => s.push_mwu(&["en", "fait"], "ITJ", true),
                    k => {
                        let m = ["bon", "ben", "alors", "enfin"][k - 2];
                        s.push(Word { free: false, ..w(m, "ITJ") });
                        s.markers.push(0..1);
                    }
                }
            }
            self.clause(&mut s, 0);
            match self.rng.gen_range(0..8) {
                0 => {
                    s.push(w("et", "CON:coo"));
                    self.clause(&mut s, 1);
                }
                1 => {
                    s.push_mwu(&["parce", "que"], "CON:sub", false);
                    self.clause(&mut s, 1);
                }
                2 => {
                    s.push(w("mais", "CON:coo"));
                    self.clause(&mut s, 1);
                }
                _ => {}
            }
            elide(&mut s.words);
            if !repeats(&s.words).is_empty() {
                continue;
            }
            if self.inject(&mut s, cfg) {
                return s;
            }
        }
    }

    /// Adds disfluencies; false when the result has a repetition other
    /// than the injected one.
    fn inject(&mut self, s: &mut Sentence, cfg: &SynthConfig) -> bool {
        let mut expected = Vec::new();
        if self.chance(cfg.repetition_rate) {
            let m = if self.chance(0.7) { 1 } else { 2 };
            let starts: Vec<usize> = (0..s.words.len().saturating_sub(m - 1))
                .filter(|&k| s.words[k..k + m].iter().all(|x| x.free))
                .collect();
            if let Some(&k) = starts.choose(&mut self.rng) {
                let mut copy: Vec<Word> = s.words[k..k + m].to_vec();
                for (j, word) in s.words[k..k + m].iter_mut().enumerate() {
                    word.dis = if j + 1 == m { "REP*".into() } else { "REP".into() };
                    word.free = false;
                }
                for word in &mut copy {
                    word.dis = "REP_".into();
                    word.free = false;
                }
                if self.chance(0.3) {
                    copy.insert(0, Word { dis: "FIL".into(), free: false, ..w("euh", "ITJ") });
                }
                s.insert(k + m, copy);
                expected.push((k, m));
            }
        }
        if self.chance(cfg.false_start_rate) {
            let targets: Vec<usize> = (0..s.words.len())
                .filter(|&k| s.words[k].free && s.words[k].text.chars().count() >= 4 && s.words[k].tag != "NOM:pro")
                .collect();
            if let Some(&k) = targets.choose(&mut self.rng) {
                let chars: Vec<char> = s.words[k].text.chars().collect();
                let len = self.rng.gen_range(2..chars.len().min(5));
                let frag = Word {
                    text: chars[..len].iter().collect(),
                    dis: "FST".into(),
                    false_start: true,
                    free: false,
                    ..w("", s.words[k].tag)
                };
                s.insert(k, vec![frag]);
            }
        }
        if self.chance(cfg.filled_pause_rate) {
            // not inside a multi-word unit
            let slots: Vec<usize> =
                (0..=s.words.len()).filter(|&k| !s.mwus.iter().any(|(r, _)| r.start < k && k < r.end)).collect();
            if let Some(&k) = slots.choose(&mut self.rng) {
                s.insert(k, vec![Word { dis: "FIL".into(), free: false, ..w("euh", "ITJ") }]);
            }
        }
        if self.chance(cfg.lengthening_rate) {
            let n = s.words.len();
            let targets: Vec<usize> = (0..n.saturating_sub(1)).filter(|&k| s.words[k].dis.is_empty()).collect();
            if let Some(&k) = targets.choose(&mut self.rng) {
                s.words[k].dis = "LEN".into();
                s.words[k].stretch = true;
            }
        }
        let want: Vec<(usize, usize)> = expected
            .iter()
            .map(|&(_, m)| {
                let k = s
                    .words
                    .iter()
                    .filter(|x| x.dis != "FIL")
                    .position(|x| x.dis.starts_with("REP"))
                    .unwrap_or_default();
                (k, m)
            })
            .collect();
        repeats(&s.words) == want
    }
}

/// French elision before a vowel: `je aime` → `j' aime`, `ce arbre` → `cet arbre`.
fn elide(words: &mut [Word]) {
    for k in 0..words.len().saturating_sub(1) {
        if !starts_with_vowel(&words[k + 1].text) {
            continue;
        }
        let short = match (words[k].text.as_str(), words[k].tag) {
            ("ce", "DET:dem") => "cet",
            ("ma", _) => "mon",
            ("je", _) => "j'",
            ("le" | "la", _) => "l'",
            ("ne", _) => "n'",
            ("que", _) => "qu'",
            _ => continue,
        };
        words[k].text = short.to_string();
    }
}

/// Maximal adjacent repetitions `(k, m)` over the non-filler words,
/// positions counted among those words.
fn repeats(words: &[Word]) -> Vec<(usize, usize)> {
    let content: Vec<String> = words.iter().filter(|x| x.dis != "FIL").map(|x| x.text.to_lowercase()).collect();
    let mut out = Vec::new();
    for k in 0..content.len() {
        for m in (1..=4).rev() {
            if k + 2 * m <= content.len() && content[k..k + m] == content[k + m..k + 2 * m] {
                out.push((k, m));
                break;
            }
        }
    }
    out
}

/// Generates the corpus: gold six-tier documents with timing and metadata.
pub fn generate(cfg: &SynthConfig) -> Vec<Document> {
    let mut gen = Gen { rng: ChaCha8Rng::seed_from_u64(cfg.seed) };
    let documents = cfg.documents.max(1);
    let per_doc = cfg.target_tokens.div_ceil(documents);
    (0..documents)
        .map(|d| {
            let mut sentences = Vec::new();
            let mut count = 0;
            while count < per_doc {
                let s = gen.sentence(cfg);
                count += s.words.len();
                sentences.push(s);
            }
            let meta = DocumentMeta {
                sample_id: format!("synth-{:03}", d + 1),
                subcorpus: format!("s{}", d % cfg.strata.max(1) + 1),
                pause_symbol: DEFAULT_PAUSE_SYMBOL.to_string(),
            };
            build(&mut gen, sentences, meta, &format!("spk{}", d + 1))
        })
        .collect()
}

fn build(gen: &mut Gen, sentences: Vec<Sentence>, meta: DocumentMeta, speaker: &str) -> Document {
    let mut tokens = Vec::new();
    let mut pos = Vec::new();
    let mut dis = Vec::new();
    let mut mwus = Vec::new();
    let mut markers = Vec::new();
    let mut t = 0.0;
    let pause = |tokens: &mut Vec<Token>, pos: &mut Vec<String>, dis: &mut Vec<String>, t: &mut f64, d: f64| {
        tokens.push(Token::pause(&meta.pause_symbol, *t, *t + d).with_speaker(speaker));
        pos.push(String::new());
        dis.push("SIL".to_string());
        *t += d;
    };
    for (si, s) in sentences.into_iter().enumerate() {
        if si > 0 {
            let d = gen.rng.gen_range(0.6..1.2);
            pause(&mut tokens, &mut pos, &mut dis, &mut t, d);
        }
        let mut index = Vec::with_capacity(s.words.len());
        let n = s.words.len();
        for (k, word) in s.words.into_iter().enumerate() {
            let chars = word.text.chars().count().max(1) as f64;
            let mut d = 0.06 * chars * gen.rng.gen_range(0.9..1.1);
            if word.stretch {
                d *= 5.0;
            }
            index.push(tokens.len());
            tokens.push(Token {
                false_start: word.false_start,
                ..Token::word(&word.text, t, t + d).with_speaker(speaker)
            });
            pos.push(word.tag.to_string());
            dis.push(word.dis);
            t += d;
            let inside_mwu = s.mwus.iter().any(|(r, _)| r.start <= k && k + 1 < r.end);
            if k + 1 < n && !word.stretch && !inside_mwu && gen.chance(0.05) {
                let d = gen.rng.gen_range(0.1..0.2);
                pause(&mut tokens, &mut pos, &mut dis, &mut t, d);
            }
        }
        for (r, tag) in s.mwus {
            mwus.push((index[r.start]..index[r.end - 1] + 1, tag));
        }
        for r in s.markers {
            markers.push(index[r.start]..index[r.end - 1] + 1);
        }
    }
    let mut doc = Document::new(tokens).expect("generated times are ordered");
    doc.meta = meta;
    for (i, (p, d)) in pos.into_iter().zip(dis).enumerate() {
        doc.tiers.pos_mwu[i].value = p.clone();
        doc.set_pos_min(i, p);
        doc.set_disfluency(i, d);
    }
    for (span, tag) in mwus {
        let tag: PosTag = tag.parse().expect("grammar tags are valid");
        doc.group_mwu(span, &tag).expect("units are contiguous");
    }
    doc.tiers.discourse = markers.into_iter().map(|r| TierValue::new(r, "DM")).collect();
    doc
}

const FUZZ_CHARS: &[char] = &[
    'a', 'b', 'e', 'z', 'A', 'é', 'ç', 'œ', '漢', '🙂', '"', '\'', '\\', '\t', '\n', ' ', ':', '*', '-', '/', '=', '#',
    '!',
];
const FUZZ_TAGS: &[&str] = &["ADJ", "NOM:com", "VER:pres:aux", "ITJ", "PRO:per:stj", "XYZ", "NOM:com:plur", ""];
const FUZZ_DISF: &[&str] = &["", "", "FIL", "REP*", "REP_", "REP-E", "LEN", "COM", "junk"];

/// A random, structurally valid document for format and robustness tests:
/// odd characters in texts and values, pauses, flags, speakers,
/// multi-token units, discourse spans and extra attribute columns. Tokens
/// never overlap and sit on a millisecond grid with positive durations.
pub fn random_document(seed: u64, max_tokens: usize) -> Document {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(0..=max_tokens);
    let mut t_ms: u64 = rng.gen_range(0..2000);
    let mut tokens = Vec::with_capacity(n);
    for _ in 0..n {
        let d = rng.gen_range(1..900);
        let (a, b) = (t_ms as f64 / 1000.0, (t_ms + d) as f64 / 1000.0);
        let speaker = ["", "A", "B"][rng.gen_range(0..3)];
        let tok = if rng.gen_bool(0.15) {
            Token::pause(DEFAULT_PAUSE_SYMBOL, a, b)
        } else {
            let len = rng.gen_range(1..6);
            let mut text: String = (0..len).map(|_| *FUZZ_CHARS.choose(&mut rng).unwrap_or(&'a')).collect();
            if text.trim().is_empty() || text == DEFAULT_PAUSE_SYMBOL {
                text.insert(0, 'x');
            }
            Token {
                false_start: rng.gen_bool(0.1),
                intra_word_pause: rng.gen_bool(0.05),
                attached: rng.gen_bool(0.1),
                ..Token::word(&text, a, b)
            }
        };
        tokens.push(tok.with_speaker(speaker));
        t_ms += d + if rng.gen_bool(0.5) { 0 } else { rng.gen_range(1..500) };
    }
    let mut doc = Document::new(tokens).expect("ordered by construction");
    for i in 0..n {
        doc.set_pos_min(i, *FUZZ_TAGS.choose(&mut rng).unwrap_or(&""));
        doc.set_disfluency(i, *FUZZ_DISF.choose(&mut rng).unwrap_or(&""));
        doc.tiers.pos_mwu[i].value = doc.pos_min(i).to_string();
    }
    let mut i = 0;
    while i + 1 < n {
        if rng.gen_bool(0.1) {
            let len = rng.gen_range(2..=3).min(n - i);
            let tag: PosTag = ["ADV", "CON:sub", "PRO:ind"][rng.gen_range(0..3)].parse().expect("valid");
            doc.group_mwu(i..i + len, &tag).expect("aligned");
            i += len;
        } else {
            i += 1;
        }
    }
    let mut i = 0;
    while i < n {
        if rng.gen_bool(0.1) {
            let len = rng.gen_range(1..=3).min(n - i);
            let value = ["DM", "CO", "x y", "\"q\""][rng.gen_range(0..4)];
            doc.tiers.discourse.push(TierValue::new(i..i + len, value));
            i += len;
        }
        i += 1;
    }
    if rng.gen_bool(0.3) {
        doc.attributes.push((
            "note".into(),
            (0..n).map(|k| if k % 3 == 0 { format!("n{k}\t!") } else { String::new() }).collect(),
        ));
    }
    if rng.gen_bool(0.3) {
        doc.meta.sample_id = format!("doc {seed}");
        doc.meta.subcorpus = "s\t1".into();
    }
    doc
}
