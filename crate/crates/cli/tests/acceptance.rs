//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p speechtag-cli --test acceptance`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use speechtag::annotation::{psu_segments, validate, Document, Token};
use speechtag::corpus_io::{
    add_document_tiers, document_from_textgrid, read_textgrid, read_tsv, write_textgrid, write_tsv, TextGrid,
};
use speechtag::crf::{
    default_templates, extract_features, objective_and_gradient, CrfModel, FeatureTemplate, LabeledSequence, Position,
    TrainingConfig,
};
use speechtag::evaluation::{cross_validate, split_folds, EvalConfig, Metrics};
use speechtag::lexicon::Lexicon;
use speechtag::pipeline::{
    annotate, gold_sequences, parse_rules, train_models, PipelineConfig, PipelineResources, SAMPLE_RULES,
};
use speechtag::synth::{generate, random_document, SynthConfig};
use speechtag::tagset::TagRegistry;
use tempfile::TempDir;

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    budget: Option<Duration>,
    check: fn() -> Outcome,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- CRF oracle

fn toy_templates() -> Vec<FeatureTemplate> {
    vec![
        FeatureTemplate::unigram("bias", &[(0, "bias")]),
        FeatureTemplate::unigram("a0", &[(0, "a")]),
        FeatureTemplate::unigram("a-1", &[(-1, "a")]),
        FeatureTemplate::unigram("ab", &[(0, "a"), (1, "b")]),
        FeatureTemplate::bigram("B", &[]),
        FeatureTemplate::bigram("Ba", &[(0, "a")]),
    ]
}

fn toy_sequence(rng: &mut ChaCha8Rng, n: usize, labels: usize) -> LabeledSequence {
    let positions: Vec<Position> = (0..n)
        .map(|_| {
            let mut p = Position::new();
            p.insert("bias".into(), "1".into());
            p.insert("a".into(), format!("x{}", rng.gen_range(0..4)));
            p.insert("b".into(), format!("y{}", rng.gen_range(0..2)));
            p
        })
        .collect();
    let gold = (0..n).map(|_| format!("L{}", rng.gen_range(0..labels))).collect();
    LabeledSequence::labeled(positions, gold).unwrap()
}

fn toy_model(rng: &mut ChaCha8Rng, labels: usize, data: &[LabeledSequence], scale: f64) -> CrfModel<f64> {
    let names = (0..labels).map(|i| format!("L{i}")).collect();
    let mut m = CrfModel::with_features(names, toy_templates(), data).unwrap();
    for w in m.weights_mut() {
        *w = rng.gen_range(-scale..scale);
    }
    m
}

/// Path score summed from feature keys and per-key weight lookups.
fn brute_score(m: &CrfModel<f64>, seq: &LabeledSequence, path: &[usize]) -> f64 {
    let feats = extract_features(seq, m.templates());
    let mut s = 0.0;
    for (t, f) in feats.iter().enumerate() {
        s += f.unigram.iter().map(|k| m.unigram_weight(k, path[t])).sum::<f64>();
        if t > 0 {
            s += f.bigram.iter().map(|k| m.bigram_weight(k, path[t - 1], path[t])).sum::<f64>();
        }
    }
    s
}

fn crf_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for trial in 0..200 {
        let l = rng.gen_range(1..=5);
        let n = rng.gen_range(1..=6);
        let seq = toy_sequence(&mut rng, n, l);
        let m = toy_model(&mut rng, l, std::slice::from_ref(&seq), 2.0);
        let paths: Vec<Vec<usize>> = (0..l.pow(n as u32))
            .map(|mut code| {
                let mut p = vec![0; n];
                for slot in p.iter_mut().rev() {
                    *slot = code % l;
                    code /= l;
                }
                p
            })
            .collect();
        let scores: Vec<f64> = paths.iter().map(|p| brute_score(&m, &seq, p)).collect();
        let (best, max) =
            scores.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc });
        let viterbi = m.decode_indices(&seq, None);
        ensure(viterbi == paths[best], || format!("trial {trial}: viterbi {viterbi:?} vs {:?}", paths[best]))?;
        let z: f64 = scores.iter().map(|s| (s - max).exp()).sum();
        let mut expected = vec![vec![0.0; l]; n];
        for (p, s) in paths.iter().zip(&scores) {
            for (t, &y) in p.iter().enumerate() {
                expected[t][y] += (s - max).exp() / z;
            }
        }
        for (got, want) in m.marginals(&seq).iter().zip(&expected) {
            for (a, b) in got.iter().zip(want) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    ensure(worst < 1e-9, || format!("marginal error {worst:e}"))?;
    Ok(format!("200 instances, viterbi exact, max marginal error {worst:.1e}"))
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut coords = 0;
    for _ in 0..20 {
        let count = rng.gen_range(1..=4);
        let data: Vec<_> = (0..count)
            .map(|_| {
                let n = rng.gen_range(1..=5);
                toy_sequence(&mut rng, n, 3)
            })
            .collect();
        let mut m = toy_model(&mut rng, 3, &data, 1.0);
        let sigma = rng.gen_range(0.5..3.0);
        let (_, grad) = objective_and_gradient(&m, &data, sigma).map_err(|e| e.to_string())?;
        for (i, &g) in grad.iter().enumerate() {
            let orig = m.weights()[i];
            m.weights_mut()[i] = orig + h;
            let (fp, _) = objective_and_gradient(&m, &data, sigma).unwrap();
            m.weights_mut()[i] = orig - h;
            let (fm, _) = objective_and_gradient(&m, &data, sigma).unwrap();
            m.weights_mut()[i] = orig;
            let fd = (fp - fm) / (2.0 * h);
            let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-3);
            worst = worst.max(rel);
            coords += 1;
        }
    }
    ensure(worst < 1e-4, || format!("max relative error {worst:e}"))?;
    Ok(format!("20 datasets, {coords} coordinates, max relative error {worst:.1e}"))
}

// ---------------------------------------------------------- training sanity

fn synth_corpus() -> Vec<Document> {
    generate(&SynthConfig::default())
}

fn level_order(m: &Metrics) -> bool {
    m.pos_precision_l1 >= m.pos_precision_l2 && m.pos_precision_l2 >= m.pos_precision_full
}

fn training_sanity() -> Outcome {
    let corpus = synth_corpus();
    let words = corpus.iter().flat_map(|d| &d.tokens).filter(|t| !t.is_pause).count();
    let disfluent = corpus
        .iter()
        .flat_map(|d| (0..d.len()).filter(move |&i| !d.tokens[i].is_pause && !d.disfluency(i).is_empty()))
        .count();
    ensure((4500..=5500).contains(&words), || format!("synthetic corpus has {words} tokens"))?;

    let cfg = PipelineConfig::default();
    let models =
        train_models::<f64>(&corpus, &Lexicon::sample(), &cfg, &default_templates(), &TrainingConfig::default())
            .map_err(|e| e.to_string())?;
    for (name, log) in &models.logs {
        for w in log.objectives.windows(2) {
            ensure(w[1] <= w[0], || format!("{name} objective rose {} -> {}", w[0], w[1]))?;
        }
    }

    let rules = parse_rules(SAMPLE_RULES).map_err(|e| e.to_string())?;
    let report = cross_validate::<f64>(&corpus, &Lexicon::sample(), &rules, &EvalConfig::default())
        .map_err(|e| e.to_string())?;
    let m = &report.mean;
    let fil = m.code_precision.get("FIL").copied().unwrap_or(f64::NAN);
    let rep = m.code_recall.get("REP").copied().unwrap_or(f64::NAN);
    let detail = format!(
        "{words} tokens, {:.1}% disfluent; 10-fold full precision {:.4}, FIL precision {fil:.4}, REP recall {rep:.4}",
        100.0 * disfluent as f64 / words as f64,
        m.pos_precision_full
    );
    ensure(m.pos_precision_full >= 0.97, || format!("full precision below 0.97: {detail}"))?;
    ensure(fil == 1.0, || format!("FIL precision below 1: {detail}"))?;
    ensure(rep >= 0.90, || format!("REP recall below 0.90: {detail}"))?;
    for (i, f) in report.folds.iter().enumerate() {
        ensure(level_order(f), || format!("fold {i} breaks L1 >= L2 >= full"))?;
    }
    Ok(detail)
}

fn level_monotonicity() -> Outcome {
    let mut runs = 0;
    for (seed, k, tokens) in [(3u64, 3usize, 1500usize), (8, 4, 2000), (13, 5, 2500)] {
        let corpus = generate(&SynthConfig { seed, target_tokens: tokens, ..SynthConfig::default() });
        let cfg = EvalConfig {
            k,
            seed,
            training: TrainingConfig { max_iterations: 40, ..TrainingConfig::default() },
            ..EvalConfig::default()
        };
        let report = cross_validate::<f64>(&corpus, &Lexicon::sample(), &[], &cfg).map_err(|e| e.to_string())?;
        for (i, m) in report.folds.iter().chain([&report.mean]).enumerate() {
            ensure(level_order(m), || {
                format!(
                    "seed {seed} run {i}: {} / {} / {}",
                    m.pos_precision_l1, m.pos_precision_l2, m.pos_precision_full
                )
            })?;
            runs += 1;
        }
    }
    Ok(format!("{runs} fold and mean scores ordered"))
}

// ------------------------------------------------------------- congruence

/// Word salad over the synthetic vocabulary with random pauses and timing.
fn salad(rng: &mut ChaCha8Rng, vocab: &[String]) -> Document {
    let n = rng.gen_range(0..40);
    let mut t = 0.0;
    let mut tokens = Vec::new();
    for _ in 0..n {
        let d = rng.gen_range(0.05..0.4);
        if rng.gen_bool(0.15) {
            tokens.push(Token::pause("_", t, t + d * 4.0));
            t += d * 4.0;
        } else {
            let mut tok = Token::word(vocab.choose(rng).unwrap(), t, t + d);
            tok.false_start = rng.gen_bool(0.03);
            tokens.push(tok);
            t += d;
        }
    }
    Document::new(tokens).unwrap()
}

fn congruence() -> Outcome {
    let cfg = PipelineConfig::default();
    let lexicon = Lexicon::sample();
    let models = train_models::<f64>(
        &generate(&SynthConfig { target_tokens: 2000, ..SynthConfig::default() }),
        &lexicon,
        &cfg,
        &default_templates(),
        &TrainingConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    let rules = parse_rules(SAMPLE_RULES).map_err(|e| e.to_string())?;
    let res = PipelineResources::new(lexicon, models.prelim, models.disfluency, models.final_model, rules, cfg)
        .map_err(|e| e.to_string())?;
    let vocab: Vec<String> = synth_corpus()
        .iter()
        .flat_map(|d| d.tokens.iter().filter(|t| !t.is_pause).map(|t| t.text.clone()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut tokens = 0;
    for i in 0..1000u64 {
        let input = if i % 2 == 0 { random_document(i, 40).unannotated() } else { salad(&mut rng, &vocab) };
        let out = annotate(&input, &res).map_err(|e| format!("input {i}: {e}"))?;
        let violations = validate(&out);
        ensure(violations.is_empty(), || format!("input {i}: {violations:?}"))?;
        ensure(out.tokens == input.tokens, || format!("input {i}: tokens changed"))?;
        tokens += out.len();
    }
    Ok(format!("1000 annotated inputs ({tokens} tokens), 0 violations"))
}

// ------------------------------------------------------------- round trips

fn mutate(rng: &mut ChaCha8Rng, bytes: &[u8]) -> Vec<u8> {
    let mut out = bytes.to_vec();
    for _ in 0..rng.gen_range(1..8) {
        if out.is_empty() {
            out.push(rng.gen());
            continue;
        }
        let i = rng.gen_range(0..out.len());
        match rng.gen_range(0..4) {
            0 => out[i] = rng.gen(),
            1 => {
                out.remove(i);
            }
            2 => out.insert(i, *b"\t\n\"= []<>".choose(rng).unwrap()),
            _ => out.truncate(i),
        }
    }
    out
}

fn round_trips() -> Outcome {
    let mut grids = Vec::new();
    let mut tsvs = Vec::new();
    for seed in 0..500u64 {
        let doc = random_document(seed, 40);
        let tsv = write_tsv(&doc);
        let back = read_tsv(&tsv).map_err(|e| format!("doc {seed}: {e}"))?;
        ensure(back == doc, || format!("doc {seed}: TSV round trip differs"))?;

        let mut grid = TextGrid::default();
        add_document_tiers(&mut grid, &doc).map_err(|e| format!("doc {seed}: {e}"))?;
        let bytes = write_textgrid(&grid).map_err(|e| e.to_string())?;
        let back = read_textgrid(&bytes)
            .and_then(|g| document_from_textgrid(&g, &doc.meta.pause_symbol))
            .map_err(|e| format!("doc {seed}: {e}"))?;
        ensure(back.tiers == doc.tiers && back.len() == doc.len(), || format!("doc {seed}: TextGrid tiers differ"))?;
        for (a, b) in back.tokens.iter().zip(&doc.tokens) {
            ensure(a.text == b.text && a.is_pause == b.is_pause, || format!("doc {seed}: token text differs"))?;
            ensure((a.t_min - b.t_min).abs() <= 1e-6 && (a.t_max - b.t_max).abs() <= 1e-6, || {
                format!("doc {seed}: time drift {} {}", a.t_min - b.t_min, a.t_max - b.t_max)
            })?;
        }
        grids.push(bytes);
        tsvs.push(tsv);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut errors, mut parsed) = (0, 0);
    let hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut panics = 0;
    for i in 0..10_000usize {
        let input = match i % 3 {
            0 => mutate(&mut rng, &grids[i % grids.len()]),
            1 => mutate(&mut rng, &tsvs[i % tsvs.len()]),
            _ => (0..rng.gen_range(0..300)).map(|_| rng.gen()).collect(),
        };
        match catch_unwind(AssertUnwindSafe(|| (read_textgrid(&input).is_ok(), read_tsv(&input).is_ok()))) {
            Ok((g, t)) => {
                parsed += usize::from(g) + usize::from(t);
                errors += usize::from(!g) + usize::from(!t);
            }
            Err(_) => panics += 1,
        }
    }
    std::panic::set_hook(hook);
    ensure(panics == 0, || format!("{panics} fuzz inputs panicked"))?;
    Ok(format!(
        "500 TSV exact, 500 TextGrid within 1e-6 s; 10000 fuzz inputs: {errors} errors, {parsed} parses, 0 panics"
    ))
}

// --------------------------------------------------------- fold partition

fn units_doc(units: usize, stratum: &str) -> Document {
    let mut tokens = Vec::new();
    let mut t = 0.0;
    for u in 0..units {
        if u > 0 {
            tokens.push(Token::pause("_", t, t + 0.6));
            t += 0.6;
        }
        tokens.push(Token::word("mot", t, t + 0.2));
        t += 0.2;
    }
    let mut doc = Document::new(tokens).unwrap();
    doc.meta.subcorpus = stratum.into();
    doc
}

fn fold_partition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut corpora = 0;
    for _ in 0..300 {
        let k = rng.gen_range(2..=10);
        let docs: Vec<Document> = (0..rng.gen_range(1..8))
            .map(|_| units_doc(rng.gen_range(1..60), &format!("s{}", rng.gen_range(0..3))))
            .collect();
        let mut per_stratum: BTreeMap<&str, usize> = BTreeMap::new();
        for d in &docs {
            *per_stratum.entry(&d.meta.subcorpus).or_default() += psu_segments(d, 500).len();
        }
        let seed = rng.gen();
        let plan = match split_folds(&docs, k, 500, seed) {
            Ok(plan) => plan,
            Err(_) if per_stratum.values().any(|&n| n < k) => continue,
            Err(e) => return Err(e.to_string()),
        };
        corpora += 1;
        let mut seen = BTreeSet::new();
        for (d, doc) in docs.iter().enumerate() {
            for u in 0..psu_segments(doc, 500).len() {
                let f = plan.assignment.get(&(d, u)).ok_or_else(|| format!("unit ({d},{u}) unassigned"))?;
                ensure(*f < k, || format!("fold {f} out of range"))?;
                seen.insert((d, u));
            }
        }
        ensure(seen.len() == plan.assignment.len(), || "assignment has extra units".into())?;
        for (stratum, sizes) in plan.sizes() {
            let spread = sizes.iter().max().unwrap() - sizes.iter().min().unwrap();
            ensure(spread <= 1, || format!("stratum {stratum}: sizes {sizes:?}"))?;
        }
        ensure(split_folds(&docs, k, 500, seed).map_err(|e| e.to_string())? == plan, || {
            "same seed gave a different plan".into()
        })?;
    }
    ensure(corpora >= 100, || format!("only {corpora} corpora were splittable"))?;
    Ok(format!("{corpora} random corpora, every unit once, spread <= 1, deterministic"))
}

// ------------------------------------------------------------ determinism

fn cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_speechtag"))
        .args(args)
        .env_remove("SPEECHTAG_RESOURCES")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
}

fn end_to_end(root: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let (gold, models, ann, tg, report) =
        (root.join("gold"), root.join("models"), root.join("ann"), root.join("tg"), root.join("report.txt"));
    cli(&["synth", "--out", &s(&gold), "--tokens", "1500", "--documents", "3", "--seed", "21"])?;
    cli(&["train", "--gold", &s(&gold), "--out", &s(&models)])?;
    cli(&["annotate", "--in", &s(&gold), "--models", &s(&models), "--out", &s(&ann), "--jobs", "2"])?;
    cli(&["convert", "--in", &s(&ann), "--to", "textgrid", "--out", &s(&tg)])?;
    cli(&["evaluate", "--gold", &s(&gold), "--k", "3", "--seed", "7", "--out", &s(&report), "--jobs", "3"])?;
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                files.insert(rel, fs::read(&path).map_err(|e| e.to_string())?);
            }
        }
    }
    Ok(files)
}

fn determinism() -> Outcome {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let first = end_to_end(a.path())?;
    let second = end_to_end(b.path())?;
    ensure(first.keys().eq(second.keys()), || "different output file sets".into())?;
    for (name, bytes) in &first {
        ensure(&second[name] == bytes, || format!("{name} differs between runs"))?;
    }
    let total: usize = first.values().map(Vec::len).sum();
    Ok(format!("{} files, {total} bytes identical across two runs", first.len()))
}

// -------------------------------------------------------------- throughput

fn throughput() -> Outcome {
    let corpus = synth_corpus();
    let seqs = gold_sequences(&corpus, &Lexicon::sample(), &PipelineConfig::default()).prelim;
    let labels: Vec<String> = TagRegistry::builtin().tags().map(str::to_string).collect();
    let mut model = CrfModel::<f64>::with_features(labels, default_templates(), &seqs).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for w in model.weights_mut() {
        *w = rng.gen_range(-1.0..1.0);
    }
    let start = Instant::now();
    let (mut tokens, mut checksum) = (0usize, 0usize);
    while start.elapsed() < Duration::from_secs(2) {
        for s in &seqs {
            checksum += model.decode_indices(s, None).iter().sum::<usize>();
            tokens += s.len();
        }
    }
    let rate = tokens as f64 / start.elapsed().as_secs_f64();
    std::hint::black_box(checksum);
    let detail = format!("{rate:.0} tokens/s with {} labels, {} weights", model.num_labels(), model.num_weights());
    ensure(rate >= 5000.0, || detail.clone())?;
    Ok(detail)
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { name: "crf-oracle", budget: Some(Duration::from_secs(60)), check: crf_oracle },
        Criterion { name: "gradient-check", budget: Some(Duration::from_secs(60)), check: gradient_check },
        Criterion { name: "training-sanity", budget: Some(Duration::from_secs(300)), check: training_sanity },
        Criterion { name: "level-monotonicity", budget: None, check: level_monotonicity },
        Criterion { name: "tier-congruence", budget: None, check: congruence },
        Criterion { name: "format-round-trips", budget: None, check: round_trips },
        Criterion { name: "fold-partition", budget: None, check: fold_partition },
        Criterion { name: "cli-determinism", budget: None, check: determinism },
        Criterion { name: "decode-throughput", budget: None, check: throughput },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for c in criteria.iter().filter(|c| filter.is_empty() || filter.iter().any(|f| c.name.contains(f.as_str()))) {
        let start = Instant::now();
        let mut outcome = catch_unwind(c.check).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        if let (Ok(detail), Some(budget)) = (&outcome, c.budget) {
            if took > budget {
                outcome = Err(format!("{detail}; took {took:.1?}, budget {budget:?}"));
            }
        }
        match outcome {
            Ok(detail) => println!("PASS  {:<20} {detail} [{took:.1?}]", c.name),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:<20} {why} [{took:.1?}]", c.name);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
