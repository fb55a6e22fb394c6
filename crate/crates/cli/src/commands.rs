use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use rayon::prelude::*;
use speechtag::annotation::{validate, Document};
use speechtag::corpus_io::{
    add_document_tiers, document_from_textgrid, read_textgrid, read_tsv, transcription_intervals, write_textgrid,
    write_tsv, TextGrid,
};
use speechtag::crf::{default_templates, load_model, save_model, TrainingConfig};
use speechtag::evaluation::{cross_validate, format_report, EvalConfig};
use speechtag::lexicon::{load_lexicon, Lexicon};
use speechtag::pipeline::{
    annotate, annotate_intervals, parse_rules, train_models, PipelineConfig, PipelineResources, PostRule, SAMPLE_RULES,
};
use speechtag::synth::{generate, SynthConfig};
use speechtag::tokenizer::TokenizerConfig;
use speechtag::CrfModel;

use crate::config::{pick, read, require, resource, FileConfig};
use crate::{Cli, Command, Resources, Training, UsageError};

const DEFAULT_TRANSCRIPTION_TIER: &str = "transcription";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    TextGrid,
    Tsv,
}

impl Format {
    fn parse(name: &str, flag: &str) -> anyhow::Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "textgrid" => Ok(Format::TextGrid),
            "tsv" => Ok(Format::Tsv),
            other => Err(UsageError(format!("--{flag}: unknown format {other:?} (expected textgrid or tsv)")).into()),
        }
    }

    fn of(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "textgrid" => Some(Format::TextGrid),
            "tsv" => Some(Format::Tsv),
            _ => None,
        }
    }

    fn extension(self) -> &'static str {
        match self {
            Format::TextGrid => "TextGrid",
            Format::Tsv => "tsv",
        }
    }
}

/// Settings shared by the commands that read transcriptions.
struct Setup {
    lexicon: Lexicon,
    post_rules: Vec<PostRule>,
    pipeline: PipelineConfig,
    transcription_tier: String,
    speaker_tier: Option<String>,
    jobs: usize,
}

fn setup(flags: Resources, file: &mut FileConfig) -> anyhow::Result<Setup> {
    let mut lexicon_files = flags.lexicon;
    if lexicon_files.is_empty() {
        lexicon_files = file.lexicon.take().unwrap_or_default();
    }
    if lexicon_files.is_empty() {
        lexicon_files.extend(resource("lexicon.tsv"));
    }
    let lexicon = if lexicon_files.is_empty() {
        Lexicon::sample()
    } else {
        let paths: Vec<&Path> = lexicon_files.iter().map(PathBuf::as_path).collect();
        load_lexicon(&paths)?
    };

    let rules_path = pick(flags.rules, &mut file.rules).or_else(|| resource("post_rules.txt"));
    let post_rules = match rules_path {
        Some(p) => {
            let text = String::from_utf8(read(&p)?).with_context(|| format!("{} is not UTF-8", p.display()))?;
            parse_rules(&text).with_context(|| p.display().to_string())?
        }
        None => parse_rules(SAMPLE_RULES)?,
    };

    let tok_config = pick(flags.tokenizer_config, &mut file.tokenizer_config).or_else(|| resource("tokenizer.conf"));
    let tok_rules = pick(flags.tokenizer_rules, &mut file.tokenizer_rules).or_else(|| resource("tokenizer_rules.tsv"));
    let mut tokenizer = match (&tok_config, &tok_rules) {
        (None, None) => TokenizerConfig::sample(),
        _ => TokenizerConfig::load(tok_config.as_deref(), tok_rules.as_deref())?,
    };
    if let Some(ms) = pick(flags.psu_threshold, &mut file.psu_threshold) {
        tokenizer.psu_threshold_ms = ms;
    }

    let jobs = pick(flags.jobs, &mut file.jobs).unwrap_or(1);
    if jobs == 0 {
        return Err(UsageError("--jobs must be at least 1".into()).into());
    }
    Ok(Setup {
        lexicon,
        post_rules,
        pipeline: PipelineConfig { tokenizer, ..PipelineConfig::default() },
        transcription_tier: pick(flags.transcription_tier, &mut file.transcription_tier)
            .unwrap_or_else(|| DEFAULT_TRANSCRIPTION_TIER.into()),
        speaker_tier: pick(flags.speaker_tier, &mut file.speaker_tier),
        jobs,
    })
}

fn training_config(flags: Training, file: &mut FileConfig) -> anyhow::Result<TrainingConfig> {
    let mut cfg = TrainingConfig::default();
    if let Some(n) = pick(flags.max_iterations, &mut file.max_iterations) {
        cfg.max_iterations = n;
    }
    if let Some(s) = pick(flags.l2_sigma, &mut file.l2_sigma) {
        if !(s.is_finite() && s > 0.0) {
            return Err(UsageError(format!("--l2-sigma must be positive, got {s}")).into());
        }
        cfg.l2_sigma = s;
    }
    Ok(cfg)
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    Ok(pool.install(f))
}

/// Files named by `paths`; directories contribute their `.tsv` and
/// `.TextGrid` files, sorted by name.
fn expand(paths: &[PathBuf], flag: &str) -> anyhow::Result<Vec<PathBuf>> {
    if paths.is_empty() {
        return Err(UsageError(format!("missing required --{flag}")).into());
    }
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("reading {}", p.display()))?
                .map(|e| e.map(|e| e.path()))
                .collect::<Result<_, _>>()?;
            found.retain(|f| f.is_file() && Format::of(f).is_some());
            found.sort();
            out.extend(found);
        } else if p.is_file() {
            if Format::of(p).is_none() {
                return Err(UsageError(format!("--{flag} {}: expected a .TextGrid or .tsv file", p.display())).into());
            }
            out.push(p.clone());
        } else {
            return Err(UsageError(format!("--{flag} {}: no such file or directory", p.display())).into());
        }
    }
    if out.is_empty() {
        bail!("no .TextGrid or .tsv files under --{flag}");
    }
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Reads an annotated document (TSV, or a TextGrid with the six tiers).
fn load_document(path: &Path, pause_symbol: &str) -> anyhow::Result<Document> {
    let bytes = read(path)?;
    let mut doc = match Format::of(path) {
        Some(Format::Tsv) => read_tsv(&bytes),
        _ => read_textgrid(&bytes).and_then(|g| document_from_textgrid(&g, pause_symbol)),
    }
    .with_context(|| path.display().to_string())?;
    if doc.meta.sample_id.is_empty() {
        doc.meta.sample_id = stem(path);
    }
    Ok(doc)
}

fn load_gold(gold: &Path, pause_symbol: &str) -> anyhow::Result<Vec<Document>> {
    expand(&[gold.to_path_buf()], "gold")?.iter().map(|p| load_document(p, pause_symbol)).collect()
}

fn load_models(dir: &Path) -> anyhow::Result<(CrfModel, Option<CrfModel>, CrfModel)> {
    let model = |name: &str| -> anyhow::Result<CrfModel> {
        let path = dir.join(name);
        load_model(&read(&path)?).with_context(|| path.display().to_string())
    };
    let disfluency = dir.join("disfluency.model");
    let disfluency = if disfluency.exists() { Some(model("disfluency.model")?) } else { None };
    Ok((model("prelim.model")?, disfluency, model("final.model")?))
}

/// Refuses to write over any of `inputs` and creates the output directory.
fn prepare_out(out: &Path, targets: &[PathBuf], inputs: &[PathBuf]) -> anyhow::Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let canon = |p: &Path| fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
    let inputs: BTreeSet<PathBuf> = inputs.iter().map(|p| canon(p)).collect();
    let mut seen = BTreeSet::new();
    for t in targets {
        let c = canon(t);
        if inputs.contains(&c) {
            return Err(UsageError(format!("--out would overwrite input {}", t.display())).into());
        }
        if !seen.insert(c) {
            return Err(UsageError(format!("two inputs map to the same output {}", t.display())).into());
        }
    }
    Ok(())
}

fn write(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let mut file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Annotate { inputs, models, out, format, resources } => {
            let inputs = if inputs.is_empty() { file.inputs.take().unwrap_or_default() } else { inputs };
            let models = pick(models, &mut file.models).or_else(|| resource("models"));
            let models = require(models, "models")?;
            let out = require(pick(out, &mut file.out), "out")?;
            let format = pick(format, &mut file.format).map(|f| Format::parse(&f, "format")).transpose()?;
            let setup = setup(resources, &mut file)?;
            let files = expand(&inputs, "in")?;
            let (prelim, disfluency, final_model) = load_models(&models)?;
            let res = PipelineResources::new(
                setup.lexicon.clone(),
                prelim,
                disfluency,
                final_model,
                setup.post_rules.clone(),
                setup.pipeline.clone(),
            )?;
            let formats: Vec<Format> = files.iter().map(|f| format.or(Format::of(f)).unwrap()).collect();
            let targets: Vec<PathBuf> = files
                .iter()
                .zip(&formats)
                .map(|(f, fmt)| out.join(format!("{}.{}", stem(f), fmt.extension())))
                .collect();
            prepare_out(&out, &targets, &files)?;
            let outputs = in_pool(setup.jobs, || {
                files
                    .par_iter()
                    .zip(&formats)
                    .map(|(f, &fmt)| annotate_file(f, fmt, &res, &setup))
                    .collect::<anyhow::Result<Vec<_>>>()
            })??;
            for (t, bytes) in targets.iter().zip(outputs) {
                write(t, &bytes)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Train { gold, out, resources, training } => {
            let gold = require(pick(gold, &mut file.gold), "gold")?;
            let out = require(pick(out, &mut file.out), "out")?;
            let train_cfg = training_config(training, &mut file)?;
            let setup = setup(resources, &mut file)?;
            let docs = load_gold(&gold, &setup.pipeline.tokenizer.pause_symbol)?;
            let models = in_pool(setup.jobs, || {
                train_models::<f64>(&docs, &setup.lexicon, &setup.pipeline, &default_templates(), &train_cfg)
            })??;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            write(&out.join("prelim.model"), &save_model(&models.prelim))?;
            write(&out.join("final.model"), &save_model(&models.final_model))?;
            let stale = out.join("disfluency.model");
            match &models.disfluency {
                Some(m) => write(&stale, &save_model(m))?,
                None if stale.exists() => fs::remove_file(&stale)?,
                None => {}
            }
            let mut log = String::new();
            log.push_str(&format!("documents={}\n", docs.len()));
            for (name, l) in &models.logs {
                log.push_str(&format!(
                    "{name}.features={}\n{name}.iterations={}\n{name}.converged={}\n{name}.objective={:.9e}\n",
                    l.num_features,
                    l.objectives.len().saturating_sub(1),
                    l.converged,
                    l.objectives.last().copied().unwrap_or(f64::NAN),
                ));
            }
            write(&out.join("training.log"), log.as_bytes())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate { gold, k, seed, out, resources, training } => {
            let gold = require(pick(gold, &mut file.gold), "gold")?;
            let out = pick(out, &mut file.out);
            let train_cfg = training_config(training, &mut file)?;
            let defaults = EvalConfig::default();
            let k = pick(k, &mut file.k).unwrap_or(defaults.k);
            if k < 2 {
                return Err(UsageError(format!("--k must be at least 2, got {k}")).into());
            }
            let seed = pick(seed, &mut file.seed).unwrap_or(defaults.seed);
            let setup = setup(resources, &mut file)?;
            let docs = load_gold(&gold, &setup.pipeline.tokenizer.pause_symbol)?;
            let cfg = EvalConfig { k, seed, pipeline: setup.pipeline.clone(), training: train_cfg, ..defaults };
            let report =
                in_pool(setup.jobs, || cross_validate::<f64>(&docs, &setup.lexicon, &setup.post_rules, &cfg))??;
            let text = format_report(&report);
            match out {
                Some(p) => write(&p, text.as_bytes())?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Convert { inputs, to, out, resources } => {
            let inputs = if inputs.is_empty() { file.inputs.take().unwrap_or_default() } else { inputs };
            let to = Format::parse(&require(pick(to, &mut file.to), "to")?, "to")?;
            let out = require(pick(out, &mut file.out), "out")?;
            let setup = setup(resources, &mut file)?;
            let files = expand(&inputs, "in")?;
            let targets: Vec<PathBuf> =
                files.iter().map(|f| out.join(format!("{}.{}", stem(f), to.extension()))).collect();
            prepare_out(&out, &targets, &files)?;
            for (f, t) in files.iter().zip(&targets) {
                let doc = load_document(f, &setup.pipeline.tokenizer.pause_symbol)?;
                write(t, &serialize(&doc, None, to)?)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { inputs, resources } => {
            let inputs = if inputs.is_empty() { file.inputs.take().unwrap_or_default() } else { inputs };
            let setup = setup(resources, &mut file)?;
            let files = expand(&inputs, "in")?;
            let mut bad = 0usize;
            for f in &files {
                let doc = load_document(f, &setup.pipeline.tokenizer.pause_symbol)?;
                let violations = validate(&doc);
                for v in &violations {
                    println!("{}: {v}", f.display());
                }
                bad += violations.len();
            }
            if bad > 0 {
                eprintln!("{bad} violation(s)");
                return Ok(ExitCode::from(1));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth { out, seed, tokens, documents, strata } => {
            let out = require(pick(out, &mut file.out), "out")?;
            let d = SynthConfig::default();
            let cfg = SynthConfig {
                seed: pick(seed, &mut file.seed).unwrap_or(d.seed),
                target_tokens: pick(tokens, &mut file.tokens).unwrap_or(d.target_tokens),
                documents: pick(documents, &mut file.documents).unwrap_or(d.documents),
                strata: pick(strata, &mut file.strata).unwrap_or(d.strata),
                ..d
            };
            if cfg.documents == 0 || cfg.strata == 0 {
                return Err(UsageError("--documents and --strata must be at least 1".into()).into());
            }
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            for doc in generate(&cfg) {
                write(&out.join(format!("{}.tsv", doc.meta.sample_id)), &write_tsv(&doc))?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn serialize(doc: &Document, grid: Option<TextGrid>, fmt: Format) -> anyhow::Result<Vec<u8>> {
    Ok(match fmt {
        Format::Tsv => write_tsv(doc),
        Format::TextGrid => {
            let mut grid = grid.unwrap_or_default();
            add_document_tiers(&mut grid, doc)?;
            write_textgrid(&grid)?
        }
    })
}

/// Annotates one input file and serializes the result.
fn annotate_file(path: &Path, fmt: Format, res: &PipelineResources, setup: &Setup) -> anyhow::Result<Vec<u8>> {
    let ctx = || path.display().to_string();
    let (doc, grid) = match read_input(path, setup)? {
        Input::Intervals(grid, intervals) => {
            let mut doc = annotate_intervals(&intervals, res).with_context(ctx)?;
            doc.meta.sample_id = stem(path);
            (doc, Some(grid))
        }
        Input::Document(doc, grid) => (annotate(&doc.unannotated(), res).with_context(ctx)?, grid),
    };
    serialize(&doc, grid, fmt).with_context(ctx)
}

#[allow(clippy::large_enum_variant)]
enum Input {
    /// A TextGrid with a transcription tier.
    Intervals(TextGrid, Vec<speechtag::tokenizer::SourceInterval>),
    /// A tokenized document, with the grid it came from if any.
    Document(Document, Option<TextGrid>),
}

fn read_input(path: &Path, setup: &Setup) -> anyhow::Result<Input> {
    let pause = &setup.pipeline.tokenizer.pause_symbol;
    if Format::of(path) == Some(Format::Tsv) {
        return Ok(Input::Document(load_document(path, pause)?, None));
    }
    let grid = read_textgrid(&read(path)?).with_context(|| path.display().to_string())?;
    if grid.tier(&setup.transcription_tier).is_some() {
        let intervals = transcription_intervals(&grid, &setup.transcription_tier, setup.speaker_tier.as_deref())
            .with_context(|| path.display().to_string())?;
        return Ok(Input::Intervals(grid, intervals));
    }
    let mut doc = document_from_textgrid(&grid, pause).with_context(|| {
        format!("{}: no {:?} tier and no annotation tiers", path.display(), setup.transcription_tier)
    })?;
    doc.meta.sample_id = stem(path);
    Ok(Input::Document(doc, Some(grid)))
}
