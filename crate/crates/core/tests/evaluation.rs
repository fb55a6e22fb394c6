use std::collections::BTreeSet;

use proptest::prelude::*;
use speechtag::annotation::{psu_segments, Document, Token};
use speechtag::crf::TrainingConfig;
use speechtag::evaluation::{cross_validate, select_units, split_folds, EvalConfig, EvalError};
use speechtag::lexicon::Lexicon;
use speechtag::synth::{generate, SynthConfig};

/// A document of `units` one-word units separated by 600 ms pauses.
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
    doc.meta.subcorpus = stratum.to_string();
    doc
}

#[test]
fn divisible_stratum() {
    let plan = split_folds(&[units_doc(70, "a"), units_doc(50, "a")], 10, 500, 3).unwrap();
    assert_eq!(plan.sizes()["a"], vec![12; 10]);
}

#[test]
fn thirteen_units() {
    let plan = split_folds(&[units_doc(13, "a")], 10, 500, 3).unwrap();
    let mut sizes = plan.sizes()["a"].clone();
    sizes.sort_unstable();
    assert_eq!(sizes, [1, 1, 1, 1, 1, 1, 1, 2, 2, 2]);
}

#[test]
fn too_few_units() {
    let err = split_folds(&[units_doc(5, "a")], 10, 500, 3).unwrap_err();
    assert_eq!(err, EvalError::TooFewUnits { stratum: "a".into(), units: 5, k: 10 });
}

#[test]
fn held_out_documents_rebuild_the_corpus() {
    let corpus = generate(&SynthConfig { target_tokens: 600, ..SynthConfig::default() });
    let plan = split_folds(&corpus, 4, 500, 1).unwrap();
    let mut words = 0;
    for fold in 0..4 {
        let test = select_units(&corpus, 500, |u| plan.assignment[&u] == fold);
        for doc in &test {
            assert!(speechtag::annotation::validate(doc).is_empty());
        }
        let units: usize = test.iter().map(|d| psu_segments(d, 500).len()).sum();
        assert_eq!(units, plan.units_in(fold).count());
        words += test.iter().flat_map(|d| &d.tokens).filter(|t| !t.is_pause).count();
    }
    let total = corpus.iter().flat_map(|d| &d.tokens).filter(|t| !t.is_pause).count();
    assert_eq!(words, total);
}

#[test]
fn two_fold_smoke() {
    let corpus = generate(&SynthConfig { target_tokens: 500, documents: 2, strata: 1, ..SynthConfig::default() });
    let cfg = EvalConfig {
        k: 2,
        training: TrainingConfig { max_iterations: 30, ..TrainingConfig::default() },
        ..EvalConfig::default()
    };
    let report = cross_validate::<f64>(&corpus, &Lexicon::sample(), &[], &cfg).unwrap();
    assert_eq!(report.folds.len(), 2);
    for m in report.folds.iter().chain([&report.mean]) {
        assert!(m.pos_precision_l1 >= m.pos_precision_l2 && m.pos_precision_l2 >= m.pos_precision_full);
        for v in [m.pos_precision_full, m.disf_detection_precision, m.disf_detection_recall] {
            assert!((0.0..=1.0).contains(&v));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn folds_partition_units(
        sizes in prop::collection::vec((3usize..40, 0usize..3), 1..6),
        k in 2usize..6,
        seed in any::<u64>(),
    ) {
        let corpus: Vec<Document> = sizes.iter().map(|&(n, s)| units_doc(n, &format!("s{s}"))).collect();
        let mut per_stratum = std::collections::BTreeMap::new();
        for &(n, s) in &sizes {
            *per_stratum.entry(format!("s{s}")).or_insert(0usize) += n;
        }
        match split_folds(&corpus, k, 500, seed) {
            Err(EvalError::TooFewUnits { .. }) => prop_assert!(per_stratum.values().any(|&n| n < k)),
            Err(e) => prop_assert!(false, "{e}"),
            Ok(plan) => {
                prop_assert!(per_stratum.values().all(|&n| n >= k));
                let all: BTreeSet<(usize, usize)> = corpus
                    .iter()
                    .enumerate()
                    .flat_map(|(d, doc)| (0..psu_segments(doc, 500).len()).map(move |u| (d, u)))
                    .collect();
                let assigned: BTreeSet<(usize, usize)> = plan.assignment.keys().copied().collect();
                prop_assert_eq!(&assigned, &all);
                prop_assert!(plan.assignment.values().all(|&f| f < k));
                for sizes in plan.sizes().values() {
                    let spread = sizes.iter().max().unwrap() - sizes.iter().min().unwrap();
                    prop_assert!(spread <= 1);
                }
                prop_assert_eq!(split_folds(&corpus, k, 500, seed).unwrap(), plan);
            }
        }
    }
}
