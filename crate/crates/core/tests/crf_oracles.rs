use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use speechtag::crf::{
    extract_features, load_model, objective_and_gradient, save_model, train, CrfError, CrfModel, FeatureTemplate,
    LabeledSequence, Position, TrainingConfig,
};

fn templates() -> Vec<FeatureTemplate> {
    vec![
        FeatureTemplate::unigram("bias", &[(0, "bias")]),
        FeatureTemplate::unigram("a0", &[(0, "a")]),
        FeatureTemplate::unigram("a-1", &[(-1, "a")]),
        FeatureTemplate::unigram("ab", &[(0, "a"), (1, "b")]),
        FeatureTemplate::bigram("B", &[]),
        FeatureTemplate::bigram("Ba", &[(0, "a")]),
    ]
}

fn random_sequence(rng: &mut ChaCha8Rng, n: usize, labels: usize) -> LabeledSequence {
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

fn random_model(rng: &mut ChaCha8Rng, labels: usize, data: &[LabeledSequence]) -> CrfModel<f64> {
    let names = (0..labels).map(|i| format!("L{i}")).collect();
    let mut m = CrfModel::with_features(names, templates(), data).unwrap();
    for w in m.weights_mut() {
        *w = rng.gen_range(-2.0..2.0);
    }
    m
}

/// Path score summed straight from feature keys and weight lookups.
fn oracle_score(m: &CrfModel<f64>, seq: &LabeledSequence, path: &[usize]) -> f64 {
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

fn all_paths(n: usize, l: usize) -> Vec<Vec<usize>> {
    let total = l.pow(n as u32);
    (0..total)
        .map(|mut code| {
            let mut p = vec![0; n];
            for slot in p.iter_mut().rev() {
                *slot = code % l;
                code /= l;
            }
            p
        })
        .collect()
}

#[test]
fn viterbi_and_marginals_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let l = rng.gen_range(1..=5);
        let n = rng.gen_range(1..=6);
        let seq = random_sequence(&mut rng, n, l);
        let m = random_model(&mut rng, l, std::slice::from_ref(&seq));

        let paths = all_paths(n, l);
        let scores: Vec<f64> = paths.iter().map(|p| oracle_score(&m, &seq, p)).collect();
        let best = scores
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc })
            .0;
        assert_eq!(m.decode_indices(&seq, None), paths[best]);

        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = scores.iter().map(|s| (s - max).exp()).sum();
        let mut expected = vec![vec![0.0; l]; n];
        for (p, s) in paths.iter().zip(&scores) {
            let prob = (s - max).exp() / z;
            for (t, &y) in p.iter().enumerate() {
                expected[t][y] += prob;
            }
        }
        let got = m.marginals(&seq);
        for t in 0..n {
            assert!((got[t].iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for y in 0..l {
                assert!((got[t][y] - expected[t][y]).abs() < 1e-9, "{} vs {}", got[t][y], expected[t][y]);
            }
        }
    }
}

#[test]
fn zero_weights_uniform_and_lowest_label() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let seq = random_sequence(&mut rng, 5, 4);
    let names = (0..4).map(|i| format!("L{i}")).collect();
    let m = CrfModel::<f64>::with_features(names, templates(), std::slice::from_ref(&seq)).unwrap();
    assert_eq!(m.decode(&seq), vec!["L0"; 5]);
    for row in m.marginals(&seq) {
        for p in row {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }
    // uniform model: negLL = n log L
    let (v, _) = objective_and_gradient(&m, std::slice::from_ref(&seq), 1.0).unwrap();
    assert!((v - 5.0 * 4f64.ln()).abs() < 1e-9);
}

#[test]
fn single_label_and_single_position() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let seq = random_sequence(&mut rng, 3, 1);
    let m = random_model(&mut rng, 1, std::slice::from_ref(&seq));
    for row in m.marginals(&seq) {
        assert!((row[0] - 1.0).abs() < 1e-12);
    }
    let one = random_sequence(&mut rng, 1, 3);
    let m = random_model(&mut rng, 3, std::slice::from_ref(&one));
    let unigram: Vec<f64> = (0..3).map(|y| oracle_score(&m, &one, &[y])).collect();
    let arg = (0..3).fold(0, |b, y| if unigram[y] > unigram[b] { y } else { b });
    assert_eq!(m.decode_indices(&one, None), vec![arg]);
    assert!(m.decode(&LabeledSequence::default()).is_empty());
}

#[test]
fn constrained_decoding_respects_mask() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let seq = random_sequence(&mut rng, 5, 4);
        let m = random_model(&mut rng, 4, std::slice::from_ref(&seq));
        let mask = vec![None, Some(vec![2]), None, Some(vec![0, 3]), None];
        let path = m.decode_indices(&seq, Some(&mask));
        assert_eq!(path[1], 2);
        assert!(path[3] == 0 || path[3] == 3);
        // best constrained path by enumeration
        let best = all_paths(5, 4)
            .into_iter()
            .filter(|p| p[1] == 2 && (p[3] == 0 || p[3] == 3))
            .map(|p| (oracle_score(&m, &seq, &p), p))
            .fold((f64::NEG_INFINITY, vec![]), |a, b| if b.0 > a.0 { b } else { a });
        assert_eq!(path, best.1);
        let marg = m.marginals_constrained(&seq, &mask);
        assert!((marg[1][2] - 1.0).abs() < 1e-12);
        assert!(marg[3][1].abs() < 1e-12);
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let h = 1e-5;
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let data: Vec<_> = (0..3).map(|_| random_sequence(&mut rng, 4, 3)).collect();
        let mut m = random_model(&mut rng, 3, &data);
        for w in m.weights_mut() {
            *w *= 0.5;
        }
        let sigma = 1.5;
        let (_, grad) = objective_and_gradient(&m, &data, sigma).unwrap();
        let n = m.num_weights();
        let coords: Vec<usize> = (0..n.min(60)).map(|_| rng.gen_range(0..n)).collect();
        for &i in &coords {
            let orig = m.weights()[i];
            m.weights_mut()[i] = orig + h;
            let (fp, _) = objective_and_gradient(&m, &data, sigma).unwrap();
            m.weights_mut()[i] = orig - h;
            let (fm, _) = objective_and_gradient(&m, &data, sigma).unwrap();
            m.weights_mut()[i] = orig;
            let fd = (fp - fm) / (2.0 * h);
            worst = worst.max(rel_err(grad[i], fd));
            checked += 1;
        }
    }
    assert!(checked >= 50);
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn empty_batch_is_pure_regularizer() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let seq = random_sequence(&mut rng, 3, 2);
    let m = random_model(&mut rng, 2, std::slice::from_ref(&seq));
    let sigma = 2.0;
    let (v, g) = objective_and_gradient(&m, &[], sigma).unwrap();
    let w = m.weights();
    let expect: f64 = w.iter().map(|x| x * x).sum::<f64>() / (2.0 * sigma * sigma);
    assert!((v - expect).abs() < 1e-12);
    for (gi, wi) in g.iter().zip(w) {
        assert!((gi - wi / (sigma * sigma)).abs() < 1e-12);
    }
}

/// Deterministic label-given-word data: label is a fixed function of the word.
fn mapping_data(rng: &mut ChaCha8Rng, count: usize) -> Vec<LabeledSequence> {
    let words = ["le", "chat", "dort", "la", "maison", "est", "grande", "il", "mange", "bien"];
    let tags = ["DET", "NOM", "VER", "DET", "NOM", "VER", "ADJ", "PRO", "VER", "ADV"];
    (0..count)
        .map(|_| {
            let n = rng.gen_range(3..9);
            let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..words.len())).collect();
            let positions = idx
                .iter()
                .map(|&i| {
                    let mut p = Position::new();
                    p.insert("bias".into(), "1".into());
                    p.insert("a".into(), words[i].into());
                    p
                })
                .collect();
            LabeledSequence::labeled(positions, idx.iter().map(|&i| tags[i].to_string()).collect()).unwrap()
        })
        .collect()
}

#[test]
fn training_learns_deterministic_mapping() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let data = mapping_data(&mut rng, 500);
    let (train_set, test_set) = data.split_at(400);
    let (model, log) = train::<f64>(train_set, &templates(), &TrainingConfig::default()).unwrap();
    assert!(log.objectives.windows(2).all(|w| w[1] <= w[0]));
    assert!(log.objectives.last().unwrap() < &log.objectives[0]);
    let (mut right, mut total) = (0, 0);
    for seq in test_set {
        let pred = model.decode(seq);
        for (p, g) in pred.iter().zip(seq.labels.as_ref().unwrap()) {
            right += usize::from(p == g);
            total += 1;
        }
    }
    assert!(right as f64 / total as f64 >= 0.99);

    // same data, same config: identical weights
    let (again, _) = train::<f64>(train_set, &templates(), &TrainingConfig::default()).unwrap();
    assert_eq!(again.weights(), model.weights());
}

#[test]
fn degenerate_training() {
    let mut p = Position::new();
    p.insert("a".into(), "x".into());
    let one = LabeledSequence::labeled(vec![p], vec!["ONLY".into()]).unwrap();
    let (m, _) = train::<f64>(std::slice::from_ref(&one), &templates(), &TrainingConfig::default()).unwrap();
    assert_eq!(m.decode(&one), vec!["ONLY"]);
    assert_eq!(train::<f64>(&[], &templates(), &TrainingConfig::default()).unwrap_err(), CrfError::NoData);
    let unlabeled = LabeledSequence::new(vec![Position::new()]);
    assert_eq!(
        train::<f64>(&[unlabeled], &templates(), &TrainingConfig::default()).unwrap_err(),
        CrfError::MissingLabels(0)
    );
}

#[test]
fn strong_regularization_gives_majority_behaviour() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let data = mapping_data(&mut rng, 100);
    let cfg = TrainingConfig { l2_sigma: 1e-3, ..TrainingConfig::default() };
    let (m, _) = train::<f64>(&data, &templates(), &cfg).unwrap();
    assert!(m.weights().iter().all(|w| w.abs() < 1e-3));
    // VER is the most frequent label in the mapping
    let pred = m.decode(&data[0]);
    assert!(pred.iter().all(|p| p == "VER"), "{pred:?}");
}

#[test]
fn save_load_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let data = mapping_data(&mut rng, 60);
    let (model, _) = train::<f64>(&data, &templates(), &TrainingConfig::default()).unwrap();
    let bytes = save_model(&model);
    let loaded: CrfModel<f64> = load_model(&bytes).unwrap();
    assert_eq!(loaded, model);
    assert_eq!(save_model(&loaded), bytes);

    let fresh = mapping_data(&mut rng, 100);
    for seq in &fresh {
        assert_eq!(model.decode(seq), loaded.decode(seq));
    }

    let truncated = &bytes[..bytes.len() / 2];
    assert!(matches!(load_model::<f64>(truncated), Err(CrfError::CorruptModel { .. })));
    let text = String::from_utf8(bytes.clone()).unwrap().replacen("format\t1", "format\t9", 1);
    assert!(matches!(load_model::<f64>(text.as_bytes()), Err(CrfError::VersionMismatch { found: 9, expected: 1 })));
    assert!(load_model::<f64>(b"").is_err());
    assert!(load_model::<f64>(b"\xff\xfe").is_err());
}

#[test]
fn f32_model_agrees_with_f64_on_decode() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let data = mapping_data(&mut rng, 80);
    let (m64, _) = train::<f64>(&data, &templates(), &TrainingConfig::default()).unwrap();
    let (m32, _) = train::<f32>(&data, &templates(), &TrainingConfig::default()).unwrap();
    let loaded32: CrfModel<f32> = load_model(&save_model(&m32)).unwrap();
    for seq in &data[..20] {
        assert_eq!(m64.decode(seq), m32.decode(seq));
        assert_eq!(m32.decode(seq), loaded32.decode(seq));
    }
}
