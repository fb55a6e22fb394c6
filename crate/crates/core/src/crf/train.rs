//! Regularized conditional log-likelihood and batch quasi-Newton training.

use std::collections::BTreeSet;

use super::features::{FeatureTemplate, LabeledSequence};
use super::inference::forward_backward;
use super::lbfgs::{minimize, LbfgsConfig};
use super::model::{Compiled, CrfModel};
use super::CrfError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    /// Gaussian prior width; the penalty is `|w|² / (2σ²)`.
    pub l2_sigma: f64,
    pub max_iterations: usize,
    /// Relative objective change below which training stops.
    pub convergence_tol: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig { l2_sigma: 1.0, max_iterations: 200, convergence_tol: 1e-5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    /// Objective at zero weights and after each accepted optimizer step.
    pub objectives: Vec<f64>,
    pub converged: bool,
    pub num_features: usize,
}

struct Example {
    compiled: Compiled,
    gold: Vec<usize>,
}

fn prepare<F: Scalar>(model: &CrfModel<F>, batch: &[LabeledSequence]) -> Result<Vec<Example>, CrfError> {
    batch
        .iter()
        .enumerate()
        .map(|(i, seq)| {
            let labels = seq.labels.as_ref().ok_or(CrfError::MissingLabels(i))?;
            if labels.len() != seq.len() {
                return Err(CrfError::LengthMismatch { positions: seq.len(), labels: labels.len() });
            }
            let gold = labels
                .iter()
                .map(|l| model.label_index(l).ok_or_else(|| CrfError::UnknownLabel(l.clone())))
                .collect::<Result<_, _>>()?;
            Ok(Example { compiled: model.compile(seq), gold })
        })
        .collect()
}

fn objective<F: Scalar>(
    model: &CrfModel<F>,
    examples: &[Example],
    weights: &[F],
    sigma: F,
) -> Result<(F, Vec<F>), CrfError> {
    let l = model.num_labels();
    let ll = l * l;
    let off = model.bigram_offset();
    let inv_var = F::one() / (sigma * sigma);
    let half = F::from_f64_lossy(0.5);

    let mut value = weights.iter().map(|&w| w * w).sum::<F>() * half * inv_var;
    let mut grad: Vec<F> = weights.iter().map(|&w| w * inv_var).collect();

    for ex in examples {
        let lat = model.lattice_with(&ex.compiled, weights);
        if lat.n == 0 {
            continue;
        }
        let fb = forward_backward(&lat, None);
        value = value + fb.log_z - lat.path_score(&ex.gold);

        for (t, feats) in ex.compiled.unigram.iter().enumerate() {
            let probs: Vec<F> = (0..l).map(|y| (fb.alpha[t * l + y] + fb.beta[t * l + y] - fb.log_z).exp()).collect();
            for &f in feats {
                let row = &mut grad[f as usize * l..(f as usize + 1) * l];
                for (g, &p) in row.iter_mut().zip(&probs) {
                    *g = *g + p;
                }
                row[ex.gold[t]] = row[ex.gold[t]] - F::one();
            }
        }
        for t in 1..lat.n {
            let feats = &ex.compiled.bigram[t];
            if feats.is_empty() {
                continue;
            }
            let mut pair = vec![F::zero(); ll];
            for prev in 0..l {
                let a = fb.alpha[(t - 1) * l + prev];
                for y in 0..l {
                    pair[prev * l + y] =
                        (a + lat.tr(t, prev, y) + fb.emit[t * l + y] + fb.beta[t * l + y] - fb.log_z).exp();
                }
            }
            let gold_pair = ex.gold[t - 1] * l + ex.gold[t];
            for &g in feats {
                let start = off + g as usize * ll;
                let block = &mut grad[start..start + ll];
                for (gv, &p) in block.iter_mut().zip(&pair) {
                    *gv = *gv + p;
                }
                block[gold_pair] = block[gold_pair] - F::one();
            }
        }
    }
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(CrfError::NonFinite);
    }
    Ok((value, grad))
}

/// Negative log-likelihood of `batch` plus `|w|²/(2σ²)`, and its gradient
/// (model expectation − empirical count + w/σ²) at the model's weights.
pub fn objective_and_gradient<F: Scalar>(
    model: &CrfModel<F>,
    batch: &[LabeledSequence],
    l2_sigma: F,
) -> Result<(F, Vec<F>), CrfError> {
    let examples = prepare(model, batch)?;
    objective(model, &examples, model.weights(), l2_sigma)
}

/// Trains a model on `data`. Labels are the sorted set of gold labels; the
/// feature space is every key the templates produce on `data`.
pub fn train<F: Scalar>(
    data: &[LabeledSequence],
    templates: &[FeatureTemplate],
    cfg: &TrainingConfig,
) -> Result<(CrfModel<F>, TrainingLog), CrfError> {
    if data.is_empty() {
        return Err(CrfError::NoData);
    }
    let mut labels = BTreeSet::new();
    for (i, seq) in data.iter().enumerate() {
        labels.extend(seq.labels.as_ref().ok_or(CrfError::MissingLabels(i))?.iter().cloned());
    }
    let mut model = CrfModel::with_features(labels.into_iter().collect(), templates.to_vec(), data)?;
    let examples = prepare(&model, data)?;
    let sigma = F::from_f64_lossy(cfg.l2_sigma);
    let lbfgs =
        LbfgsConfig { max_iterations: cfg.max_iterations, tolerance: cfg.convergence_tol, ..LbfgsConfig::default() };
    let start = vec![F::zero(); model.num_weights()];
    let result = minimize(|w: &[F]| objective(&model, &examples, w, sigma), start, &lbfgs)?;
    let log = TrainingLog {
        objectives: result.objectives.iter().map(|v| v.to_f64_lossy()).collect(),
        converged: result.converged,
        num_features: model.num_weights(),
    };
    model.set_weights(result.x);
    Ok((model, log))
}
