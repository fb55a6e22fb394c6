//! Log-space Viterbi and forward–backward over a score lattice.

use super::model::LabelMask;
use crate::scalar::{log_sum_exp, Scalar};

/// Scores for one sequence: `emit[t*l + y]` and, for `t ≥ 1`,
/// `trans[t*l*l + prev*l + y]`.
#[derive(Debug, Clone)]
pub(crate) struct Lattice<F> {
    pub(crate) n: usize,
    pub(crate) l: usize,
    pub(crate) emit: Vec<F>,
    pub(crate) trans: Vec<F>,
}

impl<F: Scalar> Lattice<F> {
    #[inline]
    pub(crate) fn tr(&self, t: usize, prev: usize, y: usize) -> F {
        self.trans[t * self.l * self.l + prev * self.l + y]
    }

    pub(crate) fn path_score(&self, path: &[usize]) -> F {
        let mut s = F::zero();
        for (t, &y) in path.iter().enumerate() {
            s = s + self.emit[t * self.l + y];
            if t > 0 {
                s = s + self.tr(t, path[t - 1], y);
            }
        }
        s
    }

    /// Emission scores with disallowed labels set to `-inf`. Mask entries that
    /// would forbid every label are ignored.
    fn masked_emit(&self, mask: Option<&LabelMask>) -> Vec<F> {
        let mut emit = self.emit.clone();
        let Some(mask) = mask else { return emit };
        for (t, allowed) in mask.iter().enumerate().take(self.n) {
            let Some(allowed) = allowed else { continue };
            if !allowed.iter().any(|&y| y < self.l) {
                continue;
            }
            let row = &mut emit[t * self.l..(t + 1) * self.l];
            for (y, e) in row.iter_mut().enumerate() {
                if !allowed.contains(&y) {
                    *e = F::neg_infinity();
                }
            }
        }
        emit
    }
}

pub(crate) fn viterbi<F: Scalar>(lat: &Lattice<F>, mask: Option<&LabelMask>) -> Vec<usize> {
    let (n, l) = (lat.n, lat.l);
    if n == 0 {
        return Vec::new();
    }
    let emit = lat.masked_emit(mask);
    let mut delta = emit[..l].to_vec();
    let mut back = vec![0usize; n * l];
    let mut next = vec![F::zero(); l];
    for t in 1..n {
        for y in 0..l {
            let mut best = F::neg_infinity();
            let mut arg = 0;
            for (prev, &d) in delta.iter().enumerate() {
                let s = d + lat.tr(t, prev, y);
                // strict comparison keeps the lowest index on ties
                if s > best {
                    best = s;
                    arg = prev;
                }
            }
            next[y] = best + emit[t * l + y];
            back[t * l + y] = arg;
        }
        std::mem::swap(&mut delta, &mut next);
    }
    let mut best = F::neg_infinity();
    let mut y = 0;
    for (k, &d) in delta.iter().enumerate() {
        if d > best {
            best = d;
            y = k;
        }
    }
    let mut path = vec![0; n];
    path[n - 1] = y;
    for t in (1..n).rev() {
        y = back[t * l + y];
        path[t - 1] = y;
    }
    path
}

/// Forward and backward log tables plus the log partition function.
pub(crate) struct ForwardBackward<F> {
    pub(crate) alpha: Vec<F>,
    pub(crate) beta: Vec<F>,
    pub(crate) emit: Vec<F>,
    pub(crate) log_z: F,
}

pub(crate) fn forward_backward<F: Scalar>(lat: &Lattice<F>, mask: Option<&LabelMask>) -> ForwardBackward<F> {
    let (n, l) = (lat.n, lat.l);
    let emit = lat.masked_emit(mask);
    let mut alpha = vec![F::neg_infinity(); n * l];
    let mut beta = vec![F::zero(); n * l];
    if n == 0 {
        return ForwardBackward { alpha, beta, emit, log_z: F::zero() };
    }
    alpha[..l].copy_from_slice(&emit[..l]);
    let mut buf = vec![F::zero(); l];
    for t in 1..n {
        for y in 0..l {
            for (prev, b) in buf.iter_mut().enumerate() {
                *b = alpha[(t - 1) * l + prev] + lat.tr(t, prev, y);
            }
            alpha[t * l + y] = log_sum_exp(&buf) + emit[t * l + y];
        }
    }
    for t in (0..n - 1).rev() {
        for prev in 0..l {
            for (y, b) in buf.iter_mut().enumerate() {
                *b = lat.tr(t + 1, prev, y) + emit[(t + 1) * l + y] + beta[(t + 1) * l + y];
            }
            beta[t * l + prev] = log_sum_exp(&buf);
        }
    }
    let log_z = log_sum_exp(&alpha[(n - 1) * l..]);
    ForwardBackward { alpha, beta, emit, log_z }
}

pub(crate) fn marginals<F: Scalar>(lat: &Lattice<F>, mask: Option<&LabelMask>) -> Vec<Vec<F>> {
    let fb = forward_backward(lat, mask);
    let l = lat.l;
    (0..lat.n).map(|t| (0..l).map(|y| (fb.alpha[t * l + y] + fb.beta[t * l + y] - fb.log_z).exp()).collect()).collect()
}
