//! Limited-memory BFGS with a backtracking Armijo line search.

use std::collections::VecDeque;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when the relative objective decrease of an accepted step falls
    /// below this value.
    pub tolerance: f64,
    pub armijo_c1: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig { memory: 6, max_iterations: 200, tolerance: 1e-5, armijo_c1: 1e-4, max_backtracks: 40 }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsResult<F> {
    pub x: Vec<F>,
    /// Objective at the start point and after every accepted step.
    pub objectives: Vec<F>,
    pub converged: bool,
}

fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Minimizes `f`, which returns the objective and its gradient.
pub fn minimize<F, E>(
    mut f: impl FnMut(&[F]) -> Result<(F, Vec<F>), E>,
    x0: Vec<F>,
    cfg: &LbfgsConfig,
) -> Result<LbfgsResult<F>, E>
where
    F: Scalar,
{
    let c1 = F::from_f64_lossy(cfg.armijo_c1);
    let tol = F::from_f64_lossy(cfg.tolerance);
    let half = F::from_f64_lossy(0.5);
    let mut x = x0;
    let (mut fx, mut g) = f(&x)?;
    let mut objectives = vec![fx];
    let mut history: VecDeque<(Vec<F>, Vec<F>, F)> = VecDeque::new();
    let mut converged = false;

    for _ in 0..cfg.max_iterations {
        let gnorm = dot(&g, &g).sqrt();
        if gnorm <= F::epsilon() {
            converged = true;
            break;
        }
        let mut d = two_loop(&g, &history);
        let mut slope = dot(&g, &d);
        if history.is_empty() || slope >= F::zero() {
            history.clear();
            d = g.iter().map(|&gi| -gi / gnorm).collect();
            slope = dot(&g, &d);
        }

        let mut step = F::one();
        let mut accepted = None;
        for _ in 0..cfg.max_backtracks {
            let xn: Vec<F> = x.iter().zip(&d).map(|(&xi, &di)| xi + step * di).collect();
            let (fn_, gn) = f(&xn)?;
            if fn_.is_finite() && fn_ <= fx + c1 * step * slope {
                accepted = Some((xn, fn_, gn));
                break;
            }
            step = step * half;
        }
        let Some((xn, fn_, gn)) = accepted else {
            // no decrease found along the search direction
            break;
        };

        let s: Vec<F> = xn.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<F> = gn.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > F::epsilon() * dot(&y, &y) {
            if history.len() == cfg.memory {
                history.pop_front();
            }
            history.push_back((s, y, F::one() / sy));
        }

        let scale = fx.abs().max(fn_.abs()).max(F::one());
        let rel = (fx - fn_) / scale;
        x = xn;
        fx = fn_;
        g = gn;
        objectives.push(fx);
        if rel < tol {
            converged = true;
            break;
        }
    }
    Ok(LbfgsResult { x, objectives, converged })
}

/// Two-loop recursion: returns `-H g` for the implicit inverse Hessian.
fn two_loop<F: Scalar>(g: &[F], history: &VecDeque<(Vec<F>, Vec<F>, F)>) -> Vec<F> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = *rho * dot(s, &q);
        for (qi, &yi) in q.iter_mut().zip(y) {
            *qi = *qi - a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi = *qi * gamma;
        }
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = *rho * dot(y, &q);
        for (qi, &si) in q.iter_mut().zip(s) {
            *qi = *qi + (a - b) * si;
        }
    }
    q.iter().map(|&v| -v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let rosen = |x: &[f64]| -> Result<(f64, Vec<f64>), ()> {
            let (a, b) = (x[0], x[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            Ok((f, g))
        };
        let cfg = LbfgsConfig { max_iterations: 500, tolerance: 1e-14, ..LbfgsConfig::default() };
        let r = minimize(rosen, vec![-1.2, 1.0], &cfg).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r.x);
        assert!(r.objectives.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn quadratic_in_f32() {
        let quad = |x: &[f32]| -> Result<(f32, Vec<f32>), ()> {
            Ok((x.iter().map(|v| (v - 3.0).powi(2)).sum(), x.iter().map(|v| 2.0 * (v - 3.0)).collect()))
        };
        let r = minimize(quad, vec![0.0f32; 4], &LbfgsConfig::default()).unwrap();
        assert!(r.x.iter().all(|v| (v - 3.0).abs() < 1e-3));
    }
}
