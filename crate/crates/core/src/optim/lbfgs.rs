use std::collections::VecDeque;

use super::{EvalError, Objective, OptimError};

/// Plain L-BFGS options. The problems here are unconstrained; the history
/// length and strong-Wolfe constants follow standard practice.
#[derive(Debug, Clone, Copy)]
pub struct LbfgsOptions {
    pub max_iter: usize,
    pub history: usize,
    /// Stop when the gradient max-norm falls below this.
    pub g_tol: f64,
    /// Stop when the relative loss decrease over one iteration falls below
    /// this.
    pub f_tol: f64,
    pub c1: f64,
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            max_iter: 5000,
            history: 10,
            g_tol: 1e-9,
            f_tol: 1e-12,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    LossDecreaseTolerance,
    MaxIterations,
    LineSearchFailed,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::GradientTolerance => "gradient_tolerance",
            Termination::LossDecreaseTolerance => "loss_decrease_tolerance",
            Termination::MaxIterations => "max_iterations",
            Termination::LineSearchFailed => "line_search_failed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub final_loss: f64,
    pub iterations: usize,
    pub termination: Termination,
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

/// Minimizes `objective` from `theta` in place.
///
/// Accepted steps satisfy the strong Wolfe conditions, so the loss sequence
/// is strictly decreasing. Trial points where the objective fails to
/// evaluate (e.g. an inverted configuration) are treated as +inf and the
/// line search backs off; only a failure at the current iterate is fatal.
pub fn lbfgs_minimize<O: Objective>(
    objective: &mut O,
    theta: &mut [f64],
    opts: &LbfgsOptions,
    mut on_iter: impl FnMut(usize, f64),
) -> Result<LbfgsOutcome, OptimError> {
    let n = theta.len();
    let mut g = vec![0.0; n];
    let mut f = objective.eval(theta, &mut g)?;
    if !f.is_finite() || !g.iter().all(|v| v.is_finite()) {
        return Err(OptimError::Objective(EvalError(
            "non-finite objective at the initial point".into(),
        )));
    }

    let mut pairs: VecDeque<Pair> = VecDeque::new();
    let mut d = vec![0.0; n];
    let mut alphas = vec![0.0; opts.history];

    for iter in 0..opts.max_iter {
        if inf_norm(&g) < opts.g_tol {
            return Ok(LbfgsOutcome {
                final_loss: f,
                iterations: iter,
                termination: Termination::GradientTolerance,
            });
        }

        // Two-loop recursion: d = -H·g.
        d.copy_from_slice(&g);
        for (k, p) in pairs.iter().enumerate().rev() {
            let a = p.rho * dot(&p.s, &d);
            alphas[k] = a;
            for (di, yi) in d.iter_mut().zip(&p.y) {
                *di -= a * yi;
            }
        }
        if let Some(last) = pairs.back() {
            let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
            for di in d.iter_mut() {
                *di *= gamma;
            }
        }
        for (k, p) in pairs.iter().enumerate() {
            let beta = p.rho * dot(&p.y, &d);
            let a = alphas[k];
            for (di, si) in d.iter_mut().zip(&p.s) {
                *di += (a - beta) * si;
            }
        }
        for di in d.iter_mut() {
            *di = -*di;
        }

        let mut dphi0 = dot(&g, &d);
        if dphi0 >= 0.0 {
            // Stale curvature produced a non-descent direction; restart.
            pairs.clear();
            for (di, gi) in d.iter_mut().zip(&g) {
                *di = -gi;
            }
            dphi0 = dot(&g, &d);
            if dphi0 == 0.0 {
                return Ok(LbfgsOutcome {
                    final_loss: f,
                    iterations: iter,
                    termination: Termination::GradientTolerance,
                });
            }
        }

        let alpha_init = if pairs.is_empty() {
            (1.0 / inf_norm(&g)).min(1.0)
        } else {
            1.0
        };

        let g_prev = g.clone();
        match line_search(objective, theta, &d, f, dphi0, alpha_init, opts, &mut g) {
            Ok((alpha, f_new)) => {
                let mut s = d.clone();
                for si in s.iter_mut() {
                    *si *= alpha;
                }
                for (ti, si) in theta.iter_mut().zip(&s) {
                    *ti += si;
                }
                let y: Vec<f64> = g.iter().zip(&g_prev).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                // Curvature filter: never store a pair that would break
                // positive definiteness.
                if sy > 1e-12 {
                    if pairs.len() == opts.history {
                        pairs.pop_front();
                    }
                    pairs.push_back(Pair {
                        rho: 1.0 / sy,
                        s,
                        y,
                    });
                }
                let rel_decrease = (f - f_new) / f.abs().max(1e-300);
                f = f_new;
                on_iter(iter, f);
                if rel_decrease < opts.f_tol {
                    return Ok(LbfgsOutcome {
                        final_loss: f,
                        iterations: iter + 1,
                        termination: Termination::LossDecreaseTolerance,
                    });
                }
            }
            Err(best) => {
                // No Wolfe point found; keep the best strictly-improving
                // trial if one was seen, then stop.
                if let Some((theta_best, f_best)) = best {
                    if f_best < f {
                        theta.copy_from_slice(&theta_best);
                        f = f_best;
                    }
                }
                return Ok(LbfgsOutcome {
                    final_loss: f,
                    iterations: iter,
                    termination: Termination::LineSearchFailed,
                });
            }
        }
    }

    Ok(LbfgsOutcome {
        final_loss: f,
        iterations: opts.max_iter,
        termination: Termination::MaxIterations,
    })
}

/// Strong-Wolfe line search (bracket + zoom with safeguarded cubic
/// interpolation). On success returns `(alpha, f_new)` and leaves the
/// gradient at the accepted point in `g_out`; on failure returns the best
/// strictly-improving trial, if any.
#[allow(clippy::too_many_arguments)]
fn line_search<O: Objective>(
    objective: &mut O,
    theta: &[f64],
    d: &[f64],
    f0: f64,
    dphi0: f64,
    alpha_init: f64,
    opts: &LbfgsOptions,
    g_out: &mut [f64],
) -> Result<(f64, f64), Option<(Vec<f64>, f64)>> {
    let n = theta.len();
    let mut x = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut best: Option<(Vec<f64>, f64)> = None;

    let mut phi = |alpha: f64,
                   g: &mut [f64],
                   best: &mut Option<(Vec<f64>, f64)>,
                   x: &mut [f64]|
     -> (f64, f64) {
        for ((xi, &ti), &di) in x.iter_mut().zip(theta).zip(d) {
            *xi = ti + alpha * di;
        }
        match objective.eval(x, g) {
            Ok(f) if f.is_finite() => {
                let dphi = dot(g, d);
                if best.as_ref().is_none_or(|(_, fb)| f < *fb) {
                    *best = Some((x.to_vec(), f));
                }
                (f, dphi)
            }
            _ => (f64::INFINITY, f64::NAN),
        }
    };

    let mut alpha_prev = 0.0;
    let mut f_prev = f0;
    let mut dphi_prev = dphi0;
    let mut alpha = alpha_init;
    let mut bracket: Option<(f64, f64, f64, f64, f64, f64)> = None;

    for i in 0..opts.max_line_search {
        let (fa, dphia) = phi(alpha, &mut g, &mut best, &mut x);
        if fa > f0 + opts.c1 * alpha * dphi0 || (fa >= f_prev && i > 0) {
            bracket = Some((alpha_prev, f_prev, dphi_prev, alpha, fa, dphia));
            break;
        }
        if dphia.abs() <= -opts.c2 * dphi0 {
            g_out.copy_from_slice(&g);
            return Ok((alpha, fa));
        }
        if dphia >= 0.0 {
            bracket = Some((alpha, fa, dphia, alpha_prev, f_prev, dphi_prev));
            break;
        }
        alpha_prev = alpha;
        f_prev = fa;
        dphi_prev = dphia;
        alpha *= 2.0;
    }

    let Some((mut lo, mut f_lo, mut dphi_lo, mut hi, mut f_hi, mut dphi_hi)) = bracket else {
        return Err(best);
    };

    for _ in 0..opts.max_line_search {
        let aj = interpolate(lo, f_lo, dphi_lo, hi, f_hi, dphi_hi);
        let (fj, dphij) = phi(aj, &mut g, &mut best, &mut x);
        if fj > f0 + opts.c1 * aj * dphi0 || fj >= f_lo {
            hi = aj;
            f_hi = fj;
            dphi_hi = dphij;
        } else {
            if dphij.abs() <= -opts.c2 * dphi0 {
                g_out.copy_from_slice(&g);
                return Ok((aj, fj));
            }
            if dphij * (hi - lo) >= 0.0 {
                hi = lo;
                f_hi = f_lo;
                dphi_hi = dphi_lo;
            }
            lo = aj;
            f_lo = fj;
            dphi_lo = dphij;
        }
        if (hi - lo).abs() < 1e-16 * lo.abs().max(1.0) {
            break;
        }
    }
    Err(best)
}

/// Safeguarded cubic interpolation inside the zoom bracket; falls back to
/// bisection when the data is unusable (inf/nan trial values).
fn interpolate(lo: f64, f_lo: f64, dphi_lo: f64, hi: f64, f_hi: f64, dphi_hi: f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    if !(f_lo.is_finite() && f_hi.is_finite() && dphi_lo.is_finite() && dphi_hi.is_finite()) {
        return mid;
    }
    let d1 = dphi_lo + dphi_hi - 3.0 * (f_lo - f_hi) / (lo - hi);
    let disc = d1 * d1 - dphi_lo * dphi_hi;
    if disc < 0.0 {
        return mid;
    }
    let d2 = disc.sqrt() * (hi - lo).signum();
    let cand = hi - (hi - lo) * (dphi_hi + d2 - d1) / (dphi_hi - dphi_lo + 2.0 * d2);
    let (a, b) = if lo < hi { (lo, hi) } else { (hi, lo) };
    let margin = 0.05 * (b - a);
    if !cand.is_finite() || cand < a + margin || cand > b - margin {
        mid
    } else {
        cand
    }
}
