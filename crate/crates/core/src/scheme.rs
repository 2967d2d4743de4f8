//! Monotone iteration between barriers for the regularized problem
//! `G[u] + c |u|^alpha u + p (u + delta)^-gamma = 0`, followed by `delta -> 0`.
//!
//! Each step solves
//! `G[w] + c |w|^alpha w - k (w + delta)^{1+alpha} = -k (w_n + delta)^{1+alpha} - p (w_n + delta)^-gamma`.
//! `k` is chosen per node and per step as the smallest value that makes the
//! right-hand side nonincreasing in `u` on `[w_n, inf)`:
//! `k_n = max(gamma p (w_n + delta)^{-gamma-1-alpha} / (1+alpha), |c|)`. This keeps
//! the ordering argument intact (`w_n` stays a sub-solution of every later
//! step) while avoiding the uniform bound in `delta^{-gamma-1-alpha}`, which
//! makes each step contract only by `1 - O(1/k)`.

use serde::Serialize;

use crate::barriers::BarrierSet;
use crate::error::{Error, Result};
use crate::grid_solver::{frozen_rhs, solve_frozen_with_stats, FrozenStepSpec};
use crate::problem::{GridFunction, ProblemSpec};
use crate::residual::residual_norm;

const K_MARGIN: f64 = 1.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchemeOptions {
    /// Stopping tolerance on `|w_{n+1} - w_n|_inf`.
    pub tol: f64,
    /// Newton tolerance of each frozen step (scaled residual).
    pub inner_tol: f64,
    /// Allowed decrease between consecutive iterates, relative to `max(1, |w|_inf)`.
    pub tol_mono: f64,
    /// Target unregularized residual for the `delta` ladder.
    pub residual_tol: f64,
    pub max_iter: usize,
    pub max_levels: usize,
    pub ladder_factor: f64,
}

impl Default for SchemeOptions {
    fn default() -> Self {
        SchemeOptions {
            tol: 1e-12,
            inner_tol: 1e-14,
            tol_mono: 1e-13,
            residual_tol: 1e-3,
            max_iter: 500,
            max_levels: 40,
            ladder_factor: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelStats {
    pub delta: f64,
    pub iterations: usize,
    pub newton_iterations: usize,
    /// `min over n, x of (w_{n+1} - w_n)`.
    pub min_margin: f64,
    /// Nodes (summed over iterates) outside `[sub - tol, sup + tol]`.
    pub barrier_violations: usize,
    /// Unregularized residual of `Z_delta`.
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SchemeTrace {
    pub delta_ladder: Vec<f64>,
    pub levels: Vec<LevelStats>,
    pub z: GridFunction,
    pub final_residual: f64,
    pub tol_mono: f64,
}

impl SchemeTrace {
    pub fn min_margin(&self) -> f64 {
        self.levels.iter().map(|l| l.min_margin).fold(f64::INFINITY, f64::min)
    }

    pub fn barrier_violations(&self) -> usize {
        self.levels.iter().map(|l| l.barrier_violations).sum()
    }
}

/// Result of the iteration at one fixed `delta`.
#[derive(Debug, Clone)]
pub struct FixedDelta {
    pub z: GridFunction,
    pub stats: LevelStats,
}

fn nodal_k(problem: &ProblemSpec, delta: f64, w: &GridFunction, p: &[f64], c: &[f64]) -> Vec<f64> {
    let (a, g) = (problem.alpha, problem.gamma);
    w.values()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let s = v.max(0.0) + delta;
            K_MARGIN * (g * p[i] * s.powf(-g - 1.0 - a) / (1.0 + a)).max(c[i].abs())
        })
        .collect()
}

/// Iterates from `start` (default: the sub-solution) until consecutive
/// iterates differ by at most `opts.tol`.
pub fn monotone_solve_fixed_delta(
    problem: &ProblemSpec,
    barriers: &BarrierSet,
    delta: f64,
    opts: &SchemeOptions,
    start: Option<&GridFunction>,
) -> Result<FixedDelta> {
    if !(delta > 0.0) {
        return Err(Error::Parameter(format!("delta must be > 0 (got {delta})")));
    }
    let nodes = barriers.sub.nodes();
    problem.validate_on(nodes)?;
    let p = problem.coeff_p.sample(nodes);
    let c = problem.coeff_c.sample(nodes);
    let interior = problem.interior_range(nodes.len());
    let mut w = start.cloned().unwrap_or_else(|| barriers.sub.clone());
    let mut stats = LevelStats {
        delta,
        iterations: 0,
        newton_iterations: 0,
        min_margin: f64::INFINITY,
        barrier_violations: 0,
        residual: f64::NAN,
    };
    for it in 1..=opts.max_iter {
        let k = nodal_k(problem, delta, &w, &p, &c);
        let rhs = frozen_rhs(problem, &k, delta, &w)?;
        let spec = FrozenStepSpec::new(problem.clone(), 0.0, delta, rhs).with_nodal_k(k);
        let solved = solve_frozen_with_stats(&spec, &w, opts.inner_tol)?;
        let next = solved.w;
        stats.newton_iterations += solved.newton_iterations;
        let scale = next.max_abs().max(1.0);
        let mut change = 0.0f64;
        for i in interior.clone() {
            let d = next.values()[i] - w.values()[i];
            change = change.max(d.abs());
            stats.min_margin = stats.min_margin.min(d);
            if d < -opts.tol_mono * scale {
                return Err(Error::Scheme(format!(
                    "monotonicity violated at node {i} (x = {}) in iteration {it}: w_(n+1) - w_n = {d:e}",
                    nodes[i]
                )));
            }
            let v = next.values()[i];
            if v < barriers.sub.values()[i] - opts.tol || v > barriers.sup.values()[i] + opts.tol {
                stats.barrier_violations += 1;
            }
        }
        w = next;
        stats.iterations = it;
        if change <= opts.tol {
            stats.residual = residual_norm(problem, &w)?;
            return Ok(FixedDelta { z: w, stats });
        }
    }
    Err(Error::NonConvergence {
        what: "monotone iteration",
        iterations: opts.max_iter,
        last: stats.min_margin,
    })
}

/// Default starting `delta`: `delta0 / 2` from the sub-solution lemma, capped
/// at `1e-2` when `gamma > 1`.
pub fn default_delta0(problem: &ProblemSpec, barriers: &BarrierSet) -> f64 {
    let half = barriers.constants.delta0.map(|d| 0.5 * d).unwrap_or(1e-2);
    if problem.gamma > 1.0 {
        half.min(1e-2)
    } else {
        half
    }
}

/// Runs the fixed-`delta` iteration along `delta_j = delta0 ladder_factor^j`,
/// warm-starting each level, until the unregularized residual of `Z_delta`
/// is at most `opts.residual_tol`.
pub fn delta_continuation(
    problem: &ProblemSpec,
    barriers: &BarrierSet,
    delta0: f64,
    opts: &SchemeOptions,
) -> Result<SchemeTrace> {
    let f = opts.ladder_factor;
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::Parameter(format!("ladder factor must lie in (0, 1) (got {f})")));
    }
    if !(delta0 > 0.0) {
        return Err(Error::Parameter(format!("delta0 must be > 0 (got {delta0})")));
    }
    if let Some(d0) = barriers.constants.delta0 {
        if delta0 > d0 {
            return Err(Error::Precondition(format!(
                "delta0 = {delta0} exceeds the sub-solution threshold {d0}"
            )));
        }
    }
    let mut ladder = vec![];
    let mut levels: Vec<LevelStats> = vec![];
    let mut z: Option<GridFunction> = None;
    let mut delta = delta0;
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    for _ in 0..opts.max_levels {
        let r = monotone_solve_fixed_delta(problem, barriers, delta, opts, z.as_ref())?;
        ladder.push(delta);
        let res = r.stats.residual;
        levels.push(r.stats);
        z = Some(r.z);
        if res <= opts.residual_tol {
            return Ok(SchemeTrace {
                delta_ladder: ladder,
                levels,
                z: z.unwrap(),
                final_residual: res,
                tol_mono: opts.tol_mono,
            });
        }
        if res < 0.999 * best {
            best = res;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 3 {
                break;
            }
        }
        delta *= f;
    }
    let history: Vec<String> = levels.iter().map(|l| format!("{:e}", l.residual)).collect();
    Err(Error::Scheme(format!(
        "delta ladder stagnated; residual history [{}]",
        history.join(", ")
    )))
}

/// Barriers plus the full `delta` ladder with default settings.
pub fn solve_scheme(problem: &ProblemSpec, n: usize, opts: &SchemeOptions) -> Result<(BarrierSet, SchemeTrace)> {
    let barriers = crate::barriers::build_scheme_barriers(problem, n, opts.inner_tol.max(1e-10))?;
    let delta0 = default_delta0(problem, &barriers);
    let trace = delta_continuation(problem, &barriers, delta0, opts)?;
    Ok((barriers, trace))
}
