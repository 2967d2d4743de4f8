//! Newton solver for one frozen step of the monotone scheme:
//!
//! ```text
//! |w'|^alpha (F(D^2 w) + h w') + c |w|^alpha w - k (w + delta)^{1+alpha} = rhs,   w = 0 on the boundary.
//! ```
//!
//! `k` is nodal. With `k = 0`, `delta = 0` this is the plain inhomogeneous
//! problem used by the eigenvalue iteration.

use crate::error::{Error, Result};
use crate::problem::{GridFunction, ProblemSpec};
use crate::residual::{DiscreteOperator, Tridiag};

pub const DEFAULT_GRAD_REG: f64 = 1e-8;
const MAX_NEWTON: usize = 100;
const MAX_HALVINGS: usize = 40;
const CONTINUATION_START: f64 = 1e-2;
const ROUNDOFF_SLACK: f64 = 1e3;

#[derive(Debug, Clone)]
pub struct FrozenStepSpec {
    pub problem: ProblemSpec,
    /// Nodal values of `k`; a single value means a constant.
    pub k_coeff: Vec<f64>,
    pub delta: f64,
    pub rhs: GridFunction,
    pub grad_reg: f64,
}

impl FrozenStepSpec {
    pub fn new(problem: ProblemSpec, k: f64, delta: f64, rhs: GridFunction) -> Self {
        FrozenStepSpec {
            problem,
            k_coeff: vec![k],
            delta,
            rhs,
            grad_reg: DEFAULT_GRAD_REG,
        }
    }

    pub fn with_nodal_k(mut self, k: Vec<f64>) -> Self {
        self.k_coeff = k;
        self
    }

    fn k_at(&self, i: usize) -> f64 {
        if self.k_coeff.len() == 1 {
            self.k_coeff[0]
        } else {
            self.k_coeff[i]
        }
    }

    fn validate(&self) -> Result<()> {
        self.problem.validate_on(self.rhs.nodes())?;
        if self.problem.alpha < 0.0 {
            return Err(Error::Parameter(format!(
                "the grid solver handles alpha >= 0 only (got {})",
                self.problem.alpha
            )));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::Parameter(format!("delta must be >= 0 (got {})", self.delta)));
        }
        if !(self.grad_reg > 0.0) {
            return Err(Error::Parameter("gradient regularization must be > 0".into()));
        }
        let n = self.rhs.len();
        if self.k_coeff.len() != 1 && self.k_coeff.len() != n {
            return Err(Error::Parameter(format!(
                "k has {} values for {n} nodes",
                self.k_coeff.len()
            )));
        }
        if self.k_coeff.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
            return Err(Error::Parameter("k must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// Solution of a frozen step with Newton statistics.
#[derive(Debug, Clone)]
pub struct FrozenSolve {
    pub w: GridFunction,
    pub newton_iterations: usize,
    /// Scaled max-norm residual at exit.
    pub residual: f64,
}

/// `f_delta(x, u) = -k (u + delta)^{1+alpha} - p(x) (u + delta)^-gamma`, nodewise.
pub fn frozen_rhs(problem: &ProblemSpec, k: &[f64], delta: f64, w_prev: &GridFunction) -> Result<GridFunction> {
    let n = w_prev.len();
    if k.len() != 1 && k.len() != n {
        return Err(Error::Parameter(format!("k has {} values for {n} nodes", k.len())));
    }
    let p = problem.coeff_p.sample(w_prev.nodes());
    let (alpha, gamma) = (problem.alpha, problem.gamma);
    let interior = problem.interior_range(n);
    let mut out = vec![0.0; n];
    for i in 0..n {
        let u = w_prev.values()[i];
        let ki = if k.len() == 1 { k[0] } else { k[i] };
        let s = u + delta;
        let v = -ki * s.powf(1.0 + alpha) - p[i] * s.powf(-gamma);
        if interior.contains(&i) {
            if u < 0.0 || !v.is_finite() {
                return Err(Error::Singularity {
                    node: i,
                    x: w_prev.nodes()[i],
                    value: u,
                });
            }
            out[i] = v;
        } else {
            out[i] = if v.is_finite() { v } else { 0.0 };
        }
    }
    w_prev.with_values(out)
}

/// The scheme's constant `k` bound `max{gamma/(1+alpha) |p|_inf / delta^{alpha+gamma+1}, |c|_inf}`.
pub fn paper_k_bound(problem: &ProblemSpec, delta: f64, nodes: &[f64]) -> f64 {
    let pmax = problem.coeff_p.sample(nodes).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cmax = problem.coeff_c.sample(nodes).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let a = problem.alpha;
    (problem.gamma / (1.0 + a) * pmax / delta.powf(a + problem.gamma + 1.0)).max(cmax)
}

struct System<'a> {
    spec: &'a FrozenStepSpec,
    op: DiscreteOperator,
    c: Vec<f64>,
}

impl System<'_> {
    /// Residual (unknown rows), row scales, and optionally the Jacobian.
    fn eval(&self, w: &[f64], jac: Option<&mut Tridiag>) -> (Vec<f64>, Vec<f64>) {
        let alpha = self.spec.problem.alpha;
        let delta = self.spec.delta;
        let n = w.len();
        let rhs = self.spec.rhs.values();
        let mut local = Tridiag::zeros(if jac.is_some() { 0 } else { n });
        let jac: &mut Tridiag = match jac {
            Some(j) => j,
            None => &mut local,
        };
        let mut f = self.op.apply(w, Some(&mut *jac));
        let mut scale = vec![1.0; n];
        for i in self.op.interior.clone() {
            let k = self.spec.k_at(i);
            let s = w[i] + delta;
            let cw = self.c[i] * w[i].abs().powf(alpha) * w[i];
            let kw = if k != 0.0 { k * s.powf(1.0 + alpha) } else { 0.0 };
            f[i] += cw - kw - rhs[i];
            // The operator part cancels between neighbours; |diag| |w| bounds its round-off.
            scale[i] = 1.0 + rhs[i].abs() + kw.abs() + cw.abs() + jac.diag[i].abs() * w[i].abs();
            let mut d = self.c[i] * (1.0 + alpha) * w[i].abs().powf(alpha);
            if k != 0.0 {
                d -= k * (1.0 + alpha) * s.powf(alpha);
            }
            jac.diag[i] += d;
        }
        let interior = self.op.interior.clone();
        for i in 0..n {
            if !interior.contains(&i) {
                f[i] = w[i];
                jac.diag[i] = 1.0;
                jac.lower[i] = 0.0;
                jac.upper[i] = 0.0;
            }
        }
        (f, scale)
    }

    fn feasible(&self, w: &[f64]) -> bool {
        self.op.interior.clone().all(|i| {
            w[i].is_finite() && (self.spec.k_at(i) == 0.0 || w[i] + self.spec.delta > 0.0)
        })
    }

    /// Takes the full Newton step if it does not increase the residual;
    /// returns the new scaled residual when taken.
    fn polish(&self, w: &mut Vec<f64>, jac: &Tridiag, neg: &[f64], scale: &[f64], norm0: f64) -> Option<f64> {
        let step = jac.solve(neg)?;
        let trial: Vec<f64> = w.iter().zip(&step).map(|(a, d)| a + d).collect();
        if !self.feasible(&trial) {
            return None;
        }
        let (ft, _) = self.eval(&trial, None);
        let norm: f64 = ft.iter().zip(scale).map(|(a, s)| (a / s).powi(2)).sum();
        if !(norm <= norm0) {
            return None;
        }
        *w = trial;
        Some(ft.iter().zip(scale).fold(0.0f64, |m, (a, s)| m.max(a.abs() / s)))
    }

    fn newton(&self, w: &mut Vec<f64>, tol: f64) -> Result<(usize, f64)> {
        let n = w.len();
        for it in 0..MAX_NEWTON {
            let mut jac = Tridiag::zeros(n);
            let (f, scale) = self.eval(w, Some(&mut jac));
            let scaled = f.iter().zip(&scale).fold(0.0f64, |m, (a, s)| m.max(a.abs() / s));
            let neg: Vec<f64> = f.iter().map(|v| -v).collect();
            let norm0: f64 = f.iter().zip(&scale).map(|(a, s)| (a / s).powi(2)).sum();
            if scaled <= tol {
                // The row scales contain |diag| |w| ~ |w| / h^2, so a scaled
                // residual at `tol` still leaves O(tol / h^2) error in `w`;
                // one more full step removes most of it.
                return Ok((it, self.polish(w, &jac, &neg, &scale, norm0).unwrap_or(scaled)));
            }
            let step = jac.solve(&neg).ok_or(Error::Stagnation { residual: scaled })?;
            let mut lambda = 1.0;
            let mut accepted = None;
            for _ in 0..=MAX_HALVINGS {
                let trial: Vec<f64> = w.iter().zip(&step).map(|(a, d)| a + lambda * d).collect();
                if self.feasible(&trial) {
                    let (ft, _) = self.eval(&trial, None);
                    let norm: f64 = ft.iter().zip(&scale).map(|(a, s)| (a / s).powi(2)).sum();
                    if norm.is_finite() && norm <= (1.0 - 1e-4 * lambda) * norm0 {
                        accepted = Some(trial);
                        break;
                    }
                }
                lambda *= 0.5;
            }
            let Some(trial) = accepted else {
                // No descent left: accept a residual within round-off of the target.
                if scaled <= ROUNDOFF_SLACK * tol {
                    return Ok((it, scaled));
                }
                return Err(Error::Stagnation { residual: scaled });
            };
            let wmax = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let dmax = step.iter().fold(0.0f64, |m, v| m.max(v.abs())) * lambda;
            *w = trial;
            if lambda == 1.0 && dmax <= 1e-14 * wmax.max(f64::MIN_POSITIVE) {
                let (f, scale) = self.eval(w, None);
                let scaled = f.iter().zip(&scale).fold(0.0f64, |m, (a, s)| m.max(a.abs() / s));
                return Ok((it + 1, scaled));
            }
        }
        let (f, scale) = self.eval(w, None);
        let scaled = f.iter().zip(&scale).fold(0.0f64, |m, (a, s)| m.max(a.abs() / s));
        Err(Error::NonConvergence {
            what: "Newton iteration",
            iterations: MAX_NEWTON,
            last: scaled,
        })
    }
}

/// Solves the frozen step; see [`solve_frozen_with_stats`].
pub fn solve_frozen(spec: &FrozenStepSpec, init: &GridFunction, tol: f64) -> Result<GridFunction> {
    Ok(solve_frozen_with_stats(spec, init, tol)?.w)
}

/// Damped Newton on the discrete system. The residual is measured row by
/// row relative to `1 + |rhs| + |k (w+delta)^{1+alpha}| + |c w^{1+alpha}|`
/// plus the size of the operator's diagonal times `|w|`.
/// For `alpha > 0` the flux is regularized by `grad_reg`; if Newton fails
/// at the target regularization it is driven down from `1e-2` by factors of 10.
pub fn solve_frozen_with_stats(spec: &FrozenStepSpec, init: &GridFunction, tol: f64) -> Result<FrozenSolve> {
    spec.validate()?;
    let nodes = spec.rhs.nodes();
    if init.len() != nodes.len() {
        return Err(Error::Parameter("initial guess and rhs live on different meshes".into()));
    }
    let problem = &spec.problem;
    let interior = problem.interior_range(nodes.len());
    if let Some(i) = interior.clone().find(|&i| !(init.values()[i] > 0.0)) {
        return Err(Error::Precondition(format!(
            "initial guess must be positive at interior nodes (node {i} has {})",
            init.values()[i]
        )));
    }
    let mut system = System {
        spec,
        op: DiscreteOperator::new(problem, nodes, spec.grad_reg)?,
        c: problem.coeff_c.sample(nodes),
    };
    let mut w: Vec<f64> = init.values().to_vec();
    for i in problem.boundary_nodes(w.len()) {
        w[i] = 0.0;
    }

    let mut total = 0;
    let direct = {
        let mut trial = w.clone();
        system.newton(&mut trial, tol).map(|r| (trial, r))
    };
    let (w, res) = match direct {
        Ok((trial, (it, res))) => {
            total += it;
            (trial, res)
        }
        Err(e) if problem.alpha == 0.0 || spec.grad_reg >= CONTINUATION_START => return Err(e),
        Err(_) => {
            let mut eps = CONTINUATION_START;
            let mut res;
            loop {
                system.op.set_eps(eps);
                let (it, r) = system.newton(&mut w, tol)?;
                total += it;
                res = r;
                if eps <= spec.grad_reg {
                    break;
                }
                eps = (eps * 0.1).max(spec.grad_reg);
            }
            (w, res)
        }
    };
    if spec.delta == 0.0 {
        if let Some(i) = interior
            .clone()
            .find(|&i| spec.k_at(i) != 0.0 && !(w[i] > 0.0))
        {
            return Err(Error::Positivity { node: i, value: w[i] });
        }
    }
    Ok(FrozenSolve {
        w: init.with_values(w)?,
        newton_iterations: total,
        residual: res,
    })
}

/// The discrete frozen-step operator applied to `w` (unregularized), i.e.
/// the `rhs` for which `w` is the exact discrete solution.
pub fn frozen_operator(problem: &ProblemSpec, k: &[f64], delta: f64, w: &GridFunction) -> Result<GridFunction> {
    let spec = FrozenStepSpec {
        problem: problem.clone(),
        k_coeff: k.to_vec(),
        delta,
        rhs: w.with_values(vec![0.0; w.len()])?,
        grad_reg: DEFAULT_GRAD_REG,
    };
    let system = System {
        spec: &spec,
        op: DiscreteOperator::new(problem, w.nodes(), 0.0)?,
        c: problem.coeff_c.sample(w.nodes()),
    };
    let (mut f, _) = system.eval(w.values(), None);
    for i in problem.boundary_nodes(w.len()) {
        f[i] = 0.0;
    }
    w.with_values(f)
}
