//! First (positive) eigenvalue by inverse power iteration.
//!
//! Solves `G[v] + weight |v|^alpha v = -phi^{1+alpha}` repeatedly, where
//! `G[v] = |v'|^alpha (F(D^2 v) + h v')`, and normalizes in the sup norm. By
//! `(1+alpha)`-homogeneity, `lambda = |v|_inf^{-(1+alpha)}` at the fixed point.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid_solver::{frozen_operator, solve_frozen_with_stats, FrozenStepSpec};
use crate::problem::{Coefficient, Geometry, GridFunction, ProblemSpec};

const MAX_ITER: usize = 500;
const MAX_SHIFTS: usize = 30;

#[derive(Debug, Clone, Serialize)]
pub struct EigenPair {
    pub lambda1: f64,
    pub phi: GridFunction,
    pub weight_label: String,
    pub iterations: usize,
    /// Max-norm of `G[phi] + (weight + lambda1) phi^{1+alpha}` over unknown nodes.
    pub residual: f64,
    /// Constant subtracted from the weight to make the iteration coercive.
    pub shift: f64,
}

/// Nodewise eigen-residual `G[phi] + (weight + lambda) |phi|^alpha phi`.
pub fn eigen_residual(problem: &ProblemSpec, weight: &Coefficient, lambda: f64, phi: &GridFunction) -> Result<Vec<f64>> {
    let pb = problem.clone().with_c(weight.clone());
    let g = frozen_operator(&pb, &[0.0], 0.0, phi)?;
    let a = problem.alpha;
    let mut out = g.into_values();
    for i in problem.interior_range(phi.len()) {
        let v = phi.values()[i];
        out[i] += lambda * v.abs().powf(a) * v;
    }
    for i in problem.boundary_nodes(phi.len()) {
        out[i] = 0.0;
    }
    Ok(out)
}

fn initial_guess(problem: &ProblemSpec, n: usize) -> Result<GridFunction> {
    let nodes = problem.grid(n);
    let pi = std::f64::consts::PI;
    match problem.geometry {
        Geometry::Interval { length } => GridFunction::from_fn(nodes, |x| (pi * x / length).sin().max(0.0)),
        Geometry::Ball { radius } => GridFunction::from_fn(nodes, |r| (0.5 * pi * r / radius).cos().max(0.0)),
    }
}

fn shifted(weight: &Coefficient, s: f64) -> Coefficient {
    match weight.constant_value() {
        Some(v) => Coefficient::Constant(v - s),
        None => {
            let e = match weight {
                Coefficient::Formula(e) => e.to_string(),
                Coefficient::Constant(v) => format!("{v:?}"),
            };
            Coefficient::parse(&format!("({e}) - ({s:?})")).expect("shifted weight reparses")
        }
    }
}

/// Inverse power iteration with automatic shift. The returned eigenvalue
/// refers to the unshifted weight.
pub fn eigen_estimate(problem: &ProblemSpec, weight: &Coefficient, n: usize, tol: f64) -> Result<EigenPair> {
    eigen_estimate_from(problem, weight, n, tol, None)
}

/// As [`eigen_estimate`], optionally warm-started from a previous eigenfunction.
pub fn eigen_estimate_from(
    problem: &ProblemSpec,
    weight: &Coefficient,
    n: usize,
    tol: f64,
    start: Option<&GridFunction>,
) -> Result<EigenPair> {
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("tol must be > 0 (got {tol})")));
    }
    let nodes = problem.grid(n);
    problem.validate_on(&nodes)?;
    let wvals = weight.sample(&nodes);
    if wvals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("eigen weight is not finite on the grid".into()));
    }
    let wmax = wvals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut shift = 0.0;
    let mut last_err = None;
    for attempt in 0..MAX_SHIFTS {
        match power_iteration(problem, &shifted(weight, shift), n, tol, start) {
            Ok((lambda, phi, iterations)) => {
                let lambda1 = lambda - shift;
                let res = eigen_residual(problem, weight, lambda1, &phi)?;
                let residual = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                return Ok(EigenPair {
                    lambda1,
                    phi,
                    weight_label: weight_label(weight),
                    iterations,
                    residual,
                    shift,
                });
            }
            Err(e) if e.is_convergence_failure() || matches!(e, Error::Stagnation { .. }) => {
                last_err = Some(e);
                shift = if attempt == 0 { wmax.max(0.0) + 1.0 } else { 2.0 * shift };
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or(Error::NonConvergence {
        what: "eigenvalue iteration",
        iterations: MAX_ITER,
        last: f64::NAN,
    }))
}

fn weight_label(weight: &Coefficient) -> String {
    match weight {
        Coefficient::Constant(v) => format!("c = {v}"),
        Coefficient::Formula(e) => format!("c = {e}"),
    }
}

fn power_iteration(
    problem: &ProblemSpec,
    weight: &Coefficient,
    n: usize,
    tol: f64,
    start: Option<&GridFunction>,
) -> Result<(f64, GridFunction, usize)> {
    let a = problem.alpha;
    let pb = problem.clone().with_c(weight.clone());
    let interior = problem.interior_range(n);
    let mut phi = match start {
        Some(s) if s.len() == n => s.clone(),
        _ => initial_guess(problem, n)?,
    };
    let mut lambda = f64::NAN;
    let mut guess = phi.clone();
    let inner_tol = (tol * 1e-3).max(1e-14);
    for it in 1..=MAX_ITER {
        let rhs = phi.map(|_, v| -v.max(0.0).powf(1.0 + a));
        let spec = FrozenStepSpec::new(pb.clone(), 0.0, 0.0, rhs);
        let v = solve_frozen_with_stats(&spec, &guess, inner_tol)?.w;
        if let Some(i) = interior.clone().find(|&i| !(v.values()[i] > 0.0)) {
            return Err(Error::Positivity {
                node: i,
                value: v.values()[i],
            });
        }
        let vmax = v.max_abs();
        let next_lambda = vmax.powf(-(1.0 + a));
        let next_phi = v.map(|_, x| x / vmax);
        let dphi = next_phi.sup_distance(&phi)?;
        let dl = (next_lambda - lambda).abs();
        lambda = next_lambda;
        phi = next_phi;
        guess = v;
        if dl <= tol * lambda.abs() && dphi <= tol {
            return Ok((lambda, phi, it));
        }
    }
    Err(Error::NonConvergence {
        what: "eigenvalue iteration",
        iterations: MAX_ITER,
        last: lambda,
    })
}

/// Eigenvalues for a sequence of weights (reported, not asserted).
pub fn lambda_continuity_probe(problem: &ProblemSpec, weights: &[Coefficient], n: usize, tol: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(weights.len());
    let mut prev: Option<GridFunction> = None;
    for w in weights {
        let e = eigen_estimate_from(problem, w, n, tol, prev.as_ref())?;
        out.push(e.lambda1);
        prev = Some(e.phi);
    }
    Ok(out)
}
