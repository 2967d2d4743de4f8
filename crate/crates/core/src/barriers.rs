//! Explicit sub- and super-solutions built from first eigenfunctions.
//!
//! * `gamma > 1`: `b1 phi^t <= u <= b2 phi^t` with `t = (2+alpha)/(1+alpha+gamma)`
//!   and `phi` the eigenfunction for the weight `c / t`.
//! * `gamma <= 1`: `eps psi1 <= u <= d psi2^s`, `psi1` for the weight `c` and
//!   `psi2` for `c s^{-(1+alpha)}`, `s < 1`.
//!
//! Every barrier is checked against the discrete residual. When the mesh
//! cannot resolve the continuum inequality near the boundary, the sub-solution
//! is shrunk (or the super-solution grown) by a constant factor until the sign
//! holds at every node; the accumulated factor is reported in the constants.

use serde::Serialize;

use crate::eigen::{eigen_estimate, EigenPair};
use crate::error::{Error, Result};
use crate::problem::{Coefficient, GridFunction, ProblemSpec};
use crate::residual::residual;

const SHRINK: f64 = 0.9;
const GROW: f64 = 1.1;
const MAX_ADJUST: usize = 400;
pub const DEFAULT_S: f64 = 0.95;
const EIGEN_TOL: f64 = 1e-10;

/// Constants used to assemble a barrier pair; unused entries are `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BarrierConstants {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// Factor applied to the sub-solution by discrete certification (1 if none).
    pub sub_scale: f64,
    /// Factor applied to the super-solution by discrete certification (1 if none).
    pub sup_scale: f64,
}

impl BarrierConstants {
    /// `(name, value)` pairs of the populated constants.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        let named = [
            ("t", self.t),
            ("b1", self.b1),
            ("b2", self.b2),
            ("d1", self.d1),
            ("d2", self.d2),
            ("eps", self.eps),
            ("eps0", self.eps0),
            ("delta0", self.delta0),
            ("s", self.s),
            ("d", self.d),
            ("kappa", self.kappa),
            ("sub_scale", Some(self.sub_scale)),
            ("sup_scale", Some(self.sup_scale)),
        ];
        named.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BarrierSet {
    pub sub: GridFunction,
    pub sup: GridFunction,
    pub constants: BarrierConstants,
}

/// `k * c` as a coefficient.
pub fn scale_coefficient(c: &Coefficient, k: f64) -> Coefficient {
    match c.constant_value() {
        Some(v) => Coefficient::Constant(k * v),
        None => {
            let Coefficient::Formula(e) = c else { unreachable!() };
            Coefficient::parse(&format!("({k:?}) * ({e})")).expect("scaled coefficient reparses")
        }
    }
}

/// `t = (2+alpha)/(1+alpha+gamma)`.
pub fn boundary_exponent(alpha: f64, gamma: f64) -> f64 {
    (2.0 + alpha) / (1.0 + alpha + gamma)
}

fn p_range(problem: &ProblemSpec, nodes: &[f64]) -> (f64, f64) {
    let p = problem.coeff_p.sample(nodes);
    (
        p.iter().cloned().fold(f64::INFINITY, f64::min),
        p.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    )
}

fn check_pair(problem: &ProblemSpec, eig: &EigenPair) -> Result<()> {
    problem.validate_on(eig.phi.nodes())?;
    if !(eig.lambda1 > 0.0) {
        return Err(Error::Hypothesis(format!(
            "first eigenvalue for weight {} is {} <= 0",
            eig.weight_label, eig.lambda1
        )));
    }
    Ok(())
}

/// Shrinks `sub` until its residual is `>= -tol` at every unknown node.
fn certify_sub(problem: &ProblemSpec, sub: GridFunction, tol: f64) -> Result<(GridFunction, f64)> {
    let mut scale = 1.0;
    for _ in 0..MAX_ADJUST {
        let cand = sub.map(|_, v| scale * v);
        let r = residual(problem, &cand)?;
        if problem.interior_range(r.len()).all(|i| r.values()[i] >= -tol) {
            return Ok((cand, scale));
        }
        scale *= SHRINK;
    }
    Err(Error::Precondition("sub-solution could not be certified on this mesh".into()))
}

/// Grows `sup` until its residual is `<= tol` at every unknown node.
fn certify_sup(problem: &ProblemSpec, sup: GridFunction, tol: f64) -> Result<(GridFunction, f64)> {
    let mut scale = 1.0;
    for _ in 0..MAX_ADJUST {
        let cand = sup.map(|_, v| scale * v);
        let r = residual(problem, &cand)?;
        if problem.interior_range(r.len()).all(|i| r.values()[i] <= tol) {
            return Ok((cand, scale));
        }
        scale *= GROW;
    }
    Err(Error::Precondition("super-solution could not be certified on this mesh".into()))
}

fn power(phi: &GridFunction, t: f64) -> GridFunction {
    phi.map(|_, v| v.max(0.0).powf(t))
}

/// Barriers `b1 phi^t <= b2 phi^t` for `gamma > 1`; `eig` must be the
/// eigenpair for the weight `(1+alpha+gamma) c / (2+alpha)`.
pub fn build_barriers_gamma_gt1(problem: &ProblemSpec, eig: &EigenPair, tol: f64) -> Result<BarrierSet> {
    if !(problem.gamma > 1.0) {
        return Err(Error::Regime(format!("requires gamma > 1 (got {})", problem.gamma)));
    }
    check_pair(problem, eig)?;
    let (alpha, gamma) = (problem.alpha, problem.gamma);
    let (a, big_a) = problem.operator.ellipticity();
    let t = boundary_exponent(alpha, gamma);
    let phi = &eig.phi;
    let dphi = phi.derivative();
    let lam = eig.lambda1;
    let bracket = |w: f64, i: usize| {
        w * (1.0 - t) * dphi[i].abs().powf(2.0 + alpha) + lam * phi.values()[i].max(0.0).powf(2.0 + alpha)
    };
    let all = 0..phi.len();
    let d1 = all.clone().map(|i| bracket(big_a, i)).fold(f64::NEG_INFINITY, f64::max);
    let d2 = all.map(|i| bracket(a, i)).fold(f64::INFINITY, f64::min);
    if !(d2 > 0.0) {
        return Err(Error::HopfFailure(format!(
            "d2 = {d2:e} <= 0; the mesh is too coarse near the boundary"
        )));
    }
    let (pmin, pmax) = p_range(problem, phi.nodes());
    let e = 1.0 / (1.0 + alpha + gamma);
    let b1 = (pmin / (d1 * t.powf(1.0 + alpha))).powf(e);
    let b2 = (pmax / (d2 * t.powf(1.0 + alpha))).powf(e);
    if !(b1 <= b2) {
        return Err(Error::Parameter(format!("b1 = {b1} exceeds b2 = {b2}")));
    }
    let base = power(phi, t);
    let (sub, sub_scale) = certify_sub(problem, base.map(|_, v| b1 * v), tol)?;
    let (sup, sup_scale) = certify_sup(problem, base.map(|_, v| b2 * v), tol)?;
    Ok(BarrierSet {
        sub,
        sup,
        constants: BarrierConstants {
            t: Some(t),
            b1: Some(b1),
            b2: Some(b2),
            d1: Some(d1),
            d2: Some(d2),
            sub_scale,
            sup_scale,
            ..Default::default()
        },
    })
}

/// `delta0 = 2^{-gamma/(1+alpha+gamma)} (min p / lambda1)^{1/(1+alpha+gamma)}`.
pub fn lemma_delta0(problem: &ProblemSpec, lambda1: f64, pmin: f64) -> f64 {
    let e = 1.0 / (1.0 + problem.alpha + problem.gamma);
    2f64.powf(-problem.gamma * e) * (pmin / lambda1).powf(e)
}

/// The sub-solution `eps psi1` (any `gamma > 0`). Returns the barrier and
/// `(eps, eps0, delta0)`. `eps` defaults to `eps0 / 2` and must be `< eps0`.
pub fn lemma_sub_barrier(
    problem: &ProblemSpec,
    eig_c: &EigenPair,
    eps: Option<f64>,
) -> Result<(GridFunction, f64, f64, f64)> {
    check_pair(problem, eig_c)?;
    let (pmin, _) = p_range(problem, eig_c.phi.nodes());
    let delta0 = lemma_delta0(problem, eig_c.lambda1, pmin);
    let eps0 = delta0 / eig_c.phi.max_abs();
    let eps = eps.unwrap_or(0.5 * eps0);
    if !(eps > 0.0 && eps < eps0) {
        return Err(Error::Precondition(format!(
            "eps must lie in (0, eps0) = (0, {eps0}); got {eps}"
        )));
    }
    Ok((eig_c.phi.map(|_, v| eps * v.max(0.0)), eps, eps0, delta0))
}

/// Barriers `eps psi1 <= d psi2^s` for `gamma <= 1`.
pub fn build_barriers_gamma_lt1(
    problem: &ProblemSpec,
    eig_c: &EigenPair,
    eig_s: &EigenPair,
    s: f64,
    eps: Option<f64>,
    tol: f64,
) -> Result<BarrierSet> {
    if problem.gamma > 1.0 {
        return Err(Error::Regime(format!("requires gamma <= 1 (got {})", problem.gamma)));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Parameter(format!("s must lie in (0, 1) (got {s})")));
    }
    check_pair(problem, eig_s)?;
    if eig_c.phi.nodes() != eig_s.phi.nodes() {
        return Err(Error::Parameter("eigenpairs live on different meshes".into()));
    }
    let (sub0, eps, eps0, delta0) = lemma_sub_barrier(problem, eig_c, eps)?;
    let (alpha, gamma) = (problem.alpha, problem.gamma);
    let (a, _) = problem.operator.ellipticity();
    let psi2 = &eig_s.phi;
    let dpsi = psi2.derivative();
    let lam = eig_s.lambda1;
    let kappa = (0..psi2.len())
        .map(|i| {
            (1.0 - s) * a * dpsi[i].abs().powf(2.0 + alpha) + lam * psi2.values()[i].max(0.0).powf(2.0 + alpha)
        })
        .fold(f64::INFINITY, f64::min);
    if !(kappa > 0.0) {
        return Err(Error::HopfFailure(format!("kappa = {kappa:e} <= 0")));
    }
    let (_, pmax) = p_range(problem, psi2.nodes());
    let psi_max = psi2.max_abs();
    let expo = 2.0 - s * (gamma + 1.0) + (1.0 - s) * alpha;
    let bound = (pmax * psi_max.powf(expo) / (kappa * s.powf(1.0 + alpha))).powf(1.0 / (1.0 + alpha + gamma));
    let mut d = 2.0 * bound;
    let base = power(psi2, s);
    let mut doublings = 0;
    while sub0.values().iter().zip(base.values()).any(|(l, u)| *l > d * u) {
        d *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(Error::Parameter("barrier ordering could not be achieved".into()));
        }
    }
    let (sub, sub_scale) = certify_sub(problem, sub0, tol)?;
    let (sup, sup_scale) = certify_sup(problem, base.map(|_, v| d * v), tol)?;
    Ok(BarrierSet {
        sub,
        sup,
        constants: BarrierConstants {
            eps: Some(eps),
            eps0: Some(eps0),
            delta0: Some(delta0),
            s: Some(s),
            d: Some(d),
            kappa: Some(kappa),
            sub_scale,
            sup_scale,
            ..Default::default()
        },
    })
}

/// First eigenpairs for the weights `c` and `(1+alpha+gamma) c/(2+alpha)`;
/// both eigenvalues must be positive.
pub fn check_hypotheses(problem: &ProblemSpec, n: usize) -> Result<(EigenPair, EigenPair)> {
    let c = &problem.coeff_c;
    let ec = eigen_estimate(problem, c, n, EIGEN_TOL)?;
    let beta = scale_coefficient(c, 1.0 / boundary_exponent(problem.alpha, problem.gamma));
    let eb = if c.is_zero() {
        ec.clone()
    } else {
        eigen_estimate(problem, &beta, n, EIGEN_TOL)?
    };
    for e in [&ec, &eb] {
        if !(e.lambda1 > 0.0) {
            return Err(Error::Hypothesis(format!(
                "first eigenvalue for weight {} is {} <= 0",
                e.weight_label, e.lambda1
            )));
        }
    }
    Ok((ec, eb))
}

/// Eigenpair for `c s^{-(1+alpha)}` with `s` lowered towards 0 (halving `1 - s`)
/// until the eigenvalue is positive.
fn eigen_for_s(problem: &ProblemSpec, n: usize, mut s: f64) -> Result<(f64, EigenPair)> {
    for _ in 0..30 {
        let w = scale_coefficient(&problem.coeff_c, s.powf(-(1.0 + problem.alpha)));
        let e = eigen_estimate(problem, &w, n, EIGEN_TOL)?;
        if e.lambda1 > 0.0 {
            return Ok((s, e));
        }
        s = 1.0 - 0.5 * (1.0 - s);
    }
    Err(Error::Hypothesis("no s < 1 gives a positive eigenvalue".into()))
}

/// The paper's barriers for the regime of `problem.gamma` on an `n`-node mesh.
pub fn build_barriers(problem: &ProblemSpec, n: usize, tol: f64) -> Result<BarrierSet> {
    let (ec, eb) = check_hypotheses(problem, n)?;
    if problem.gamma > 1.0 {
        build_barriers_gamma_gt1(problem, &eb, tol)
    } else {
        let (s, es) = eigen_for_s(problem, n, DEFAULT_S)?;
        build_barriers_gamma_lt1(problem, &ec, &es, s, None, tol)
    }
}

/// Barriers used by the monotone scheme. The lower barrier is always
/// `eps psi1`, which stays a sub-solution of the regularized problem
/// `... + p (u + delta)^-gamma` for `delta <= delta0 / 2`; `b1 phi^t` does not.
/// For `gamma > 1` the upper barrier is `b2 phi^t`.
pub fn build_scheme_barriers(problem: &ProblemSpec, n: usize, tol: f64) -> Result<BarrierSet> {
    if problem.gamma <= 1.0 {
        return build_barriers(problem, n, tol);
    }
    let (ec, eb) = check_hypotheses(problem, n)?;
    let paper = build_barriers_gamma_gt1(problem, &eb, tol)?;
    let (_, eps0, _, _) = lemma_sub_barrier(problem, &ec, None)?;
    // Keep eps psi1 below the upper barrier as well.
    let ratio = paper
        .sup
        .values()
        .iter()
        .zip(ec.phi.values())
        .filter(|(_, p)| **p > 0.0)
        .map(|(u, p)| u / p)
        .fold(f64::INFINITY, f64::min);
    let eps = (0.5 * eps0).min(0.5 * ratio);
    let (sub0, eps, eps0, delta0) = lemma_sub_barrier(problem, &ec, Some(eps))?;
    let (sub, sub_scale) = certify_sub(problem, sub0, tol)?;
    let mut constants = paper.constants;
    constants.eps = Some(eps);
    constants.eps0 = Some(eps0);
    constants.delta0 = Some(delta0);
    constants.sub_scale = sub_scale;
    Ok(BarrierSet {
        sub,
        sup: paper.sup,
        constants,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signs_ok(pb: &ProblemSpec, set: &BarrierSet, tol: f64) {
        let rs = residual(pb, &set.sub).unwrap();
        let ru = residual(pb, &set.sup).unwrap();
        for i in pb.interior_range(set.sub.len()) {
            assert!(rs.values()[i] >= -tol, "sub residual {} at {i}", rs.values()[i]);
            assert!(ru.values()[i] <= tol, "sup residual {} at {i}", ru.values()[i]);
            assert!(set.sub.values()[i] > 0.0);
            assert!(set.sub.values()[i] <= set.sup.values()[i]);
        }
        for i in pb.boundary_nodes(set.sub.len()) {
            assert_eq!(set.sub.values()[i], 0.0);
            assert_eq!(set.sup.values()[i], 0.0);
        }
    }

    #[test]
    fn exponent_value() {
        assert_eq!(boundary_exponent(0.0, 3.0), 0.5);
        assert_eq!(boundary_exponent(1.0, 4.0), 0.5);
    }

    #[test]
    fn gamma_three_barriers() {
        let pb = ProblemSpec::unit_interval(0.0, 3.0);
        let set = build_barriers(&pb, 401, 1e-8).unwrap();
        let k = &set.constants;
        assert_eq!(k.t, Some(0.5));
        let ratio = k.b1.unwrap() / k.b2.unwrap();
        let expect = (k.d2.unwrap() / k.d1.unwrap()).powf(0.25);
        assert!((ratio - expect).abs() < 1e-12 && ratio <= 1.0);
        signs_ok(&pb, &set, 1e-8);
    }

    #[test]
    fn gamma_half_barriers() {
        let pb = ProblemSpec::unit_interval(0.0, 0.5);
        let set = build_barriers(&pb, 401, 1e-8).unwrap();
        let k = &set.constants;
        assert_eq!(k.s, Some(DEFAULT_S));
        assert!(k.d.unwrap().is_finite() && k.kappa.unwrap() > 0.0);
        signs_ok(&pb, &set, 1e-8);
    }

    #[test]
    fn ball_barriers() {
        for gamma in [0.5, 2.0] {
            let pb = ProblemSpec::unit_ball(0.0, gamma, 3);
            let set = build_scheme_barriers(&pb, 201, 1e-8).unwrap();
            signs_ok(&pb, &set, 1e-8);
        }
    }

    #[test]
    fn eps_at_or_above_eps0_rejected() {
        let pb = ProblemSpec::unit_interval(0.0, 0.5);
        let e = eigen_estimate(&pb, &0.0.into(), 101, 1e-10).unwrap();
        let (_, _, eps0, _) = lemma_sub_barrier(&pb, &e, None).unwrap();
        assert!(matches!(lemma_sub_barrier(&pb, &e, Some(eps0)), Err(Error::Precondition(_))));
        assert!(matches!(lemma_sub_barrier(&pb, &e, Some(2.0 * eps0)), Err(Error::Precondition(_))));
    }

    #[test]
    fn negative_eigenvalue_is_hypothesis_error() {
        let pb = ProblemSpec::unit_interval(0.0, 0.5).with_c(15.0);
        assert!(matches!(build_barriers(&pb, 101, 1e-8), Err(Error::Hypothesis(_))));
    }
}
