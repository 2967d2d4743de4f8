//! Quadrature solution of the one-dimensional problem
//! `|u'|^alpha u'' + u^-gamma = 0` on `(0, 1)` through its first integral
//! `|u'|^{2+alpha}/(2+alpha) + E(u) = C`, where `E(u) = u^{1-gamma}/(1-gamma)`
//! (`log u` when `gamma = 1`).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::{uniform_nodes, GridFunction};
use crate::quad::integrate;

/// Slope of the solution at the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BoundarySlope {
    Finite(f64),
    Infinite,
}

impl BoundarySlope {
    pub fn is_finite(&self) -> bool {
        matches!(self, BoundarySlope::Finite(_))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FirstIntegralSolution {
    pub alpha: f64,
    pub gamma: f64,
    pub energy_c: f64,
    pub midpoint_value: f64,
    pub profile: GridFunction,
    pub boundary_derivative: BoundarySlope,
    #[serde(skip)]
    map: ProfileMap,
}

/// Pointwise evaluation of the solution through the inverse of `x(u)`.
#[derive(Debug, Clone, Copy)]
struct ProfileMap {
    energy: Energy,
    mid_len: f64,
    head_top: f64,
    w_split: f64,
}

impl ProfileMap {
    fn value(&self, x: f64) -> Result<f64> {
        let e = &self.energy;
        let x = x.min(1.0 - x);
        if x <= 0.0 {
            return Ok(0.0);
        }
        if x <= self.head_top {
            invert(|u| e.head(u), |u| e.head_integrand(u), x, 0.0, 0.5 * e.m)
        } else {
            // Work from the top so the maximum is resolved exactly.
            let target = self.mid_len - x;
            let w = invert(|w| e.tail(w), |w| e.tail_integrand(w), target, 0.0, self.w_split)?;
            Ok(e.m - w.powf(e.beta()))
        }
    }
}

impl FirstIntegralSolution {
    /// Solution value at any `x` in `[0, 1]`.
    pub fn value_at(&self, x: f64) -> Result<f64> {
        self.map.value(x)
    }

    /// `u'(x)` by a fourth-order centred difference of the solution map with
    /// a step much finer than any mesh (`1e-3` of the distance to the
    /// boundary, at most `1e-5`).
    pub fn slope_at(&self, x: f64) -> Result<f64> {
        let d = x.min(1.0 - x);
        if !(d > 0.0) {
            return Err(Error::Parameter(format!("x = {x} is not interior")));
        }
        let eta = (1e-3 * d).min(1e-5);
        let f = |k: f64| self.map.value(x + k * eta);
        Ok((8.0 * (f(1.0)? - f(-1.0)?) - (f(2.0)? - f(-2.0)?)) / (12.0 * eta))
    }
}

/// `E(u)`, the potential of `u^-gamma`.
pub fn potential(u: f64, gamma: f64) -> f64 {
    if gamma == 1.0 {
        u.ln()
    } else {
        u.powf(1.0 - gamma) / (1.0 - gamma)
    }
}

/// The first integral restricted to `(0, m]` for a fixed maximum `m`.
#[derive(Debug, Clone, Copy)]
struct Energy {
    alpha: f64,
    gamma: f64,
    m: f64,
    quad_tol: f64,
}

impl Energy {
    fn beta(&self) -> f64 {
        (2.0 + self.alpha) / (1.0 + self.alpha)
    }

    /// `C - E(m - d)` for `0 <= d <= m`, without cancellation for small `d`.
    fn gap(&self, d: f64) -> f64 {
        let l = (-d / self.m).ln_1p();
        if self.gamma == 1.0 {
            -l
        } else {
            let g = 1.0 - self.gamma;
            -self.m.powf(g) * (g * l).exp_m1() / g
        }
    }

    /// `|u'|` at height `m - d`.
    fn slope(&self, d: f64) -> f64 {
        ((2.0 + self.alpha) * self.gap(d)).powf(1.0 / (2.0 + self.alpha))
    }

    /// `dx/du` at height `u`.
    fn head_integrand(&self, u: f64) -> f64 {
        1.0 / self.slope(self.m - u)
    }

    /// Integrand after `u = m - w^beta`, smooth at `w = 0`.
    fn tail_integrand(&self, w: f64) -> f64 {
        let b = self.beta();
        let d = w.powf(b);
        if d <= 1e-300 || w == 0.0 {
            return b / ((2.0 + self.alpha) * self.m.powf(-self.gamma)).powf(1.0 / (2.0 + self.alpha));
        }
        b * w.powf(b - 1.0) / self.slope(d)
    }

    /// `x(u)` on the rising half, `u <= m/2`.
    fn head(&self, u: f64) -> Result<f64> {
        Ok(integrate(|v| self.head_integrand(v), 0.0, u, self.quad_tol)?.0)
    }

    /// `1/2 - x` as a function of `w = (m - u)^{1/beta}`.
    fn tail(&self, w: f64) -> Result<f64> {
        Ok(integrate(|s| self.tail_integrand(s), 0.0, w, self.quad_tol)?.0)
    }

    fn split_w(&self) -> f64 {
        (0.5 * self.m).powf(1.0 / self.beta())
    }

    /// Abscissa where the solution reaches its maximum `m`.
    fn half_length(&self) -> Result<f64> {
        Ok(self.head(0.5 * self.m)? + self.tail(self.split_w())?)
    }
}

/// Solves on a 2001-node mesh.
pub fn solve_one_d(alpha: f64, gamma: f64, tol: f64) -> Result<FirstIntegralSolution> {
    solve_one_d_with_nodes(alpha, gamma, tol, 2001)
}

/// Shoots on the maximum `m` until the half length is `1/2`, then inverts
/// `x(u)` on a uniform mesh of `n` nodes.
pub fn solve_one_d_with_nodes(
    alpha: f64,
    gamma: f64,
    tol: f64,
    n: usize,
) -> Result<FirstIntegralSolution> {
    if !(alpha > -1.0) || !(gamma > 0.0) || !(tol > 0.0) {
        return Err(Error::Parameter(format!(
            "need alpha > -1, gamma > 0, tol > 0 (got {alpha}, {gamma}, {tol})"
        )));
    }
    if n < 3 {
        return Err(Error::Parameter(format!("need at least 3 nodes (got {n})")));
    }
    let quad_tol = (tol * 1e-2).max(1e-15);
    let energy = |m: f64| Energy {
        alpha,
        gamma,
        m,
        quad_tol,
    };
    let len = |m: f64| energy(m).half_length();

    let mut lo = tol;
    let mut hi = 10.0 * (2.0 + alpha).powf(1.0 / (1.0 - gamma)) + 1.0;
    if !hi.is_finite() {
        hi = 11.0;
    }
    let mut grown = 0;
    while len(lo)? > 0.5 || len(hi)? < 0.5 {
        grown += 1;
        if grown > 60 {
            return Err(Error::Bracket { lo, hi });
        }
        if len(lo)? > 0.5 {
            lo *= 0.5;
        }
        if len(hi)? < 0.5 {
            hi *= 2.0;
        }
    }
    // Half length is increasing in m.
    for _ in 0..200 {
        if hi - lo <= tol * 1e-3 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if len(mid)? < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let m = 0.5 * (lo + hi);
    let e = energy(m);
    let energy_c = potential(m, gamma);

    let map = ProfileMap {
        energy: e,
        mid_len: e.half_length()?,
        head_top: e.head(0.5 * m)?,
        w_split: e.split_w(),
    };
    let nodes = uniform_nodes(1.0, n);
    let mut values = vec![0.0; n];
    for i in 1..n - 1 {
        values[i] = map.value(nodes[i])?;
    }
    let profile = GridFunction::new(nodes, values)?;
    let boundary_derivative = if gamma < 1.0 {
        BoundarySlope::Finite(((2.0 + alpha) * energy_c).powf(1.0 / (2.0 + alpha)))
    } else {
        BoundarySlope::Infinite
    };
    Ok(FirstIntegralSolution {
        alpha,
        gamma,
        energy_c,
        midpoint_value: m,
        profile,
        boundary_derivative,
        map,
    })
}

/// Solves `f(y) = target` for increasing `f` on `[lo, hi]`, Newton steps
/// safeguarded by bisection.
fn invert(
    f: impl Fn(f64) -> Result<f64>,
    df: impl Fn(f64) -> f64,
    target: f64,
    mut lo: f64,
    mut hi: f64,
) -> Result<f64> {
    let mut y = 0.5 * (lo + hi);
    for _ in 0..200 {
        let v = f(y)? - target;
        if v == 0.0 {
            return Ok(y);
        }
        if v > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        let d = df(y);
        let mut next = y - v / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() <= 1e-15 * y.abs().max(1e-300) || hi - lo <= 1e-16 * hi.abs() {
            return Ok(next);
        }
        y = next;
    }
    Ok(y)
}

/// Max over interior nodes of `| |u'|^{2+alpha}/(2+alpha) + E(u) - C |`,
/// with centred difference derivatives.
pub fn first_integral_defect(sol: &FirstIntegralSolution, alpha: f64, gamma: f64) -> Result<f64> {
    Ok(first_integral_defects(sol, alpha, gamma)?
        .iter()
        .fold(0.0, |m, v| m.max(v.abs())))
}

/// Nodewise first-integral defect at interior nodes (boundary entries are 0).
pub fn first_integral_defects(
    sol: &FirstIntegralSolution,
    alpha: f64,
    gamma: f64,
) -> Result<Vec<f64>> {
    let u = &sol.profile;
    let vals = u.values();
    let n = vals.len();
    if n < 3 || vals[0] != 0.0 || vals[n - 1] != 0.0 {
        return Err(Error::Precondition(
            "profile must vanish at both ends".into(),
        ));
    }
    if let Some(i) = (1..n - 1).find(|&i| !(vals[i] > 0.0)) {
        return Err(Error::Singularity {
            node: i,
            x: u.nodes()[i],
            value: vals[i],
        });
    }
    let du = u.derivative();
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        let kin = du[i].abs().powf(2.0 + alpha) / (2.0 + alpha);
        out[i] = kin + potential(vals[i], gamma) - sol.energy_c;
    }
    Ok(out)
}

/// Nodewise first-integral defect at the interior mesh nodes, with `u'`
/// from [`FirstIntegralSolution::slope_at`] instead of mesh differences
/// (which are inaccurate next to the boundary, where `u''` is unbounded).
pub fn pointwise_first_integral_defects(sol: &FirstIntegralSolution) -> Result<Vec<f64>> {
    let nodes = sol.profile.nodes();
    let n = nodes.len();
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        let u = sol.profile.values()[i];
        let kin = sol.slope_at(nodes[i])?.abs().powf(2.0 + sol.alpha) / (2.0 + sol.alpha);
        out[i] = kin + potential(u, sol.gamma) - sol.energy_c;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Frozen reference values for alpha = 0, gamma = 1/2, computed once with
    // an independent adaptive quadrature and root finder (double precision).
    const M_REF: f64 = 0.270_421_794_433_655_16;
    const C_REF: f64 = 1.040_041_911_527_906;

    #[test]
    fn reference_midpoint() {
        let s = solve_one_d_with_nodes(0.0, 0.5, 1e-12, 201).unwrap();
        assert!((s.midpoint_value - M_REF).abs() < 1e-10, "{}", s.midpoint_value);
        assert!((s.energy_c - C_REF).abs() < 1e-9);
        let BoundarySlope::Finite(d) = s.boundary_derivative else {
            panic!("finite slope expected")
        };
        assert!((d - (2.0 * C_REF).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn midpoint_scaling_law() {
        // x -> u is homogeneous: half length = L(1) m^{(1+alpha+gamma)/(2+alpha)}.
        for &(alpha, gamma) in &[(0.0, 0.5), (1.0, 0.5), (0.0, 1.0), (0.5, 3.0), (-0.5, 0.3)] {
            let s = solve_one_d_with_nodes(alpha, gamma, 1e-12, 11).unwrap();
            let e = Energy {
                alpha,
                gamma,
                m: 1.0,
                quad_tol: 1e-15,
            };
            let l1 = e.half_length().unwrap();
            let q = (1.0 + alpha + gamma) / (2.0 + alpha);
            let m = (0.5 / l1).powf(1.0 / q);
            assert!((s.midpoint_value - m).abs() < 1e-9 * m, "({alpha},{gamma}): {} vs {m}", s.midpoint_value);
        }
    }

    #[test]
    fn slope_markers() {
        assert_eq!(solve_one_d_with_nodes(0.0, 2.0, 1e-10, 11).unwrap().boundary_derivative, BoundarySlope::Infinite);
        assert_eq!(solve_one_d_with_nodes(1.0, 2.0, 1e-10, 11).unwrap().boundary_derivative, BoundarySlope::Infinite);
        assert_eq!(solve_one_d_with_nodes(0.0, 1.0, 1e-10, 11).unwrap().boundary_derivative, BoundarySlope::Infinite);
        assert!(solve_one_d_with_nodes(0.0, 0.9, 1e-10, 11).unwrap().boundary_derivative.is_finite());
    }

    #[test]
    fn symmetric_concave_profile() {
        for &(alpha, gamma) in &[(0.0, 0.5), (1.0, 0.5), (0.0, 3.0)] {
            let s = solve_one_d_with_nodes(alpha, gamma, 1e-12, 401).unwrap();
            let v = s.profile.values();
            let n = v.len();
            for i in 0..n {
                assert!((v[i] - v[n - 1 - i]).abs() < 1e-12);
            }
            for i in 1..n - 1 {
                assert!(v[i - 1] - 2.0 * v[i] + v[i + 1] <= 1e-12);
            }
            assert!((v[n / 2] - s.midpoint_value).abs() < 1e-14);
        }
    }

    #[test]
    fn slope_blows_up_for_gamma_at_least_one() {
        let s = solve_one_d_with_nodes(0.0, 2.0, 1e-12, 4001).unwrap();
        let v = s.profile.values();
        let x = s.profile.nodes();
        let q: Vec<f64> = (1..8).map(|k| v[1 << k] / x[1 << k]).collect();
        assert!(q.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn boundary_power_law() {
        let s = solve_one_d_with_nodes(0.0, 3.0, 1e-12, 20001).unwrap();
        let pts: Vec<(f64, f64)> = s
            .profile
            .nodes()
            .iter()
            .zip(s.profile.values())
            .filter(|(x, _)| **x >= 1e-4 && **x <= 1e-2)
            .map(|(x, u)| (x.ln(), u.ln()))
            .collect();
        let k = pts.len() as f64;
        let (mx, my) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / k, a.1 + p.1 / k));
        let (sxy, sxx) = pts
            .iter()
            .fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mx) * (p.1 - my), a.1 + (p.0 - mx).powi(2)));
        let slope = sxy / sxx;
        assert!((slope - 0.5).abs() < 0.03 * 0.5, "slope {slope}");
    }

    #[test]
    fn defect_detects_perturbation() {
        let s = solve_one_d_with_nodes(0.0, 0.5, 1e-12, 2001).unwrap();
        let mut bad = s.clone();
        bad.profile.values_mut()[700] += 0.01;
        assert!(first_integral_defect(&bad, 0.0, 0.5).unwrap() > 1e-3);
        let mut flat = s.clone();
        let n = flat.profile.len();
        flat.profile = GridFunction::new(uniform_nodes(1.0, n), vec![0.3; n]).unwrap();
        assert!(first_integral_defect(&flat, 0.0, 0.5).is_err());
    }

    #[test]
    fn pointwise_defects_are_small_up_to_the_boundary() {
        for &(alpha, gamma) in &[(0.0, 0.5), (1.0, 0.5), (0.0, 3.0), (-0.5, 0.3)] {
            let s = solve_one_d_with_nodes(alpha, gamma, 1e-12, 401).unwrap();
            let d = pointwise_first_integral_defects(&s).unwrap();
            let worst = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(worst < 1e-4, "({alpha}, {gamma}): {worst}");
            let x = 0.3;
            assert!((s.value_at(x).unwrap() - s.value_at(1.0 - x).unwrap()).abs() < 1e-12);
        }
    }
}
