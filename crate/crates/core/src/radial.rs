//! Radial solutions on balls: a contraction fixed point near the origin, ODE
//! continuation up to the first zero, and rescaling onto the ball.
//!
//! Write `w_p`, `w_n` for the weights the operator puts on positive and
//! negative Hessian eigenvalues. With `w = |v'|^alpha v'` (so that
//! `w' = (1+alpha) |v'|^alpha v''`) and `v' < 0`, the radial equation
//! `|v'|^alpha F(v'', v'/r) + p v^-gamma = 0` is the first-order system
//!
//! `v' = -|w|^{1/(1+alpha)}`, `w' = (1+alpha) S(-p v^-gamma - w_n (N-1) w / r)`,
//!
//! where `S(y) = y+/w_p - y-/w_n` undoes the sign-dependent weight on `v''`.
//! Near the origin both eigenvalues are negative, which gives the integral form
//!
//! `T(v)(r) = 1 - int_0^r (s^-m int_0^s l^m (1+alpha) p v^-gamma / w_n dl)^{1/(1+alpha)} ds`,
//! `m = (N-1)(1+alpha)`.
//!
//! A solution with `v(0) = 1` and first zero `rho` gives solutions on other
//! balls through `u(r) = mu v(r / l)` with `l^{2+alpha} = mu^{1+alpha+gamma}`
//! (`p` is evaluated at `l rho`). For constant `p` this is the rescaling
//! `C = rho^{-(2+alpha)/(1+alpha+gamma)}` onto the unit ball; for radial `p`
//! the scale `l` is found by shooting.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::{integrate, OdeOptions};
use crate::problem::{Geometry, GridFunction, Operator, ProblemSpec};
use crate::pucci::f_split;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialOptions {
    /// Nodes of the output mesh on the ball.
    pub nodes: usize,
    /// Nodes of the fixed-point mesh on `[0, handoff * r_o]`.
    pub fixed_point_nodes: usize,
    /// Fraction of the contraction radius where the ODE takes over.
    pub handoff: f64,
    pub fixed_point_tol: f64,
    pub max_iter: usize,
    pub rtol: f64,
    pub atol: f64,
    /// Relative tolerance on the radius in the shooting for nonconstant `p`.
    pub shooting_tol: f64,
    pub max_shooting: usize,
}

impl Default for RadialOptions {
    fn default() -> Self {
        RadialOptions {
            nodes: 2001,
            fixed_point_nodes: 4097,
            handoff: 0.8,
            fixed_point_tol: 1e-12,
            max_iter: 200,
            rtol: 1e-9,
            atol: 1e-12,
            shooting_tol: 1e-10,
            max_shooting: 50,
        }
    }
}

impl RadialOptions {
    fn ode(&self) -> OdeOptions {
        OdeOptions {
            rtol: self.rtol,
            atol: self.atol,
            ..OdeOptions::default()
        }
    }
}

/// `r_o` for the fixed-point map whose inner factor is divided by `a`
/// (`a = 1` for the Laplacian with `p = 1`).
pub fn contraction_radius(alpha: f64, gamma: f64, dim: usize, a: f64) -> f64 {
    let m1 = (dim as f64 - 1.0) * (1.0 + alpha) + 1.0;
    let num = m1.powf(1.0 / (1.0 + alpha)) * (2.0 + alpha);
    let den = 2f64.powf(1.0 + (alpha.abs() + 1.0) / (1.0 + alpha) * gamma)
        * gamma.max(1.0 + alpha).powf(1.0 / (1.0 + alpha))
        * (1.0 + alpha);
    (num / den).powf((1.0 + alpha) / (2.0 + alpha)) * a.powf(1.0 / (2.0 + alpha))
}

/// Closed form of `T(1)(r)` for `p = 1` and unit weight.
pub fn first_iterate(alpha: f64, dim: usize, r: f64) -> f64 {
    let beta = (2.0 + alpha) / (1.0 + alpha);
    let m1 = (dim as f64 - 1.0) * (1.0 + alpha) + 1.0;
    1.0 - r.powf(beta) * (1.0 + alpha).powf(beta) / (m1.powf(1.0 / (1.0 + alpha)) * (2.0 + alpha))
}

/// Radius `R` beyond which `1 - T(v) > 1` for every `0 < v < 1`, i.e. the
/// root of `R^beta (1+alpha)^beta k^{1/(1+alpha)} / (((N-1)(1+alpha)+1)^{1/(1+alpha)} (2+alpha)) = 1`
/// where `k` is a lower bound of `p / w_n`.
pub fn a_priori_radius(alpha: f64, dim: usize, k: f64) -> f64 {
    let beta = (2.0 + alpha) / (1.0 + alpha);
    let m1 = (dim as f64 - 1.0) * (1.0 + alpha) + 1.0;
    let c = (1.0 + alpha).powf(beta) * k.powf(1.0 / (1.0 + alpha)) / (m1.powf(1.0 / (1.0 + alpha)) * (2.0 + alpha));
    c.powf(-1.0 / beta)
}

/// Coefficients of the radial problem in the variable `rho = r / scale`.
struct Radial<'a> {
    alpha: f64,
    gamma: f64,
    dim: usize,
    wp: f64,
    wn: f64,
    problem: &'a ProblemSpec,
    scale: f64,
}

impl Radial<'_> {
    fn new(problem: &ProblemSpec, scale: f64) -> Radial<'_> {
        let (wp, wn) = problem.operator.eigen_weights();
        Radial {
            alpha: problem.alpha,
            gamma: problem.gamma,
            dim: problem.dim,
            wp,
            wn,
            problem,
            scale,
        }
    }

    fn p(&self, rho: f64) -> f64 {
        self.problem.coeff_p.eval(self.scale * rho)
    }

    fn m(&self) -> f64 {
        (self.dim as f64 - 1.0) * (1.0 + self.alpha)
    }

    fn rhs(&self, r: f64, y: &[f64; 2]) -> Option<[f64; 2]> {
        let (v, w) = (y[0], y[1]);
        if !(v > 0.0 && w < 0.0) {
            return None;
        }
        let a = self.alpha;
        let dv = -(-w).powf(1.0 / (1.0 + a));
        let total = -self.p(r) * v.powf(-self.gamma) - self.wn * (self.dim as f64 - 1.0) * w / r;
        let dw = (1.0 + a) * f_split(total, self.wn, self.wp);
        Some([dv, dw])
    }

    /// One application of `T` on a uniform mesh starting at 0; returns
    /// `(T(v), T(v)')`.
    fn apply_t(&self, nodes: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let a = self.alpha;
        let m = self.m();
        let q = 1.0 / (1.0 + a);
        let n = nodes.len();
        let f: Vec<f64> = nodes
            .iter()
            .zip(v)
            .map(|(&s, &vi)| (1.0 + a) * self.p(s) * vi.powf(-self.gamma) / self.wn)
            .collect();
        // Product rule: exact moments of l^m against the linear interpolant of f.
        let mut g = vec![0.0; n];
        g[0] = (f[0] / (m + 1.0)).powf(q);
        let mut inner = 0.0;
        for i in 0..n - 1 {
            let (s0, s1) = (nodes[i], nodes[i + 1]);
            let h = s1 - s0;
            let p0 = (s1.powf(m + 1.0) - s0.powf(m + 1.0)) / (m + 1.0);
            let p1 = (s1.powf(m + 2.0) - s0.powf(m + 2.0)) / (m + 2.0) - s0 * p0;
            inner += f[i] * p0 + (f[i + 1] - f[i]) * p1 / h;
            g[i + 1] = (inner / s1.powf(m + 1.0)).max(0.0).powf(q);
        }
        // Outer integral of s^q g(s), again exact against linear g.
        let mut t = vec![1.0; n];
        let mut dt = vec![0.0; n];
        let mut outer = 0.0;
        for i in 0..n - 1 {
            let (s0, s1) = (nodes[i], nodes[i + 1]);
            let h = s1 - s0;
            let p0 = (s1.powf(q + 1.0) - s0.powf(q + 1.0)) / (q + 1.0);
            let p1 = (s1.powf(q + 2.0) - s0.powf(q + 2.0)) / (q + 2.0) - s0 * p0;
            outer += g[i] * p0 + (g[i + 1] - g[i]) * p1 / h;
            t[i + 1] = 1.0 - outer;
            dt[i + 1] = -s1.powf(q) * g[i + 1];
        }
        (t, dt)
    }

    fn p_bounds(&self, upto: f64) -> (f64, f64) {
        let grid = crate::problem::uniform_nodes(upto, 2001);
        grid.iter().map(|&r| self.p(r)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
    }
}

/// Fixed point of `T` on `[0, r_stop]`.
#[derive(Debug, Clone, Serialize)]
pub struct FixedPoint {
    pub profile: GridFunction,
    pub slope: Vec<f64>,
    pub iterations: usize,
    /// `max_k |v_{k+1} - v_k| / |v_k - v_{k-1}|` over increments above round-off.
    pub contraction_ratio: f64,
    pub increments: Vec<f64>,
    /// `|v - T(v)|_inf` at the returned iterate.
    pub defect: f64,
}

/// One application of `T` to nodal values on a uniform mesh starting at 0.
pub fn apply_fixed_point_map(problem: &ProblemSpec, v: &GridFunction) -> Result<(GridFunction, Vec<f64>)> {
    check_radial(problem)?;
    let nodes = v.nodes();
    if nodes[0] != 0.0 {
        return Err(Error::Parameter("the fixed-point mesh must start at r = 0".into()));
    }
    let (t, dt) = Radial::new(problem, 1.0).apply_t(nodes, v.values());
    Ok((v.with_values(t)?, dt))
}

/// Contraction radius for `problem` (inner weight `w_n / max p`).
pub fn problem_contraction_radius(problem: &ProblemSpec) -> Result<f64> {
    check_radial(problem)?;
    let rad = Radial::new(problem, 1.0);
    let (_, pmax) = rad.p_bounds(problem.geometry.extent());
    Ok(contraction_radius(problem.alpha, problem.gamma, problem.dim, rad.wn / pmax))
}

/// Iterates `v_{k+1} = T(v_k)` from `v_0 = 1` on 4097 nodes over `[0, r_stop]`.
pub fn fixed_point_iterate(problem: &ProblemSpec, r_stop: f64, tol: f64, max_iter: usize) -> Result<FixedPoint> {
    let r_o = problem_contraction_radius(problem)?;
    if !(r_stop > 0.0 && r_stop <= r_o) {
        return Err(Error::Precondition(format!(
            "r_stop = {r_stop} must lie in (0, r_o = {r_o}]"
        )));
    }
    iterate_t(&Radial::new(problem, 1.0), r_stop, 4097, tol, max_iter)
}

fn iterate_t(rad: &Radial, r_stop: f64, n: usize, tol: f64, max_iter: usize) -> Result<FixedPoint> {
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("tol must be > 0 (got {tol})")));
    }
    let nodes = crate::problem::uniform_nodes(r_stop, n);
    let mut v = vec![1.0; n];
    let mut increments = vec![];
    let mut ratio = 0.0f64;
    for it in 1..=max_iter {
        let (t, dt) = rad.apply_t(&nodes, &v);
        let dev = t.iter().fold(0.0f64, |m, x| m.max((x - 1.0).abs()));
        if !(dev < 0.5) {
            return Err(Error::ContractionViolation { deviation: dev });
        }
        let inc = t.iter().zip(&v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if let Some(&prev) = increments.last() {
            if prev > 1e3 * f64::EPSILON {
                ratio = ratio.max(inc / prev);
            }
        }
        increments.push(inc);
        v = t;
        if inc <= tol {
            let (t2, _) = rad.apply_t(&nodes, &v);
            let defect = t2.iter().zip(&v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            return Ok(FixedPoint {
                profile: GridFunction::new(nodes, v)?,
                slope: dt,
                iterations: it,
                contraction_ratio: ratio,
                increments,
                defect,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "radial fixed-point iteration",
        iterations: max_iter,
        last: increments.last().copied().unwrap_or(f64::NAN),
    })
}

struct Continuation {
    profile: GridFunction,
    slope: Vec<f64>,
    r_bar: Option<f64>,
    stops: Vec<(f64, f64, f64)>,
}

fn continue_scaled(
    rad: &Radial,
    start_r: f64,
    start_u: f64,
    start_du: f64,
    r_max: f64,
    stops: &[f64],
    opts: &OdeOptions,
) -> Result<Continuation> {
    if !(start_u > 0.0 && start_du < 0.0 && start_r > 0.0) {
        return Err(Error::Precondition(format!(
            "ODE start needs r > 0, u > 0, u' < 0 (got r = {start_r}, u = {start_u}, u' = {start_du})"
        )));
    }
    let a = rad.alpha;
    let w0 = -(-start_du).powf(1.0 + a);
    let traj = integrate(
        |r, y: &[f64; 2]| rad.rhs(r, y),
        start_r,
        [start_u, w0],
        r_max,
        stops,
        |y| if y[0] > 0.0 && y[1] < 0.0 { 1.0 } else { -1.0 },
        opts,
    )?;
    let slope_of = |w: f64| -(-w).powf(1.0 / (1.0 + a));
    let mut nodes = traj.t.clone();
    let mut values: Vec<f64> = traj.y.iter().map(|y| y[0]).collect();
    let mut slope: Vec<f64> = traj.y.iter().map(|y| slope_of(y[1])).collect();
    let wmax = traj.y.iter().fold(0.0f64, |m, y| m.max(-y[1]));
    let last = *traj.y.last().unwrap();
    let mut r_bar = None;
    if traj.event {
        // Terminated by step collapse: decide whether v or w reached 0.
        let rel_v = last[0] / start_u;
        let rel_w = -last[1] / wmax;
        if rel_w < rel_v || rel_w < 1e-12 {
            return Err(Error::Monotonicity(format!(
                "u' reached 0 at r = {} while u = {:e} > 0",
                traj.t.last().unwrap(),
                last[0]
            )));
        }
        let r_last = *traj.t.last().unwrap();
        let ds = -slope_of(last[1]);
        let mut gap = last[0] / ds;
        if let Some(h) = traj.last_failed_step {
            gap = gap.min(h);
        }
        let rb = r_last + gap;
        if rb > r_last {
            nodes.push(rb);
            values.push(0.0);
            slope.push(*slope.last().unwrap());
        } else {
            *values.last_mut().unwrap() = 0.0;
        }
        r_bar = Some(rb);
    }
    let stops = traj.stops.iter().map(|(t, y)| (*t, y[0], slope_of(y[1]))).collect();
    Ok(Continuation {
        profile: GridFunction::new(nodes, values)?,
        slope,
        r_bar,
        stops,
    })
}

/// Integrates the radial system from `(start_r, start_u, start_du)` until the
/// first zero of `u` (returned as `r_bar`) or `r_max`. The profile holds the
/// accepted step points; when a zero was found its last node is `(r_bar, 0)`.
pub fn continue_ode(
    problem: &ProblemSpec,
    start_r: f64,
    start_u: f64,
    start_du: f64,
    r_max: f64,
) -> Result<(GridFunction, Option<f64>)> {
    check_radial(problem)?;
    let c = continue_scaled(
        &Radial::new(problem, 1.0),
        start_r,
        start_u,
        start_du,
        r_max,
        &[],
        &RadialOptions::default().ode(),
    )?;
    Ok((c.profile, c.r_bar))
}

/// `u~(r) = C u(r_bar r)` on `[0, 1]` with `C = r_bar^{-(2+alpha)/(1+alpha+gamma)}`.
pub fn rescale_to_unit_ball(profile: &GridFunction, r_bar: f64, alpha: f64, gamma: f64) -> Result<GridFunction> {
    if !(r_bar > 0.0) {
        return Err(Error::Parameter(format!("r_bar must be > 0 (got {r_bar})")));
    }
    let c = r_bar.powf(-(2.0 + alpha) / (1.0 + alpha + gamma));
    let nodes: Vec<f64> = profile.nodes().iter().map(|r| r / r_bar).collect();
    let values = profile.values().iter().map(|v| c * v).collect();
    GridFunction::new(nodes, values)
}

fn check_radial(problem: &ProblemSpec) -> Result<()> {
    problem.validate()?;
    if !matches!(problem.geometry, Geometry::Ball { .. }) {
        return Err(Error::Parameter("the radial solver needs ball geometry".into()));
    }
    if !problem.coeff_c.is_zero() || !problem.coeff_h.is_zero() {
        return Err(Error::Parameter("the radial solver needs c = h = 0".into()));
    }
    Ok(())
}

/// Full radial solve on the ball of `problem`.
#[derive(Debug, Clone, Serialize)]
pub struct RadialSolveState {
    pub operator: Operator,
    /// Contraction radius (in the normalized variable where `v(0) = 1`).
    pub r_o: f64,
    /// Handoff radius from the fixed point to the ODE.
    pub r_stop: f64,
    pub fixed_point_profile: GridFunction,
    pub continued_profile: GridFunction,
    /// First zero of the normalized profile.
    pub r_bar: f64,
    /// Scale factor on values, `u(r) = rescale_C v(r / length_scale)`.
    pub rescale_c: f64,
    pub length_scale: f64,
    pub contraction_ratio: f64,
    pub fixed_point_iterations: usize,
    pub fixed_point_defect: f64,
    /// Radius from the lower bound on `T`, when it applies (trace-type weights).
    pub a_priori_radius: Option<f64>,
    pub shooting_iterations: usize,
    /// Solution on the uniform mesh of the ball.
    pub profile: GridFunction,
    /// `u'` at the mesh nodes.
    pub slope: Vec<f64>,
}

struct ScaledRun {
    fp: FixedPoint,
    r_o: f64,
    r_stop: f64,
    cont: Continuation,
    r_bar: f64,
    a_priori: Option<f64>,
}

fn run_scaled(rad: &Radial, opts: &RadialOptions, radius: f64, stops: &[f64]) -> Result<ScaledRun> {
    // p is sampled over the physical ball; the normalized radius is unknown a priori.
    let upto = if rad.scale > 0.0 { radius / rad.scale } else { 1.0 };
    let (pmin, pmax) = rad.p_bounds(upto);
    let r_o = contraction_radius(rad.alpha, rad.gamma, rad.dim, rad.wn / pmax);
    let r_stop = opts.handoff * r_o;
    let fp = iterate_t(rad, r_stop, opts.fixed_point_nodes, opts.fixed_point_tol, opts.max_iter)?;
    let n = fp.profile.len();
    let (u0, du0) = (fp.profile.values()[n - 1], fp.slope[n - 1]);
    let a_priori = (rad.wp == rad.wn).then(|| a_priori_radius(rad.alpha, rad.dim, pmin / rad.wn));
    let r_max = a_priori.map(|r| 2.0 * r).unwrap_or(f64::INFINITY).max(1e3 * r_o).min(1e6 * r_o);
    let cont = continue_scaled(rad, r_stop, u0, du0, r_max, stops, &opts.ode())?;
    let r_bar = cont.r_bar.ok_or(Error::NonConvergence {
        what: "radial continuation (no zero found)",
        iterations: 0,
        last: r_max,
    })?;
    Ok(ScaledRun {
        fp,
        r_o,
        r_stop,
        cont,
        r_bar,
        a_priori,
    })
}

fn hermite(x0: f64, x1: f64, v0: f64, v1: f64, d0: f64, d1: f64, x: f64) -> (f64, f64) {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let (t2, t3) = (t * t, t * t * t);
    let v = (2.0 * t3 - 3.0 * t2 + 1.0) * v0
        + (t3 - 2.0 * t2 + t) * h * d0
        + (-2.0 * t3 + 3.0 * t2) * v1
        + (t3 - t2) * h * d1;
    let dv = ((6.0 * t2 - 6.0 * t) * v0 + (-6.0 * t2 + 6.0 * t) * v1) / h
        + (3.0 * t2 - 4.0 * t + 1.0) * d0
        + (3.0 * t2 - 2.0 * t) * d1;
    (v, dv)
}

/// Runs the fixed point, the continuation, and the rescaling (or shooting
/// for nonconstant `p`) for `c = h = 0` on a ball.
pub fn radial_solve(problem: &ProblemSpec, opts: &RadialOptions) -> Result<RadialSolveState> {
    check_radial(problem)?;
    let radius = problem.geometry.extent();
    let grid = problem.grid(opts.nodes);
    problem.validate_on(&grid)?;
    if opts.nodes < 3 {
        return Err(Error::Parameter("need at least 3 output nodes".into()));
    }
    let mut shooting_iterations = 0;
    let scale = if problem.coeff_p.constant_value().is_some() {
        let run = run_scaled(&Radial::new(problem, 1.0), opts, radius, &[])?;
        radius / run.r_bar
    } else {
        shoot(problem, opts, radius, &mut shooting_iterations)?
    };
    let rad = Radial::new(problem, scale);
    let stops: Vec<f64> = grid.iter().map(|x| x / scale).collect();
    let run = run_scaled(&rad, opts, radius, &stops)?;
    let mu = scale.powf((2.0 + problem.alpha) / (1.0 + problem.alpha + problem.gamma));
    let fp_nodes = run.fp.profile.nodes();
    let fp_vals = run.fp.profile.values();
    let mut values = vec![0.0; grid.len()];
    let mut slope = vec![0.0; grid.len()];
    let mut stop_iter = run.cont.stops.iter().peekable();
    for (j, &x) in grid.iter().enumerate() {
        let rho = stops[j];
        let (v, dv) = if j == grid.len() - 1 {
            (0.0, *run.cont.slope.last().unwrap())
        } else if rho <= run.r_stop {
            let k = (fp_nodes.partition_point(|&t| t <= rho).max(1) - 1).min(fp_nodes.len() - 2);
            hermite(
                fp_nodes[k],
                fp_nodes[k + 1],
                fp_vals[k],
                fp_vals[k + 1],
                run.fp.slope[k],
                run.fp.slope[k + 1],
                rho,
            )
        } else {
            match stop_iter.find(|s| s.0 == rho) {
                Some(&(_, v, dv)) => (v, dv),
                None => {
                    return Err(Error::NonConvergence {
                        what: "radial continuation (zero reached before the ball boundary)",
                        iterations: shooting_iterations,
                        last: x,
                    })
                }
            }
        };
        values[j] = mu * v;
        slope[j] = mu / scale * dv;
    }
    Ok(RadialSolveState {
        operator: problem.operator,
        r_o: run.r_o,
        r_stop: run.r_stop,
        fixed_point_profile: run.fp.profile.clone(),
        continued_profile: run.cont.profile.clone(),
        r_bar: run.r_bar,
        rescale_c: mu,
        length_scale: scale,
        contraction_ratio: run.fp.contraction_ratio,
        fixed_point_iterations: run.fp.iterations,
        fixed_point_defect: run.fp.defect,
        a_priori_radius: run.a_priori,
        shooting_iterations,
        profile: GridFunction::new(grid, values)?,
        slope,
    })
}

/// Secant iteration on `l rho_bar(l) = radius`, started from the constant
/// coefficient `p(0)` (`l = 0`).
fn shoot(problem: &ProblemSpec, opts: &RadialOptions, radius: f64, count: &mut usize) -> Result<f64> {
    let g = |l: f64| -> Result<f64> { Ok(l * run_scaled(&Radial::new(problem, l), opts, radius, &[])?.r_bar - radius) };
    let rho0 = run_scaled(&Radial::new(problem, 0.0), opts, radius, &[])?.r_bar;
    let mut l0 = radius / rho0;
    let mut g0 = g(l0)?;
    let mut l1 = radius / ((g0 + radius) / l0);
    let mut g1 = g(l1)?;
    for it in 1..=opts.max_shooting {
        *count = it;
        if g1.abs() <= opts.shooting_tol * radius {
            return Ok(l1);
        }
        let next = if g1 != g0 {
            l1 - g1 * (l1 - l0) / (g1 - g0)
        } else {
            radius / ((g1 + radius) / l1)
        };
        let next = if next > 0.0 { next } else { 0.5 * l1 };
        l0 = l1;
        g0 = g1;
        l1 = next;
        g1 = g(l1)?;
    }
    Err(Error::NonConvergence {
        what: "radial shooting",
        iterations: opts.max_shooting,
        last: g1,
    })
}

/// Radial solutions for `M+` and `M-` with the ellipticity constants of
/// `problem`, ordered nodewise.
#[derive(Debug, Clone, Serialize)]
pub struct Sandwich {
    pub lower: GridFunction,
    pub upper: GridFunction,
    pub lower_operator: Operator,
    pub upper_operator: Operator,
    /// `min (upper - lower)` over the mesh, and where it occurs.
    pub min_gap: f64,
    pub min_gap_at: f64,
}

impl Sandwich {
    /// True when the `M+` profile is the lower one (expected with `a` on
    /// positive eigenvalues).
    pub fn plus_is_lower(&self) -> bool {
        matches!(self.lower_operator, Operator::PucciPlus { .. })
    }
}

pub fn pucci_sandwich(problem: &ProblemSpec, tol: f64, opts: &RadialOptions) -> Result<Sandwich> {
    let (a, big_a) = match problem.operator {
        Operator::PucciPlus { a, big_a } | Operator::PucciMinus { a, big_a } => (a, big_a),
        Operator::Trace => (1.0, 1.0),
    };
    let plus_op = Operator::PucciPlus { a, big_a };
    let minus_op = Operator::PucciMinus { a, big_a };
    let plus = radial_solve(&problem.clone().with_operator(plus_op), opts)?.profile;
    let minus = radial_solve(&problem.clone().with_operator(minus_op), opts)?.profile;
    let diff: f64 = plus.values().iter().zip(minus.values()).map(|(p, m)| p - m).sum();
    let (lower, upper, lo_op, up_op) = if diff <= 0.0 {
        (plus, minus, plus_op, minus_op)
    } else {
        (minus, plus, minus_op, plus_op)
    };
    let (mut gap, mut at) = (f64::INFINITY, 0.0);
    for ((x, l), u) in lower.nodes().iter().zip(lower.values()).zip(upper.values()) {
        if u - l < gap {
            gap = u - l;
            at = *x;
        }
    }
    if gap < -tol {
        return Err(Error::SandwichViolation { gap, r: at });
    }
    Ok(Sandwich {
        lower,
        upper,
        lower_operator: lo_op,
        upper_operator: up_op,
        min_gap: gap,
        min_gap_at: at,
    })
}

/// Energy `E(r) = (|u'|^{2+alpha}/(2+alpha) + u^{1-gamma}/(1-gamma)) r^q`, `q = (N-1)(2+alpha)`.
pub fn radial_energy(u: f64, du: f64, r: f64, alpha: f64, gamma: f64, dim: usize) -> f64 {
    let q = (dim as f64 - 1.0) * (2.0 + alpha);
    (du.abs().powf(2.0 + alpha) / (2.0 + alpha) + u.powf(1.0 - gamma) / (1.0 - gamma)) * r.powf(q)
}

/// Defects `dE/dr - q r^{q-1} u^{1-gamma}/(1-gamma)` at interior nodes of a
/// trace-operator profile (`p = 1`), with `dE/dr` by centered differences.
pub fn energy_identity_defects(u: &GridFunction, du: &[f64], alpha: f64, gamma: f64, dim: usize) -> Result<Vec<(f64, f64)>> {
    if gamma == 1.0 {
        return Err(Error::Regime("the energy identity needs gamma != 1".into()));
    }
    if du.len() != u.len() {
        return Err(Error::Parameter("slope and profile lengths differ".into()));
    }
    let q = (dim as f64 - 1.0) * (2.0 + alpha);
    let x = u.nodes();
    let v = u.values();
    let e: Vec<f64> = (0..u.len()).map(|i| radial_energy(v[i], du[i], x[i], alpha, gamma, dim)).collect();
    let mut out = vec![];
    for i in 1..u.len() - 1 {
        if !(v[i] > 0.0) {
            continue;
        }
        let de = (e[i + 1] - e[i - 1]) / (x[i + 1] - x[i - 1]);
        let rhs = q * x[i].powf(q - 1.0) * v[i].powf(1.0 - gamma) / (1.0 - gamma);
        out.push((x[i], de - rhs));
    }
    Ok(out)
}
