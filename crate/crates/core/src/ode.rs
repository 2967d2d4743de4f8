//! Dormand-Prince 5(4) integrator with output stops and a terminal event.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Initial step as a fraction of the integration span.
    pub initial_step: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-9,
            atol: 1e-12,
            max_steps: 1_000_000,
            initial_step: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory<const D: usize> {
    /// Accepted step points, starting with the initial point.
    pub t: Vec<f64>,
    pub y: Vec<[f64; D]>,
    /// States at the requested stops reached before termination.
    pub stops: Vec<(f64, [f64; D])>,
    /// True if integration ended on the event rather than at `t_end`.
    pub event: bool,
    /// Smallest step that was rejected because it crossed the event or left the domain.
    pub last_failed_step: Option<f64>,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Differences between the 5th and embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn comb<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..D {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// One step; `None` if the right-hand side is undefined at some stage.
/// Returns the 5th-order state and the scaled error norm.
pub fn dp45_step<const D: usize, F>(f: &F, t: f64, y: &[f64; D], h: f64, opts: &OdeOptions) -> Option<([f64; D], f64)>
where
    F: Fn(f64, &[f64; D]) -> Option<[f64; D]>,
{
    let k1 = f(t, y)?;
    let k2 = f(t + C2 * h, &comb(y, h, &[(A21, &k1)]))?;
    let k3 = f(t + C3 * h, &comb(y, h, &[(A31, &k1), (A32, &k2)]))?;
    let k4 = f(t + C4 * h, &comb(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
    let k5 = f(t + C5 * h, &comb(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
    let k6 = f(t + h, &comb(y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]))?;
    let y5 = comb(y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = f(t + h, &y5)?;
    let mut acc = 0.0;
    for i in 0..D {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sc = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
        acc += (e / sc).powi(2);
    }
    let err = (acc / D as f64).sqrt();
    if y5.iter().all(|v| v.is_finite()) && err.is_finite() {
        Some((y5, err))
    } else {
        None
    }
}

/// Integrates forward from `t0` to `t_end`. A step whose stages leave the
/// domain of `f`, or whose end point has `event(y) <= 0`, is rejected and
/// halved; integration terminates when the step falls below round-off
/// relative to `t` (the event is then located to that resolution).
/// `stops` (increasing, inside `(t0, t_end]`) are hit exactly.
pub fn integrate<const D: usize, F, E>(
    f: F,
    t0: f64,
    y0: [f64; D],
    t_end: f64,
    stops: &[f64],
    event: E,
    opts: &OdeOptions,
) -> Result<Trajectory<D>>
where
    F: Fn(f64, &[f64; D]) -> Option<[f64; D]>,
    E: Fn(&[f64; D]) -> f64,
{
    if !(t_end > t0) {
        return Err(Error::Parameter(format!("integration span [{t0}, {t_end}] is empty")));
    }
    let mut traj = Trajectory {
        t: vec![t0],
        y: vec![y0],
        stops: vec![],
        event: false,
        last_failed_step: None,
    };
    let mut t = t0;
    let mut y = y0;
    let mut h = opts.initial_step * (t_end - t0);
    let mut h_cap = f64::INFINITY;
    let mut next_stop = stops.iter().position(|&s| s > t0).unwrap_or(stops.len());
    for _ in 0..opts.max_steps {
        let h_floor = 4.0 * f64::EPSILON * t.abs().max(1.0);
        let mut target = t_end;
        if next_stop < stops.len() {
            target = target.min(stops[next_stop]);
        }
        let mut step = h.min(h_cap);
        let landing = t + step >= target;
        if landing {
            step = target - t;
        }
        if step <= h_floor {
            if landing && target == t_end {
                return Ok(traj);
            }
            traj.event = true;
            return Ok(traj);
        }
        match dp45_step(&f, t, &y, step, opts) {
            Some((yn, err)) if event(&yn) > 0.0 => {
                if err <= 1.0 {
                    t = if landing { target } else { t + step };
                    y = yn;
                    traj.t.push(t);
                    traj.y.push(y);
                    while next_stop < stops.len() && stops[next_stop] <= t {
                        if stops[next_stop] == t {
                            traj.stops.push((t, y));
                        }
                        next_stop += 1;
                    }
                    if landing && target == t_end {
                        return Ok(traj);
                    }
                    let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    h = step * grow;
                } else {
                    h = step * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                }
            }
            _ => {
                // Crossed the event or left the domain: approach by halving.
                traj.last_failed_step = Some(step);
                h_cap = 0.5 * step;
                h = h_cap;
            }
        }
    }
    Err(Error::NonConvergence {
        what: "ODE integration",
        iterations: opts.max_steps,
        last: t,
    })
}
