//! Acceptance suite: one PASS/FAIL line per criterion. Run a subset with
//! `cargo test --test acceptance -- 3 7`.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use svlab::barriers::build_scheme_barriers;
use svlab::eigen::{eigen_estimate, lambda_continuity_probe};
use svlab::oned::{pointwise_first_integral_defects, solve_one_d_with_nodes};
use svlab::pucci::{pucci_minus, pucci_plus};
use svlab::radial::{apply_fixed_point_map, first_iterate, problem_contraction_radius, pucci_sandwich, radial_solve, RadialOptions};
use svlab::residual::residual;
use svlab::scheme::{solve_scheme, SchemeOptions};
use svlab::verify::{check_hopf, cross_validate, default_window, fit_boundary_exponent, EXPONENT_TOL};
use svlab::{Coefficient, GridFunction, Operator, ProblemSpec, Result};

const TIME_LIMIT: Duration = Duration::from_secs(60);

struct Outcome {
    pass: bool,
    lines: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { pass: true, lines: vec![] }
    }

    fn check(&mut self, ok: bool, msg: String) {
        self.pass &= ok;
        self.lines.push(format!("{} {msg}", if ok { "ok  " } else { "FAIL" }));
    }

    fn info(&mut self, msg: String) {
        self.lines.push(format!("     {msg}"));
    }
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Criterion 1: monotone scheme against the first-integral quadrature.
fn c1_oned_agreement() -> Result<Outcome> {
    let mut out = Outcome::new();
    let n = 2001;
    for alpha in [0.0, 1.0] {
        let pb = ProblemSpec::unit_interval(alpha, 0.5);
        let (_, trace) = solve_scheme(&pb, n, &SchemeOptions::default())?;
        let exact = solve_one_d_with_nodes(alpha, 0.5, 1e-12, n)?;
        let err = trace.z.sup_distance(&exact.profile)?;
        out.check(err <= 1e-3, format!("alpha={alpha}: sup|scheme - quadrature| = {err:.3e} (<= 1e-3)"));
    }
    Ok(out)
}

/// Criterion 2: first integral along quadrature solutions.
fn c2_first_integral() -> Result<Outcome> {
    let mut out = Outcome::new();
    for (alpha, gamma) in [(0.0, 0.5), (1.0, 0.5), (0.0, 3.0), (1.0, 4.0), (0.5, 2.0), (-0.5, 0.3)] {
        let sol = solve_one_d_with_nodes(alpha, gamma, 1e-12, 2001)?;
        let d = max_abs(pointwise_first_integral_defects(&sol)?);
        out.check(
            d <= 1e-4,
            format!("alpha={alpha} gamma={gamma}: max |E(x) - C| over interior nodes = {d:.3e} (<= 1e-4)"),
        );
    }
    Ok(out)
}

/// Boundary quotient of the certified lower barrier: a floor for the solution's.
fn hopf_floor(pb: &ProblemSpec, n: usize) -> Result<f64> {
    let sub = build_scheme_barriers(pb, n, 1e-10)?.sub;
    let x = sub.nodes();
    let v = sub.values();
    Ok(((v[1] - v[0]) / (x[1] - x[0])).min((v[n - 2] - v[n - 1]) / (x[n - 1] - x[n - 2])))
}

/// Criterion 3: boundary behaviour of scheme solutions.
fn c3_boundary_exponent() -> Result<Outcome> {
    let mut out = Outcome::new();
    for (alpha, gamma) in [(0.0, 3.0), (1.0, 4.0)] {
        let pb = ProblemSpec::unit_interval(alpha, gamma);
        let expected = (2.0 + alpha) / (1.0 + alpha + gamma);
        let (_, trace) = solve_scheme(&pb, 20001, &SchemeOptions::default())?;
        let fit = fit_boundary_exponent(&trace.z, &pb.geometry, default_window(&pb.geometry))?;
        out.check(
            (fit - expected).abs() <= EXPONENT_TOL * expected,
            format!("alpha={alpha} gamma={gamma}: fitted slope {fit:.4} vs {expected} (5%)"),
        );
    }
    for alpha in [0.0, 1.0] {
        let pb = ProblemSpec::unit_interval(alpha, 0.5);
        let opts = SchemeOptions::default();
        let coarse = solve_scheme(&pb, 2001, &opts)?.1.z;
        let fine = solve_scheme(&pb, 4001, &opts)?.1.z;
        let floor = hopf_floor(&pb, 2001)?;
        let r = check_hopf(&pb, &coarse, &fine, floor)?;
        out.check(
            r.passed,
            format!(
                "alpha={alpha} gamma=0.5: boundary quotients {:.4?} (coarse, fine), floor {floor:.4}, drift <= 20%",
                r.measured
            ),
        );
    }
    Ok(out)
}

/// Criterion 4: contraction, fixed point, zero, and the rescaled profile.
fn c4_radial_pipeline() -> Result<Outcome> {
    let mut out = Outcome::new();
    let opts = RadialOptions::default();
    for dim in [2, 3] {
        for alpha in [0.0, 1.0] {
            let pb = ProblemSpec::unit_ball(alpha, 0.5, dim);
            let st = radial_solve(&pb, &opts)?;
            let tag = format!("N={dim} alpha={alpha}");
            out.check(
                st.contraction_ratio < 1.0,
                format!("{tag}: contraction ratio on [0, 0.8 r_o] = {:.4}", st.contraction_ratio),
            );
            out.check(
                st.fixed_point_defect <= 2.0 * opts.fixed_point_tol,
                format!("{tag}: fixed-point defect {:.2e} (<= {:.0e})", st.fixed_point_defect, 2.0 * opts.fixed_point_tol),
            );
            let r_ap = st.a_priori_radius.unwrap_or(f64::NAN);
            out.check(st.r_bar < r_ap, format!("{tag}: r_bar = {:.6} < a-priori R = {r_ap:.6}", st.r_bar));
            let u = &st.profile;
            let last = *u.values().last().unwrap();
            out.check(last == 0.0, format!("{tag}: u~(1) = {last}"));
            let res = residual(&pb, u)?;
            let n = u.len();
            let interior: Vec<(f64, f64)> = u.nodes()[1..n - 1]
                .iter()
                .copied()
                .zip(res.values()[1..n - 1].iter().copied())
                .collect();
            let (worst_at, worst) = interior.iter().fold((0.0, 0.0f64), |(wx, w), &(x, v)| {
                if v.abs() > w {
                    (x, v.abs())
                } else {
                    (wx, w)
                }
            });
            out.check(
                worst <= 1e-3,
                format!("{tag}: residual of u~ = {worst:.3e} at r = {worst_at} (<= 1e-3)"),
            );
            let window = max_abs(interior.iter().filter(|(x, _)| (0.05..=0.95).contains(x)).map(|p| p.1));
            let over = interior.iter().filter(|(_, v)| v.abs() > 1e-3).count();
            out.info(format!(
                "{tag}: residual on [0.05, 0.95] = {window:.3e}; {over} of {} interior nodes exceed 1e-3",
                interior.len()
            ));
        }
    }
    Ok(out)
}

const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Five-point Gauss-Legendre on dyadic panels `[b 2^-k-1, b 2^-k]`, each split in four.
fn graded_gauss(f: &dyn Fn(f64) -> f64, b: f64) -> f64 {
    let mut total = 0.0;
    let mut hi = b;
    for _ in 0..60 {
        let lo = 0.5 * hi;
        let w = (hi - lo) / 4.0;
        for j in 0..4 {
            let (a, c) = (lo + j as f64 * w, lo + (j + 1) as f64 * w);
            let (mid, half) = (0.5 * (a + c), 0.5 * (c - a));
            total += GL5.iter().map(|&(x, wt)| wt * f(mid + half * x)).sum::<f64>() * half;
        }
        hi = lo;
    }
    total
}

/// Criterion 5: `T(1)` against its closed form, through the solver's map and
/// through independent nested quadrature.
fn c5_first_iterate() -> Result<Outcome> {
    let mut out = Outcome::new();
    for (alpha, dim) in [(0.0, 2), (1.0, 3), (0.5, 4), (-0.5, 2), (2.0, 5)] {
        let pb = ProblemSpec::unit_ball(alpha, 0.5, dim);
        let r_o = problem_contraction_radius(&pb)?;
        let nodes: Vec<f64> = (0..=64).map(|i| 0.8 * r_o * i as f64 / 64.0).collect();
        let one = GridFunction::new(nodes.clone(), vec![1.0; nodes.len()])?;
        let (t, _) = apply_fixed_point_map(&pb, &one)?;
        let map_err = max_abs(t.nodes().iter().zip(t.values()).map(|(&r, &v)| v - first_iterate(alpha, dim, r)));
        let m = (dim as f64 - 1.0) * (1.0 + alpha);
        let q = 1.0 / (1.0 + alpha);
        let outer = |s: f64| {
            let inner = graded_gauss(&|l: f64| l.powf(m) * (1.0 + alpha), s);
            (inner / s.powf(m)).powf(q)
        };
        let quad_err = max_abs(nodes.iter().skip(1).step_by(8).map(|&r| 1.0 - graded_gauss(&outer, r) - first_iterate(alpha, dim, r)));
        out.check(
            map_err <= 1e-6 && quad_err <= 1e-6,
            format!("alpha={alpha} N={dim}: |T(1) - closed form| = {map_err:.2e} (map), {quad_err:.2e} (quadrature)"),
        );
    }
    Ok(out)
}

/// Criterion 6: Pucci profiles bracket the trace profile.
fn c6_pucci_sandwich() -> Result<Outcome> {
    let mut out = Outcome::new();
    let tol = 1e-9;
    let opts = RadialOptions::default();
    for dim in [2, 3] {
        for alpha in [0.0, 1.0] {
            let tag = format!("N={dim} alpha={alpha}");
            let base = ProblemSpec::unit_ball(alpha, 0.5, dim);
            let trace = radial_solve(&base, &opts)?.profile;
            let pb = base.clone().with_operator(Operator::PucciPlus { a: 0.5, big_a: 2.0 });
            let s = pucci_sandwich(&pb, tol, &opts)?;
            let below = s
                .lower
                .values()
                .iter()
                .zip(trace.values())
                .zip(s.upper.values())
                .map(|((l, t), u)| (t - l).min(u - t))
                .fold(f64::INFINITY, f64::min);
            out.check(
                below >= -tol,
                format!(
                    "{tag} a=1/2 A=2: lower <= trace <= upper, min margin {below:.3e} (lower operator {:?})",
                    s.lower_operator
                ),
            );
            let eq = base.clone().with_operator(Operator::PucciPlus { a: 1.0, big_a: 1.0 });
            let s = pucci_sandwich(&eq, tol, &opts)?;
            let d = s.lower.sup_distance(&trace)?.max(s.upper.sup_distance(&trace)?);
            out.check(d <= tol, format!("{tag} a=A=1: |M+- profile - trace profile| = {d:.2e} (<= {tol:e})"));
        }
    }
    Ok(out)
}

/// Smallest eigenvalue of the Dirichlet matrix tridiag(-1, 2, -1)/h^2 by
/// Sturm-sequence bisection.
fn sturm_lambda1(n: usize) -> f64 {
    let m = n - 2;
    let h2 = ((n - 1) as f64).powi(-2);
    let below = |x: f64| {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..m {
            let off = if i == 0 { 0.0 } else { 1.0 / (h2 * h2) / d };
            d = 2.0 / h2 - x - off;
            if d == 0.0 {
                d = f64::EPSILON;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    let (mut lo, mut hi) = (0.0, 4.0 / h2);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Criterion 7: first eigenvalue, shift law and continuity.
fn c7_eigenvalue() -> Result<Outcome> {
    let mut out = Outcome::new();
    let n = 2001;
    let tol = 1e-10;
    let pb = ProblemSpec::unit_interval(0.0, 0.5);
    let zero = Coefficient::Constant(0.0);
    let e = eigen_estimate(&pb, &zero, n, tol)?;
    let pi2 = std::f64::consts::PI.powi(2);
    let oracle = sturm_lambda1(n);
    out.check(
        (e.lambda1 - pi2).abs() <= 0.01 * pi2 && (e.lambda1 - oracle).abs() <= 1e-6 * oracle,
        format!("lambda1 = {:.10} vs pi^2 = {pi2:.10} (1%), tridiagonal oracle {oracle:.10}", e.lambda1),
    );
    for c in ["0", "4 * x * (1 - x)"] {
        let w = Coefficient::parse(c)?;
        let ws = Coefficient::parse(&format!("{c} + 1"))?;
        let l0 = eigen_estimate(&pb, &w, n, tol)?.lambda1;
        let l1 = eigen_estimate(&pb, &ws, n, tol)?.lambda1;
        let d = (l1 - (l0 - 1.0)).abs();
        let bound = 2.0 * tol * l0.abs().max(1.0);
        out.check(d <= bound, format!("c = {c}: |lambda(c+1) - (lambda(c) - 1)| = {d:.2e} (<= {bound:.1e})"));
    }
    let c = "4 * x * (1 - x)";
    let lc = eigen_estimate(&pb, &Coefficient::parse(c)?, n, tol)?.lambda1;
    let ks = [1usize, 2, 4, 8, 16, 32, 64, 128];
    let weights = ks
        .iter()
        .map(|k| Coefficient::parse(&format!("{c} + 1 / {k}")))
        .collect::<Result<Vec<_>>>()?;
    let probe = lambda_continuity_probe(&pb, &weights, n, tol)?;
    let gaps: Vec<f64> = probe.iter().map(|l| (l - lc).abs()).collect();
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    let last = *gaps.last().unwrap();
    out.check(
        decreasing && last <= 1.0 / 128.0 + 1e-8,
        format!("continuity along c + 1/k, k = 1..128: |lambda - lambda(c)| = {}", sci(&gaps)),
    );
    Ok(out)
}

/// Criterion 8: monotone iteration statistics of every delta level.
fn c8_monotone_scheme() -> Result<Outcome> {
    let mut out = Outcome::new();
    let opts = SchemeOptions::default();
    let cases = [
        ("interval alpha=0 gamma=0.5", ProblemSpec::unit_interval(0.0, 0.5)),
        ("interval alpha=1 gamma=0.5", ProblemSpec::unit_interval(1.0, 0.5)),
        ("interval alpha=0 gamma=3", ProblemSpec::unit_interval(0.0, 3.0)),
        ("interval alpha=1 gamma=4", ProblemSpec::unit_interval(1.0, 4.0)),
        ("interval alpha=0.5 gamma=1", ProblemSpec::unit_interval(0.5, 1.0)),
        (
            "interval alpha=0 gamma=0.5 c=2 h=1 p=1+x",
            ProblemSpec::unit_interval(0.0, 0.5).with_c(2.0).with_h(1.0).with_p(Coefficient::parse("1 + x")?),
        ),
        (
            "interval M+(1/2,2) alpha=1 gamma=2",
            ProblemSpec::unit_interval(1.0, 2.0).with_operator(Operator::PucciPlus { a: 0.5, big_a: 2.0 }),
        ),
        ("ball N=3 alpha=0 gamma=0.5", ProblemSpec::unit_ball(0.0, 0.5, 3)),
        ("ball N=2 alpha=1 gamma=2", ProblemSpec::unit_ball(1.0, 2.0, 2)),
    ];
    for (tag, pb) in cases {
        let (barriers, trace) = solve_scheme(&pb, 2001, &opts)?;
        let margin = trace.min_margin();
        let viol = trace.barrier_violations();
        let inside = trace
            .z
            .values()
            .iter()
            .zip(barriers.sub.values().iter().zip(barriers.sup.values()))
            .all(|(z, (lo, hi))| *z >= lo - opts.tol && *z <= hi + opts.tol);
        out.check(
            margin >= -trace.tol_mono && viol == 0 && inside && trace.final_residual <= 1e-3,
            format!(
                "{tag}: {} levels, min margin {margin:.2e} (>= -{:.0e}), {viol} barrier violations, residual {:.2e} (<= 1e-3)",
                trace.levels.len(),
                trace.tol_mono,
                trace.final_residual
            ),
        );
    }
    Ok(out)
}

fn spectrum(s: &DMatrix<f64>) -> Vec<(f64, usize)> {
    SymmetricEigen::new(s.clone()).eigenvalues.iter().map(|&l| (l, 1)).collect()
}

/// Criterion 9: randomized Pucci algebra.
fn c9_pucci_properties() -> Result<Outcome> {
    let mut out = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(20_241_015);
    let trials = 10_000;
    let mut failures = [0usize; 4];
    let names = ["M-(S) = -M+(-S)", "positive homogeneity", "a tr N <= F(S+N) - F(S) <= A tr N", "M+ <= M-"];
    for _ in 0..trials {
        let dim = rng.random_range(1..=6);
        let a = rng.random_range(0.05..3.0);
        let big_a = a * rng.random_range(1.0..5.0);
        let s = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-10.0..10.0));
        let s = (&s + s.transpose()) * 0.5;
        let g = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-3.0..3.0));
        let psd = &g * g.transpose();
        let t = rng.random_range(0.01..100.0);
        let eig = spectrum(&s);
        let scale = 1.0 + eig.iter().map(|e| e.0.abs()).sum::<f64>() * big_a;

        // Reference values from the definition, separate from the library.
        let plus_def: f64 = eig.iter().map(|&(l, _)| if l > 0.0 { a * l } else { big_a * l }).sum();
        let minus_def: f64 = eig.iter().map(|&(l, _)| if l > 0.0 { big_a * l } else { a * l }).sum();
        let neg = spectrum(&(-&s));
        let plus = pucci_plus(&eig, a, big_a)?;
        let minus = pucci_minus(&eig, a, big_a)?;
        if (minus + pucci_plus(&neg, a, big_a)?).abs() > 1e-12 * scale
            || (plus - plus_def).abs() > 1e-12 * scale
            || (minus - minus_def).abs() > 1e-12 * scale
        {
            failures[0] += 1;
        }

        let scaled = spectrum(&(&s * t));
        let hom = (pucci_plus(&scaled, a, big_a)? - t * plus).abs() + (pucci_minus(&scaled, a, big_a)? - t * minus).abs();
        if hom > 1e-11 * t * scale {
            failures[1] += 1;
        }

        let shifted = spectrum(&(&s + &psd));
        let tr = psd.trace();
        let slack = 1e-11 * (scale + big_a * tr);
        for (f_s, f_sn) in [(plus, pucci_plus(&shifted, a, big_a)?), (minus, pucci_minus(&shifted, a, big_a)?)] {
            let d = f_sn - f_s;
            if d < a * tr - slack || d > big_a * tr + slack {
                failures[2] += 1;
            }
        }

        if plus > minus + 1e-12 * scale {
            failures[3] += 1;
        }
    }
    for (name, f) in names.iter().zip(failures) {
        out.check(f == 0, format!("{name}: {f} failures in {trials} random trials"));
    }
    Ok(out)
}

/// Criterion 10: cross-validation between independent routes.
fn c10_cross_validation() -> Result<Outcome> {
    let mut out = Outcome::new();
    let mut cases = vec![];
    for alpha in [0.0, 1.0] {
        cases.push(ProblemSpec::unit_interval(alpha, 0.5));
    }
    for dim in [2, 3] {
        for alpha in [0.0, 1.0] {
            cases.push(ProblemSpec::unit_ball(alpha, 0.5, dim));
        }
    }
    for pb in cases {
        let r = cross_validate(&pb, 2001, 1e-3)?;
        out.check(
            r.passed,
            format!("{} [{pb}]: sup differences {} (<= 1e-3)", r.check_name, sci(&r.measured)),
        );
    }
    Ok(out)
}

type Criterion = fn() -> Result<Outcome>;

fn main() {
    let criteria: [(usize, &str, Criterion); 10] = [
        (1, "1D closed-form agreement", c1_oned_agreement),
        (2, "first-integral conservation", c2_first_integral),
        (3, "boundary exponent and Hopf quotient", c3_boundary_exponent),
        (4, "radial pipeline", c4_radial_pipeline),
        (5, "first-iterate oracle", c5_first_iterate),
        (6, "Pucci sandwich", c6_pucci_sandwich),
        (7, "first eigenvalue", c7_eigenvalue),
        (8, "monotone scheme", c8_monotone_scheme),
        (9, "Pucci algebra properties", c9_pucci_properties),
        (10, "cross-validation", c10_cross_validation),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = vec![];
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (pass, lines) = match result {
            Ok(o) => (o.pass && elapsed <= TIME_LIMIT, o.lines),
            Err(e) => (false, vec![format!("FAIL error: {e}")]),
        };
        println!(
            "criterion {id:>2} ({name}): {} [{:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        for l in lines {
            println!("    {l}");
        }
        if elapsed > TIME_LIMIT {
            println!("    FAIL time limit of {} s exceeded", TIME_LIMIT.as_secs());
        }
        if !pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
