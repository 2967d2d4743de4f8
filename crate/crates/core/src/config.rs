//! JSON run configuration: a problem block, numerical settings, output
//! settings, and (for sweeps) the parameter grid. Unknown keys are errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Coefficient, Geometry, Operator, ProblemSpec};
use crate::radial::RadialOptions;
use crate::scheme::SchemeOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Oned,
    Radial,
    Scheme,
    Eigen,
    Verify,
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub alpha: f64,
    pub gamma: f64,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default = "default_operator")]
    pub operator: Operator,
    #[serde(default = "zero")]
    pub c: Coefficient,
    #[serde(default = "zero")]
    pub h: Coefficient,
    #[serde(default = "one")]
    pub p: Coefficient,
    #[serde(default = "default_geometry")]
    pub geometry: Geometry,
}

fn default_operator() -> Operator {
    Operator::Trace
}

fn zero() -> Coefficient {
    Coefficient::Constant(0.0)
}

fn one() -> Coefficient {
    Coefficient::Constant(1.0)
}

fn default_geometry() -> Geometry {
    Geometry::Interval { length: 1.0 }
}

impl ProblemConfig {
    /// Dimension defaults to 1 on intervals and 2 on balls.
    pub fn to_spec(&self) -> ProblemSpec {
        let dim = self.dim.unwrap_or(if self.geometry.is_ball() { 2 } else { 1 });
        ProblemSpec {
            alpha: self.alpha,
            gamma: self.gamma,
            dim,
            operator: self.operator,
            coeff_c: self.c.clone(),
            coeff_h: self.h.clone(),
            coeff_p: self.p.clone(),
            geometry: self.geometry,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NumericConfig {
    pub nodes: usize,
    /// Eigenvalue and barrier tolerance.
    pub tol: f64,
    pub scheme_tol: f64,
    pub inner_tol: f64,
    pub tol_mono: f64,
    pub residual_tol: f64,
    pub delta0: Option<f64>,
    pub ladder_factor: f64,
    pub max_iter: usize,
    pub max_levels: usize,
    pub fixed_point_tol: f64,
    pub handoff: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Floor for the Hopf quotient check.
    pub kappa_floor: f64,
    /// Tolerance of the cross-validation check.
    pub cross_tol: f64,
    /// Hölder exponent assumed for `p` in the Hölder check.
    pub tau_p: f64,
    /// Boundary-distance window for exponent fits; default `[1e-3, 1e-2]` times the domain size.
    pub window: Option<(f64, f64)>,
    /// Recorded in the run summary; the solvers are deterministic.
    pub seed: u64,
}

impl Default for NumericConfig {
    fn default() -> Self {
        let s = SchemeOptions::default();
        let r = RadialOptions::default();
        NumericConfig {
            nodes: 2001,
            tol: 1e-10,
            scheme_tol: s.tol,
            inner_tol: s.inner_tol,
            tol_mono: s.tol_mono,
            residual_tol: s.residual_tol,
            delta0: None,
            ladder_factor: s.ladder_factor,
            max_iter: s.max_iter,
            max_levels: s.max_levels,
            fixed_point_tol: r.fixed_point_tol,
            handoff: r.handoff,
            rtol: r.rtol,
            atol: r.atol,
            kappa_floor: 1e-3,
            cross_tol: 1e-3,
            tau_p: 1.0,
            window: None,
            seed: 0,
        }
    }
}

impl NumericConfig {
    pub fn scheme_options(&self) -> SchemeOptions {
        SchemeOptions {
            tol: self.scheme_tol,
            inner_tol: self.inner_tol,
            tol_mono: self.tol_mono,
            residual_tol: self.residual_tol,
            max_iter: self.max_iter,
            max_levels: self.max_levels,
            ladder_factor: self.ladder_factor,
        }
    }

    pub fn radial_options(&self) -> RadialOptions {
        RadialOptions {
            nodes: self.nodes,
            fixed_point_tol: self.fixed_point_tol,
            handoff: self.handoff,
            rtol: self.rtol,
            atol: self.atol,
            ..RadialOptions::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.nodes < 5 {
            return Err(Error::Config(format!("numeric.nodes must be >= 5 (got {})", self.nodes)));
        }
        let positive = [
            ("tol", self.tol),
            ("scheme_tol", self.scheme_tol),
            ("inner_tol", self.inner_tol),
            ("tol_mono", self.tol_mono),
            ("residual_tol", self.residual_tol),
            ("fixed_point_tol", self.fixed_point_tol),
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("kappa_floor", self.kappa_floor),
            ("cross_tol", self.cross_tol),
            ("tau_p", self.tau_p),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("numeric.{name} must be positive (got {v})")));
            }
        }
        if !(self.ladder_factor > 0.0 && self.ladder_factor < 1.0) {
            return Err(Error::Config(format!(
                "numeric.ladder_factor must lie in (0, 1) (got {})",
                self.ladder_factor
            )));
        }
        if !(self.handoff > 0.0 && self.handoff < 1.0) {
            return Err(Error::Config(format!(
                "numeric.handoff must lie in (0, 1) (got {})",
                self.handoff
            )));
        }
        if let Some(d) = self.delta0 {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Config(format!("numeric.delta0 must be positive (got {d})")));
            }
        }
        if let Some((lo, hi)) = self.window {
            if !(lo > 0.0 && lo < hi) {
                return Err(Error::Config(format!("numeric.window must satisfy 0 < lo < hi (got [{lo}, {hi}])")));
            }
        }
        if self.max_iter == 0 || self.max_levels == 0 {
            return Err(Error::Config("numeric.max_iter and numeric.max_levels must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Output directory; falls back to the environment default, then `.`.
    pub dir: Option<String>,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

/// Problem parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Alpha,
    Gamma,
    /// Constant zero-order coefficient `c`.
    C,
}

/// Scalar quantities a sweep can report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOutput {
    /// `max u` of the solution.
    MaxU,
    /// Max-norm residual of the solution.
    Residual,
    /// First eigenvalue with weight `c`.
    Lambda1,
    /// Fitted boundary exponent.
    BoundaryExponent,
    /// First zero of the normalized radial profile.
    RBar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    /// Solver producing the profile at each point.
    pub solver: Command,
    pub outputs: Vec<SweepOutput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub numeric: NumericConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

impl RunConfig {
    /// Parses and validates a JSON configuration.
    pub fn from_json(src: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(src).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn new(command: Command, problem: ProblemConfig) -> Self {
        RunConfig {
            command,
            problem,
            numeric: NumericConfig::default(),
            output: OutputConfig::default(),
            sweep: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.problem.to_spec();
        spec.validate().map_err(as_config)?;
        spec.validate_on(&spec.grid(self.numeric.nodes)).map_err(as_config)?;
        self.numeric.validate()?;
        match (&self.command, &self.sweep) {
            (Command::Sweep, None) => return Err(Error::Config("command \"sweep\" needs a sweep block".into())),
            (Command::Sweep, Some(sw)) => {
                if sw.values.is_empty() || sw.values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Config("sweep.values must be a nonempty list of finite numbers".into()));
                }
                if sw.outputs.is_empty() {
                    return Err(Error::Config("sweep.outputs must not be empty".into()));
                }
                if matches!(sw.solver, Command::Sweep | Command::Verify) {
                    return Err(Error::Config("sweep.solver must be oned, radial, scheme or eigen".into()));
                }
                if sw.outputs.contains(&SweepOutput::RBar) && sw.solver != Command::Radial {
                    return Err(Error::Config("sweep output r_bar needs solver \"radial\"".into()));
                }
            }
            (_, Some(_)) => return Err(Error::Config("a sweep block is only allowed with command \"sweep\"".into())),
            _ => {}
        }
        Ok(())
    }

    pub fn spec(&self) -> ProblemSpec {
        self.problem.to_spec()
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Parameter(m) => Error::Config(m),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let cfg = RunConfig::from_json(r#"{"command": "oned", "problem": {"alpha": 0, "gamma": 0.5}}"#).unwrap();
        assert_eq!(cfg.command, Command::Oned);
        let spec = cfg.spec();
        assert_eq!(spec, ProblemSpec::unit_interval(0.0, 0.5));
        assert_eq!(cfg.numeric.nodes, 2001);
    }

    #[test]
    fn full_config() {
        let src = r#"{
            "command": "scheme",
            "problem": {
                "alpha": 1, "gamma": 4, "dim": 3,
                "operator": {"kind": "pucci_plus", "a": 0.5, "big_a": 2},
                "c": 0.5, "p": "1 + r^2",
                "geometry": {"kind": "ball", "radius": 2}
            },
            "numeric": {"nodes": 401, "window": [0.001, 0.01], "seed": 7},
            "output": {"dir": "out", "formats": ["csv"]}
        }"#;
        let cfg = RunConfig::from_json(src).unwrap();
        let spec = cfg.spec();
        assert_eq!(spec.dim, 3);
        assert_eq!(spec.geometry, Geometry::Ball { radius: 2.0 });
        assert!((spec.coeff_p.eval(1.0) - 2.0).abs() < 1e-15);
        assert_eq!(cfg.output.formats, vec![Format::Csv]);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            r#"{"command": "oned", "problem": {"alpha": 0, "gamma": -1}}"#,
            r#"{"command": "oned", "problem": {"alpha": 0, "gamma": 0.5, "extra": 1}}"#,
            r#"{"command": "oned", "problem": {"alpha": 0, "gamma": 0.5}, "numeric": {"nodes": 3}}"#,
            r#"{"command": "oned", "problem": {"alpha": 0, "gamma": 0.5, "p": "0"}}"#,
            r#"{"command": "oned", "problem": {"alpha": 0, "gamma": 0.5, "p": "x +"}}"#,
            r#"{"command": "sweep", "problem": {"alpha": 0, "gamma": 0.5}}"#,
            r#"{"command": "fly", "problem": {"alpha": 0, "gamma": 0.5}}"#,
            r#"not json"#,
        ];
        for src in bad {
            let err = RunConfig::from_json(src).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{src}: {err:?}");
        }
        let msg = RunConfig::from_json(bad[0]).unwrap_err().to_string();
        assert!(msg.contains("gamma"), "{msg}");
    }

    #[test]
    fn round_trip() {
        let mut cfg = RunConfig::new(
            Command::Sweep,
            ProblemConfig {
                alpha: 0.0,
                gamma: 0.5,
                dim: None,
                operator: Operator::Trace,
                c: 0.0.into(),
                h: 0.0.into(),
                p: Coefficient::parse("1 + x").unwrap(),
                geometry: Geometry::Interval { length: 1.0 },
            },
        );
        cfg.sweep = Some(SweepConfig {
            parameter: SweepParameter::Gamma,
            values: vec![0.25, 0.5],
            solver: Command::Scheme,
            outputs: vec![SweepOutput::MaxU],
        });
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn floats_round_trip_exactly() {
        let cfg = RunConfig::from_json(
            r#"{"command": "oned", "problem": {"alpha": 0, "gamma": 0.5}, "numeric": {"tol": 1e-110}}"#,
        )
        .unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap().numeric.tol, cfg.numeric.tol);
    }
}
