//! Problem description and the nodal function type shared by every solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;

/// Second-order operator acting on the Hessian.
///
/// Pucci operators use the convention where `a` multiplies the positive
/// eigenvalues and `A` the negative ones (see [`crate::pucci`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Operator {
    Trace,
    PucciPlus { a: f64, big_a: f64 },
    PucciMinus { a: f64, big_a: f64 },
}

impl Operator {
    /// Weights `(positive, negative)` applied to eigenvalues of each sign.
    pub fn eigen_weights(&self) -> (f64, f64) {
        match *self {
            Operator::Trace => (1.0, 1.0),
            Operator::PucciPlus { a, big_a } => (a, big_a),
            Operator::PucciMinus { a, big_a } => (big_a, a),
        }
    }

    /// Lower and upper ellipticity constants.
    pub fn ellipticity(&self) -> (f64, f64) {
        match *self {
            Operator::Trace => (1.0, 1.0),
            Operator::PucciPlus { a, big_a } | Operator::PucciMinus { a, big_a } => (a, big_a),
        }
    }

    /// Applies the operator to a spectrum given as `(eigenvalue, multiplicity)` pairs.
    pub fn apply(&self, eigs: &[(f64, usize)]) -> f64 {
        let (wp, wn) = self.eigen_weights();
        eigs.iter()
            .map(|&(l, m)| {
                let w = if l > 0.0 { wp } else { wn };
                w * l * m as f64
            })
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        let (a, big_a) = self.ellipticity();
        if !(a > 0.0 && a <= big_a && big_a.is_finite()) {
            return Err(Error::Parameter(format!(
                "ellipticity constants must satisfy 0 < a <= A (got a = {a}, A = {big_a})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    /// The interval `(0, length)`; both ends carry the Dirichlet condition.
    Interval { length: f64 },
    /// The ball of the given radius, radially symmetric functions only.
    /// Node 0 is the centre and the last node is the boundary sphere.
    Ball { radius: f64 },
}

impl Geometry {
    pub fn extent(&self) -> f64 {
        match *self {
            Geometry::Interval { length } => length,
            Geometry::Ball { radius } => radius,
        }
    }

    pub fn is_ball(&self) -> bool {
        matches!(self, Geometry::Ball { .. })
    }

    /// Uniform mesh with `n` nodes covering the closed domain.
    pub fn uniform_nodes(&self, n: usize) -> Vec<f64> {
        uniform_nodes(self.extent(), n)
    }

    /// Distance from a node position to the boundary.
    pub fn boundary_distance(&self, x: f64) -> f64 {
        match *self {
            Geometry::Interval { length } => x.min(length - x),
            Geometry::Ball { radius } => radius - x,
        }
    }
}

pub fn uniform_nodes(length: f64, n: usize) -> Vec<f64> {
    let h = length / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { length } else { i as f64 * h })
        .collect()
}

/// A coefficient that is either constant or a formula in the position.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    Constant(f64),
    Formula(Expr),
}

impl Coefficient {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Coefficient::Constant(v) => *v,
            Coefficient::Formula(e) => e.eval(x),
        }
    }

    pub fn sample(&self, nodes: &[f64]) -> Vec<f64> {
        nodes.iter().map(|&x| self.eval(x)).collect()
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self {
            Coefficient::Constant(v) => Some(*v),
            Coefficient::Formula(e) => e.as_constant(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.constant_value() == Some(0.0)
    }

    pub fn parse(src: &str) -> Result<Self> {
        let e = Expr::parse(src)?;
        Ok(match e.as_constant() {
            Some(v) if !v.is_finite() => {
                return Err(Error::Config(format!("coefficient '{src}' is not finite")))
            }
            Some(v) => Coefficient::Constant(v),
            None => Coefficient::Formula(e),
        })
    }
}

impl From<f64> for Coefficient {
    fn from(v: f64) -> Self {
        Coefficient::Constant(v)
    }
}

impl std::fmt::Display for Coefficient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Coefficient::Constant(v) => write!(f, "{v}"),
            Coefficient::Formula(e) => write!(f, "{e}"),
        }
    }
}

impl Serialize for Coefficient {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Coefficient::Constant(v) => s.serialize_f64(*v),
            Coefficient::Formula(e) => s.serialize_str(&e.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Coefficient {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Coefficient::Constant(v)),
            Raw::Text(s) => Coefficient::parse(&s).map_err(serde::de::Error::custom),
        }
    }
}

/// Full problem instance
/// `|u'|^alpha (F(D^2 u) + h u') + c |u|^alpha u + p u^-gamma = 0`, `u = 0` on the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub alpha: f64,
    pub gamma: f64,
    pub dim: usize,
    pub operator: Operator,
    pub coeff_c: Coefficient,
    pub coeff_h: Coefficient,
    pub coeff_p: Coefficient,
    pub geometry: Geometry,
}

impl ProblemSpec {
    /// One-dimensional problem on `(0, 1)` with `F = trace`, `c = h = 0`, `p = 1`.
    pub fn unit_interval(alpha: f64, gamma: f64) -> Self {
        ProblemSpec {
            alpha,
            gamma,
            dim: 1,
            operator: Operator::Trace,
            coeff_c: 0.0.into(),
            coeff_h: 0.0.into(),
            coeff_p: 1.0.into(),
            geometry: Geometry::Interval { length: 1.0 },
        }
    }

    /// Radial problem on the unit ball of `R^dim` with `F = trace`, `c = h = 0`, `p = 1`.
    pub fn unit_ball(alpha: f64, gamma: f64, dim: usize) -> Self {
        ProblemSpec {
            dim,
            geometry: Geometry::Ball { radius: 1.0 },
            ..Self::unit_interval(alpha, gamma)
        }
    }

    pub fn with_operator(mut self, op: Operator) -> Self {
        self.operator = op;
        self
    }

    pub fn with_c(mut self, c: impl Into<Coefficient>) -> Self {
        self.coeff_c = c.into();
        self
    }

    pub fn with_h(mut self, h: impl Into<Coefficient>) -> Self {
        self.coeff_h = h.into();
        self
    }

    pub fn with_p(mut self, p: impl Into<Coefficient>) -> Self {
        self.coeff_p = p.into();
        self
    }

    /// Checks the structural invariants (exponents, ellipticity, geometry).
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > -1.0) || !self.alpha.is_finite() {
            return Err(Error::Parameter(format!(
                "alpha must be > -1 (got {})",
                self.alpha
            )));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::Parameter(format!(
                "gamma must be > 0 (got {})",
                self.gamma
            )));
        }
        if self.dim < 1 {
            return Err(Error::Parameter("dim must be >= 1".into()));
        }
        self.operator.validate()?;
        let ext = self.geometry.extent();
        if !(ext > 0.0 && ext.is_finite()) {
            return Err(Error::Parameter(format!(
                "domain size must be positive (got {ext})"
            )));
        }
        match self.geometry {
            Geometry::Interval { .. } if self.dim != 1 => Err(Error::Parameter(format!(
                "interval geometry requires dim = 1 (got {})",
                self.dim
            ))),
            Geometry::Ball { .. } if self.dim < 2 => Err(Error::Parameter(
                "ball geometry requires dim >= 2".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Validates and additionally checks `min p > 0` on the given nodes.
    pub fn validate_on(&self, nodes: &[f64]) -> Result<()> {
        self.validate()?;
        let p = self.coeff_p.sample(nodes);
        let pmin = p.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(pmin > 0.0) || p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!(
                "p must be bounded below by a positive constant (min over grid = {pmin})"
            )));
        }
        for (name, c) in [("c", &self.coeff_c), ("h", &self.coeff_h)] {
            if c.sample(nodes).iter().any(|v| !v.is_finite()) {
                return Err(Error::Parameter(format!(
                    "coefficient {name} is not finite on the grid"
                )));
            }
        }
        Ok(())
    }

    /// Boundary exponent `(2 + alpha) / (1 + alpha + gamma)`.
    pub fn boundary_exponent(&self) -> f64 {
        (2.0 + self.alpha) / (1.0 + self.alpha + self.gamma)
    }

    pub fn grid(&self, n: usize) -> Vec<f64> {
        self.geometry.uniform_nodes(n)
    }

    /// Indices of nodes carrying the Dirichlet condition.
    pub fn boundary_nodes(&self, n: usize) -> Vec<usize> {
        match self.geometry {
            Geometry::Interval { .. } => vec![0, n - 1],
            Geometry::Ball { .. } => vec![n - 1],
        }
    }

    /// Range of unknown (non-Dirichlet) node indices.
    pub fn interior_range(&self, n: usize) -> std::ops::Range<usize> {
        match self.geometry {
            Geometry::Interval { .. } => 1..n - 1,
            Geometry::Ball { .. } => 0..n - 1,
        }
    }
}

impl std::fmt::Display for ProblemSpec {
    /// Compact fingerprint used in reports.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let op = match self.operator {
            Operator::Trace => "trace".to_string(),
            Operator::PucciPlus { a, big_a } => format!("M+({a},{big_a})"),
            Operator::PucciMinus { a, big_a } => format!("M-({a},{big_a})"),
        };
        let geo = match self.geometry {
            Geometry::Interval { length } => format!("interval(0,{length})"),
            Geometry::Ball { radius } => format!("ball(R={radius})"),
        };
        write!(
            f,
            "alpha={} gamma={} N={} F={op} c={} h={} p={} {geo}",
            self.alpha, self.gamma, self.dim, self.coeff_c, self.coeff_h, self.coeff_p
        )
    }
}

/// Nodal values of a scalar function on a strictly increasing mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() != values.len() {
            return Err(Error::Parameter(format!(
                "node/value length mismatch ({} vs {})",
                nodes.len(),
                values.len()
            )));
        }
        if nodes.len() < 2 {
            return Err(Error::Parameter("a grid function needs at least 2 nodes".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parameter("nodes must be strictly increasing".into()));
        }
        Ok(GridFunction { nodes, values })
    }

    pub fn from_fn(nodes: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = nodes.iter().map(|&x| f(x)).collect();
        Self::new(nodes, values)
    }

    pub fn zeros(nodes: Vec<f64>) -> Result<Self> {
        let n = nodes.len();
        Self::new(nodes, vec![0.0; n])
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Mesh width, checked to be uniform.
    pub fn spacing(&self) -> Result<f64> {
        let n = self.nodes.len();
        let h = (self.nodes[n - 1] - self.nodes[0]) / (n - 1) as f64;
        let uniform = self
            .nodes
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.max(1.0));
        if !uniform {
            return Err(Error::Parameter("mesh is not uniform".into()));
        }
        Ok(h)
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.nodes.clone(), values)
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        GridFunction {
            nodes: self.nodes.clone(),
            values: self
                .nodes
                .iter()
                .zip(&self.values)
                .map(|(&x, &v)| f(x, v))
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max |self - other|` over shared nodes; the meshes must coincide.
    pub fn sup_distance(&self, other: &GridFunction) -> Result<f64> {
        if self.nodes.len() != other.nodes.len()
            || self
                .nodes
                .iter()
                .zip(&other.nodes)
                .any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0))
        {
            return Err(Error::Parameter("grid functions live on different meshes".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Piecewise-linear interpolation; constant extrapolation outside the mesh.
    pub fn interpolate(&self, x: f64) -> f64 {
        let n = self.nodes.len();
        if x <= self.nodes[0] {
            return self.values[0];
        }
        if x >= self.nodes[n - 1] {
            return self.values[n - 1];
        }
        let k = self.nodes.partition_point(|&t| t <= x) - 1;
        let (x0, x1) = (self.nodes[k], self.nodes[k + 1]);
        let s = (x - x0) / (x1 - x0);
        self.values[k] * (1.0 - s) + self.values[k + 1] * s
    }

    /// Resamples onto another mesh by linear interpolation.
    pub fn resample(&self, nodes: Vec<f64>) -> Result<Self> {
        let values = nodes.iter().map(|&x| self.interpolate(x)).collect();
        Self::new(nodes, values)
    }

    /// Centered differences inside, one-sided second-order at the ends.
    pub fn derivative(&self) -> Vec<f64> {
        let n = self.nodes.len();
        let x = &self.nodes;
        let u = &self.values;
        let mut d = vec![0.0; n];
        if n == 2 {
            let s = (u[1] - u[0]) / (x[1] - x[0]);
            return vec![s, s];
        }
        for i in 1..n - 1 {
            d[i] = (u[i + 1] - u[i - 1]) / (x[i + 1] - x[i - 1]);
        }
        let h0 = x[1] - x[0];
        d[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h0);
        let hn = x[n - 1] - x[n - 2];
        d[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * hn);
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_constants_rejected() {
        for src in ["1e308 * 10", "1 / 0", "0 / 0", "1e999"] {
            assert!(Coefficient::parse(src).is_err(), "{src}");
        }
        assert!(Coefficient::parse("1 / x").is_ok());
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridFunction::new(vec![0.0, 1.0], vec![0.0]).is_err());
        assert!(GridFunction::new(vec![0.0, 0.0], vec![0.0, 1.0]).is_err());
        assert!(GridFunction::new(vec![0.0], vec![0.0]).is_err());
    }

    #[test]
    fn invariants_rejected() {
        assert!(ProblemSpec::unit_interval(-1.0, 0.5).validate().is_err());
        assert!(ProblemSpec::unit_interval(0.0, 0.0).validate().is_err());
        assert!(ProblemSpec::unit_interval(0.0, -1.0).validate().is_err());
        assert!(ProblemSpec::unit_ball(0.0, 0.5, 1).validate().is_err());
        let bad_pucci = ProblemSpec::unit_interval(0.0, 0.5).with_operator(Operator::PucciPlus {
            a: 2.0,
            big_a: 1.0,
        });
        assert!(bad_pucci.validate().is_err());
        let p = ProblemSpec::unit_interval(0.0, 0.5).with_p(Coefficient::parse("x - 0.5").unwrap());
        assert!(p.validate_on(&p.grid(11)).is_err());
        assert!(ProblemSpec::unit_interval(0.5, 2.0).validate_on(&uniform_nodes(1.0, 5)).is_ok());
    }

    #[test]
    fn coefficient_json_forms() {
        let c: Coefficient = serde_json::from_str("2.5").unwrap();
        assert_eq!(c, Coefficient::Constant(2.5));
        let c: Coefficient = serde_json::from_str("\"1/4\"").unwrap();
        assert_eq!(c, Coefficient::Constant(0.25));
        let c: Coefficient = serde_json::from_str("\"1 + x\"").unwrap();
        assert_eq!(c.eval(2.0), 3.0);
        assert!(serde_json::from_str::<Coefficient>("\"1 + y\"").is_err());
    }

    #[test]
    fn interpolation_and_derivative() {
        let g = GridFunction::from_fn(uniform_nodes(1.0, 11), |x| x * x).unwrap();
        assert!((g.interpolate(0.25) - 0.065).abs() < 1e-12);
        let d = g.derivative();
        for (x, dx) in g.nodes().iter().zip(&d) {
            assert!((dx - 2.0 * x).abs() < 1e-12);
        }
    }
}
