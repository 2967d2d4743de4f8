//! Pucci extremal operators on spectra with multiplicities.
//!
//! Convention: `M+(S) = a * (sum of positive eigenvalues) + A * (sum of
//! negative eigenvalues)` and `M-(S) = -M+(-S)`. With `0 < a <= A` this makes
//! `M+` the *smaller* of the two operators, which is the reverse of the
//! usual literature convention.

use crate::error::{Error, Result};

fn check_constants(a: f64, big_a: f64) -> Result<()> {
    if !(a > 0.0 && a <= big_a && big_a.is_finite()) {
        return Err(Error::Parameter(format!(
            "Pucci constants must satisfy 0 < a <= A (got a = {a}, A = {big_a})"
        )));
    }
    Ok(())
}

fn check_mults(eigs: &[(f64, usize)]) -> Result<()> {
    if eigs.iter().any(|&(_, m)| m == 0) {
        return Err(Error::Parameter("eigenvalue multiplicities must be >= 1".into()));
    }
    Ok(())
}

pub fn pucci_plus(eigs: &[(f64, usize)], a: f64, big_a: f64) -> Result<f64> {
    check_constants(a, big_a)?;
    check_mults(eigs)?;
    Ok(eigs
        .iter()
        .map(|&(l, m)| if l > 0.0 { a * l } else { big_a * l } * m as f64)
        .sum())
}

pub fn pucci_minus(eigs: &[(f64, usize)], a: f64, big_a: f64) -> Result<f64> {
    let neg: Vec<(f64, usize)> = eigs.iter().map(|&(l, m)| (-l, m)).collect();
    Ok(-pucci_plus(&neg, a, big_a)?)
}

/// Eigenvalues of the Hessian of a radial function: `u''` once and `u'/r`
/// with multiplicity `N - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialHessianEigs {
    pub radial_curvature: f64,
    pub tangential_curvature: f64,
}

impl RadialHessianEigs {
    pub fn new(u2: f64, u1: f64, r: f64) -> Self {
        RadialHessianEigs {
            radial_curvature: u2,
            tangential_curvature: u1 / r,
        }
    }

    pub fn spectrum(&self, dim: usize) -> Vec<(f64, usize)> {
        let mut s = vec![(self.radial_curvature, 1)];
        if dim > 1 {
            s.push((self.tangential_curvature, dim - 1));
        }
        s
    }

    pub fn trace(&self, dim: usize) -> f64 {
        self.radial_curvature + (dim as f64 - 1.0) * self.tangential_curvature
    }
}

/// `x+/A - x-/a`: inverts the one-dimensional map `y -> A y+ - a y-`, which is
/// `M-` in the convention above.
pub fn f_split(x: f64, a: f64, big_a: f64) -> f64 {
    x.max(0.0) / big_a - (-x).max(0.0) / a
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(pucci_plus(&[(1.0, 3)], 1.0, 2.0).unwrap(), 3.0);
        assert_eq!(pucci_plus(&[(1.0, 1), (-1.0, 1)], 1.0, 2.0).unwrap(), -1.0);
        assert_eq!(pucci_plus(&[(0.0, 5)], 0.3, 7.0).unwrap(), 0.0);
        assert!(pucci_plus(&[(1.0, 1)], 2.0, 1.0).is_err());
        assert!(pucci_plus(&[(1.0, 0)], 1.0, 1.0).is_err());
    }

    #[test]
    fn f_split_values() {
        assert_eq!(f_split(3.0, 1.0, 2.0), 1.5);
        assert_eq!(f_split(-3.0, 1.0, 2.0), -3.0);
    }

    fn spectrum() -> impl Strategy<Value = Vec<(f64, usize)>> {
        prop::collection::vec((-50.0..50.0f64, 1usize..4), 1..6)
    }

    fn constants() -> impl Strategy<Value = (f64, f64)> {
        (0.05..5.0f64, 1.0..4.0f64).prop_map(|(a, r)| (a, a * r))
    }

    proptest! {
        #[test]
        fn minus_is_reflected_plus(s in spectrum(), (a, big_a) in constants()) {
            let neg: Vec<_> = s.iter().map(|&(l, m)| (-l, m)).collect();
            let lhs = pucci_minus(&s, a, big_a).unwrap();
            let rhs = -pucci_plus(&neg, a, big_a).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn homogeneous(s in spectrum(), (a, big_a) in constants(), t in 0.01..100.0f64) {
            let scaled: Vec<_> = s.iter().map(|&(l, m)| (t * l, m)).collect();
            let lhs = pucci_plus(&scaled, a, big_a).unwrap();
            let rhs = t * pucci_plus(&s, a, big_a).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }

        #[test]
        fn split_inverts_one_dimensional_minus(y in -50.0..50.0f64, (a, big_a) in constants()) {
            let x = pucci_minus(&[(y, 1)], a, big_a).unwrap();
            prop_assert!((f_split(x, a, big_a) - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }
}
